"""Tour of the capital-control category hierarchy.

Walks the built-in 45-entry table, parses dotted indexes, compares paths
level by level, and shows the per-category flow direction used by the
event study.
"""
from ccmkit.taxonomy import direction_of, load_taxonomy, match_depth, parse_index

taxonomy = load_taxonomy()
print(f"{len(taxonomy)} categories\n")

print("The hierarchy, indented by depth:")
for node in taxonomy:
    code = f" [{node.short_code}]" if node.short_code else ""
    print(f"{'  ' * (node.depth - 1)}{node.index}  {node.name}{code}")

print("\nParsing is trailing-dot tolerant and case-preserving:")
for raw in ("XI.A.2.a.1.ii", "XI.A.5.b.", "XI"):
    path = parse_index(raw)
    print(f"  {raw!r:18} -> {list(path.components)} (depth {path.depth})")

print("\nStrict top-down matching counts shared leading levels:")
pairs = [("XI.A.2.b.1", "XI.A.2.a.1"), ("XI.A.5.b", "XI.A.5.b"), ("X.D.2", "XI.A.5.b")]
for a, b in pairs:
    print(f"  {a} vs {b}: match depth {match_depth(parse_index(a), parse_index(b))}")

print("\nFlow direction regulated by each direct-investment category:")
for index in ("XI.A.5", "XI.A.5.a", "XI.A.5.b", "XI.A.5.c"):
    print(f"  {index:12} -> {direction_of(index)}")
