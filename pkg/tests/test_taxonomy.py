"""Category-table, index-parsing, and prefix-matching tests."""
from __future__ import annotations

import itertools

import pytest

from ccmkit.taxonomy import (
    IndexParseError,
    TaxonomyLoadError,
    UnknownIndexError,
    direction_of,
    is_capital_control,
    load_taxonomy,
    match_depth,
    normalize_index,
    parse_index,
    split_short_code,
)


@pytest.fixture(scope="module")
def taxonomy():
    return load_taxonomy()


def test_load_yields_45_nodes(taxonomy):
    assert len(taxonomy) == 45
    assert len({node.index for node in taxonomy}) == 45


def test_inward_direct_investment_node(taxonomy):
    node = taxonomy.get("XI.A.5.b")
    assert node.name == "Inward direct investment"
    assert node.short_code == "dii"
    assert node.depth == 4
    assert node.parent_index == "XI.A.5"


def test_root_decomposition(taxonomy):
    node = taxonomy.get("XI.A")
    assert node.depth == 2
    assert node.parent_index == "XI"
    root = taxonomy.get("XI")
    assert root.depth == 1
    assert root.parent_index is None


def test_every_node_reaches_root_via_parent_chain(taxonomy):
    for node in taxonomy:
        seen = 0
        while node.parent_index is not None:
            node = taxonomy.get(node.parent_index)
            seen += 1
            assert seen <= 6
        assert node.index == "XI"


def test_every_node_has_description(taxonomy):
    for node in taxonomy:
        assert node.description.strip()


def test_parse_index_deep_example():
    assert parse_index("XI.A.2.a.1.ii").components == ("XI", "A", "2", "a", "1", "ii")


def test_parse_index_strips_trailing_dot():
    assert parse_index("XI.A.5.b.").components == ("XI", "A", "5", "b")


def test_parse_index_single_level():
    assert parse_index("XI").components == ("XI",)


@pytest.mark.parametrize("bad", ["", "   ", "XI..A", ".A", "a.b.c.d.e.f.g"])
def test_parse_index_rejects_malformed(bad):
    with pytest.raises(IndexParseError):
        parse_index(bad)


def test_parse_round_trips_all_nodes(taxonomy):
    for node in taxonomy:
        path = parse_index(node.index)
        assert path.joined() == node.index
        assert path.depth == node.depth
        assert parse_index(path.joined()).components == path.components


def test_depth_census_matches_string_split_oracle(taxonomy):
    # independent census: plain string splitting of each stored index
    oracle = {}
    for node in taxonomy:
        oracle_depth = len(node.index.rstrip(".").split("."))
        oracle[oracle_depth] = oracle.get(oracle_depth, 0) + 1
    census = {}
    for node in taxonomy:
        census[node.depth] = census.get(node.depth, 0) + 1
    assert census == oracle
    assert census == {1: 1, 2: 1, 3: 5, 4: 16, 5: 14, 6: 8}


def test_match_depth_examples():
    assert match_depth(parse_index("XI.A.2.b.1"), parse_index("XI.A.2.a.1")) == 3
    p = parse_index("XI.A.2.a.1.ii")
    assert match_depth(p, p) == 6
    assert match_depth(parse_index("X.D.2"), parse_index("XI.A.5.b")) == 0


def test_match_depth_symmetric_and_prefix_consistent(taxonomy):
    paths = [node.path() for node in taxonomy]
    for p, q in itertools.product(paths, paths):
        k = match_depth(p, q)
        assert k == match_depth(q, p)
        assert p.components[:k] == q.components[:k]
        if k < min(p.depth, q.depth):
            assert p.components[k] != q.components[k]
    for p in paths:
        assert match_depth(p, p) == p.depth


def test_direction_examples():
    assert direction_of("XI.A.2.a.1.i") == "inward"
    assert direction_of("XI.A.5.a") == "outward"
    assert direction_of("XI.A.2") == "undefined"


def test_direction_defined_for_all_nodes(taxonomy):
    for node in taxonomy:
        assert direction_of(node.index) in {"inward", "outward", "both", "undefined"}


def test_direction_unknown_index_raises():
    with pytest.raises(UnknownIndexError):
        direction_of("XI.A.9")


def test_direction_accepts_trailing_dot():
    assert direction_of("XI.A.5.b.") == "inward"


def test_is_capital_control():
    assert is_capital_control("XI.A")
    assert is_capital_control("XI.A.5.b.")
    assert not is_capital_control("XI")
    assert not is_capital_control("X.D.2")
    assert not is_capital_control("NON-CAPITAL-CONTROL")


def test_case_sensitive_comparison():
    assert match_depth(parse_index("XI.A.2.a"), parse_index("XI.A.2.A")) == 3


def test_split_short_code():
    assert split_short_code("Financial credits [fc]") == ("Financial credits", "fc")
    assert split_short_code("Commercial credits") == ("Commercial credits", None)


def test_ancestors_chain(taxonomy):
    chain = taxonomy.ancestors("XI.A.2.a.1.ii")
    assert [node.index for node in chain] == [
        "XI", "XI.A", "XI.A.2", "XI.A.2.a", "XI.A.2.a.1", "XI.A.2.a.1.ii",
    ]


def test_normalize_index():
    assert normalize_index(" XI.A.5.b. ") == "XI.A.5.b"


def test_csv_override_roundtrip(tmp_path):
    path = tmp_path / "override.csv"
    path.write_text(
        "index,name,short_code,description\n"
        "XI,Capital Transactions,,Top-level section.\n"
        "XI.A,Controls on capital transactions,ka,Restrictions on capital flows.\n",
        encoding="utf-8",
    )
    taxonomy = load_taxonomy(path)
    assert len(taxonomy) == 2
    assert taxonomy.get("XI.A").short_code == "ka"


def test_csv_override_duplicate_index_rejected(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(
        "index,name,short_code,description\n"
        "XI,Capital Transactions,,x\n"
        "XI,Capital Transactions,,y\n",
        encoding="utf-8",
    )
    with pytest.raises(TaxonomyLoadError):
        load_taxonomy(path)


def test_csv_override_unparseable_index_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("index,name,short_code,description\nXI..A,Broken,,x\n", encoding="utf-8")
    with pytest.raises(TaxonomyLoadError):
        load_taxonomy(path)


def test_csv_override_missing_parent_rejected(tmp_path):
    path = tmp_path / "orphan.csv"
    path.write_text("index,name,short_code,description\nXI.A.2,Orphan,,x\n", encoding="utf-8")
    with pytest.raises(TaxonomyLoadError):
        load_taxonomy(path)
