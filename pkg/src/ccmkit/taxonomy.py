"""IMF AREAER capital-control category hierarchy.

Holds the 45-entry category table (dotted indexes, names, bracket short
codes, one-sentence descriptions), dotted-index parsing with trailing-dot
normalization, level-by-level prefix matching, and the per-category flow
direction table.

The table is immutable after load and safe to share across threads.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

MAX_DEPTH = 6

FLOW_DIRECTIONS = frozenset({"inward", "outward", "both", "undefined"})

#: Catch-all label for AREAER sections outside the capital-control hierarchy.
OUT_OF_TAXONOMY = "NON-CAPITAL-CONTROL"

_CAPITAL_CONTROL_PREFIX = ("XI", "A")


class TaxonomyError(Exception):
    """Base class for taxonomy failures."""


class IndexParseError(TaxonomyError):
    """Raised when a dotted index string cannot be decomposed."""


class UnknownIndexError(TaxonomyError):
    """Raised when an index is not present in the category table."""


class TaxonomyLoadError(TaxonomyError):
    """Raised when a category table fails structural validation."""


@dataclass(frozen=True)
class IndexPath:
    """A dotted index decomposed into ordered level components."""

    components: tuple[str, ...]

    @property
    def depth(self) -> int:
        return len(self.components)

    def joined(self) -> str:
        return ".".join(self.components)

    def prefix(self, k: int) -> "IndexPath":
        return IndexPath(self.components[:k])

    def parent(self) -> "IndexPath | None":
        if len(self.components) <= 1:
            return None
        return IndexPath(self.components[:-1])

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.joined()


def parse_index(raw: str) -> IndexPath:
    """Decompose a dotted index ("XI.A.2.a.1.ii") into level components.

    Trailing dots are stripped (source data mixes "XI.A.5.b" and
    "XI.A.5.b."); case is preserved because AREAER uses it to distinguish
    levels ("A" vs "a").

    Raises IndexParseError for empty input, empty components ("XI..A"),
    or more than six levels.
    """
    if not isinstance(raw, str):
        raise IndexParseError(f"index must be a string, got {type(raw).__name__}")
    stripped = raw.strip().rstrip(".")
    if not stripped:
        raise IndexParseError(f"empty index: {raw!r}")
    components = tuple(stripped.split("."))
    if any(not token for token in components):
        raise IndexParseError(f"empty component in index: {raw!r}")
    if len(components) > MAX_DEPTH:
        raise IndexParseError(
            f"index {raw!r} has {len(components)} components, maximum is {MAX_DEPTH}"
        )
    return IndexPath(components)


def normalize_index(raw: str) -> str:
    """Canonical form of a dotted index (trailing dots removed)."""
    return parse_index(raw).joined()


def match_depth(predicted: IndexPath, gold: IndexPath) -> int:
    """Largest k such that components 1..k of both paths are equal.

    Returns 0 when the first components already differ. Symmetric, and
    match_depth(p, p) == p.depth.
    """
    k = 0
    for a, b in zip(predicted.components, gold.components):
        if a != b:
            break
        k += 1
    return k


def is_capital_control(index: "str | IndexPath") -> bool:
    """True iff the index sits under the capital-control branch (XI.A...)."""
    path = parse_index(index) if isinstance(index, str) else index
    return path.components[:2] == _CAPITAL_CONTROL_PREFIX


@dataclass(frozen=True)
class CategoryNode:
    """One node of the capital-control category hierarchy."""

    index: str
    name: str
    short_code: str | None
    description: str
    depth: int
    parent_index: str | None

    def path(self) -> IndexPath:
        return parse_index(self.index)

    def label(self) -> str:
        """Render as "INDEX.Name" (the form used in chat payload paths)."""
        return f"{self.index}.{self.name}"


# (index, name with optional bracket short code, one-sentence description).
# The root "XI" has no description of its own in the source table.
_CATEGORY_TABLE: tuple[tuple[str, str, str], ...] = (
    ("XI", "Capital Transactions",
     "Top-level section covering cross-border capital transactions."),
    ("XI.A", "Controls on capital transactions [ka]",
     "Restrictions on cross-border capital flows, covering investment, credit, and real estate transactions."),
    ("XI.A.2", "Controls on capital and money market instruments",
     "Rules regulating international transactions in equity, debt, money markets, and investment funds."),
    ("XI.A.2.a", "On capital market securities",
     "Measures on shares and bonds issued or acquired by residents or nonresidents."),
    ("XI.A.2.a.1", "Shares or other securities of a participating nature [eq]",
     "Controls on equity investments involving ownership or participation rights."),
    ("XI.A.2.a.1.i", "Purchase locally by nonresidents [eq_plbn]",
     "Restrictions on foreigners buying domestic equity locally."),
    ("XI.A.2.a.1.iv", "Sale or issue abroad by residents [eq_siar]",
     "Controls on residents issuing or selling equity abroad."),
    ("XI.A.2.a.1.iii", "Purchase abroad by residents [eq_pabr]",
     "Measures on residents buying equity in foreign markets."),
    ("XI.A.2.a.1.ii", "Sale or issue locally by nonresidents [eq_siln]",
     "Regulations on foreigners issuing equity locally."),
    ("XI.A.2.a.2", "Bonds or other debt securities [bo]",
     "Controls on transactions in debt instruments like bonds and notes."),
    ("XI.A.2.a.2.i", "Purchase locally by nonresidents [bo_plbn]",
     "Restrictions on foreigners purchasing domestic bonds."),
    ("XI.A.2.a.2.iv", "Sale or issue abroad by residents [bo_siar]",
     "Controls on residents issuing debt securities abroad."),
    ("XI.A.2.a.2.iii", "Purchase abroad by residents [bo_pabr]",
     "Measures on residents buying foreign bonds."),
    ("XI.A.2.a.2.ii", "Sale or issue locally by nonresidents [bo_siln]",
     "Regulations on foreign entities issuing debt locally."),
    ("XI.A.2.b", "On money market instruments [mm]",
     "Rules concerning short-term securities such as T-bills and commercial paper."),
    ("XI.A.2.b.1", "Purchase locally by nonresidents [mm_plbn]",
     "Controls on foreigners buying domestic money market instruments."),
    ("XI.A.2.b.4", "Sale or issue abroad by residents [mm_siar]",
     "Restrictions on residents issuing money market instruments abroad."),
    ("XI.A.2.b.3", "Purchase abroad by residents [mm_pabr]",
     "Regulations on residents acquiring money market instruments abroad."),
    ("XI.A.2.b.2", "Sale or issue locally by nonresidents [mm_siln]",
     "Measures on nonresidents issuing short-term instruments domestically."),
    ("XI.A.2.c", "On collective investment securities [ci]",
     "Controls on cross-border transactions in mutual funds and similar vehicles."),
    ("XI.A.2.c.3", "By residents to nonresidents [cio]",
     "Restrictions on domestic collective vehicles selling to nonresidents."),
    ("XI.A.2.c.1", "By nonresidents to residents [cii]",
     "Controls on foreign investment vehicles marketed to residents."),
    ("XI.A.3", "Controls on derivatives and other instruments",
     "Measures regulating cross-border transactions in financial derivatives."),
    ("XI.A.3.a", "Purchase locally by nonresidents",
     "Restrictions on nonresidents buying derivatives locally."),
    ("XI.A.3.b", "Sale or issue locally by nonresidents",
     "Regulations on foreigners issuing derivatives domestically."),
    ("XI.A.3.c", "Purchase abroad by residents",
     "Controls on residents acquiring foreign derivatives."),
    ("XI.A.3.d", "Sale or issue abroad by residents",
     "Restrictions on residents issuing derivatives overseas."),
    ("XI.A.4", "Controls on credit operations",
     "Rules on lending, guarantees, and financial credit between residents and nonresidents."),
    ("XI.A.4.b", "Financial credits [fc]",
     "Regulations on cross-border financial loans and credit lines."),
    ("XI.A.4.b.1", "By residents to nonresidents [fco]",
     "Controls on residents providing financial loans abroad."),
    ("XI.A.4.b.2", "By nonresidents to residents [fci]",
     "Measures on foreign entities lending to domestic parties."),
    ("XI.A.4.a", "Commercial credits",
     "Measures on trade-related deferred payment and credit agreements."),
    ("XI.A.4.a.1", "By residents to nonresidents",
     "Restrictions on trade credits extended by residents abroad."),
    ("XI.A.4.a.2", "To residents from nonresidents",
     "Controls on commercial credit provided by foreign parties."),
    ("XI.A.4.c", "Guarantees, sureties, and financial backup facilities",
     "Controls on financial guarantees supporting cross-border financial operations."),
    ("XI.A.4.c.1", "By residents to nonresidents",
     "Restrictions on guarantees extended by residents to foreigners."),
    ("XI.A.4.c.2", "To residents from nonresidents",
     "Measures on financial backing offered to residents by nonresidents."),
    ("XI.A.7", "Controls on real estate transactions",
     "Measures restricting cross-border property ownership or sales."),
    ("XI.A.7.a", "Purchase abroad by residents",
     "Restrictions on residents buying property overseas."),
    ("XI.A.7.b", "Purchase locally by nonresidents",
     "Controls on foreigners acquiring domestic real estate."),
    ("XI.A.7.c", "Sale locally by nonresidents",
     "Regulations on foreign owners selling property domestically."),
    ("XI.A.5", "Controls on direct investment [di]",
     "Rules managing long-term cross-border investments involving control or influence."),
    ("XI.A.5.a", "Outward investment [dio]",
     "Controls on domestic entities investing directly abroad."),
    ("XI.A.5.b", "Inward direct investment [dii]",
     "Measures on foreign direct investment into domestic firms."),
    ("XI.A.5.c", "Liquidation of direct investment [ldi]",
     "Regulations on the repatriation of capital from divested investments."),
)

# Hand-authored per leaf, keyed on the transaction each category regulates:
# purchases/sales locally by nonresidents, inward direct investment, and
# credit to residents from nonresidents target inflows; purchases/sales
# abroad by residents, outward direct investment, and credit by residents
# to nonresidents target outflows. Aggregate categories and liquidation
# carry no single direction. Shipped as data so the mapping is reviewable.
_DIRECTION_TABLE: dict[str, str] = {
    "XI": "undefined",
    "XI.A": "undefined",
    "XI.A.2": "undefined",
    "XI.A.2.a": "undefined",
    "XI.A.2.a.1": "undefined",
    "XI.A.2.a.1.i": "inward",
    "XI.A.2.a.1.ii": "inward",
    "XI.A.2.a.1.iii": "outward",
    "XI.A.2.a.1.iv": "outward",
    "XI.A.2.a.2": "undefined",
    "XI.A.2.a.2.i": "inward",
    "XI.A.2.a.2.ii": "inward",
    "XI.A.2.a.2.iii": "outward",
    "XI.A.2.a.2.iv": "outward",
    "XI.A.2.b": "undefined",
    "XI.A.2.b.1": "inward",
    "XI.A.2.b.2": "inward",
    "XI.A.2.b.3": "outward",
    "XI.A.2.b.4": "outward",
    "XI.A.2.c": "undefined",
    "XI.A.2.c.1": "inward",
    "XI.A.2.c.3": "outward",
    "XI.A.3": "undefined",
    "XI.A.3.a": "inward",
    "XI.A.3.b": "inward",
    "XI.A.3.c": "outward",
    "XI.A.3.d": "outward",
    "XI.A.4": "undefined",
    "XI.A.4.a": "undefined",
    "XI.A.4.a.1": "outward",
    "XI.A.4.a.2": "inward",
    "XI.A.4.b": "undefined",
    "XI.A.4.b.1": "outward",
    "XI.A.4.b.2": "inward",
    "XI.A.4.c": "undefined",
    "XI.A.4.c.1": "outward",
    "XI.A.4.c.2": "inward",
    "XI.A.5": "undefined",
    "XI.A.5.a": "outward",
    "XI.A.5.b": "inward",
    "XI.A.5.c": "undefined",
    "XI.A.7": "undefined",
    "XI.A.7.a": "outward",
    "XI.A.7.b": "inward",
    "XI.A.7.c": "inward",
}


def split_short_code(label: str) -> tuple[str, str | None]:
    """Split a trailing bracket code off a category label.

    "Financial credits [fc]" -> ("Financial credits", "fc"). Labels without
    a bracket code come back unchanged with code None.
    """
    text = label.strip()
    if text.endswith("]") and "[" in text:
        head, _, code = text[:-1].rpartition("[")
        return head.strip(), code.strip()
    return text, None


def direction_of(index: str) -> str:
    """Flow direction regulated by a category: inward/outward/both/undefined.

    The mapping is static data over the built-in table; unknown indexes
    raise UnknownIndexError.
    """
    key = normalize_index(index)
    try:
        return _DIRECTION_TABLE[key]
    except KeyError:
        raise UnknownIndexError(f"no direction mapping for index {index!r}") from None


class Taxonomy:
    """Validated, immutable collection of CategoryNodes keyed by index."""

    def __init__(self, nodes: Iterable[CategoryNode]):
        self._nodes = tuple(nodes)
        self._by_index: dict[str, CategoryNode] = {}
        for node in self._nodes:
            if node.index in self._by_index:
                raise TaxonomyLoadError(f"duplicate index {node.index!r}")
            self._by_index[node.index] = node
        for node in self._nodes:
            if node.depth > 1 and node.parent_index not in self._by_index:
                raise TaxonomyLoadError(
                    f"node {node.index!r} has no parent {node.parent_index!r} in the table"
                )

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self) -> Iterator[CategoryNode]:
        return iter(self._nodes)

    def __contains__(self, index: str) -> bool:
        try:
            return normalize_index(index) in self._by_index
        except IndexParseError:
            return False

    @property
    def nodes(self) -> tuple[CategoryNode, ...]:
        return self._nodes

    def get(self, index: str) -> CategoryNode:
        key = normalize_index(index)
        try:
            return self._by_index[key]
        except KeyError:
            raise UnknownIndexError(f"unknown category index {index!r}") from None

    def ancestors(self, index: str) -> list[CategoryNode]:
        """Chain of nodes from depth 1 down to the index itself."""
        node = self.get(index)
        chain = [node]
        while node.parent_index is not None:
            node = self._by_index[node.parent_index]
            chain.append(node)
        return list(reversed(chain))

    def direction_of(self, index: str) -> str:
        return direction_of(index)


def _node_from_row(index: str, label: str, description: str) -> CategoryNode:
    path = parse_index(index)
    name, code = split_short_code(label)
    parent = path.parent()
    return CategoryNode(
        index=path.joined(),
        name=name,
        short_code=code,
        description=description,
        depth=path.depth,
        parent_index=parent.joined() if parent else None,
    )


def load_taxonomy(source: "str | Path | None" = None) -> Taxonomy:
    """Load the built-in 45-entry category table, or a CSV override.

    Override files are UTF-8 CSV with columns index,name,short_code,
    description and must contain complete parent chains (every non-root
    node's parent present). Duplicate or unparseable indexes raise
    TaxonomyLoadError.
    """
    if source is None:
        return Taxonomy(_node_from_row(*row) for row in _CATEGORY_TABLE)

    nodes: list[CategoryNode] = []
    with open(source, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"index", "name", "short_code", "description"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise TaxonomyLoadError(
                f"override file {source} must have columns {sorted(required)}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                path = parse_index(row["index"])
            except IndexParseError as exc:
                raise TaxonomyLoadError(f"{source}:{lineno}: {exc}") from exc
            parent = path.parent()
            nodes.append(
                CategoryNode(
                    index=path.joined(),
                    name=row["name"].strip(),
                    short_code=(row["short_code"].strip() or None),
                    description=row["description"].strip(),
                    depth=path.depth,
                    parent_index=parent.joined() if parent else None,
                )
            )
    try:
        return Taxonomy(nodes)
    except TaxonomyLoadError as exc:
        raise TaxonomyLoadError(f"{source}: {exc}") from exc
