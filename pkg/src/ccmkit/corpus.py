"""Ingestion and merging of final-report and yearly-change documents.

Sources are JSON-lines (one entry per line) with a CSV fallback keyed on
file extension. Malformed rows are never dropped silently: every input row
ends up either as an accepted entry or as a reject record carrying the row
number and reason.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Iterator

from .taxonomy import IndexParseError, normalize_index

logger = logging.getLogger(__name__)

STATUS_VALUES = frozenset({"yes", "no"})

# Legacy exports use MM/DD/YYYY; modern exports use ISO dates.
_DATE_FORMATS = ("%m/%d/%Y", "%Y-%m-%d")

#: Original-name -> standardized-name table for country canonicalization.
COUNTRY_NAME_MAP: dict[str, str] = {
    "Türkiye": "Turkey",
    "Hong Kong SAR": "Hong Kong",
    "Hong Kong Special Administrative Region": "Hong Kong",
    "Democratic Republic of the Congo (DRC)": "Democratic Republic of the Congo",
    "Democratic Republic of the Congo": "Democratic Republic of the Congo",
    "Republic of Korea": "South Korea",
    "Korea": "South Korea",
    "Islamic Republic of Iran": "Iran",
    "Republic of Yemen": "Yemen",
    "Syrian Arab Republic": "Syria",
    "Lao P.D.R.": "Laos",
    "Lao People’s Democratic Republic": "Laos",
    "People’s Republic of China": "China",
    "People’s Republic of China—Hong Kong SAR": "Hong Kong",
    "Swaziland": "Eswatini",
    "Kingdom of Eswatini": "Eswatini",
    "Cape Verde": "Cabo Verde",
    "República Bolivariana de Venezuela": "Venezuela",
    "República Bolivariana De Venezuela": "Venezuela",
    "Russian Federation": "Russia",
    "Papua New-Guinea": "Papua New Guinea",
    "Federated States of Micronesia": "Micronesia",
    "Serbia and Montenegro": "Serbia",
    "Republic of Serbia": "Serbia",
    "Republic of Montenegro": "Montenegro",
    "Islamic Republic of Afghanistan": "Afghanistan",
    "Islamic State of Afghanistan": "Afghanistan",
    "Czech Republic": "Czechia",
    "Former Yugoslav Republic of Macedonia": "North Macedonia",
    "Republic of North Macedonia": "North Macedonia",
    "Republic of Congo (Congo)": "Republic of Congo",
    "Democratic Republic of Timor-Leste": "Timor-Leste",
    "Republic of Azerbaijan": "Azerbaijan",
    "Republic of Fiji": "Fiji",
    "Socialist People’s Libyan Arab Jamahiriya": "Libya",
}

# Accept plain-apostrophe spellings as well; targets stay identical so the
# mapping remains idempotent.
COUNTRY_NAME_MAP.update(
    {k.replace("’", "'"): v for k, v in COUNTRY_NAME_MAP.items() if "’" in k}
)


class IngestionError(Exception):
    """Raised when a source cannot be read or parsed at all."""


@dataclass(frozen=True)
class ReportEntry:
    """One final-report category row with its yes/no status."""

    year: int
    country: str
    index: str
    category: str
    code: str | None
    status: str
    description: str


@dataclass(frozen=True)
class ChangeEntry:
    """One yearly-change row: dated narrative of a policy change."""

    year: int
    country: str
    index: str | None
    category: str
    effective_date: date | None
    description: str


@dataclass(frozen=True)
class CountryMeta:
    country: str
    ifs_code: str
    region: str
    income_group: str
    income_subgroup: str


@dataclass(frozen=True)
class Reject:
    """A rejected input row: line number, reason, raw payload."""

    row: int
    reason: str
    raw: object

    def to_json(self) -> dict:
        return {"row": self.row, "reason": self.reason, "raw": self.raw}


@dataclass
class IngestResult:
    entries: list
    rejects: list[Reject] = field(default_factory=list)


def normalize_country(raw: str) -> str:
    """Map a country name to its standardized form.

    Unmapped names pass through unchanged (after whitespace trim), so the
    function is idempotent: the standardized names never appear as keys
    with a different target.
    """
    name = raw.strip()
    return COUNTRY_NAME_MAP.get(name, name)


def parse_effective_date(raw: str) -> date:
    """Parse MM/DD/YYYY or YYYY-MM-DD; raises ValueError otherwise."""
    text = raw.strip()
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {raw!r} (expected MM/DD/YYYY or YYYY-MM-DD)")


def _iter_rows(source, fmt: str) -> Iterator[tuple[int, dict | None, str | None, object]]:
    """Yield (row number, parsed dict or None, parse-error reason, raw payload)."""
    if fmt == "jsonl":
        for lineno, line in enumerate(source, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc}", text
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "row is not a JSON object", text
                continue
            yield lineno, obj, None, obj
    elif fmt == "csv":
        reader = csv.DictReader(source)
        for lineno, row in enumerate(reader, start=2):
            parsed = {k: (v if v != "" else None) for k, v in row.items()}
            yield lineno, parsed, None, parsed
    else:  # pragma: no cover - guarded by callers
        raise ValueError(f"unknown format {fmt!r}")


def _open_source(source, fmt: str | None):
    """Normalize a path / file object into (line iterable, format, closer)."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        resolved_fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
        try:
            fh = open(path, encoding="utf-8", newline="" if resolved_fmt == "csv" else None)
        except OSError as exc:
            raise IngestionError(f"cannot open {path}: {exc}") from exc
        return fh, resolved_fmt, True
    return source, (fmt or "jsonl"), False


def _row_year(row: dict, default_year: int | None) -> int:
    value = row.get("year", default_year)
    if value is None:
        raise ValueError("missing year")
    year = int(value)
    if not 1900 <= year <= 2100:
        raise ValueError(f"implausible year {year}")
    return year


def _row_text(row: dict, key: str) -> str:
    value = row.get(key)
    if value is None or not str(value).strip():
        raise ValueError(f"missing {key}")
    return str(value).strip()


def ingest_final_report(source, year: int | None = None, fmt: str | None = None) -> IngestResult:
    """Ingest final-report rows into ReportEntry records.

    `source` is a path or an iterable of lines; `year` fills rows that do
    not carry their own. Accepted entries get canonical country names and
    normalized indexes; anything malformed lands in the rejects list.
    """
    stream, resolved_fmt, close = _open_source(source, fmt)
    result = IngestResult(entries=[])
    try:
        for lineno, row, err, raw in _iter_rows(stream, resolved_fmt):
            if err is not None:
                result.rejects.append(Reject(lineno, err, raw))
                continue
            try:
                result.entries.append(_report_entry_from_row(row, year))
            except (ValueError, IndexParseError) as exc:
                result.rejects.append(Reject(lineno, str(exc), raw))
    finally:
        if close:
            stream.close()
    return result


def _report_entry_from_row(row: dict, default_year: int | None) -> ReportEntry:
    status_raw = row.get("status")
    if status_raw is None:
        raise ValueError("missing status")
    status = str(status_raw).strip().lower()
    if status not in STATUS_VALUES:
        raise ValueError(f"unknown status token {status_raw!r}")
    code = row.get("code")
    return ReportEntry(
        year=_row_year(row, default_year),
        country=normalize_country(_row_text(row, "country")),
        index=normalize_index(_row_text(row, "index")),
        category=_row_text(row, "category"),
        code=str(code).strip() if code is not None and str(code).strip() else None,
        status=status,
        description=_row_text(row, "description"),
    )


def ingest_yearly_changes(source, year: int | None = None, fmt: str | None = None) -> IngestResult:
    """Ingest yearly-change rows into ChangeEntry records.

    effective_date is optional; when present it must parse and fall within
    the reporting year plus or minus one (retroactive reporting tolerated).
    """
    stream, resolved_fmt, close = _open_source(source, fmt)
    result = IngestResult(entries=[])
    try:
        for lineno, row, err, raw in _iter_rows(stream, resolved_fmt):
            if err is not None:
                result.rejects.append(Reject(lineno, err, raw))
                continue
            try:
                result.entries.append(_change_entry_from_row(row, year))
            except (ValueError, IndexParseError) as exc:
                result.rejects.append(Reject(lineno, str(exc), raw))
    finally:
        if close:
            stream.close()
    return result


def _change_entry_from_row(row: dict, default_year: int | None) -> ChangeEntry:
    entry_year = _row_year(row, default_year)
    raw_date = row.get("effective_date")
    effective: date | None = None
    if raw_date is not None and str(raw_date).strip():
        effective = parse_effective_date(str(raw_date))
        if abs(effective.year - entry_year) > 1:
            raise ValueError(
                f"effective_date {effective.isoformat()} outside reporting year {entry_year} +/- 1"
            )
    raw_index = row.get("index")
    index = None
    if raw_index is not None and str(raw_index).strip():
        index = normalize_index(str(raw_index))
    return ChangeEntry(
        year=entry_year,
        country=normalize_country(_row_text(row, "country")),
        index=index,
        category=_row_text(row, "category"),
        effective_date=effective,
        description=_row_text(row, "description"),
    )


@dataclass
class CorpusBucket:
    country: str
    year: int
    reports: list[ReportEntry] = field(default_factory=list)
    changes: list[ChangeEntry] = field(default_factory=list)


class Corpus:
    """Report and change entries grouped by (country, year).

    Iteration order is deterministic: buckets sorted by (country, year),
    reports by index, changes by (index, date, description). Immutable by
    convention once built.
    """

    def __init__(self, buckets: dict[tuple[str, int], CorpusBucket]):
        self._buckets = dict(sorted(buckets.items()))

    def __len__(self) -> int:
        return len(self._buckets)

    def __iter__(self) -> Iterator[CorpusBucket]:
        return iter(self._buckets.values())

    def keys(self) -> list[tuple[str, int]]:
        return list(self._buckets.keys())

    def bucket(self, country: str, year: int) -> CorpusBucket | None:
        return self._buckets.get((country, year))

    def report_status(self, country: str, year: int, index: str) -> str | None:
        """Status of a category in a country-year final report, if present."""
        bucket = self._buckets.get((country, year))
        if bucket is None:
            return None
        key = normalize_index(index)
        for entry in bucket.reports:
            if entry.index == key:
                return entry.status
        return None

    def has_reports(self, country: str, year: int) -> bool:
        bucket = self._buckets.get((country, year))
        return bool(bucket and bucket.reports)

    def all_reports(self) -> Iterator[ReportEntry]:
        for bucket in self:
            yield from bucket.reports

    def all_changes(self) -> Iterator[ChangeEntry]:
        for bucket in self:
            yield from bucket.changes


def merge_corpus(reports: Iterable[ReportEntry], changes: Iterable[ChangeEntry]) -> Corpus:
    """Group entries by (country, year) with deterministic ordering.

    Duplicate (country, year, index) final-report rows collapse to the last
    occurrence with a logged warning; source data republishes corrected
    rows, so last wins.
    """
    report_map: dict[tuple[str, int, str], ReportEntry] = {}
    for entry in reports:
        key = (entry.country, entry.year, entry.index)
        if key in report_map:
            logger.warning("duplicate final-report row %s/%s/%s: keeping last", *key)
        report_map[key] = entry

    buckets: dict[tuple[str, int], CorpusBucket] = {}

    def _bucket(country: str, year: int) -> CorpusBucket:
        key = (country, year)
        if key not in buckets:
            buckets[key] = CorpusBucket(country=country, year=year)
        return buckets[key]

    for key in sorted(report_map):
        entry = report_map[key]
        _bucket(entry.country, entry.year).reports.append(entry)

    change_list = sorted(
        changes,
        key=lambda c: (
            c.country,
            c.year,
            c.index or "",
            c.effective_date.isoformat() if c.effective_date else "",
            c.description,
        ),
    )
    for entry in change_list:
        _bucket(entry.country, entry.year).changes.append(entry)

    return Corpus(buckets)


def word_count(text: str) -> int:
    """Whitespace-delimited token count."""
    return len(text.split())


def corpus_stats(corpus: Corpus):
    """Per-year counts and word counts for reports and changes.

    Returns a DataFrame keyed by year with columns report_count,
    report_word_count, change_count, change_word_count; years with no
    change entries get empty change columns.
    """
    import pandas as pd

    years: dict[int, dict[str, int]] = {}

    def _cell(year: int) -> dict[str, int]:
        return years.setdefault(
            year,
            {"report_count": 0, "report_word_count": 0, "change_count": 0, "change_word_count": 0},
        )

    for entry in corpus.all_reports():
        cell = _cell(entry.year)
        cell["report_count"] += 1
        cell["report_word_count"] += word_count(entry.description)
    for entry in corpus.all_changes():
        cell = _cell(entry.year)
        cell["change_count"] += 1
        cell["change_word_count"] += word_count(entry.description)

    rows = []
    for year in sorted(years):
        cell = years[year]
        rows.append(
            {
                "year": year,
                "report_count": cell["report_count"] or pd.NA,
                "report_word_count": cell["report_word_count"] if cell["report_count"] else pd.NA,
                "change_count": cell["change_count"] or pd.NA,
                "change_word_count": cell["change_word_count"] if cell["change_count"] else pd.NA,
            }
        )
    return pd.DataFrame(rows, columns=["year", "report_count", "report_word_count", "change_count", "change_word_count"])


def load_country_meta(source) -> dict[str, CountryMeta]:
    """Load the country metadata CSV keyed by canonical country name."""
    if isinstance(source, (str, Path)):
        try:
            fh = open(source, encoding="utf-8", newline="")
        except OSError as exc:
            raise IngestionError(f"cannot open {source}: {exc}") from exc
        close = True
    else:
        fh, close = source, False
    metas: dict[str, CountryMeta] = {}
    try:
        reader = csv.DictReader(fh)
        required = {"country", "ifs_code", "region", "income_group", "income_subgroup"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise IngestionError(f"country metadata must have columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            name = normalize_country(row["country"])
            if name in metas:
                raise IngestionError(f"line {lineno}: duplicate country {name!r}")
            metas[name] = CountryMeta(
                country=name,
                ifs_code=row["ifs_code"].strip(),
                region=row["region"].strip(),
                income_group=row["income_group"].strip(),
                income_subgroup=row["income_subgroup"].strip(),
            )
    finally:
        if close:
            fh.close()
    return metas


def write_rejects(rejects: Iterable[Reject], path) -> int:
    """Write a rejects report as JSONL; returns the number of rows."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for reject in rejects:
            fh.write(json.dumps(reject.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count
