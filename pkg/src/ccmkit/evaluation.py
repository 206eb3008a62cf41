"""Scoring of model predictions against gold labels.

Three metric families: binary capital-control accuracy, status accuracy,
and strict top-down hierarchical accuracy per level (a prediction counts
at level k only if every component 1..k matches the gold index). Report
building adds a signed delta row against the best-performing baseline
model. Unparseable model output scores as wrong everywhere; excluding it
would inflate accuracy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .taxonomy import (
    IndexParseError,
    IndexPath,
    is_capital_control,
    match_depth,
    parse_index,
)

REPORT_LEVELS = (3, 4, 5, 6)
STATUS_VALUES = ("yes", "no")


class PredictionFormatError(ValueError):
    """A prediction file row violates the documented schema."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class PredictionRecord:
    """A scored model output paired with its gold labels."""

    example_id: str
    model_name: str
    gold_index: str
    gold_status: str
    predicted_index: str | None
    predicted_status: str | None


@dataclass
class EvalReport:
    model_name: str
    binary_accuracy: float
    status_accuracy: float
    level_accuracy: dict[int, float | None]
    level_denominators: dict[int, int]
    average_l3_l6: float | None


@dataclass
class EvalTable:
    reports: list[EvalReport]
    focal_model: str | None
    baseline_model: str | None
    delta: dict[str, float | None] | None


def _path_or_none(label) -> IndexPath | None:
    if not isinstance(label, str):
        return None
    try:
        return parse_index(label)
    except IndexParseError:
        return None


def _gold_path(record: PredictionRecord) -> IndexPath:
    path = _path_or_none(record.gold_index)
    if path is None:
        raise ValueError(f"gold index {record.gold_index!r} is not well-formed")
    return path


def binary_accuracy(records: list[PredictionRecord]) -> float:
    """Fraction of records that get capital-control-vs-not right.

    Capital-control-ness is the depth-2 prefix test; predictions that do
    not parse count as wrong.
    """
    if not records:
        raise ValueError("no records to score")
    correct = 0
    for record in records:
        gold_cc = is_capital_control(_gold_path(record))
        pred = _path_or_none(record.predicted_index)
        if pred is not None and is_capital_control(pred) == gold_cc:
            correct += 1
    return correct / len(records)


def status_accuracy(records: list[PredictionRecord]) -> float:
    """Fraction of records whose predicted status equals the gold status."""
    if not records:
        raise ValueError("no records to score")
    correct = sum(
        1
        for record in records
        if record.predicted_status in STATUS_VALUES
        and record.predicted_status == record.gold_status
    )
    return correct / len(records)


def hierarchical_accuracy(
    records: list[PredictionRecord], k: int
) -> tuple[float | None, int]:
    """Strict top-down accuracy at level k over gold-capital-control records.

    Numerator: records whose predicted index matches the gold index on
    every component 1..k. Denominator: records with valid ground truth at
    level k (gold depth >= k). Returns (fraction, denominator); the
    fraction is None when the denominator is zero.
    """
    if not 1 <= k <= 6:
        raise ValueError(f"level must be in 1..6, got {k}")
    numerator = 0
    denominator = 0
    for record in records:
        gold = _gold_path(record)
        if not is_capital_control(gold):
            continue
        if gold.depth < k:
            continue
        denominator += 1
        pred = _path_or_none(record.predicted_index)
        if pred is not None and match_depth(pred, gold) >= k:
            numerator += 1
    if denominator == 0:
        return None, 0
    return numerator / denominator, denominator


def evaluate_model(records: list[PredictionRecord], model_name: str | None = None) -> EvalReport:
    """All metrics for one model's records."""
    if not records:
        raise ValueError("no records to score")
    names = {r.model_name for r in records}
    if model_name is None:
        if len(names) != 1:
            raise ValueError(f"records span multiple models {sorted(names)}")
        model_name = next(iter(names))
    seen: set[str] = set()
    for record in records:
        if record.example_id in seen:
            raise ValueError(f"duplicate example id {record.example_id!r} for model {model_name}")
        seen.add(record.example_id)

    levels: dict[int, float | None] = {}
    denominators: dict[int, int] = {}
    for k in REPORT_LEVELS:
        fraction, denominator = hierarchical_accuracy(records, k)
        levels[k] = fraction
        denominators[k] = denominator
    present = [v for v in levels.values() if v is not None]
    return EvalReport(
        model_name=model_name,
        binary_accuracy=binary_accuracy(records),
        status_accuracy=status_accuracy(records),
        level_accuracy=levels,
        level_denominators=denominators,
        average_l3_l6=sum(present) / len(present) if present else None,
    )


def _rank_key(report: EvalReport) -> tuple:
    avg = report.average_l3_l6 if report.average_l3_l6 is not None else float("-inf")
    return (avg, report.binary_accuracy, report.model_name)


def delta_row(reports: list[EvalReport], focal_model: str,
              baseline_model: str | None = None) -> tuple[str, dict[str, float | None]]:
    """Column-wise difference of the focal model over the best baseline.

    The baseline is a single model: the best-performing non-focal report
    (highest L3-L6 average, ties broken by binary accuracy), unless one is
    named explicitly.
    """
    by_name = {r.model_name: r for r in reports}
    if focal_model not in by_name:
        raise ValueError(f"focal model {focal_model!r} not among reports")
    baselines = [r for r in reports if r.model_name != focal_model]
    if not baselines:
        raise ValueError("delta row needs at least one baseline model")
    if baseline_model is None:
        baseline = max(baselines, key=_rank_key)
    else:
        if baseline_model not in by_name or baseline_model == focal_model:
            raise ValueError(f"invalid baseline model {baseline_model!r}")
        baseline = by_name[baseline_model]
    focal = by_name[focal_model]

    def _diff(a: float | None, b: float | None) -> float | None:
        if a is None or b is None:
            return None
        return a - b

    delta: dict[str, float | None] = {
        "binary": _diff(focal.binary_accuracy, baseline.binary_accuracy),
        "status": _diff(focal.status_accuracy, baseline.status_accuracy),
    }
    for k in REPORT_LEVELS:
        delta[f"l{k}"] = _diff(focal.level_accuracy[k], baseline.level_accuracy[k])
    delta["avg"] = _diff(focal.average_l3_l6, baseline.average_l3_l6)
    return baseline.model_name, delta


def build_report(records: list[PredictionRecord], focal_model: str | None = None) -> EvalTable:
    """Per-model reports plus a delta row when there are baselines to beat.

    With a single model the delta row is omitted. When no focal model is
    named, the best-ranked model takes that role.
    """
    if not records:
        raise ValueError("no records to score")
    by_model: dict[str, list[PredictionRecord]] = {}
    for record in records:
        by_model.setdefault(record.model_name, []).append(record)
    reports = [evaluate_model(by_model[name], name) for name in sorted(by_model)]
    if len(reports) < 2:
        return EvalTable(reports=reports, focal_model=None, baseline_model=None, delta=None)
    if focal_model is None:
        focal_model = max(reports, key=_rank_key).model_name
    baseline_name, delta = delta_row(reports, focal_model)
    return EvalTable(
        reports=reports, focal_model=focal_model, baseline_model=baseline_name, delta=delta
    )


def format_percent(value: float | None) -> str:
    """Half-up rounding to two decimals, as a percentage string."""
    if value is None:
        return "---"
    quantized = Decimal(repr(value * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{quantized:.2f}"


def format_delta(value: float | None) -> str:
    """Signed two-decimal percentage-point difference, e.g. "+5.11"."""
    if value is None:
        return "---"
    quantized = Decimal(repr(value * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{quantized:+.2f}"


_COLUMNS = ("binary", "status", "l3", "l4", "l5", "l6", "avg")
_HEADERS = ("Model", "Binary Acc", "Status Acc", "L3", "L4", "L5", "L6", "Avg")


def _report_cells(report: EvalReport) -> list[str]:
    return [
        report.model_name,
        format_percent(report.binary_accuracy),
        format_percent(report.status_accuracy),
        *(format_percent(report.level_accuracy[k]) for k in REPORT_LEVELS),
        format_percent(report.average_l3_l6),
    ]


def render_report_text(table: EvalTable) -> str:
    """Aligned text table with per-model rows and the optional delta row."""
    rows = [list(_HEADERS)]
    for report in table.reports:
        rows.append(_report_cells(report))
    if table.delta is not None:
        rows.append(
            ["Delta over best baseline"] + [format_delta(table.delta[c]) for c in _COLUMNS]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(_HEADERS))]
    lines = []
    for n, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_rows(table: EvalTable) -> list[dict]:
    """Machine-readable rows preserving raw fractions (for CSV output)."""
    rows = []
    for report in table.reports:
        rows.append(
            {
                "model": report.model_name,
                "binary": report.binary_accuracy,
                "status": report.status_accuracy,
                **{f"l{k}": report.level_accuracy[k] for k in REPORT_LEVELS},
                **{f"l{k}_denominator": report.level_denominators[k] for k in REPORT_LEVELS},
                "avg": report.average_l3_l6,
            }
        )
    if table.delta is not None:
        rows.append(
            {
                "model": f"delta[{table.focal_model} - {table.baseline_model}]",
                **{c: table.delta[c] for c in _COLUMNS},
            }
        )
    return rows


def load_predictions(source) -> list[PredictionRecord]:
    """Load a predictions JSONL file, validating gold fields per row."""
    records = []
    path = Path(source)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise PredictionFormatError(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise PredictionFormatError("row is not a JSON object", line=lineno)
            missing = {"id", "model", "gold_index", "gold_status"} - obj.keys()
            if missing:
                raise PredictionFormatError(f"missing fields {sorted(missing)}", line=lineno)
            if obj["gold_status"] not in STATUS_VALUES:
                raise PredictionFormatError(
                    f"gold_status must be yes/no, got {obj['gold_status']!r}", line=lineno
                )
            if _path_or_none(obj["gold_index"]) is None:
                raise PredictionFormatError(
                    f"gold_index {obj['gold_index']!r} is not well-formed", line=lineno
                )
            records.append(
                PredictionRecord(
                    example_id=str(obj["id"]),
                    model_name=str(obj["model"]),
                    gold_index=obj["gold_index"],
                    gold_status=obj["gold_status"],
                    predicted_index=obj.get("predicted_index"),
                    predicted_status=obj.get("predicted_status"),
                )
            )
    return records
