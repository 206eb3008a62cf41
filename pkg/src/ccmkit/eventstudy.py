"""Fund-flow construction and the capital-control event study.

Pipeline: holdings -> country-month (or fund-country-month) flow panel ->
inward-event selection grouped by intensity (L = liberalizing, R =
restrictive or conditional) -> stacked 13-month event frame -> two-way
fixed-effects least squares with cluster-robust standard errors, plus
descriptive means with 95% confidence intervals.

Months are integer month indexes (year*12 + month) so event-time
arithmetic is exact.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from .corpus import normalize_country, parse_effective_date

logger = logging.getLogger(__name__)

GROUP_LIBERALIZING = "L"
GROUP_RESTRICTIVE = "R"
#: intensity -> event-study group; neutral events are excluded.
GROUP_OF_INTENSITY = {
    "liberalizing": GROUP_LIBERALIZING,
    "restrictive": GROUP_RESTRICTIVE,
    "conditional": GROUP_RESTRICTIVE,
}

CI_Z = 1.96  # normal 95% quantile, fixed by the reporting convention

FRAME_COLUMNS = ("unit", "unit_kind", "country", "month", "tau", "group", "flowpct", "event_key")


class EventStudyError(ValueError):
    """Estimation cannot proceed on this frame."""


class RankDeficiencyError(EventStudyError):
    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = columns or []


def month_index(year: int, month: int) -> int:
    if not 1 <= month <= 12:
        raise ValueError(f"month must be 1..12, got {month}")
    return year * 12 + month


def parse_month(text: str) -> int:
    """Parse "YYYY-MM" into an integer month index."""
    parts = text.strip().split("-")
    if len(parts) != 2:
        raise ValueError(f"expected YYYY-MM, got {text!r}")
    return month_index(int(parts[0]), int(parts[1]))


def format_month(index: int) -> str:
    year, offset = divmod(index - 1, 12)
    return f"{year:04d}-{offset + 1:02d}"


def month_of_date(value: date) -> int:
    return month_index(value.year, value.month)


@dataclass(frozen=True)
class FundHolding:
    """One fund's position in one country for one month."""

    fund_id: str
    month: int
    country: str
    fund_size: float
    weight: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must be in [0, 1], got {self.weight}")
        if self.fund_size < 0:
            raise ValueError(f"fund_size must be non-negative, got {self.fund_size}")


@dataclass(frozen=True)
class PanelRow:
    """A country-month flow observation (optionally at fund granularity).

    flowpct is None when the row is undefined (no base assets to divide
    by); undefined rows are excluded downstream and logged.
    """

    country: str
    month: int
    flow: float | None
    total_size: float | None
    flowpct: float | None
    fund_id: str | None = None
    undefined_reason: str | None = None


@dataclass(frozen=True)
class EventSpec:
    """One country-month policy event, grouped by action intensity."""

    country: str
    event_month: int
    group: str
    source_ids: tuple[str, ...]

    @property
    def key(self) -> str:
        return f"{self.country}:{self.event_month}:{self.group}"


@dataclass
class FrameReport:
    """Accounting for build_event_frame: emitted + missing = expected."""

    emitted: int = 0
    missing: int = 0
    expected: int = 0
    n_events: dict[str, int] = field(default_factory=dict)
    dropped_events: list[str] = field(default_factory=list)


@dataclass
class EventStudyResult:
    coefficients: dict[tuple[int, str], float]
    standard_errors: dict[tuple[int, str], float]
    cluster_level: str
    means: dict[tuple[int, str], tuple[float, float | None, int]]
    n_events: dict[str, int]
    reference: dict[str, int]
    n_obs: int
    n_clusters: int
    control_coefficients: dict[str, float] = field(default_factory=dict)
    control_standard_errors: dict[str, float] = field(default_factory=dict)


def load_holdings(source) -> list[FundHolding]:
    """Load the holdings CSV: fund_id, month (YYYY-MM), country, fund_size, weight."""
    holdings = []
    with open(source, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"fund_id", "month", "country", "fund_size", "weight"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"holdings file must have columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                holdings.append(
                    FundHolding(
                        fund_id=row["fund_id"].strip(),
                        month=parse_month(row["month"]),
                        country=normalize_country(row["country"]),
                        fund_size=float(row["fund_size"]),
                        weight=float(row["weight"]),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{source}: line {lineno}: {exc}") from exc
    return holdings


def _allocated_assets(holdings, by_fund: bool) -> dict:
    """Country-allocated assets per month: sum of fund_size*weight over weight>0."""
    allocated: dict = {}
    for holding in holdings:
        if holding.weight <= 0:
            continue
        key = (holding.fund_id, holding.country) if by_fund else holding.country
        allocated.setdefault(key, {})
        allocated[key][holding.month] = (
            allocated[key].get(holding.month, 0.0) + holding.fund_size * holding.weight
        )
    return allocated


def _rows_for_key(key, months: dict[int, float], flow_def: str, by_fund: bool) -> list[PanelRow]:
    fund_id, country = key if by_fund else (None, key)
    rows = []
    for month in sorted(months):
        assets = months[month]
        if flow_def == "level":
            if assets > 0:
                rows.append(PanelRow(country, month, assets, assets, 1.0, fund_id))
            else:
                rows.append(PanelRow(country, month, assets, assets, None, fund_id,
                                     undefined_reason="zero allocated assets"))
        else:
            prior = months.get(month - 1)
            if prior is None:
                rows.append(PanelRow(country, month, None, None, None, fund_id,
                                     undefined_reason="no prior month"))
            elif prior <= 0:
                rows.append(PanelRow(country, month, assets - prior, prior, None, fund_id,
                                     undefined_reason="zero base assets"))
            else:
                flow = assets - prior
                rows.append(PanelRow(country, month, flow, prior, flow / prior, fund_id))
    return rows


def _compute(holdings, flow_def: str, by_fund: bool) -> list[PanelRow]:
    if flow_def not in ("delta", "level"):
        raise ValueError(f"flow_def must be 'delta' or 'level', got {flow_def!r}")
    allocated = _allocated_assets(holdings, by_fund)
    rows: list[PanelRow] = []
    for key in sorted(allocated):
        rows.extend(_rows_for_key(key, allocated[key], flow_def, by_fund))
    undefined = sum(1 for r in rows if r.flowpct is None)
    if undefined:
        logger.info("flow panel has %d undefined rows (excluded downstream)", undefined)
    return rows


def compute_flows(holdings: list[FundHolding], flow_def: str = "delta") -> list[PanelRow]:
    """Country-month flow panel.

    Country-allocated assets are sum_j fund_size(j,t) * weight(j,i,t) over
    funds with positive weight. Under the default "delta" definition, flow
    is the month-over-month change in allocated assets and flowpct divides
    by the beginning-of-month assets; under "level", flow and the
    denominator are the same aggregate (flowpct is identically 1 where
    defined).
    """
    return _compute(holdings, flow_def, by_fund=False)


def compute_fund_flows(holdings: list[FundHolding], flow_def: str = "delta") -> list[PanelRow]:
    """Fund-country-month flow panel (same definitions, per fund)."""
    return _compute(holdings, flow_def, by_fund=True)


def _event_field(event, name):
    if isinstance(event, dict):
        return event.get(name)
    return getattr(event, name, None)


def select_events(ccm_events, countries=None) -> list[EventSpec]:
    """Inward events grouped by intensity, deduplicated per country-month.

    Only action_direction == "inward" qualifies; neutral intensity is
    excluded; restrictive and conditional merge into group R. Same-country
    same-month duplicates within a group collapse into one EventSpec
    listing all source ids. Events without a usable date are skipped with
    a log line.
    """
    wanted = set(countries) if countries else None
    merged: dict[tuple[str, int, str], list[str]] = {}
    skipped_dates = 0
    for ordinal, event in enumerate(ccm_events):
        if _event_field(event, "action_direction") != "inward":
            continue
        group = GROUP_OF_INTENSITY.get(_event_field(event, "action_intensity"))
        if group is None:
            continue
        country = _event_field(event, "country")
        if wanted is not None and country not in wanted:
            continue
        raw_date = _event_field(event, "date")
        if isinstance(raw_date, date):
            when = raw_date
        elif isinstance(raw_date, str) and raw_date.strip():
            try:
                when = parse_effective_date(raw_date)
            except ValueError:
                skipped_dates += 1
                continue
        else:
            skipped_dates += 1
            continue
        source_id = _event_field(event, "entry_id") or _event_field(event, "id") or f"event-{ordinal}"
        merged.setdefault((country, month_of_date(when), group), []).append(str(source_id))
    if skipped_dates:
        logger.warning("skipped %d events without a usable effective date", skipped_dates)
    return [
        EventSpec(country=c, event_month=m, group=g, source_ids=tuple(ids))
        for (c, m, g), ids in sorted(merged.items())
    ]


def _drop_overlapping(events: list[EventSpec], window: int) -> tuple[list[EventSpec], list[str]]:
    """Keep, per country, only events whose windows do not overlap.

    Events are scanned in chronological order; an event is dropped when its
    window intersects the window of the last kept event in the same
    country.
    """
    kept: list[EventSpec] = []
    dropped: list[str] = []
    last_kept: dict[str, int] = {}
    for event in sorted(events, key=lambda e: (e.country, e.event_month, e.group)):
        last = last_kept.get(event.country)
        if last is not None and event.event_month - last <= 2 * window:
            dropped.append(event.key)
            continue
        last_kept[event.country] = event.event_month
        kept.append(event)
    return kept, dropped


def build_event_frame(
    panel: list[PanelRow],
    events: list[EventSpec],
    window: int = 6,
    overlap: str = "saturate",
) -> tuple[pd.DataFrame, FrameReport]:
    """Stack panel observations over each event's 13-month window.

    For each event, each panel unit of the event's country contributes one
    tagged copy per event time tau in -window..+window; panel rows that are
    absent or undefined count as missing. Overlapping windows produce
    multiple tagged copies of the same observation (dummy saturation)
    unless overlap="drop" discards overlapping events.
    """
    if overlap not in ("saturate", "drop"):
        raise ValueError(f"overlap must be 'saturate' or 'drop', got {overlap!r}")
    report = FrameReport()
    if overlap == "drop":
        events, report.dropped_events = _drop_overlapping(events, window)

    by_cell: dict[tuple[str, str, int], PanelRow] = {}
    units_by_country: dict[str, set[str]] = {}
    for row in panel:
        unit = row.fund_id if row.fund_id is not None else row.country
        by_cell[(unit, row.country, row.month)] = row
        units_by_country.setdefault(row.country, set()).add(unit)

    records = []
    for event in events:
        report.n_events[event.group] = report.n_events.get(event.group, 0) + 1
        units = sorted(units_by_country.get(event.country) or {event.country})
        for unit in units:
            for tau in range(-window, window + 1):
                report.expected += 1
                row = by_cell.get((unit, event.country, event.event_month + tau))
                if row is None or row.flowpct is None:
                    report.missing += 1
                    continue
                report.emitted += 1
                records.append(
                    {
                        "unit": unit,
                        "unit_kind": "fund" if row.fund_id is not None else "country",
                        "country": event.country,
                        "month": row.month,
                        "tau": tau,
                        "group": event.group,
                        "flowpct": row.flowpct,
                        "event_key": event.key,
                    }
                )
    frame = pd.DataFrame(records, columns=list(FRAME_COLUMNS))
    return frame, report


def _reference_tau(window: int) -> int:
    """The omitted event time: the month before the event (0 if window is 0)."""
    return -1 if window >= 1 else 0


def _iterated_demean(
    matrix: np.ndarray,
    unit_codes: np.ndarray,
    month_codes: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = 10000,
) -> np.ndarray:
    """Alternately remove unit and month means until both are below tol.

    Convergence is measured on the remaining group means, so the returned
    matrix is within tol*scale of the exact two-way within transform;
    re-demeaning a converged matrix moves values by less than 1e-12.
    """
    X = np.array(matrix, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[:, None]
    n_units = int(unit_codes.max()) + 1
    n_months = int(month_codes.max()) + 1
    unit_counts = np.bincount(unit_codes, minlength=n_units)[:, None].astype(float)
    month_counts = np.bincount(month_codes, minlength=n_months)[:, None].astype(float)
    scale = max(1.0, float(np.abs(X).max()))

    def _group_means(codes, counts, size):
        sums = np.zeros((size, X.shape[1]))
        np.add.at(sums, codes, X)
        return sums / counts

    for _ in range(max_iter):
        X -= _group_means(unit_codes, unit_counts, n_units)[unit_codes]
        X -= _group_means(month_codes, month_counts, n_months)[month_codes]
        residual_means = _group_means(unit_codes, unit_counts, n_units)
        if float(np.abs(residual_means).max()) < tol * scale:
            return X
    raise EventStudyError("within transformation did not converge")


def _name_dependent_columns(X: np.ndarray, names: list[str]) -> list[str]:
    """Columns of X linearly dependent on the columns before them."""
    dependent = []
    basis: list[np.ndarray] = []
    for j in range(X.shape[1]):
        col = X[:, j]
        norm = np.linalg.norm(col)
        if norm < 1e-10:
            dependent.append(names[j])
            continue
        if basis:
            B = np.column_stack(basis)
            coef, *_ = np.linalg.lstsq(B, col, rcond=None)
            residual = col - B @ coef
            if np.linalg.norm(residual) < 1e-8 * max(1.0, norm):
                dependent.append(names[j])
                continue
        basis.append(col)
    return dependent


def descriptive_means(frame: pd.DataFrame) -> dict[tuple[int, str], tuple[float, float | None, int]]:
    """Mean flowpct per (tau, group) cell with 95% CI half-widths.

    The half-width is 1.96 times the standard error of the mean (sample
    standard deviation over sqrt(n)); cells with a single observation have
    no half-width.
    """
    means: dict[tuple[int, str], tuple[float, float | None, int]] = {}
    for (tau, group), cell in frame.groupby(["tau", "group"]):
        values = cell["flowpct"].to_numpy(dtype=float)
        n = len(values)
        mean = float(values.mean())
        if n >= 2:
            half = CI_Z * float(values.std(ddof=1)) / float(np.sqrt(n))
        else:
            half = None
        means[(int(tau), str(group))] = (mean, half, n)
    return means


def estimate_event_study(
    frame: pd.DataFrame,
    cluster_level: str = "country",
    window: int = 6,
    controls: tuple[str, ...] = (),
) -> EventStudyResult:
    """Two-way fixed-effects estimation of event-time coefficients.

    The outcome is regressed on event-time-by-group dummies after
    demeaning by unit and calendar month; per group, the dummy at event
    time -1 is the omitted reference and reported as exactly zero. Every
    other (tau, group) cell must carry observations; empty cells raise
    RankDeficiencyError naming the dummy. Standard errors are
    cluster-robust with the CR1 small-sample scaling G/(G-1) * (N-1)/(N-K),
    where K counts the event dummies plus the absorbed unit and month
    effects.

    `controls` names extra numeric frame columns passed through as
    additional regressors; their estimates land in control_coefficients.
    """
    if frame.empty:
        raise EventStudyError("event frame is empty")
    if cluster_level not in ("fund", "country"):
        raise ValueError(f"cluster_level must be 'fund' or 'country', got {cluster_level!r}")
    if cluster_level == "fund" and not (frame["unit_kind"] == "fund").all():
        raise EventStudyError(
            "fund-level clustering requires a fund-level panel (use compute_fund_flows)"
        )

    groups = sorted(frame["group"].unique())
    reference = {group: _reference_tau(window) for group in groups}

    tags = list(zip(frame["tau"].to_numpy(), frame["group"].to_numpy()))
    counts = {
        (tau, group): 0 for group in groups for tau in range(-window, window + 1)
    }
    for tag in tags:
        if tag in counts:
            counts[tag] += 1
    empty = [key for key, count in counts.items() if count == 0]
    if empty:
        names = [f"tau={tau},group={group}" for tau, group in empty]
        raise RankDeficiencyError(
            f"event-time dummies without observations: {', '.join(names)}", columns=names
        )
    dummy_keys = [
        (tau, group)
        for group in groups
        for tau in range(-window, window + 1)
        if tau != reference[group]
    ]

    n = len(frame)
    y = frame["flowpct"].to_numpy(dtype=float)
    D = np.zeros((n, len(dummy_keys) + len(controls)))
    key_pos = {key: j for j, key in enumerate(dummy_keys)}
    for i, tag in enumerate(tags):
        j = key_pos.get(tag)
        if j is not None:
            D[i, j] = 1.0
    for c, name in enumerate(controls):
        if name not in frame.columns:
            raise EventStudyError(f"control column {name!r} not in the frame")
        D[:, len(dummy_keys) + c] = frame[name].to_numpy(dtype=float)

    unit_codes = pd.factorize(frame["unit"])[0]
    month_codes = pd.factorize(frame["month"])[0]
    cluster_col = "unit" if cluster_level == "fund" else "country"
    cluster_codes = pd.factorize(frame[cluster_col])[0]
    n_clusters = int(cluster_codes.max()) + 1
    if n_clusters < 2:
        raise EventStudyError("clustered variance is undefined with a single cluster")

    stacked = _iterated_demean(np.column_stack([y, D]), unit_codes, month_codes)
    y_t, D_t = stacked[:, 0], stacked[:, 1:]

    names = [f"tau={tau},group={group}" for tau, group in dummy_keys] + list(controls)
    if np.linalg.matrix_rank(D_t) < D_t.shape[1]:
        dependent = _name_dependent_columns(D_t, names)
        raise RankDeficiencyError(
            "collinear regressors after the within transform: " + ", ".join(dependent),
            columns=dependent,
        )

    n_units = int(unit_codes.max()) + 1
    n_months = int(month_codes.max()) + 1
    k_model = D.shape[1] + n_units + n_months - 1
    if n <= k_model:
        raise EventStudyError(
            f"{n} observations cannot support {k_model} parameters (frame is degenerate)"
        )

    xtx = D_t.T @ D_t
    xtx_inv = np.linalg.inv(xtx)
    beta = xtx_inv @ (D_t.T @ y_t)
    residuals = y_t - D_t @ beta

    meat = np.zeros((D_t.shape[1], D_t.shape[1]))
    for g in range(n_clusters):
        members = cluster_codes == g
        score = D_t[members].T @ residuals[members]
        meat += np.outer(score, score)
    scale = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - k_model))
    vcov = scale * xtx_inv @ meat @ xtx_inv
    variances = np.diag(vcov)
    # the sandwich is PSD in exact arithmetic; tolerate rounding-level
    # negativity but refuse to report NaN errors on a broken-down frame
    floor = -1e-8 * max(1.0, float(np.abs(variances).max()))
    if float(variances.min()) < floor:
        raise EventStudyError(
            "clustered covariance is numerically indefinite; the frame is too "
            "close to rank deficiency for reliable standard errors"
        )
    ses = np.sqrt(np.clip(variances, 0.0, None))

    coefficients: dict[tuple[int, str], float] = {}
    standard_errors: dict[tuple[int, str], float] = {}
    for group in groups:
        coefficients[(reference[group], group)] = 0.0
        standard_errors[(reference[group], group)] = 0.0
    for j, key in enumerate(dummy_keys):
        coefficients[key] = float(beta[j])
        standard_errors[key] = float(ses[j])

    n_events = {
        str(group): int(frame.loc[frame["group"] == group, "event_key"].nunique())
        for group in groups
    }
    offset = len(dummy_keys)
    return EventStudyResult(
        coefficients=coefficients,
        standard_errors=standard_errors,
        cluster_level=cluster_level,
        means=descriptive_means(frame),
        n_events=n_events,
        reference=reference,
        n_obs=n,
        n_clusters=n_clusters,
        control_coefficients={name: float(beta[offset + c]) for c, name in enumerate(controls)},
        control_standard_errors={name: float(ses[offset + c]) for c, name in enumerate(controls)},
    )


def coefficients_frame(result: EventStudyResult) -> pd.DataFrame:
    """Plot-ready coefficients: tau, group, beta, se, ci_lo, ci_hi."""
    rows = []
    for (tau, group), beta in sorted(result.coefficients.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        se = result.standard_errors[(tau, group)]
        rows.append(
            {
                "tau": tau,
                "group": group,
                "beta": beta,
                "se": se,
                "ci_lo": beta - CI_Z * se,
                "ci_hi": beta + CI_Z * se,
            }
        )
    return pd.DataFrame(rows, columns=["tau", "group", "beta", "se", "ci_lo", "ci_hi"])


def means_frame(means: dict[tuple[int, str], tuple[float, float | None, int]]) -> pd.DataFrame:
    """Plot-ready descriptive means: tau, group, mean, ci_half_width, n."""
    rows = []
    for (tau, group), (mean, half, n) in sorted(means.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        rows.append(
            {"tau": tau, "group": group, "mean": mean, "ci_half_width": half, "n": n}
        )
    return pd.DataFrame(rows, columns=["tau", "group", "mean", "ci_half_width", "n"])
