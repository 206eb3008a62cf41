"""Independent brute-force oracles used by the metric and estimator tests.

Everything here works on plain string splitting, explicit dummy matrices,
and textbook formulas, and deliberately shares no code with the package
under test.
"""
from __future__ import annotations

import random

import numpy as np
import pandas as pd

from ccmkit.evaluation import PredictionRecord

GOLD_INDEXES = [
    "XI.A",
    "XI.A.2",
    "XI.A.2.a",
    "XI.A.2.a.1",
    "XI.A.2.a.1.i",
    "XI.A.2.a.1.ii",
    "XI.A.2.a.2.iii",
    "XI.A.2.b.1",
    "XI.A.2.c.1",
    "XI.A.3.a",
    "XI.A.4.b.1",
    "XI.A.4.b.2",
    "XI.A.5",
    "XI.A.5.a",
    "XI.A.5.b",
    "XI.A.7.b",
    "NON-CAPITAL-CONTROL",
    "X.D.2",
    "XII.B.1",
]

_MUTANTS = ["XI.A.2.a.1.iv", "XI.A.2.b.3", "XI.A.5.c", "XI.A.7.a", "X.D.2", "XI.B.1"]
_UNPARSEABLE = [None, "", "   ", "XI..A", "a.b.c.d.e.f.g", "..."]


def _split(label: str) -> list[str] | None:
    """Oracle-side index decomposition mirroring the documented rules."""
    if not isinstance(label, str):
        return None
    text = label.strip().rstrip(".")
    if not text:
        return None
    parts = text.split(".")
    if any(p == "" for p in parts) or len(parts) > 6:
        return None
    return parts


def _is_cc(parts: list[str]) -> bool:
    return parts[:2] == ["XI", "A"]


def oracle_binary(records: list[PredictionRecord]) -> float:
    correct = 0
    for r in records:
        gold = _split(r.gold_index)
        pred = _split(r.predicted_index)
        if pred is not None and _is_cc(pred) == _is_cc(gold):
            correct += 1
    return correct / len(records)


def oracle_status(records: list[PredictionRecord]) -> float:
    correct = sum(
        1 for r in records
        if r.predicted_status in ("yes", "no") and r.predicted_status == r.gold_status
    )
    return correct / len(records)


def oracle_level(records: list[PredictionRecord], k: int):
    """Returns (fraction or None, numerator, denominator)."""
    numerator = denominator = 0
    for r in records:
        gold = _split(r.gold_index)
        if not _is_cc(gold) or len(gold) < k:
            continue
        denominator += 1
        pred = _split(r.predicted_index)
        if pred is not None and pred[:k] == gold[:k]:
            numerator += 1
    if denominator == 0:
        return None, 0, 0
    return numerator / denominator, numerator, denominator


def make_random_records(rng: random.Random, size: int, model: str = "m") -> list[PredictionRecord]:
    """Randomized prediction fixtures covering exact, partial, and broken output."""
    records = []
    for i in range(size):
        gold_index = rng.choice(GOLD_INDEXES)
        gold_status = rng.choice(["yes", "no"])
        roll = rng.random()
        if roll < 0.45:
            predicted_index = gold_index
        elif roll < 0.60:
            parts = gold_index.rstrip(".").split(".")
            cut = rng.randint(1, len(parts))
            predicted_index = ".".join(parts[:cut]) + rng.choice(["", "."])
        elif roll < 0.80:
            predicted_index = rng.choice(_MUTANTS)
        elif roll < 0.90:
            predicted_index = rng.choice(GOLD_INDEXES)
        else:
            predicted_index = rng.choice(_UNPARSEABLE)
        status_roll = rng.random()
        if status_roll < 0.7:
            predicted_status = gold_status
        elif status_roll < 0.9:
            predicted_status = "yes" if gold_status == "no" else "no"
        else:
            predicted_status = rng.choice([None, "maybe", ""])
        records.append(
            PredictionRecord(
                example_id=f"{model}-{i}",
                model_name=model,
                gold_index=gold_index,
                gold_status=gold_status,
                predicted_index=predicted_index,
                predicted_status=predicted_status,
            )
        )
    return records


# --- event-study oracles ---------------------------------------------------


def dummy_variable_oracle(frame: pd.DataFrame, window: int, references: dict,
                          cluster_col: str = "country"):
    """Full dummy-variable least squares with textbook CR1 covariance.

    Builds the design explicitly (intercept, unit dummies minus one, month
    dummies minus one, event-time dummies minus the per-group references),
    solves by lstsq, and computes the cluster-robust sandwich with the
    G/(G-1) * (N-1)/(N-K) scaling. Returns (keys, betas, ses, k).
    """
    groups = sorted(frame["group"].unique())
    keys = [
        (tau, group)
        for group in groups
        for tau in range(-window, window + 1)
        if tau != references[group]
    ]
    n = len(frame)
    units = sorted(frame["unit"].unique())
    months = sorted(frame["month"].unique())
    columns = [np.ones(n)]
    for unit in units[1:]:
        columns.append((frame["unit"] == unit).to_numpy(float))
    for month in months[1:]:
        columns.append((frame["month"] == month).to_numpy(float))
    for tau, group in keys:
        columns.append(((frame["tau"] == tau) & (frame["group"] == group)).to_numpy(float))
    X = np.column_stack(columns)
    y = frame["flowpct"].to_numpy(float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise np.linalg.LinAlgError("oracle design is rank deficient")
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ theta

    clusters = pd.factorize(frame[cluster_col])[0]
    n_clusters = int(clusters.max()) + 1
    k = X.shape[1]
    xtx_inv = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    for g in range(n_clusters):
        members = clusters == g
        score = X[members].T @ residuals[members]
        meat += np.outer(score, score)
    scale = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - k))
    vcov = scale * xtx_inv @ meat @ xtx_inv
    offset = k - len(keys)
    betas = theta[offset:]
    ses = np.sqrt(np.diag(vcov))[offset:]
    return keys, betas, ses, k


def random_saturated_frame(rng: random.Random, window: int = 6, max_rows: int = 200,
                           n_units: int = 6, n_months: int = 14, n_countries: int = 3
                           ) -> pd.DataFrame:
    """Random event frame covering every (tau, group) cell, full rank by rejection."""
    groups = ("L", "R")
    cells = [(tau, group) for group in groups for tau in range(-window, window + 1)]
    units = [f"u{i}" for i in range(n_units)]
    months = list(range(200, 200 + n_months))
    countries = [f"c{i}" for i in range(n_countries)]
    country_of_unit = {unit: countries[i % n_countries] for i, unit in enumerate(units)}
    references = {group: -1 for group in groups}
    while True:
        n_extra = rng.randint(0, max_rows - len(cells))
        tags = list(cells) + [rng.choice(cells) for _ in range(n_extra)]
        rows = []
        for i, (tau, group) in enumerate(tags):
            unit = rng.choice(units)
            rows.append(
                {
                    "unit": unit,
                    "unit_kind": "fund",
                    "country": country_of_unit[unit],
                    "month": rng.choice(months),
                    "tau": tau,
                    "group": group,
                    "flowpct": rng.gauss(0, 1),
                    "event_key": f"{group}:{tau}:{i % 3}",
                }
            )
        frame = pd.DataFrame(rows)
        try:
            dummy_variable_oracle(frame, window, references)
        except np.linalg.LinAlgError:
            continue
        return frame
