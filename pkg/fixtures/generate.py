#!/usr/bin/env python3
"""Regenerate the synthetic fixture files that are too large to handwrite.

Writes holdings.csv (4 global funds x 3 countries x 72 months) and two
synthetic prediction files. Everything is seeded, so reruns reproduce the
committed files byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).parent

FUNDS = {"GF-1": 800.0, "GF-2": 1200.0, "GF-3": 500.0, "GF-4": 1500.0}
COUNTRIES = ("Australia", "China", "United States")
BASE_WEIGHTS = {
    ("GF-1", "Australia"): 0.06,
    ("GF-1", "China"): 0.12,
    ("GF-1", "United States"): 0.18,
    ("GF-2", "Australia"): 0.05,
    ("GF-2", "China"): 0.09,
    ("GF-2", "United States"): 0.22,
    ("GF-3", "Australia"): 0.08,
    ("GF-3", "China"): 0.15,
    ("GF-3", "United States"): 0.10,
    ("GF-4", "Australia"): 0.04,
    ("GF-4", "China"): 0.11,
    ("GF-4", "United States"): 0.20,
}


def write_holdings() -> None:
    rows = []
    for f_idx, (fund, base_size) in enumerate(sorted(FUNDS.items())):
        for t in range(72):  # 2012-01 .. 2017-12
            year = 2012 + t // 12
            month = t % 12 + 1
            size = base_size * (1 + 0.003 * t + 0.05 * math.sin(t / 7.0 + f_idx))
            for c_idx, country in enumerate(COUNTRIES):
                weight = BASE_WEIGHTS[(fund, country)] * (
                    1 + 0.10 * math.sin(t / 5.0 + f_idx + 2 * c_idx)
                )
                rows.append(
                    {
                        "fund_id": fund,
                        "month": f"{year:04d}-{month:02d}",
                        "country": country,
                        "fund_size": f"{size:.4f}",
                        "weight": f"{weight:.6f}",
                    }
                )
    with open(HERE / "holdings.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["fund_id", "month", "country", "fund_size", "weight"])
        writer.writeheader()
        writer.writerows(rows)


GOLD_POOL = [
    ("XI.A.2.a.1.i", "yes"),
    ("XI.A.2.a.1.ii", "no"),
    ("XI.A.2.a.2.i", "yes"),
    ("XI.A.2.b.1", "yes"),
    ("XI.A.2.c.1", "no"),
    ("XI.A.3.a", "yes"),
    ("XI.A.4.b.2", "yes"),
    ("XI.A.5.b", "yes"),
    ("XI.A.5.a", "no"),
    ("XI.A.7.b", "yes"),
    ("XI.A.2", "yes"),
    ("XI.A.5", "yes"),
    ("NON-CAPITAL-CONTROL", "no"),
    ("X.D.2", "yes"),
    ("XII.B.1", "yes"),
]

SIBLINGS = {
    "XI.A.2.a.1.i": "XI.A.2.a.1.iii",
    "XI.A.2.a.2.i": "XI.A.2.a.2.ii",
    "XI.A.2.b.1": "XI.A.2.b.3",
    "XI.A.5.b": "XI.A.5.a",
    "XI.A.7.b": "XI.A.7.a",
    "XI.A.4.b.2": "XI.A.4.b.1",
}


def _predict(rng: random.Random, gold_index: str, gold_status: str, skill: float):
    """Simulated model output: right with probability `skill`, else degraded."""
    roll = rng.random()
    if roll < skill:
        return gold_index, gold_status
    if roll < skill + 0.12 and gold_index in SIBLINGS:
        return SIBLINGS[gold_index], gold_status
    if roll < skill + 0.18:
        return None, "maybe"  # unparseable output
    if gold_index.startswith("XI.A"):
        return "NON-CAPITAL-CONTROL", "no"
    return "XI.A.5.b", "yes"


def write_predictions() -> None:
    rng = random.Random(20240601)
    examples = [
        (f"ex-{i:03d}",) + GOLD_POOL[rng.randrange(len(GOLD_POOL))] for i in range(40)
    ]
    for model, skill, filename in (
        ("llama-base", 0.55, "predictions_baseline.jsonl"),
        ("ccm-llama-ft", 0.88, "predictions_finetuned.jsonl"),
    ):
        with open(HERE / filename, "w", encoding="utf-8") as fh:
            for example_id, gold_index, gold_status in examples:
                predicted_index, predicted_status = _predict(rng, gold_index, gold_status, skill)
                fh.write(
                    json.dumps(
                        {
                            "id": example_id,
                            "model": model,
                            "gold_index": gold_index,
                            "gold_status": gold_status,
                            "predicted_index": predicted_index,
                            "predicted_status": predicted_status,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


if __name__ == "__main__":
    write_holdings()
    write_predictions()
    print("wrote holdings.csv, predictions_baseline.jsonl, predictions_finetuned.jsonl")
