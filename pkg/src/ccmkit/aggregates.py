"""Stylized-fact aggregations over extracted event files.

Each function takes parsed event records (dicts from the events JSONL)
and returns a CSV-ready DataFrame: counts by year and category, by year
and region, cumulative counts by action type, and intensity or direction
breakdowns by income group.
"""
from __future__ import annotations

import pandas as pd


def _frame(events: list[dict]) -> pd.DataFrame:
    if not events:
        return pd.DataFrame(
            columns=["year", "category_index", "region", "income_group",
                     "action", "action_intensity", "action_direction"]
        )
    frame = pd.DataFrame(events)
    for column in ("region", "income_group", "category_index"):
        if column not in frame.columns:
            frame[column] = None
        frame[column] = frame[column].fillna("unknown")
    return frame


def events_by_year_category(events: list[dict]) -> pd.DataFrame:
    frame = _frame(events)
    return (
        frame.groupby(["year", "category_index"]).size().reset_index(name="count")
        if len(frame)
        else pd.DataFrame(columns=["year", "category_index", "count"])
    )


def events_by_year_region(events: list[dict]) -> pd.DataFrame:
    frame = _frame(events)
    return (
        frame.groupby(["year", "region"]).size().reset_index(name="count")
        if len(frame)
        else pd.DataFrame(columns=["year", "region", "count"])
    )


def cumulative_by_action(events: list[dict]) -> pd.DataFrame:
    """Per-action yearly counts with a running cumulative column.

    Every action observed anywhere is carried through all years so the
    cumulative series is defined (and non-decreasing) year by year.
    """
    frame = _frame(events)
    if not len(frame):
        return pd.DataFrame(columns=["year", "action", "count", "cumulative"])
    counts = frame.groupby(["year", "action"]).size().reset_index(name="count")
    years = sorted(counts["year"].unique())
    actions = sorted(counts["action"].unique())
    full = (
        pd.MultiIndex.from_product([years, actions], names=["year", "action"])
        .to_frame(index=False)
        .merge(counts, on=["year", "action"], how="left")
        .fillna({"count": 0})
    )
    full["count"] = full["count"].astype(int)
    full = full.sort_values(["action", "year"]).reset_index(drop=True)
    full["cumulative"] = full.groupby("action")["count"].cumsum()
    return full[["year", "action", "count", "cumulative"]]


def intensity_by_income(events: list[dict]) -> pd.DataFrame:
    frame = _frame(events)
    return (
        frame.groupby(["action_intensity", "income_group"]).size().reset_index(name="count")
        if len(frame)
        else pd.DataFrame(columns=["action_intensity", "income_group", "count"])
    )


def direction_by_income(events: list[dict]) -> pd.DataFrame:
    frame = _frame(events)
    return (
        frame.groupby(["action_direction", "income_group"]).size().reset_index(name="count")
        if len(frame)
        else pd.DataFrame(columns=["action_direction", "income_group", "count"])
    )
