"""Metric definitions, report building, and delta-row tests."""
from __future__ import annotations

import random

import pytest

from ccmkit.evaluation import (
    EvalReport,
    PredictionFormatError,
    PredictionRecord,
    binary_accuracy,
    build_report,
    delta_row,
    evaluate_model,
    format_delta,
    format_percent,
    hierarchical_accuracy,
    load_predictions,
    status_accuracy,
)
from oracles import make_random_records, oracle_level, oracle_status


def _record(gold_index, predicted_index, gold_status="yes", predicted_status="yes",
            example_id=None, model="m") -> PredictionRecord:
    _record.counter = getattr(_record, "counter", 0) + 1
    return PredictionRecord(
        example_id=example_id or f"id-{_record.counter}",
        model_name=model,
        gold_index=gold_index,
        gold_status=gold_status,
        predicted_index=predicted_index,
        predicted_status=predicted_status,
    )


# --- binary accuracy ------------------------------------------------------------


def test_binary_three_of_four():
    records = [
        _record("XI.A.5.b", "XI.A.5.a"),          # both capital control: agree
        _record("XI.A.2", "X.D.2"),               # disagree
        _record("X.D.2", "NON-CAPITAL-CONTROL"),  # both non-CC: agree
        _record("XI.A.7.b", "XI.A.7.b"),          # agree
    ]
    assert binary_accuracy(records) == 0.75


def test_binary_identity_is_one():
    records = [_record(g, g) for g in ("XI.A.5.b", "X.D.2", "XI.A.2.a.1.i")]
    assert binary_accuracy(records) == 1.0


def test_binary_498_of_500():
    records = [_record("XI.A.5.b", "XI.A.5.b", example_id=f"a{i}") for i in range(498)]
    records += [
        _record("XI.A.5.b", "X.D.2", example_id="bad1"),
        _record("X.D.2", "XI.A.2", example_id="bad2"),
    ]
    value = binary_accuracy(records)
    assert value == 498 / 500
    assert abs(value - 0.996) < 1e-12


def test_binary_unparseable_counts_wrong_even_for_non_cc_gold():
    records = [_record("X.D.2", None), _record("XI.A.2", "")]
    assert binary_accuracy(records) == 0.0


def test_binary_empty_raises():
    with pytest.raises(ValueError):
        binary_accuracy([])


# --- status accuracy ------------------------------------------------------------


def test_status_identity():
    records = [_record("XI.A.2", "XI.A.2", "yes", "yes") for _ in range(5)]
    assert status_accuracy(records) == 1.0


def test_status_one_flip_in_ten():
    records = [_record("XI.A.2", "XI.A.2", "yes", "yes", example_id=f"s{i}") for i in range(9)]
    records.append(_record("XI.A.2", "XI.A.2", "yes", "no", example_id="s9"))
    assert status_accuracy(records) == 0.9


def test_status_unparseable_counts_wrong():
    records = [_record("XI.A.2", "XI.A.2", "yes", "maybe"),
               _record("XI.A.2", "XI.A.2", "no", None)]
    assert status_accuracy(records) == 0.0


def test_status_matches_recount():
    rng = random.Random(5)
    records = make_random_records(rng, 200)
    assert status_accuracy(records) == oracle_status(records)


# --- hierarchical accuracy --------------------------------------------------------


def test_hierarchical_counts_only_up_to_divergence():
    records = [_record("XI.A.2.a.1", "XI.A.2.b.1")]
    for k, expected in ((1, 1.0), (2, 1.0), (3, 1.0), (4, 0.0), (5, 0.0)):
        fraction, denominator = hierarchical_accuracy(records, k)
        assert denominator == 1
        assert fraction == expected


def test_hierarchical_all_correct_is_one_everywhere():
    records = [_record(g, g) for g in ("XI.A.2.a.1.ii", "XI.A.5.b", "XI.A.2")]
    for k in range(1, 7):
        fraction, denominator = hierarchical_accuracy(records, k)
        if denominator:
            assert fraction == 1.0


def test_hierarchical_scopes_to_gold_capital_controls():
    records = [
        _record("X.D.2", "X.D.2"),                  # non-CC gold: out of scope
        _record("XI.A.5.b", "XI.A.5.b"),
    ]
    fraction, denominator = hierarchical_accuracy(records, 3)
    assert denominator == 1
    assert fraction == 1.0


def test_hierarchical_denominator_shrinks_with_depth():
    records = [_record("XI.A.2", "XI.A.2"), _record("XI.A.2.a.1.i", "XI.A.2.a.1.i")]
    assert hierarchical_accuracy(records, 3) == (1.0, 2)
    assert hierarchical_accuracy(records, 4) == (1.0, 1)


def test_hierarchical_zero_denominator_is_undefined():
    records = [_record("XI.A", "XI.A")]
    fraction, denominator = hierarchical_accuracy(records, 3)
    assert fraction is None and denominator == 0


def test_hierarchical_out_of_taxonomy_prediction_fails_level_one():
    records = [_record("XI.A.5.b", "NON-CAPITAL-CONTROL")]
    assert hierarchical_accuracy(records, 1) == (0.0, 1)


def test_hierarchical_matches_string_split_oracle():
    rng = random.Random(23)
    for _ in range(50):
        records = make_random_records(rng, rng.randint(50, 120))
        for k in range(1, 7):
            mine = hierarchical_accuracy(records, k)
            expected, _, denominator = oracle_level(records, k)
            assert mine == (expected, denominator)


def test_hierarchical_numerator_monotone_in_level():
    rng = random.Random(31)
    for _ in range(30):
        records = make_random_records(rng, 80)
        previous = None
        for k in range(1, 7):
            _, numerator, _ = oracle_level(records, k)
            fraction, denominator = hierarchical_accuracy(records, k)
            if fraction is not None:
                assert round(fraction * denominator) == numerator
            if previous is not None:
                assert numerator <= previous
            previous = numerator


def test_metrics_invariant_under_record_permutation():
    rng = random.Random(41)
    records = make_random_records(rng, 150)
    shuffled = records[:]
    rng.shuffle(shuffled)
    assert binary_accuracy(records) == binary_accuracy(shuffled)
    assert status_accuracy(records) == status_accuracy(shuffled)
    for k in range(1, 7):
        assert hierarchical_accuracy(records, k) == hierarchical_accuracy(shuffled, k)


# --- reports ----------------------------------------------------------------------


def test_evaluate_model_average_is_mean_of_levels():
    rng = random.Random(59)
    records = make_random_records(rng, 300)
    report = evaluate_model(records)
    present = [v for v in report.level_accuracy.values() if v is not None]
    assert abs(report.average_l3_l6 - sum(present) / len(present)) < 1e-12


def test_evaluate_model_rejects_duplicate_ids():
    records = [_record("XI.A.2", "XI.A.2", example_id="dup"),
               _record("XI.A.2", "XI.A.2", example_id="dup")]
    with pytest.raises(ValueError):
        evaluate_model(records)


def test_build_report_single_model_has_no_delta():
    rng = random.Random(61)
    table = build_report(make_random_records(rng, 60))
    assert table.delta is None
    assert len(table.reports) == 1


def test_build_report_two_models_emits_delta():
    rng = random.Random(67)
    records = make_random_records(rng, 60, model="weak") + make_random_records(
        rng, 60, model="strong"
    )
    table = build_report(records, focal_model="strong")
    assert table.focal_model == "strong"
    assert table.baseline_model == "weak"
    expected = (
        binary_accuracy([r for r in records if r.model_name == "strong"])
        - binary_accuracy([r for r in records if r.model_name == "weak"])
    )
    assert abs(table.delta["binary"] - expected) < 1e-12


def test_delta_row_uses_single_best_baseline_model():
    def report(name, binary, levels, avg):
        return EvalReport(
            model_name=name, binary_accuracy=binary, status_accuracy=binary,
            level_accuracy={3: levels[0], 4: levels[1], 5: levels[2], 6: levels[3]},
            level_denominators={3: 100, 4: 100, 5: 100, 6: 100},
            average_l3_l6=avg,
        )

    # base-one leads on L3, but base-two is the best-performing model overall;
    # the delta row subtracts base-two in every column.
    reports = [
        report("base-one", 0.90, (0.86, 0.55, 0.40, 0.20), 0.5025),
        report("base-two", 0.95, (0.80, 0.70, 0.60, 0.50), 0.65),
        report("focal", 0.99, (0.90, 0.80, 0.70, 0.60), 0.75),
    ]
    baseline, delta = delta_row(reports, "focal")
    assert baseline == "base-two"
    assert abs(delta["l3"] - 0.10) < 1e-12
    assert format_delta(delta["l3"]) == "+10.00"


def test_format_percent_half_up():
    assert format_percent(0.90085) == "90.09"
    assert format_percent(0.5) == "50.00"
    assert format_percent(None) == "---"


def test_format_delta_signs():
    assert format_delta(0.0511) == "+5.11"
    assert format_delta(-0.02) == "-2.00"


# --- prediction file loading --------------------------------------------------------


def test_load_predictions_round_trip(tmp_path):
    path = tmp_path / "preds.jsonl"
    path.write_text(
        '{"id": "1", "model": "m", "gold_index": "XI.A.5.b", "gold_status": "yes", '
        '"predicted_index": "XI.A.5.b.", "predicted_status": "yes"}\n',
        encoding="utf-8",
    )
    records = load_predictions(path)
    assert records[0].predicted_index == "XI.A.5.b."
    assert binary_accuracy(records) == 1.0


def test_load_predictions_reports_line_numbers(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text(
        '{"id": "1", "model": "m", "gold_index": "XI.A", "gold_status": "yes"}\n'
        "{broken json\n",
        encoding="utf-8",
    )
    with pytest.raises(PredictionFormatError) as excinfo:
        load_predictions(path)
    assert excinfo.value.line == 2
    assert "line 2" in str(excinfo.value)


def test_load_predictions_rejects_bad_gold(tmp_path):
    path = tmp_path / "badgold.jsonl"
    path.write_text(
        '{"id": "1", "model": "m", "gold_index": "XI..A", "gold_status": "yes"}\n',
        encoding="utf-8",
    )
    with pytest.raises(PredictionFormatError):
        load_predictions(path)
