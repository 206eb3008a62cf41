"""Prompt construction, payload validation, and batch extraction tests."""
from __future__ import annotations

import io
import json

import pytest

from ccmkit.corpus import CountryMeta, parse_effective_date
from ccmkit.extraction import (
    ACTIONS,
    CCM_FIELDS,
    ExtractionConfig,
    MockChatBackend,
    TransportFailure,
    ValidationFailure,
    build_system_prompt,
    build_user_prompt,
    entry_id,
    extract_event,
    run_batch,
    system_prompt_hash,
    validate_event,
    validate_event_record,
)
from ccmkit.extraction.backends import BackendError, TokenBucket
from ccmkit.taxonomy import load_taxonomy
from conftest import DelayedMockBackend, ScriptedBackend, make_change

CHINA_TEXT = (
    "Proceeds from the issuance of shares by an overseas-listed Chinese company "
    "must be repatriated within a prescribed time and used in accordance with "
    "approved purposes."
)

TABLE_ROWS = [
    make_change(
        2014, "Germany", "XII.B.1",
        category="Provisions specific to commercial banks and other credit institutions",
        effective_date=parse_effective_date("01/01/2014"),
        description=(
            "Regulation (EU) No. 575/2013 on Prudential Requirements for Credit "
            "Institutions and Investment Firms introduced measures that may affect "
            "cross-border operations and capital adequacy within the EU banking framework."
        ),
    ),
    make_change(
        2013, "China", "X.C.1",
        category="Repatriation requirements",
        effective_date=parse_effective_date("02/07/2013"),
        description=CHINA_TEXT,
    ),
    make_change(
        2016, "United States", "XI.A.5.b",
        category="Inward direct investment",
        effective_date=parse_effective_date("09/14/2016"),
        description=(
            "The sanction program that restricted certain investments related to North "
            "Korea remained in force, affecting financial transactions involving "
            "designated entities."
        ),
    ),
]

CHINA_ENTRY = TABLE_ROWS[1]

# Hand-authored compliant payload for the repatriation-requirement row.
CHINA_PAYLOAD = {
    "action": "require approval",
    "action_source_sentence": CHINA_TEXT,
    "action_intensity": "conditional",
    "action_intensity_source_sentence": CHINA_TEXT,
    "action_direction": "outward",
    "action_direction_source_sentence": CHINA_TEXT,
    "action_level": "undefined",
    "instrument": None,
    "actor": None,
    "condition": "with",
    "condition_detail": "used in accordance with approved purposes",
    "condition_source_sentence": CHINA_TEXT,
    "beneficiary": None,
    "target_country": None,
    "target_industry": None,
    "limit_threshold": None,
    "is_trade_policy": False,
    "is_sanction": False,
    "is_national_security": False,
    "retroactive_date": None,
    "llm_reasoning": "Proceeds may only be used for approved purposes, an approval-style requirement.",
}

METAS = {
    "China": CountryMeta("China", "924", "East Asia & Pacific", "Middle income", "Upper middle income"),
    "Germany": CountryMeta("Germany", "134", "Europe & Central Asia", "High income", "High income: OECD"),
    "United States": CountryMeta("United States", "111", "North America", "High income", "High income: OECD"),
}


@pytest.fixture(scope="module")
def taxonomy():
    return load_taxonomy()


# --- prompts ------------------------------------------------------------------


def test_system_prompt_contains_json_instruction(taxonomy):
    prompt = build_system_prompt(taxonomy)
    assert "Return all results as a JSON object" in prompt


def test_system_prompt_lists_all_actions(taxonomy):
    prompt = build_system_prompt(taxonomy)
    for action in ACTIONS:
        assert f"- {action}:" in prompt


def test_system_prompt_mentions_source_sentence_rule(taxonomy):
    assert "_source_sentence" in build_system_prompt(taxonomy)


def test_system_prompt_byte_stable(taxonomy):
    assert build_system_prompt(taxonomy) == build_system_prompt(taxonomy)


def test_system_prompt_hash_moves_only_with_inputs(taxonomy):
    base = system_prompt_hash(build_system_prompt(taxonomy))
    assert base == system_prompt_hash(build_system_prompt(taxonomy))
    changed = system_prompt_hash(
        build_system_prompt(taxonomy, exemplar_entries=[{"index": "XI.A", "description": "x"}])
    )
    assert changed != base


def test_user_prompt_carries_entry(taxonomy):
    text = build_user_prompt(CHINA_ENTRY)
    body = json.loads(text)
    assert body["country"] == "China"
    assert body["description"] == CHINA_TEXT
    assert body["effective_date"] == "2013-02-07"


# --- validation ---------------------------------------------------------------


def test_validate_compliant_payload():
    assert validate_event(CHINA_PAYLOAD, CHINA_ENTRY) == []


def test_validate_flags_foreign_source_sentence():
    payload = dict(CHINA_PAYLOAD)
    payload["action_source_sentence"] = "This sentence is not in the description."
    violations = validate_event(payload, CHINA_ENTRY)
    assert any(v.field == "action" and "substring" in v.message for v in violations)


def test_validate_flags_out_of_vocabulary_action():
    payload = dict(CHINA_PAYLOAD)
    payload["action"] = "forbid"
    violations = validate_event(payload, CHINA_ENTRY)
    assert any(v.field == "action" and "vocabulary" in v.message for v in violations)


def test_validate_flags_out_of_vocabulary_intensity():
    payload = dict(CHINA_PAYLOAD)
    payload["action_intensity"] = "tightening"
    violations = validate_event(payload, CHINA_ENTRY)
    assert any(v.field == "action_intensity" for v in violations)


def test_validate_requires_source_for_populated_fields():
    payload = dict(CHINA_PAYLOAD)
    payload["instrument"] = "foreign exchange"  # populated without a source
    violations = validate_event(payload, CHINA_ENTRY)
    assert any(v.field == "instrument" and "source" in v.message for v in violations)


def test_validate_rejects_non_object_payload():
    violations = validate_event(["not", "an", "object"], CHINA_ENTRY)
    assert violations and violations[0].field == "payload"


# --- single-entry extraction ---------------------------------------------------


def test_extract_event_from_canned_payload():
    backend = ScriptedBackend(json.dumps(CHINA_PAYLOAD))
    event = extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(), backend)
    assert event.action == "require approval"
    assert event.action_intensity == "conditional"
    assert event.country == "China"
    assert event.ifs_code == "924"
    assert event.date.isoformat() == "2013-02-07"
    assert event.condition.polarity == "with"
    record = event.to_json()
    assert all(name in record for name in CCM_FIELDS)
    assert validate_event_record(record) == []


def test_extract_event_booleans_default_false():
    payload = {k: v for k, v in CHINA_PAYLOAD.items()
               if not k.startswith("is_")}
    backend = ScriptedBackend(json.dumps(payload))
    event = extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(), backend)
    assert event.is_trade_policy is False
    assert event.is_sanction is False
    assert event.is_national_security is False


def test_extract_event_rejects_bad_enum_after_budget():
    bad = dict(CHINA_PAYLOAD)
    bad["action"] = "forbid"
    backend = ScriptedBackend(json.dumps(bad))
    with pytest.raises(ValidationFailure) as excinfo:
        extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(retry_budget=1), backend)
    assert excinfo.value.attempts == 2
    assert any("action" in str(v) for v in excinfo.value.violations)
    assert excinfo.value.raw_payload is not None


def test_extract_event_corrective_reask_recovers():
    bad = dict(CHINA_PAYLOAD)
    bad["action_intensity"] = "tightening"
    backend = ScriptedBackend(json.dumps(bad), json.dumps(CHINA_PAYLOAD))
    event = extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(retry_budget=1), backend)
    assert event.action_intensity == "conditional"
    # the re-ask conversation carries the bad reply and the violation list
    second_call = backend.calls[1]
    assert second_call[2]["role"] == "assistant"
    assert "action_intensity" in second_call[3]["content"]


def test_extract_event_transport_retry_then_success():
    backend = ScriptedBackend(BackendError("boom"), json.dumps(CHINA_PAYLOAD))
    event = extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(retry_budget=1), backend)
    assert event.action == "require approval"


def test_extract_event_transport_failure_exhausts_budget():
    backend = ScriptedBackend(BackendError("boom"))
    with pytest.raises(TransportFailure):
        extract_event(CHINA_ENTRY, METAS["China"], ExtractionConfig(retry_budget=2), backend)


def test_extraction_config_invariants():
    with pytest.raises(ValueError):
        ExtractionConfig(temperature=0.7)
    with pytest.raises(ValueError):
        ExtractionConfig(max_parallel=0)
    with pytest.raises(ValueError):
        ExtractionConfig(retry_budget=-1)


def test_entry_id_stable_and_distinct():
    assert entry_id(CHINA_ENTRY) == entry_id(CHINA_ENTRY)
    assert entry_id(CHINA_ENTRY) != entry_id(TABLE_ROWS[0])


# --- batches ------------------------------------------------------------------


def test_run_batch_preserves_input_order():
    # Germany sleeps longest, so completion order inverts input order.
    backend = DelayedMockBackend({"Germany": 0.15, "China": 0.05, "United States": 0.0})
    result = run_batch(TABLE_ROWS, METAS, ExtractionConfig(max_parallel=3), backend)
    assert [e.country for e in result.events] == ["Germany", "China", "United States"]


def test_run_batch_table_row_dates():
    result = run_batch(TABLE_ROWS, METAS, ExtractionConfig(), MockChatBackend())
    assert [e.date.isoformat() for e in result.events] == [
        "2014-01-01", "2013-02-07", "2016-09-14",
    ]


def test_run_batch_failure_accounting():
    class FlakyBackend(MockChatBackend):
        def complete(self, messages, *, model, temperature):
            user = next(m for m in messages if m["role"] == "user")
            if "FAILME" in user["content"]:
                raise BackendError("injected")
            return super().complete(messages, model=model, temperature=temperature)

    entries = [
        make_change(2014, "China", "XI.A.2.a.1.i", description="A ceiling was imposed on purchases."),
        make_change(2014, "China", "XI.A.2.a.1.i", description="FAILME always."),
        make_change(2015, "China", "XI.A.5.b", description="Approval procedures were eased."),
    ]
    result = run_batch(entries, METAS, ExtractionConfig(retry_budget=1), FlakyBackend())
    assert len(result.events) == 2
    assert len(result.failures) == 1
    assert len(result.events) + len(result.failures) == len(entries)
    failure = result.failures[0]
    assert failure.attempts == 2
    assert failure.entry_id == entry_id(entries[1])


def test_run_batch_all_failures():
    backend = ScriptedBackend(BackendError("down"))
    result = run_batch(TABLE_ROWS[:1], METAS, ExtractionConfig(retry_budget=2), backend)
    assert result.events == []
    assert len(result.failures) == 1
    assert result.failures[0].attempts == 3


def test_run_batch_reruns_byte_identical():
    def run_once() -> tuple[str, str]:
        events_sink, failures_sink = io.StringIO(), io.StringIO()
        run_batch(TABLE_ROWS, METAS, ExtractionConfig(max_parallel=4), MockChatBackend(),
                  events_sink=events_sink, failures_sink=failures_sink)
        return events_sink.getvalue(), failures_sink.getvalue()

    first = run_once()
    second = run_once()
    assert first == second
    assert first[0].count("\n") == 3


def test_run_batch_sink_lines_match_returned_events():
    events_sink = io.StringIO()
    result = run_batch(TABLE_ROWS, METAS, ExtractionConfig(), MockChatBackend(),
                       events_sink=events_sink)
    lines = [json.loads(line) for line in events_sink.getvalue().splitlines()]
    assert [l["entry_id"] for l in lines] == [e.entry_id for e in result.events]


def test_batch_events_pass_posthoc_validator():
    result = run_batch(TABLE_ROWS, METAS, ExtractionConfig(), MockChatBackend())
    for event in result.events:
        assert validate_event_record(event.to_json()) == []


def test_missing_metadata_yields_none_fields():
    result = run_batch(TABLE_ROWS[:1], {}, ExtractionConfig(), MockChatBackend())
    event = result.events[0]
    assert event.ifs_code is None and event.region is None


# --- rate limiter ---------------------------------------------------------------


def test_token_bucket_blocks_when_exhausted():
    clock = [0.0]
    sleeps = []

    def fake_clock():
        return clock[0]

    def fake_sleep(duration):
        sleeps.append(duration)
        clock[0] += duration

    bucket = TokenBucket(60, clock=fake_clock, sleeper=fake_sleep)  # 1 token/second
    for _ in range(60):
        bucket.acquire()
    assert not sleeps
    bucket.acquire()  # 61st token requires a refill wait
    assert sleeps and abs(sum(sleeps) - 1.0) < 1e-6


def test_token_bucket_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        TokenBucket(0)


def test_system_prompt_hash_moves_with_taxonomy(tmp_path, taxonomy):
    override = tmp_path / "two_nodes.csv"
    override.write_text(
        "index,name,short_code,description\n"
        "XI,Capital Transactions,,Top-level section.\n"
        "XI.A,Controls on capital transactions,ka,Restrictions.\n",
        encoding="utf-8",
    )
    small = load_taxonomy(override)
    assert system_prompt_hash(build_system_prompt(small)) != system_prompt_hash(
        build_system_prompt(taxonomy)
    )


def test_field_census_matches_dataset_structure():
    assert CCM_FIELDS == (
        "year", "ifs_code", "country", "region", "income_group", "income_subgroup",
        "index_code", "category_index", "category", "date", "description",
        "retroactive_date", "action", "action_intensity", "action_direction",
        "action_level", "instrument", "actor", "condition", "beneficiary",
        "target_country", "target_industry", "limit_threshold", "is_trade_policy",
        "is_sanction", "is_national_security", "llm_reasoning",
    )
    assert len(CCM_FIELDS) == 27


def test_system_prompt_covers_every_schema_field(taxonomy):
    prompt = build_system_prompt(taxonomy)
    for name in (
        "action", "action_intensity", "action_direction", "action_level",
        "instrument", "actor", "beneficiary", "condition", "target_country",
        "target_industry", "limit_threshold", "is_trade_policy", "is_sanction",
        "is_national_security", "retroactive_date", "llm_reasoning",
    ):
        assert f'"{name}"' in prompt, name
    assert "You are a senior policy analyst" in prompt
