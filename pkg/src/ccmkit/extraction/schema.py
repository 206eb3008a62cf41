"""Structured capital-control event records and payload validation.

The wire contract with the chat backend is a flat JSON object: one key per
extracted field plus a "<field>_source_sentence" key quoting the sentence
of the source description that supports the extraction. Validation returns
violations as data; transport and retry policy live in pipeline.py.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

from ..corpus import parse_effective_date

ACTIONS = (
    "prohibit",
    "limit",
    "suspend",
    "require approval",
    "subject to quota",
    "permit",
    "remove",
    "ease",
    "amend",
    "clarify",
)

INTENSITIES = ("restrictive", "liberalizing", "conditional", "neutral")
DIRECTIONS = ("inward", "outward", "both", "undefined")
LEVELS = ("supranational", "national", "subnational", "undefined")
CONDITION_POLARITIES = ("with", "without")

#: The 27 fields of an event record, in canonical order.
CCM_FIELDS = (
    "year",
    "ifs_code",
    "country",
    "region",
    "income_group",
    "income_subgroup",
    "index_code",
    "category_index",
    "category",
    "date",
    "description",
    "retroactive_date",
    "action",
    "action_intensity",
    "action_direction",
    "action_level",
    "instrument",
    "actor",
    "condition",
    "beneficiary",
    "target_country",
    "target_industry",
    "limit_threshold",
    "is_trade_policy",
    "is_sanction",
    "is_national_security",
    "llm_reasoning",
)

#: Fields filled by the model (everything else is metadata from the entry).
EXTRACTED_TEXT_FIELDS = (
    "instrument",
    "actor",
    "beneficiary",
    "target_country",
    "target_industry",
    "limit_threshold",
)
EXTRACTED_BOOL_FIELDS = ("is_trade_policy", "is_sanction", "is_national_security")


@dataclass(frozen=True)
class Condition:
    """Additional-requirement flag: polarity plus free-text detail."""

    polarity: str
    detail: str | None = None

    def to_json(self) -> dict:
        return {"polarity": self.polarity, "detail": self.detail}


@dataclass(frozen=True)
class Violation:
    """One contract violation in a candidate payload; data, not an error."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass
class CcmEvent:
    """One extracted capital-control intervention (27 annotated fields).

    source_sentences maps extracted field names to the verbatim supporting
    sentence; entry_id ties the event back to its source entry.
    """

    year: int
    ifs_code: str | None
    country: str
    region: str | None
    income_group: str | None
    income_subgroup: str | None
    index_code: str | None
    category_index: str | None
    category: str
    date: date | None
    description: str
    retroactive_date: str | None
    action: str
    action_intensity: str
    action_direction: str
    action_level: str
    instrument: str | None
    actor: str | None
    condition: Condition | None
    beneficiary: str | None
    target_country: str | None
    target_industry: str | None
    limit_threshold: str | None
    is_trade_policy: bool
    is_sanction: bool
    is_national_security: bool
    llm_reasoning: str | None
    source_sentences: dict[str, str] = field(default_factory=dict)
    entry_id: str | None = None

    def to_json(self) -> dict:
        out = {}
        for name in CCM_FIELDS:
            value = getattr(self, name)
            if isinstance(value, date):
                value = value.isoformat()
            elif isinstance(value, Condition):
                value = value.to_json()
            out[name] = value
        out["source_sentences"] = dict(sorted(self.source_sentences.items()))
        out["entry_id"] = self.entry_id
        return out


def _description_of(entry) -> str:
    return entry if isinstance(entry, str) else entry.description


def _needs_source(name: str, value) -> bool:
    """Whether an extracted value must carry a supporting source sentence.

    Affirmative values need support: action and intensity always, direction
    and level when not "undefined", booleans when true, text fields and the
    condition and retroactive date when non-null.
    """
    if name in ("action", "action_intensity"):
        return value is not None
    if name in ("action_direction", "action_level"):
        return value is not None and value != "undefined"
    if name in EXTRACTED_BOOL_FIELDS:
        return value is True
    return value is not None


def _check_source(name: str, payload: dict, description: str, violations: list[Violation]) -> None:
    sentence = payload.get(f"{name}_source_sentence")
    if not isinstance(sentence, str) or not sentence.strip():
        violations.append(Violation(name, "missing source sentence for populated field"))
    elif sentence not in description:
        violations.append(
            Violation(name, "source sentence is not a substring of the description")
        )


def validate_event(payload, entry) -> list[Violation]:
    """Check a raw model payload against the event contract.

    Returns the empty list iff the payload satisfies every invariant:
    enums in vocabulary, booleans boolean, dates parseable, and every
    populated extracted field backed by a source sentence that appears
    verbatim in the entry description.
    """
    if not isinstance(payload, dict):
        return [Violation("payload", "model output is not a JSON object")]

    description = _description_of(entry)
    violations: list[Violation] = []

    action = payload.get("action")
    if action is None:
        violations.append(Violation("action", "required field is missing or null"))
    elif action not in ACTIONS:
        violations.append(Violation("action", f"value {action!r} not in the 10-action vocabulary"))

    intensity = payload.get("action_intensity")
    if intensity is None:
        violations.append(Violation("action_intensity", "required field is missing or null"))
    elif intensity not in INTENSITIES:
        violations.append(
            Violation("action_intensity", f"value {intensity!r} not in vocabulary")
        )

    direction = payload.get("action_direction")
    if direction is not None and direction not in DIRECTIONS:
        violations.append(Violation("action_direction", f"value {direction!r} not in vocabulary"))
    level = payload.get("action_level")
    if level is not None and level not in LEVELS:
        violations.append(Violation("action_level", f"value {level!r} not in vocabulary"))

    for name in EXTRACTED_BOOL_FIELDS:
        value = payload.get(name)
        if value is not None and not isinstance(value, bool):
            violations.append(Violation(name, f"expected boolean, got {value!r}"))

    for name in EXTRACTED_TEXT_FIELDS + ("llm_reasoning",):
        value = payload.get(name)
        if value is not None and not isinstance(value, str):
            violations.append(Violation(name, f"expected string or null, got {value!r}"))

    condition = payload.get("condition")
    if condition is not None and condition not in CONDITION_POLARITIES:
        violations.append(
            Violation("condition", f"value {condition!r} not in {CONDITION_POLARITIES}")
        )
    detail = payload.get("condition_detail")
    if detail is not None and not isinstance(detail, str):
        violations.append(Violation("condition_detail", f"expected string or null, got {detail!r}"))

    retro = payload.get("retroactive_date")
    if retro is not None:
        if not isinstance(retro, str):
            violations.append(Violation("retroactive_date", f"expected date string, got {retro!r}"))
        else:
            try:
                parse_effective_date(retro)
            except ValueError as exc:
                violations.append(Violation("retroactive_date", str(exc)))

    checked = (
        ("action", action),
        ("action_intensity", intensity),
        ("action_direction", direction),
        ("action_level", level),
        ("condition", condition),
        ("retroactive_date", retro),
    ) + tuple((name, payload.get(name)) for name in EXTRACTED_TEXT_FIELDS + EXTRACTED_BOOL_FIELDS)
    for name, value in checked:
        if _needs_source(name, value):
            _check_source(name, payload, description, violations)

    return violations


def validate_event_record(record: dict) -> list[Violation]:
    """Post-hoc check of a serialized event (one parsed JSONL object).

    Verifies that all 27 fields are present (possibly null), enums are in
    vocabulary, booleans are booleans, and every source sentence is a
    substring of the record's own description.
    """
    violations: list[Violation] = []
    for name in CCM_FIELDS:
        if name not in record:
            violations.append(Violation(name, "field missing from serialized event"))
    if violations:
        return violations

    if record["action"] not in ACTIONS:
        violations.append(Violation("action", f"value {record['action']!r} not in vocabulary"))
    if record["action_intensity"] not in INTENSITIES:
        violations.append(
            Violation("action_intensity", f"value {record['action_intensity']!r} not in vocabulary")
        )
    if record["action_direction"] not in DIRECTIONS:
        violations.append(
            Violation("action_direction", f"value {record['action_direction']!r} not in vocabulary")
        )
    if record["action_level"] not in LEVELS:
        violations.append(
            Violation("action_level", f"value {record['action_level']!r} not in vocabulary")
        )
    for name in EXTRACTED_BOOL_FIELDS:
        if not isinstance(record[name], bool):
            violations.append(Violation(name, f"expected boolean, got {record[name]!r}"))
    condition = record["condition"]
    if condition is not None:
        if not isinstance(condition, dict) or condition.get("polarity") not in CONDITION_POLARITIES:
            violations.append(Violation("condition", f"malformed condition {condition!r}"))

    description = record["description"]
    sources = record.get("source_sentences") or {}
    for name, sentence in sources.items():
        if not isinstance(sentence, str) or sentence not in description:
            violations.append(
                Violation(name, "source sentence is not a substring of the description")
            )
    for name in ("action", "action_intensity"):
        if name not in sources:
            violations.append(Violation(name, "missing source sentence for populated field"))
    for name in ("action_direction", "action_level"):
        if record[name] != "undefined" and name not in sources:
            violations.append(Violation(name, "missing source sentence for populated field"))
    for name in EXTRACTED_TEXT_FIELDS:
        if record[name] is not None and name not in sources:
            violations.append(Violation(name, "missing source sentence for populated field"))
    for name in EXTRACTED_BOOL_FIELDS:
        if record[name] is True and name not in sources:
            violations.append(Violation(name, "missing source sentence for populated field"))
    if record["condition"] is not None and "condition" not in sources:
        violations.append(Violation("condition", "missing source sentence for populated field"))

    return violations


def event_from_payload(entry, meta, payload: dict, entry_id: str | None = None) -> CcmEvent:
    """Assemble a validated payload plus entry metadata into a CcmEvent.

    Callers must have run validate_event first; this function only applies
    the documented defaults (undefined enums, false booleans, null text).
    """
    sources: dict[str, str] = {}
    for key, value in payload.items():
        if key.endswith("_source_sentence") and isinstance(value, str):
            sources[key[: -len("_source_sentence")]] = value

    condition = None
    if payload.get("condition") is not None:
        condition = Condition(
            polarity=payload["condition"], detail=payload.get("condition_detail")
        )

    return CcmEvent(
        year=entry.year,
        ifs_code=meta.ifs_code if meta else None,
        country=entry.country,
        region=meta.region if meta else None,
        income_group=meta.income_group if meta else None,
        income_subgroup=meta.income_subgroup if meta else None,
        index_code=getattr(entry, "code", None),
        category_index=entry.index,
        category=entry.category,
        date=getattr(entry, "effective_date", None),
        description=entry.description,
        retroactive_date=payload.get("retroactive_date"),
        action=payload["action"],
        action_intensity=payload["action_intensity"],
        action_direction=payload.get("action_direction") or "undefined",
        action_level=payload.get("action_level") or "undefined",
        instrument=payload.get("instrument"),
        actor=payload.get("actor"),
        condition=condition,
        beneficiary=payload.get("beneficiary"),
        target_country=payload.get("target_country"),
        target_industry=payload.get("target_industry"),
        limit_threshold=payload.get("limit_threshold"),
        is_trade_policy=bool(payload.get("is_trade_policy") or False),
        is_sanction=bool(payload.get("is_sanction") or False),
        is_national_security=bool(payload.get("is_national_security") or False),
        llm_reasoning=payload.get("llm_reasoning"),
        source_sentences=sources,
        entry_id=entry_id,
    )
