"""Extraction pipeline: per-entry calls with retries and bounded-parallel batches.

Batch output order always matches input order regardless of completion
order, every input ends up in exactly one of (events, failures), and events
are flushed to the sink as soon as all earlier entries have settled, so a
crash loses at most the in-flight items.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from ..corpus import CountryMeta
from ..taxonomy import Taxonomy, load_taxonomy
from .backends import BackendError, ChatBackend
from .prompts import build_system_prompt, build_user_prompt
from .schema import CcmEvent, Violation, event_from_payload, validate_event

logger = logging.getLogger(__name__)


@dataclass
class ExtractionConfig:
    """Knobs for the extraction run.

    Temperature is pinned to 0 so identical inputs give identical outputs
    on a deterministic backend.
    """

    model: str = "ccm-extractor"
    temperature: float = 0.0
    max_parallel: int = 4
    retry_budget: int = 2
    endpoint: str | None = None
    api_key: str | None = None
    requests_per_minute: float | None = None

    def __post_init__(self):
        if self.temperature != 0:
            raise ValueError("temperature must be 0 for reproducible extraction")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be at least 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be non-negative")


class ExtractionError(Exception):
    """Base class for per-entry extraction failures."""

    def __init__(self, message: str, attempts: int, raw_payload: str | None = None,
                 violations: list[Violation] | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.raw_payload = raw_payload
        self.violations = violations or []


class TransportFailure(ExtractionError):
    """Backend unreachable or misbehaving after all retries."""


class ValidationFailure(ExtractionError):
    """Model output still violates the schema after all corrective re-asks."""


@dataclass
class FailureRecord:
    entry_id: str
    country: str
    year: int
    index: str | None
    reason: str
    attempts: int
    raw_payload: str | None = None
    violations: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "country": self.country,
            "year": self.year,
            "index": self.index,
            "reason": self.reason,
            "attempts": self.attempts,
            "raw_payload": self.raw_payload,
            "violations": self.violations,
        }


@dataclass
class BatchResult:
    events: list[CcmEvent]
    failures: list[FailureRecord]


def entry_id(entry) -> str:
    """Stable identifier for a report/change entry (used for resume)."""
    effective = getattr(entry, "effective_date", None)
    key = "\x1f".join(
        [
            type(entry).__name__,
            entry.country,
            str(entry.year),
            getattr(entry, "index", None) or "",
            effective.isoformat() if effective else "",
            entry.description,
        ]
    )
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def _corrective_message(violations: list[Violation]) -> str:
    lines = "\n".join(f"- {v}" for v in violations)
    return (
        "The previous reply violated the output contract:\n"
        f"{lines}\n"
        "Return a corrected JSON object with every required field and a "
        "'<field>_source_sentence' quote for each populated field."
    )


def extract_event(
    entry,
    meta: CountryMeta | None,
    config: ExtractionConfig,
    backend: ChatBackend,
    system_prompt: str | None = None,
    taxonomy: Taxonomy | None = None,
) -> CcmEvent:
    """Extract one entry into a validated CcmEvent.

    Transport errors and schema violations both consume the retry budget;
    schema violations trigger a corrective re-ask that appends the bad
    reply and the validator's violation list to the conversation.
    """
    if system_prompt is None:
        system_prompt = build_system_prompt(taxonomy or load_taxonomy())
    messages = [
        {"role": "system", "content": system_prompt},
        {"role": "user", "content": build_user_prompt(entry)},
    ]
    attempts = 0
    max_attempts = 1 + config.retry_budget
    last_transport: BackendError | None = None
    last_raw: str | None = None
    last_violations: list[Violation] = []

    while attempts < max_attempts:
        attempts += 1
        try:
            raw = backend.complete(messages, model=config.model, temperature=config.temperature)
        except BackendError as exc:
            last_transport = exc
            logger.debug("transport error on attempt %d: %s", attempts, exc)
            continue

        last_transport = None
        last_raw = raw
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            last_violations = [Violation("payload", f"not valid JSON: {exc}")]
        else:
            last_violations = validate_event(payload, entry)
            if not last_violations:
                return event_from_payload(entry, meta, payload, entry_id=entry_id(entry))
        messages = messages + [
            {"role": "assistant", "content": raw},
            {"role": "user", "content": _corrective_message(last_violations)},
        ]

    if last_transport is not None and last_raw is None:
        raise TransportFailure(str(last_transport), attempts=attempts)
    raise ValidationFailure(
        "model output failed validation after retries",
        attempts=attempts,
        raw_payload=last_raw,
        violations=last_violations,
    )


def _failure_from_error(entry, exc: ExtractionError) -> FailureRecord:
    return FailureRecord(
        entry_id=entry_id(entry),
        country=entry.country,
        year=entry.year,
        index=getattr(entry, "index", None),
        reason=str(exc),
        attempts=exc.attempts,
        raw_payload=exc.raw_payload,
        violations=[str(v) for v in exc.violations],
    )


def run_batch(
    entries: list,
    metas: dict[str, CountryMeta],
    config: ExtractionConfig,
    backend: ChatBackend,
    events_sink=None,
    failures_sink=None,
    taxonomy: Taxonomy | None = None,
    progress=None,
) -> BatchResult:
    """Extract a batch with up to config.max_parallel in-flight requests.

    Results are written to the sinks (and returned) in input order; each
    line is flushed when written. Event assembly and serialization happen
    on the calling thread only. `progress`, when given, is called with
    (settled_count, total) after each entry settles.
    """
    system_prompt = build_system_prompt(taxonomy or load_taxonomy())
    events: list[CcmEvent] = []
    failures: list[FailureRecord] = []

    def _work(entry):
        return extract_event(entry, metas.get(entry.country), config, backend,
                             system_prompt=system_prompt)

    settled: dict[int, object] = {}
    next_to_write = 0

    def _flush():
        nonlocal next_to_write
        while next_to_write in settled:
            outcome = settled.pop(next_to_write)
            if isinstance(outcome, CcmEvent):
                events.append(outcome)
                if events_sink is not None:
                    events_sink.write(
                        json.dumps(outcome.to_json(), ensure_ascii=False, sort_keys=True) + "\n"
                    )
                    events_sink.flush()
            else:
                failures.append(outcome)
                if failures_sink is not None:
                    failures_sink.write(
                        json.dumps(outcome.to_json(), ensure_ascii=False, sort_keys=True) + "\n"
                    )
                    failures_sink.flush()
            next_to_write += 1

    total = len(entries)
    settled_count = 0
    with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
        pending = {}
        for ordinal, entry in enumerate(entries):
            future = pool.submit(_work, entry)
            pending[future] = (ordinal, entry)
        while pending:
            done, _ = wait(list(pending), return_when=FIRST_COMPLETED)
            for future in done:
                ordinal, entry = pending.pop(future)
                try:
                    settled[ordinal] = future.result()
                except ExtractionError as exc:
                    settled[ordinal] = _failure_from_error(entry, exc)
                settled_count += 1
                _flush()
                if progress is not None:
                    progress(settled_count, total)

    _flush()
    return BatchResult(events=events, failures=failures)
