"""Prompt-driven structured extraction of capital-control events."""

from .backends import (
    BackendError,
    ChatBackend,
    HttpChatBackend,
    MockChatBackend,
    TokenBucket,
    split_sentences,
)
from .pipeline import (
    BatchResult,
    ExtractionConfig,
    ExtractionError,
    FailureRecord,
    TransportFailure,
    ValidationFailure,
    entry_id,
    extract_event,
    run_batch,
)
from .prompts import (
    DEFAULT_EXEMPLAR_ENTRIES,
    build_system_prompt,
    build_user_prompt,
    system_prompt_hash,
)
from .schema import (
    ACTIONS,
    CCM_FIELDS,
    CONDITION_POLARITIES,
    DIRECTIONS,
    INTENSITIES,
    LEVELS,
    CcmEvent,
    Condition,
    Violation,
    event_from_payload,
    validate_event,
    validate_event_record,
)

__all__ = [
    "ACTIONS",
    "BackendError",
    "BatchResult",
    "CCM_FIELDS",
    "CONDITION_POLARITIES",
    "ChatBackend",
    "CcmEvent",
    "Condition",
    "DEFAULT_EXEMPLAR_ENTRIES",
    "DIRECTIONS",
    "ExtractionConfig",
    "ExtractionError",
    "FailureRecord",
    "HttpChatBackend",
    "INTENSITIES",
    "LEVELS",
    "MockChatBackend",
    "TokenBucket",
    "TransportFailure",
    "ValidationFailure",
    "Violation",
    "build_system_prompt",
    "build_user_prompt",
    "entry_id",
    "event_from_payload",
    "extract_event",
    "run_batch",
    "split_sentences",
    "system_prompt_hash",
    "validate_event",
    "validate_event_record",
]
