"""Chat-completion backends: generic HTTP client and a deterministic mock.

The pipeline only needs `complete(messages, model=..., temperature=...) ->
str`, so tests can inject canned or failing backends and production can
point at any HTTP chat API via CCM_API_BASE / CCM_API_KEY.
"""
from __future__ import annotations

import json
import re
import threading
import time
from typing import Protocol

from ..taxonomy import Taxonomy, load_taxonomy


class BackendError(Exception):
    """Transport-level failure talking to a chat backend."""


class ChatBackend(Protocol):
    def complete(self, messages: list[dict], *, model: str, temperature: float) -> str:
        ...  # pragma: no cover


class TokenBucket:
    """Thread-safe token bucket limiting requests per minute."""

    def __init__(self, requests_per_minute: float, clock=time.monotonic, sleeper=time.sleep):
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.capacity = float(requests_per_minute)
        self.rate = requests_per_minute / 60.0
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleeper
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Block until a request token is available."""
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class HttpChatBackend:
    """Generic chat-completions HTTP client.

    POSTs {model, temperature, messages} to `<base_url>/chat/completions`
    with a bearer token and returns choices[0].message.content. Rate
    limiting is token-bucket per backend instance.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 120.0,
        requests_per_minute: float | None = None,
        session=None,
    ):
        import requests

        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self._bucket = TokenBucket(requests_per_minute) if requests_per_minute else None
        self._session = session or requests.Session()
        self._requests = requests

    def complete(self, messages: list[dict], *, model: str, temperature: float) -> str:
        if self._bucket is not None:
            self._bucket.acquire()
        try:
            response = self._session.post(
                f"{self.base_url}/chat/completions",
                json={"model": model, "temperature": temperature, "messages": messages},
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except self._requests.RequestException as exc:
            raise BackendError(f"request failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"backend returned HTTP {response.status_code}: {response.text[:500]}")
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Split on sentence boundaries; every piece is a substring of text."""
    return [piece for piece in _SENTENCE_SPLIT.split(text) if piece]


def _rx(pattern: str) -> re.Pattern:
    return re.compile(pattern, re.IGNORECASE)


# Ordered rules; the first action whose pattern matches wins. Removal verbs
# outrank restriction nouns so "the quota was removed" reads as remove.
_ACTION_RULES: tuple[tuple[str, re.Pattern], ...] = (
    ("prohibit", _rx(r"\bprohibit|\bbanned\b|\bban\b|\bforbidden\b|\bno longer allowed\b")),
    ("suspend", _rx(r"\bsuspend|\bsuspension\b|\bhalted\b|\bmoratorium\b")),
    ("remove", _rx(r"\bremov|\babolish|\blift(?:ed|ing|s)?\b|\beliminat|\brepeal")),
    ("require approval", _rx(
        r"\bprior approval\b|\brequires? approval\b|\bapproval requirement\b"
        r"|\bmust be approved\b|\bmust register\b|\bregistration requirement\b"
    )),
    ("subject to quota", _rx(r"\bquota")),
    ("limit", _rx(
        r"\bceiling|\bcap\b|\bcapped\b|\blimit|\bmay not exceed\b|\bnot exceed"
        r"|\bthreshold\b|\bwithin a prescribed time\b|\brestricted\b"
    )),
    ("ease", _rx(r"\beased?\b|\beasing\b|\brelax|\bsimplif|\bloosen")),
    ("permit", _rx(r"\bpermit|\ballow|\bauthoriz|\blegaliz|\bmay now\b")),
    ("clarify", _rx(r"\bclarif")),
    ("amend", _rx(r"\bamend|\bmodif|\bupdated\b|\bintroduc|\brevis")),
)

_INTENSITY_OF_ACTION = {
    "prohibit": "restrictive",
    "limit": "restrictive",
    "suspend": "restrictive",
    "require approval": "conditional",
    "subject to quota": "conditional",
    "permit": "liberalizing",
    "remove": "liberalizing",
    "ease": "liberalizing",
    "amend": "neutral",
    "clarify": "neutral",
}

_INWARD_PATTERN = _rx(
    r"\binflows?\b|\binto the country\b|\bby nonresidents\b|\bfrom nonresidents\b"
    r"|\binward\b|\bforeign investment\b|\bforeign investors\b"
)
_OUTWARD_PATTERN = _rx(
    r"\boutflows?\b|\babroad by residents\b|\bto nonresidents\b|\boutward\b"
    r"|\binvest(?:ments?)? abroad\b|\brepatriat"
)

_LEVEL_RULES = (
    ("supranational", _rx(r"\(eu\)|\beuropean union\b|\beu-wide\b|\bsupranational\b")),
    ("subnational", _rx(r"\bprovincial\b|\bmunicipal\b|\blocal authorit|\bstate-level\b")),
    ("national", _rx(
        r"\bcentral bank\b|\bgovernment\b|\bministry\b|\blaw\b|\bdecree\b"
        r"|\bexecutive order\b|\bregulation\b|\bparliament\b|\bauthorities\b"
    )),
)

_ACTOR_RULES = (
    ("central bank", _rx(r"\bcentral bank\b|\bpeople's bank\b|\breserve bank\b|\bmonetary authority\b")),
    ("securities regulator", _rx(r"\bsecurities (?:commission|regulator|regulatory)\b|\bexchange commission\b")),
    ("ministry of finance", _rx(r"\bministry of finance\b|\btreasury\b")),
    ("investment committee", _rx(r"\binvestment committee\b|\breview board\b")),
    ("government", _rx(r"\bgovernment\b|\bexecutive order\b|\bdecree\b|\bparliament\b|\bpresident\b")),
)

_INSTRUMENT_RULES = (
    ("foreign exchange", _rx(r"\bforeign exchange\b|\bfx market\b|\bexchange market\b")),
    ("equity securities", _rx(r"\bshares\b|\bequity\b|\bstocks?\b")),
    ("debt securities", _rx(r"\bbonds?\b|\bdebt securities\b|\bnotes\b")),
    ("money market instruments", _rx(r"\bmoney market\b")),
    ("collective investment", _rx(r"\bmutual funds?\b|\bcollective investment\b|\binvestment funds?\b")),
    ("derivatives", _rx(r"\bderivatives?\b|\boptions\b|\bfutures\b")),
    ("credit", _rx(r"\bcredits?\b|\bloans?\b|\blending\b")),
    ("real estate", _rx(r"\breal estate\b|\bresidential property\b|\bland\b")),
    ("licensing", _rx(r"\blicens")),
    ("reserve requirement", _rx(r"\breserve requirement\b")),
)

_BENEFICIARY_RULES = (
    ("exporters", _rx(r"\bexporters?\b")),
    ("importers", _rx(r"\bimporters?\b")),
    ("travelers", _rx(r"\btravell?ers?\b")),
    ("institutional investors", _rx(r"\binstitutional investors?\b|\bqualified investors?\b")),
    ("foreign investors", _rx(r"\bforeign investors?\b|\bforeign participation\b")),
    ("nonresidents", _rx(r"\bnonresidents?\b")),
    ("residents", _rx(r"\bresidents?\b")),
)

_TARGET_COUNTRIES = (
    ("North Korea", _rx(r"\bnorth korea\b|\bdemocratic people's republic of korea\b|\bdprk\b")),
    ("Iran", _rx(r"\biran\b")),
    ("Russia", _rx(r"\brussia\b")),
    ("Syria", _rx(r"\bsyria\b")),
    ("Belarus", _rx(r"\bbelarus\b")),
    ("Venezuela", _rx(r"\bvenezuela\b")),
    ("Cuba", _rx(r"\bcuba\b")),
    ("Myanmar", _rx(r"\bmyanmar\b")),
)

_TARGET_INDUSTRIES = (
    ("banking", _rx(r"\bbank(?:s|ing)?\b|\bcredit institutions?\b")),
    ("real estate", _rx(r"\breal estate\b|\bresidential property\b")),
    ("energy", _rx(r"\benergy\b|\boil\b|\bnatural gas\b")),
    ("telecommunications", _rx(r"\btelecom")),
    ("defense", _rx(r"\bdefen[cs]e\b|\bmilitary\b")),
    ("mining", _rx(r"\bmining\b")),
    ("insurance", _rx(r"\binsurance\b")),
    ("infrastructure", _rx(r"\binfrastructure\b")),
    ("securities", _rx(r"\bsecurities\b|\bcapital market\b")),
)

_TRADE_PATTERN = _rx(r"\bimports?\b|\bexports?\b|\btariffs?\b|\btrade in goods\b|\bcustoms\b")
_SANCTION_PATTERN = _rx(
    r"\bsanctions?\b|\bblocking property\b|\basset freeze\b|\bfrozen assets\b"
    r"|\bdesignated (?:entities|persons)\b|\bembargo\b"
)
_SECURITY_PATTERN = _rx(
    r"\bnational security\b|\bsecurity (?:grounds|review)\b|\bterroris|\bnational interest\b"
)

_CONDITION_WITHOUT = _rx(r"\bwithout (?:prior )?approval\b|\bno approval required\b|\bfreely\b")
_CONDITION_WITH = _rx(
    r"\bsubject to (?:prior )?approval\b|\bprior approval\b|\bonly on request\b|\bsubject to quota\b"
)

_LIMIT_PATTERN = re.compile(
    r"(\d+(?:\.\d+)?\s*(?:percent|%)|(?:USD|EUR|CNY|RMB|GBP|JPY)\s?[\d,.]+(?:\s*(?:million|billion))?)",
    re.IGNORECASE,
)


class MockChatBackend:
    """Deterministic rule-based stand-in for a chat model.

    Reads the entry JSON out of the user message and derives a compliant
    payload with keyword heuristics, citing the sentence each value came
    from. Identical inputs always produce identical bytes, which makes
    batch reruns byte-for-byte reproducible.
    """

    def __init__(self, taxonomy: Taxonomy | None = None):
        self._taxonomy = taxonomy or load_taxonomy()

    def complete(self, messages: list[dict], *, model: str, temperature: float) -> str:
        user = next((m for m in messages if m.get("role") == "user"), None)
        if user is None:
            raise BackendError("no user message to read")
        try:
            entry = json.loads(user["content"])
        except (KeyError, json.JSONDecodeError) as exc:
            raise BackendError(f"user message is not an entry object: {exc}") from exc
        payload = self._extract(entry)
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    def _extract(self, entry: dict) -> dict:
        description = str(entry.get("description", ""))
        sentences = split_sentences(description) or [description]
        payload: dict = {}

        def sentence_with(pattern: re.Pattern | None = None) -> str:
            if pattern is not None:
                for sentence in sentences:
                    if pattern.search(sentence):
                        return sentence
            return sentences[0]

        def put(name: str, value, source: str | None) -> None:
            payload[name] = value
            if source is not None:
                payload[f"{name}_source_sentence"] = source

        action, action_pattern = self._first_match(_ACTION_RULES, description) or ("amend", None)
        action_sentence = sentence_with(action_pattern)
        put("action", action, action_sentence)
        put("action_intensity", _INTENSITY_OF_ACTION[action], action_sentence)

        direction, direction_source = self._direction(entry, description, sentence_with)
        put("action_direction", direction, direction_source)

        level_match = self._first_match(_LEVEL_RULES, description)
        if level_match:
            put("action_level", level_match[0], sentence_with(level_match[1]))
        else:
            put("action_level", "undefined", None)

        for field_name, rules in (
            ("actor", _ACTOR_RULES),
            ("instrument", _INSTRUMENT_RULES),
            ("beneficiary", _BENEFICIARY_RULES),
            ("target_industry", _TARGET_INDUSTRIES),
        ):
            match = self._first_match(rules, description)
            if match:
                put(field_name, match[0], sentence_with(match[1]))
            else:
                put(field_name, None, None)

        country = str(entry.get("country", ""))
        target = None
        for name, pattern in _TARGET_COUNTRIES:
            if name != country and pattern.search(description):
                target = (name, pattern)
                break
        put("target_country", target[0] if target else None,
            sentence_with(target[1]) if target else None)

        limit_match = _LIMIT_PATTERN.search(description)
        if limit_match:
            put("limit_threshold", limit_match.group(0),
                sentence_with(re.compile(re.escape(limit_match.group(0)))))
        else:
            put("limit_threshold", None, None)

        if _CONDITION_WITHOUT.search(description):
            put("condition", "without", sentence_with(_CONDITION_WITHOUT))
            payload["condition_detail"] = "no approval required"
        elif _CONDITION_WITH.search(description):
            put("condition", "with", sentence_with(_CONDITION_WITH))
            payload["condition_detail"] = "subject to approval"
        else:
            put("condition", None, None)
            payload["condition_detail"] = None

        for name, pattern in (
            ("is_trade_policy", _TRADE_PATTERN),
            ("is_sanction", _SANCTION_PATTERN),
            ("is_national_security", _SECURITY_PATTERN),
        ):
            if pattern.search(description):
                put(name, True, sentence_with(pattern))
            else:
                put(name, False, None)

        payload["retroactive_date"] = None
        payload["llm_reasoning"] = (
            f"Action '{action}' inferred from: \"{action_sentence}\". Intensity "
            f"'{_INTENSITY_OF_ACTION[action]}' follows from the action type."
        )
        return payload

    def _direction(self, entry: dict, description: str, sentence_with):
        index = entry.get("index")
        if index and index in self._taxonomy:
            mapped = self._taxonomy.direction_of(index)
            if mapped != "undefined":
                # Direction follows from the regulated transaction type, so the
                # citation falls back to the leading sentence.
                return mapped, sentence_with()
        inward = _INWARD_PATTERN.search(description)
        outward = _OUTWARD_PATTERN.search(description)
        if inward and outward:
            return "both", sentence_with(_INWARD_PATTERN)
        if inward:
            return "inward", sentence_with(_INWARD_PATTERN)
        if outward:
            return "outward", sentence_with(_OUTWARD_PATTERN)
        return "undefined", None

    @staticmethod
    def _first_match(rules, text: str):
        for value, pattern in rules:
            if pattern.search(text):
                return value, pattern
        return None
