"""Shared fixtures: tiny corpora, scripted backends, fixture-set paths."""
from __future__ import annotations

import json
import time
from pathlib import Path

import pytest

from ccmkit import corpus as corpus_mod
from ccmkit.extraction.backends import MockChatBackend

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


class ScriptedBackend:
    """Chat backend replaying a queue of responses.

    Queue items may be strings (returned), exceptions (raised), or
    callables invoked with the message list. The last item repeats once
    the queue drains.
    """

    def __init__(self, *script):
        self.script = list(script)
        self.calls: list[list[dict]] = []

    def complete(self, messages, *, model, temperature):
        self.calls.append(messages)
        item = self.script.pop(0) if len(self.script) > 1 else self.script[0]
        if isinstance(item, Exception):
            raise item
        if callable(item):
            return item(messages)
        return item


class DelayedMockBackend(MockChatBackend):
    """Mock backend that sleeps per entry so completion order != input order."""

    def __init__(self, delays_by_country=None):
        super().__init__()
        self.delays = delays_by_country or {}

    def complete(self, messages, *, model, temperature):
        user = next(m for m in messages if m["role"] == "user")
        entry = json.loads(user["content"])
        time.sleep(self.delays.get(entry.get("country"), 0.0))
        return super().complete(messages, model=model, temperature=temperature)


@pytest.fixture
def scripted_backend_cls():
    return ScriptedBackend


@pytest.fixture
def delayed_mock_cls():
    return DelayedMockBackend


def make_report(year, country, index, status="yes", description="Prior approval is required.",
                category="Test category", code=None) -> corpus_mod.ReportEntry:
    return corpus_mod.ReportEntry(
        year=year, country=country, index=index, category=category,
        code=code, status=status, description=description,
    )


def make_change(year, country, index, description="The ceiling was removed.",
                category="Test category", effective_date=None) -> corpus_mod.ChangeEntry:
    return corpus_mod.ChangeEntry(
        year=year, country=country, index=index, category=category,
        effective_date=effective_date, description=description,
    )


@pytest.fixture
def report_factory():
    return make_report


@pytest.fixture
def change_factory():
    return make_change
