"""Structured extraction over the deterministic mock backend.

Builds the two-part prompt, runs one entry end to end, shows the
validated 27-field event with its per-field source sentences, then runs
a parallel batch and checks the accounting identity.
"""
import json
from pathlib import Path

from ccmkit.corpus import ingest_yearly_changes, load_country_meta
from ccmkit.extraction import (
    ExtractionConfig,
    MockChatBackend,
    build_system_prompt,
    extract_event,
    run_batch,
    system_prompt_hash,
)
from ccmkit.taxonomy import load_taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

taxonomy = load_taxonomy()
prompt = build_system_prompt(taxonomy)
print(f"system prompt: {len(prompt)} bytes, sha256 {system_prompt_hash(prompt)[:16]}...")
print("first lines:")
for line in prompt.splitlines()[:4]:
    print(f"  {line}")

changes = ingest_yearly_changes(FIXTURES / "yearly_changes.jsonl").entries
metas = load_country_meta(FIXTURES / "country_meta.csv")
config = ExtractionConfig(max_parallel=4)
backend = MockChatBackend(taxonomy)

entry = next(e for e in changes if e.country == "United States" and e.year == 2016)
event = extract_event(entry, metas.get(entry.country), config, backend)
print(f"\none extracted event ({entry.country}, {entry.effective_date}):")
print(json.dumps(event.to_json(), indent=2, sort_keys=True))

result = run_batch(changes, metas, config, backend)
print(f"\nbatch: {len(result.events)} events + {len(result.failures)} failures "
      f"= {len(changes)} entries")
actions = {}
for e in result.events:
    actions[e.action] = actions.get(e.action, 0) + 1
print("action census:", dict(sorted(actions.items())))
