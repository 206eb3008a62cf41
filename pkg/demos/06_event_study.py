"""Fund-flow event study around inward capital-control events.

Builds the fund-level flow panel from the sample holdings, selects
inward events from a mock extraction run, stacks the 13-month windows,
and estimates event-time coefficients with two-way fixed effects and
country-clustered standard errors.
"""
from pathlib import Path

from ccmkit.corpus import ingest_yearly_changes, load_country_meta
from ccmkit.extraction import ExtractionConfig, MockChatBackend, run_batch
from ccmkit.eventstudy import (
    build_event_frame,
    compute_fund_flows,
    estimate_event_study,
    format_month,
    load_holdings,
    means_frame,
    select_events,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

holdings = load_holdings(FIXTURES / "holdings.csv")
panel = compute_fund_flows(holdings, flow_def="delta")
defined = [r for r in panel if r.flowpct is not None]
print(f"{len(holdings)} holdings -> {len(panel)} fund-country-month rows "
      f"({len(defined)} with defined flow percentage)")

changes = ingest_yearly_changes(FIXTURES / "yearly_changes.jsonl").entries
metas = load_country_meta(FIXTURES / "country_meta.csv")
extracted = run_batch(changes, metas, ExtractionConfig(), MockChatBackend())
events = select_events([e.to_json() for e in extracted.events])
print(f"\n{len(events)} inward event specs:")
for event in events:
    print(f"  {event.country:14} {format_month(event.event_month)}  group {event.group}")

frame, report = build_event_frame(panel, events, window=6)
print(f"\nframe: {report.emitted} rows emitted, {report.missing} missing "
      f"(expected {report.expected})")

result = estimate_event_study(frame, cluster_level="country")
print(f"clusters: {result.n_clusters} countries, {result.n_obs} observations")
print("\nevent-time coefficients (group R = restrictive or conditional):")
print(f"  {'tau':>4}  {'beta(L)':>10}  {'se(L)':>8}  {'beta(R)':>10}  {'se(R)':>8}")
for tau in range(-6, 7):
    row = [f"{tau:>4}"]
    for group in ("L", "R"):
        beta = result.coefficients[(tau, group)]
        se = result.standard_errors[(tau, group)]
        row.append(f"{beta:>10.5f}  {se:>8.5f}")
    print("  " + "  ".join(row))

print("\ndescriptive means with 95% intervals:")
print(means_frame(result.means).to_string(index=False))
