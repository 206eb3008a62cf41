"""Ingest the sample report and change files and summarize the corpus.

Shows country-name canonicalization, the rejects report for malformed
rows, the merged (country, year) buckets, and the per-year count/word
table.
"""
from pathlib import Path

from ccmkit.corpus import (
    corpus_stats,
    ingest_final_report,
    ingest_yearly_changes,
    merge_corpus,
    normalize_country,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

print("Name canonicalization merges spelling variants:")
for raw in ("Hong Kong SAR", "Türkiye", "Islamic State of Afghanistan", "France"):
    print(f"  {raw!r} -> {normalize_country(raw)!r}")

reports = ingest_final_report(FIXTURES / "final_reports.jsonl")
changes = ingest_yearly_changes(FIXTURES / "yearly_changes.jsonl")
print(f"\nreports: {len(reports.entries)} accepted, {len(reports.rejects)} rejected")
print(f"changes: {len(changes.entries)} accepted, {len(changes.rejects)} rejected")
for reject in reports.rejects + changes.rejects:
    print(f"  reject at row {reject.row}: {reject.reason}")

corpus = merge_corpus(reports.entries, changes.entries)
print(f"\n{len(corpus)} (country, year) buckets:")
for bucket in corpus:
    print(f"  {bucket.country} {bucket.year}: {len(bucket.reports)} report rows, "
          f"{len(bucket.changes)} changes")

print("\nPer-year corpus statistics:")
print(corpus_stats(corpus).to_string(index=False))
