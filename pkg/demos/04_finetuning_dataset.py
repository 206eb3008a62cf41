"""Build the classification finetuning dataset from the sample corpus.

Constructs training pairs from final reports and from year-to-next-year
change joins, renders a chat-format example with its category reasoning
path, splits the dataset, and prints the distribution tables.
"""
import json
from pathlib import Path

from ccmkit.corpus import (
    ingest_final_report,
    ingest_yearly_changes,
    load_country_meta,
    merge_corpus,
)
from ccmkit.finetune_data import (
    SplitSpec,
    build_change_pairs,
    build_final_report_pairs,
    dataset_distribution,
    split_composition,
    split_dataset,
    to_chat_examples,
)
from ccmkit.taxonomy import load_taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

corpus = merge_corpus(
    ingest_final_report(FIXTURES / "final_reports.jsonl").entries,
    ingest_yearly_changes(FIXTURES / "yearly_changes.jsonl").entries,
)
report_pairs = build_final_report_pairs(corpus)
change_pairs, skips = build_change_pairs(corpus)
print(f"{len(report_pairs)} final-report pairs, {len(change_pairs)} change pairs, "
      f"{len(skips)} skipped changes")
for skip in skips:
    print(f"  skipped: {skip.country} {skip.year} {skip.index} ({skip.reason})")

pairs = report_pairs + change_pairs
taxonomy = load_taxonomy()
examples = to_chat_examples(pairs, taxonomy)

sample = next(e for e in examples if "Executive Order 13722" in e.user_message)
print("\nchat-format example:")
print("  user:", sample.user_message.replace("\n", " | "))
print("  assistant:", json.dumps(sample.assistant_payload))

train, validation, test = split_dataset(examples, SplitSpec(30, 4, 4, seed=0))
print(f"\nsplit: {len(train)}/{len(validation)}/{len(test)}")
print("test composition:", split_composition(test))

metas = load_country_meta(FIXTURES / "country_meta.csv")
tables = dataset_distribution(pairs, metas)
print("\nexamples by region:")
print(tables["by_region"].to_string(index=False))
print("\nmean description word count by category:")
print(tables["category_word_counts"].to_string(index=False))
