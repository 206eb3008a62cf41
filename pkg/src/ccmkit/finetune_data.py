"""Construction of the classification finetuning dataset.

Three stages over a merged corpus: training pairs from final reports
(naturally aligned input/answer), training pairs from yearly changes
(status joined from the following year's final report), and chat-format
transformation with the category reasoning path. Splitting is seeded
uniform sampling; the seed is part of the recorded run configuration.
"""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass

from .corpus import Corpus, CountryMeta, word_count
from .taxonomy import OUT_OF_TAXONOMY, Taxonomy, UnknownIndexError, is_capital_control

logger = logging.getLogger(__name__)

PAIR_KINDS = ("final_report", "yearly_change")

#: target_category used for entries outside the capital-control hierarchy.
OUT_OF_TAXONOMY_TARGET = OUT_OF_TAXONOMY


@dataclass(frozen=True)
class TrainingPair:
    country: str
    year: int
    input_text: str
    gold_index: str
    gold_category: str
    gold_status: str
    pair_kind: str
    is_capital_control: bool


@dataclass(frozen=True)
class SkipRecord:
    """A yearly change that could not be joined to a next-year status."""

    country: str
    year: int
    index: str | None
    reason: str

    def to_json(self) -> dict:
        return {"country": self.country, "year": self.year, "index": self.index,
                "reason": self.reason}


@dataclass(frozen=True)
class TrainingExample:
    """One system/user/assistant chat triple."""

    system_message: str
    user_message: str
    assistant_payload: dict

    def to_messages(self) -> dict:
        return {
            "messages": [
                {"role": "system", "content": self.system_message},
                {"role": "user", "content": self.user_message},
                {"role": "assistant",
                 "content": json.dumps(self.assistant_payload, ensure_ascii=False)},
            ]
        }


@dataclass(frozen=True)
class SplitSpec:
    train_size: int
    validation_size: int
    test_size: int
    seed: int = 0

    def __post_init__(self):
        if min(self.train_size, self.validation_size, self.test_size) < 0:
            raise ValueError("split sizes must be non-negative")

    @property
    def total(self) -> int:
        return self.train_size + self.validation_size + self.test_size


def build_final_report_pairs(corpus: Corpus) -> list[TrainingPair]:
    """One pair per final-report row; input is the category description."""
    pairs = []
    for entry in corpus.all_reports():
        pairs.append(
            TrainingPair(
                country=entry.country,
                year=entry.year,
                input_text=entry.description,
                gold_index=entry.index,
                gold_category=entry.category,
                gold_status=entry.status,
                pair_kind="final_report",
                is_capital_control=is_capital_control(entry.index),
            )
        )
    return pairs


def build_change_pairs(corpus: Corpus) -> tuple[list[TrainingPair], list[SkipRecord]]:
    """Pairs from yearly changes, with the status read from year+1 reports.

    A change in year y for (country, index) takes its resulting status from
    the same country and index in the year y+1 final report. Changes that
    cannot be joined are skipped with a reason, never silently dropped, so
    pairs + skips always account for every change.
    """
    pairs: list[TrainingPair] = []
    skips: list[SkipRecord] = []
    for change in corpus.all_changes():
        if change.index is None:
            skips.append(SkipRecord(change.country, change.year, None, "missing index"))
            continue
        if not corpus.has_reports(change.country, change.year + 1):
            skips.append(
                SkipRecord(change.country, change.year, change.index, "missing year+1 report")
            )
            continue
        status = corpus.report_status(change.country, change.year + 1, change.index)
        if status is None:
            skips.append(
                SkipRecord(change.country, change.year, change.index, "category absent")
            )
            continue
        pairs.append(
            TrainingPair(
                country=change.country,
                year=change.year,
                input_text=change.description,
                gold_index=change.index,
                gold_category=change.category,
                gold_status=status,
                pair_kind="yearly_change",
                is_capital_control=is_capital_control(change.index),
            )
        )
    return pairs, skips


def build_system_message(taxonomy: Taxonomy) -> str:
    """Classification instructions embedding the category hierarchy.

    Each category line carries its dotted index, name, and one-sentence
    description, indented by depth so the model can walk the hierarchy from
    the outer layer inward.
    """
    lines = []
    for node in taxonomy:
        indent = "  " * (node.depth - 1)
        lines.append(f"{indent}- {node.index}. {node.name}: {node.description}")
    hierarchy = "\n".join(lines)
    return (
        "You are an expert in identifying the capital policy change and updating "
        "the IMF category status based on the input text. Please select from the "
        "outer layer to the inner layer. Please consider both the country's "
        "capital control status and background and the given text. Entries that "
        "do not belong to any capital-control category take the target category "
        f"{OUT_OF_TAXONOMY_TARGET}. Here are the hierarchical structures for the "
        "categories with their descriptions:\n\n" + hierarchy + "\n"
    )


def build_user_message(pair: TrainingPair) -> str:
    return f"Country: {pair.country}\nPolicy change: {pair.input_text}"


def _assistant_payload(pair: TrainingPair, taxonomy: Taxonomy) -> dict:
    if pair.is_capital_control:
        try:
            chain = taxonomy.ancestors(pair.gold_index)
        except UnknownIndexError:
            raise UnknownIndexError(
                f"capital-control index {pair.gold_index!r} not in the taxonomy"
            ) from None
        path: dict[str, str] = {}
        for node in chain[:-1]:
            path[f"category_l{node.depth}"] = node.label()
        target = chain[-1]
        path["target_category"] = target.label()
        index_out = target.index + "."
        category = target.name
    else:
        path = {"target_category": OUT_OF_TAXONOMY_TARGET}
        index_out = pair.gold_index + "." if pair.gold_index else None
        category = pair.gold_category
    return {
        "category_path": path,
        "index": index_out,
        "category": category,
        "status": pair.gold_status,
    }


def to_chat_example(pair: TrainingPair, taxonomy: Taxonomy,
                    system_message: str | None = None) -> TrainingExample:
    """Transform one training pair into the chat completion format.

    The assistant payload walks the ancestor chain from depth 1 down to the
    target category, each rendered as "INDEX.Name", and emits the index in
    trailing-dot form. Capital-control indexes must resolve in the
    taxonomy; everything else uses the out-of-taxonomy schema variant.
    """
    return TrainingExample(
        system_message=system_message or build_system_message(taxonomy),
        user_message=build_user_message(pair),
        assistant_payload=_assistant_payload(pair, taxonomy),
    )


def to_chat_examples(pairs: list[TrainingPair], taxonomy: Taxonomy) -> list[TrainingExample]:
    system_message = build_system_message(taxonomy)
    return [to_chat_example(pair, taxonomy, system_message) for pair in pairs]


def parse_assistant_payload(content: str) -> dict:
    """Parse an assistant message back into its structured payload."""
    payload = json.loads(content)
    if not isinstance(payload, dict):
        raise ValueError("assistant payload is not a JSON object")
    missing = {"category_path", "index", "category", "status"} - payload.keys()
    if missing:
        raise ValueError(f"assistant payload missing keys {sorted(missing)}")
    if "target_category" not in payload["category_path"]:
        raise ValueError("assistant category_path has no target_category")
    return payload


def split_dataset(
    examples: list, spec: SplitSpec
) -> tuple[list, list, list]:
    """Partition examples into train/validation/test under a fixed seed.

    Sampling is uniform at random; the split sizes must sum to the number
    of examples. Identical seeds give identical partitions.
    """
    if spec.total != len(examples):
        raise ValueError(
            f"split sizes sum to {spec.total}, but there are {len(examples)} examples"
        )
    order = list(range(len(examples)))
    random.Random(spec.seed).shuffle(order)
    train_idx = order[: spec.train_size]
    val_idx = order[spec.train_size : spec.train_size + spec.validation_size]
    test_idx = order[spec.train_size + spec.validation_size :]
    return (
        [examples[i] for i in train_idx],
        [examples[i] for i in val_idx],
        [examples[i] for i in test_idx],
    )


def split_composition(examples: list[TrainingExample]) -> dict[str, int]:
    """Capital-control vs non-capital-control census of a split."""
    counts = {"capital_control": 0, "non_capital_control": 0}
    for example in examples:
        target = example.assistant_payload["category_path"]["target_category"]
        if target == OUT_OF_TAXONOMY_TARGET:
            counts["non_capital_control"] += 1
        else:
            counts["capital_control"] += 1
    return counts


def dataset_distribution(pairs: list[TrainingPair], metas: dict[str, CountryMeta] | None = None):
    """Counts by year, income group, region, and category, plus word counts.

    Returns a dict of DataFrames; the year, income-group, and region tables
    each total len(pairs) (countries without metadata land in "unknown"),
    the category tables cover capital-control pairs only.
    """
    import pandas as pd

    metas = metas or {}

    def _meta(country: str, attr: str) -> str:
        meta = metas.get(country)
        return getattr(meta, attr) if meta else "unknown"

    frame = pd.DataFrame(
        {
            "year": [p.year for p in pairs],
            "income_group": [_meta(p.country, "income_group") for p in pairs],
            "region": [_meta(p.country, "region") for p in pairs],
            "category_index": [p.gold_index for p in pairs],
            "is_capital_control": [p.is_capital_control for p in pairs],
            "word_count": [word_count(p.input_text) for p in pairs],
        }
    )
    cc = frame[frame["is_capital_control"]]
    return {
        "by_year": frame.groupby("year").size().reset_index(name="count"),
        "by_income_group": frame.groupby("income_group").size().reset_index(name="count"),
        "by_region": frame.groupby("region").size().reset_index(name="count"),
        "by_category": cc.groupby("category_index").size().reset_index(name="count"),
        "category_word_counts": (
            cc.groupby("category_index")["word_count"].mean().reset_index(name="mean_word_count")
        ),
    }


def write_chat_jsonl(examples: list[TrainingExample], path) -> int:
    """One chat triple per line, UTF-8; returns the number of lines."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_messages(), ensure_ascii=False) + "\n")
            count += 1
    return count


def write_skip_log(skips: list[SkipRecord], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for skip in skips:
            fh.write(json.dumps(skip.to_json(), ensure_ascii=False) + "\n")
            count += 1
    return count
