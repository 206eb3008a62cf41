"""Score the sample prediction files and render the comparison report.

Binary accuracy asks "capital control or not", status accuracy compares
yes/no outcomes, and hierarchical accuracy requires every level from the
root down to level k to match. The delta row subtracts the best
baseline model column by column.
"""
from pathlib import Path

from ccmkit.evaluation import (
    build_report,
    hierarchical_accuracy,
    load_predictions,
    render_report_text,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

records = load_predictions(FIXTURES / "predictions_baseline.jsonl")
records += load_predictions(FIXTURES / "predictions_finetuned.jsonl")
print(f"{len(records)} prediction records across "
      f"{len({r.model_name for r in records})} models\n")

table = build_report(records)
print(render_report_text(table))

finetuned = [r for r in records if r.model_name == "ccm-llama-ft"]
print("level-by-level detail for the finetuned model (levels 1-6):")
for k in range(1, 7):
    fraction, denominator = hierarchical_accuracy(finetuned, k)
    shown = f"{fraction:.4f}" if fraction is not None else "undef"
    print(f"  L{k}: accuracy {shown} over {denominator} gold capital-control records")
