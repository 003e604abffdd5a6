"""Metrics table writers (CSV and JSON)."""

import csv
import io
import json
from pathlib import Path
from typing import Dict, Union

from bintpl.evaluation.ablation import EvaluationResult

COLUMNS = (
    "variant",
    "targets",
    "precision",
    "recall",
    "f1",
    "true_positives",
    "reported",
    "expected",
    "version_precision",
    "mean_version_distance",
)


def format_metrics_csv(result: EvaluationResult) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for variant in result.variants:
        writer.writerow(variant.as_row())
    return buffer.getvalue()


def metrics_document(result: EvaluationResult) -> Dict:
    return {
        "variants": [variant.as_row() for variant in result.variants],
        "recall_at_k": {str(k): round(r, 6) for k, r in sorted(result.recall_at_k.items())},
    }


def format_metrics_table(result: EvaluationResult) -> str:
    """Plain-text table for the terminal."""
    lines = [f"{'variant':<16s} {'P':>7s} {'R':>7s} {'F1':>7s} {'VP':>7s} {'VD':>7s}"]
    for variant in result.variants:
        row = variant.as_row()
        lines.append(
            f"{row['variant']:<16s} {row['precision']:7.3f} {row['recall']:7.3f} {row['f1']:7.3f} "
            f"{row['version_precision']:7.3f} {row['mean_version_distance']:7.3f}"
        )
    if result.recall_at_k:
        lines.append("retrieval recall: " + "  ".join(f"@{k} {r:.3f}" for k, r in sorted(result.recall_at_k.items())))
    return "\n".join(lines) + "\n"


def write_metrics(result: EvaluationResult, output_dir: Union[str, Path]) -> None:
    """Write metrics.csv and metrics.json into output_dir."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "metrics.csv").write_text(format_metrics_csv(result), encoding="utf-8")
    (output_dir / "metrics.json").write_text(
        json.dumps(metrics_document(result), indent=2) + "\n", encoding="utf-8"
    )
