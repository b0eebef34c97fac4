"""Classification metrics, near-miss accuracy, and the severity ablation report.

Near-miss accuracy counts a prediction as correct when it lands within a
configurable Fibonacci-rank distance of the actual class (default 1), the
"close enough for planning" convention development teams apply in practice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .dataset import DEFAULT_FIB, FibClassMap


@dataclass
class ConfusionMatrix:
    """counts[a, p] = instances of actual class a predicted as class p."""

    counts: np.ndarray
    class_values: list[int]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]


@dataclass
class ClassMetrics:
    class_value: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class Averages:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class EvalReport:
    per_class: list[ClassMetrics]
    accuracy: float
    near_miss_accuracy: float
    macro_avg: Averages
    weighted_avg: Averages
    confusion: ConfusionMatrix
    include_severity: bool

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {
                    "class": m.class_value,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for m in self.per_class
            ],
            "accuracy": self.accuracy,
            "near_miss_accuracy": self.near_miss_accuracy,
            "macro_avg": self.macro_avg.to_dict(),
            "weighted_avg": self.weighted_avg.to_dict(),
            "confusion": self.confusion.counts.tolist(),
            "class_values": list(self.confusion.class_values),
            "include_severity": self.include_severity,
        }


@dataclass
class AblationDiff:
    with_severity: EvalReport
    without_severity: EvalReport
    deltas: dict

    def to_dict(self) -> dict:
        return {
            "with_severity": self.with_severity.to_dict(),
            "without_severity": self.without_severity.to_dict(),
            "deltas": self.deltas,
        }


def confusion(
    actuals: Sequence[int],
    preds: Sequence[int],
    classes: FibClassMap = DEFAULT_FIB,
) -> ConfusionMatrix:
    """Tally actual/predicted class indices; zero-support classes keep their row."""
    a = np.asarray(actuals, dtype=int)
    p = np.asarray(preds, dtype=int)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actuals vs {p.size} predictions")
    c = classes.n_classes
    if a.size and (a.min() < 0 or a.max() >= c or p.min() < 0 or p.max() >= c):
        raise ValueError(f"class indices must be in 0..{c - 1}")
    counts = np.zeros((c, c), dtype=int)
    np.add.at(counts, (a, p), 1)
    return ConfusionMatrix(counts=counts, class_values=list(classes.values))


def _safe_div(num: float, den: float) -> float:
    # zero denominators report 0.0, matching the printed 0.00 convention
    return num / den if den > 0 else 0.0


def class_metrics(m: ConfusionMatrix) -> list[ClassMetrics]:
    out = []
    for c in range(m.n_classes):
        tp = float(m.counts[c, c])
        precision = _safe_div(tp, float(m.counts[:, c].sum()))
        recall = _safe_div(tp, float(m.counts[c, :].sum()))
        f1 = _safe_div(2 * precision * recall, precision + recall)
        out.append(
            ClassMetrics(
                class_value=m.class_values[c],
                precision=precision,
                recall=recall,
                f1=f1,
                support=int(m.counts[c, :].sum()),
            )
        )
    return out


def accuracy(m: ConfusionMatrix) -> float:
    return _safe_div(float(np.trace(m.counts)), float(m.total))


def near_miss_accuracy(
    actuals: Sequence[int],
    preds: Sequence[int],
    rank_tolerance: int = 1,
) -> float:
    """Fraction of predictions within rank_tolerance Fibonacci ranks of actual."""
    a = np.asarray(actuals, dtype=int)
    p = np.asarray(preds, dtype=int)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actuals vs {p.size} predictions")
    if a.size == 0:
        return 0.0
    return float(np.mean(np.abs(a - p) <= rank_tolerance))


def evaluate(
    actuals: Sequence[int],
    preds: Sequence[int],
    include_severity: bool,
    classes: FibClassMap = DEFAULT_FIB,
    rank_tolerance: int = 1,
) -> EvalReport:
    """Full report over class indices: per-class P/R/F1, averages, near-miss."""
    m = confusion(actuals, preds, classes)
    per_class = class_metrics(m)
    supports = np.array([c.support for c in per_class], dtype=float)
    total = supports.sum()

    macro = Averages(
        precision=float(np.mean([c.precision for c in per_class])),
        recall=float(np.mean([c.recall for c in per_class])),
        f1=float(np.mean([c.f1 for c in per_class])),
    )
    if total > 0:
        weighted = Averages(
            precision=float(np.dot(supports, [c.precision for c in per_class]) / total),
            recall=float(np.dot(supports, [c.recall for c in per_class]) / total),
            f1=float(np.dot(supports, [c.f1 for c in per_class]) / total),
        )
    else:
        weighted = Averages(0.0, 0.0, 0.0)

    return EvalReport(
        per_class=per_class,
        accuracy=accuracy(m),
        near_miss_accuracy=near_miss_accuracy(actuals, preds, rank_tolerance),
        macro_avg=macro,
        weighted_avg=weighted,
        confusion=m,
        include_severity=include_severity,
    )


def ablation_compare(with_report: EvalReport, without_report: EvalReport) -> AblationDiff:
    """Per-metric deltas (without - with); both reports must cover the same instances."""
    with_supports = [c.support for c in with_report.per_class]
    without_supports = [c.support for c in without_report.per_class]
    if with_supports != without_supports:
        raise ValueError(
            f"reports cover different test sets: supports {with_supports} vs {without_supports}"
        )
    deltas = {
        "accuracy": without_report.accuracy - with_report.accuracy,
        "near_miss_accuracy": without_report.near_miss_accuracy - with_report.near_miss_accuracy,
        "macro_f1": without_report.macro_avg.f1 - with_report.macro_avg.f1,
        "weighted_f1": without_report.weighted_avg.f1 - with_report.weighted_avg.f1,
        "per_class_f1": {
            str(w.class_value): wo.f1 - w.f1
            for w, wo in zip(with_report.per_class, without_report.per_class)
        },
    }
    return AblationDiff(with_severity=with_report, without_severity=without_report, deltas=deltas)


def render_report(report: EvalReport) -> str:
    """Plain-text classification report, two-decimal rendering."""
    lines = []
    title = "with severity" if report.include_severity else "without severity"
    lines.append(f"Classification report ({title})")
    lines.append(f"{'class':>8} {'precision':>10} {'recall':>8} {'f1':>6} {'support':>8}")
    for m in report.per_class:
        lines.append(
            f"{m.class_value:>8} {m.precision:>10.2f} {m.recall:>8.2f} {m.f1:>6.2f} {m.support:>8}"
        )
    lines.append(
        f"{'macro':>8} {report.macro_avg.precision:>10.2f} "
        f"{report.macro_avg.recall:>8.2f} {report.macro_avg.f1:>6.2f} {report.confusion.total:>8}"
    )
    lines.append(
        f"{'weighted':>8} {report.weighted_avg.precision:>10.2f} "
        f"{report.weighted_avg.recall:>8.2f} {report.weighted_avg.f1:>6.2f} {report.confusion.total:>8}"
    )
    lines.append(f"accuracy: {report.accuracy:.2f}  near-miss accuracy: {report.near_miss_accuracy:.2f}")
    return "\n".join(lines)


def render_ablation(diff: AblationDiff) -> str:
    """Side-by-side per-class F1 with and without severity."""
    lines = []
    lines.append(f"{'Story Points':>12} {'With Severity':>16} {'Without Severity':>18}")
    lines.append(f"{'':>12} {'F1':>16} {'F1':>18}")
    for w, wo in zip(diff.with_severity.per_class, diff.without_severity.per_class):
        lines.append(f"{w.class_value:>12.2f} {w.f1:>16.2f} {wo.f1:>18.2f}")
    lines.append(
        f"{'accuracy':>12} {diff.with_severity.accuracy:>16.2f} "
        f"{diff.without_severity.accuracy:>18.2f}"
    )
    lines.append(
        f"{'near-miss':>12} {diff.with_severity.near_miss_accuracy:>16.2f} "
        f"{diff.without_severity.near_miss_accuracy:>18.2f}"
    )
    return "\n".join(lines)


def load_table5() -> list[dict]:
    """Bundled 22-row prediction fixture: story_index, actual_sp, and the two
    predicted story points (with/without severity)."""
    text = resources.files("spforge").joinpath("data/table5.jsonl").read_text(encoding="utf-8")
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if len(rows) != 22:
        raise ValueError(f"fixture should have 22 rows, found {len(rows)}")
    return rows
