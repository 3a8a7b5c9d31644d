"""Evaluation metrics: accuracy, per-class precision/recall/F1 with
min~max summaries, and miss-rate aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optim import MissStats


@dataclass
class ClassReport:
    """Per-class metrics in percent.  Zero-denominator cases report 0."""

    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]

    def span(self, metric: str) -> tuple[float, float]:
        values = getattr(self, metric)
        return (min(values), max(values))

    def format_span(self, metric: str) -> str:
        lo, hi = self.span(metric)
        return f"{lo:.2f}~{hi:.2f}"


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def classification_report(predictions, labels, class_count: int) -> ClassReport:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0 or labels.size == 0:
        raise ValueError("classification_report: empty input")
    if predictions.shape != labels.shape:
        raise ValueError(
            f"classification_report: {predictions.shape} predictions vs {labels.shape} labels")
    for name, arr in (("labels", labels), ("predictions", predictions)):
        if arr.min() < 0 or arr.max() >= class_count:
            raise ValueError(f"classification_report: {name} out of range [0, {class_count})")

    confusion = np.zeros((class_count, class_count), dtype=int)
    np.add.at(confusion, (labels, predictions), 1)

    accuracy = 100.0 * confusion.trace() / confusion.sum()
    precision, recall, f1 = [], [], []
    for c in range(class_count):
        tp = confusion[c, c]
        p = 100.0 * _safe_ratio(tp, confusion[:, c].sum())
        r = 100.0 * _safe_ratio(tp, confusion[c, :].sum())
        precision.append(p)
        recall.append(r)
        f1.append(_safe_ratio(2 * p * r, p + r))
    return ClassReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


@dataclass
class MissRateCurve:
    rate: float
    curve: np.ndarray  # running misses/(t-1), one entry per completed step


def miss_rate(stats: MissStats) -> MissRateCurve:
    """Final rate misses/(steps-1) plus the running per-iteration curve.

    Probes start at the second step, so the curve's first entry is 0 and
    entry t (1-based steps) is cumulative_misses(t) / (t - 1).
    """
    if stats.steps < 1:
        raise ValueError("miss_rate: no steps recorded")
    curve = np.zeros(stats.steps)
    cum = 0
    for t in range(2, stats.steps + 1):
        idx = t - 2
        if idx < len(stats.flags) and stats.flags[idx]:
            cum += 1
        curve[t - 1] = cum / (t - 1)
    return MissRateCurve(rate=stats.rate, curve=curve)
