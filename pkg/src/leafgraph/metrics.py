"""Confusion matrices and accuracy / precision / recall / F1.

Per-class metrics and their weighted or macro averages are computed in exact
rational arithmetic from the integer counts and converted to float at the
end, so algebraic identities (weighted recall == accuracy) hold exactly in
the reported numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64; rows = true class, cols = predicted
    class_table: list[str] | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.counts.ndim != 2 or self.counts.shape[1] != k:
            raise DataError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise DataError("confusion matrix counts must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds, truth, k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape:
        raise DataError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if preds.size and (preds.max() >= k or truth.max() >= k or min(preds.min(), truth.min()) < 0):
        raise DataError("class index out of range")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def metrics(cm: ConfusionMatrix, averaging: str = "weighted") -> dict:
    """Accuracy plus averaged precision/recall/F1 and the per-class values.

    Zero-denominator per-class values contribute 0.  Weighted averaging uses
    class support (true counts) as weights; macro is the unweighted mean.
    """
    if averaging not in ("weighted", "macro"):
        raise DataError(f"averaging must be weighted|macro, got {averaging!r}")
    n = cm.total
    if n == 0:
        raise DataError("empty confusion matrix")
    c = cm.counts
    k = cm.k
    per_class = []
    for i in range(k):
        tp = int(c[i, i])
        support = int(c[i].sum())
        predicted = int(c[:, i].sum())
        prec = Fraction(tp, predicted) if predicted else Fraction(0)
        rec = Fraction(tp, support) if support else Fraction(0)
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
        per_class.append((prec, rec, f1, support))

    if averaging == "weighted":
        weights = [Fraction(s, n) for (_, _, _, s) in per_class]
    else:
        weights = [Fraction(1, k)] * k
    avg = [
        sum(w * vals[j] for w, vals in zip(weights, per_class))
        for j in range(3)
    ]
    accuracy = Fraction(int(np.trace(c)), n)
    return {
        "accuracy": float(accuracy),
        "precision": float(avg[0]),
        "recall": float(avg[1]),
        "f1": float(avg[2]),
        "per_class": [
            {
                "precision": float(p),
                "recall": float(r),
                "f1": float(f),
                "support": s,
            }
            for (p, r, f, s) in per_class
        ],
    }


def report_json(report: dict, class_table: list[str] | None = None) -> str:
    payload = dict(report)
    if class_table is not None:
        for cls, row in zip(class_table, payload["per_class"]):
            row["class"] = cls
    return json.dumps(payload, indent=2)


def report_table(report: dict, class_table: list[str] | None = None) -> str:
    """Aligned text table with one row per class plus the averages."""
    names = class_table or [str(i) for i in range(len(report["per_class"]))]
    width = max([len(s) for s in names] + [8])
    lines = [
        f"{'class':<{width}} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}"
    ]
    for name, row in zip(names, report["per_class"]):
        lines.append(
            f"{name:<{width}} {row['precision']:>9.4f} {row['recall']:>9.4f}"
            f" {row['f1']:>9.4f} {row['support']:>8d}"
        )
    lines.append(
        f"{'average':<{width}} {report['precision']:>9.4f} {report['recall']:>9.4f}"
        f" {report['f1']:>9.4f} {sum(r['support'] for r in report['per_class']):>8d}"
    )
    lines.append(f"accuracy {report['accuracy']:.4f}")
    return "\n".join(lines)
