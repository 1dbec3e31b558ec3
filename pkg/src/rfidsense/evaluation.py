"""Accuracy, confusion matrices and per-class precision/recall/F1."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .domain import DomainError, LabeledSample, MaterialClass


@dataclass(eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in ``classes`` order."""

    counts: np.ndarray
    classes: Tuple[MaterialClass, ...]

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.classes = tuple(self.classes)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise DomainError(f"confusion matrix must be {k}x{k}")
        if (self.counts < 0).any():
            raise DomainError("confusion counts must be non-negative")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.counts, other.counts)

    @classmethod
    def from_labels(cls, y_true, y_pred, classes: Sequence[MaterialClass]) -> "ConfusionMatrix":
        k = len(classes)
        cm = np.zeros((k, k), dtype=np.int64)
        np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(cm, tuple(classes))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def row_normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def most_confused_pair(self) -> Tuple[MaterialClass, MaterialClass, int]:
        """Unordered class pair with the largest combined off-diagonal count."""
        sym = self.counts + self.counts.T
        np.fill_diagonal(sym, -1)
        i, j = np.unravel_index(int(np.argmax(sym)), sym.shape)
        a, b = sorted((int(i), int(j)))
        return self.classes[a], self.classes[b], int(sym[a, b])

    def to_csv(self, out: Union[str, Path]) -> None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\pred"] + [c.name for c in self.classes])
            for c, row in zip(self.classes, self.counts):
                w.writerow([c.name] + [int(v) for v in row])

    def render(self, percent: bool = False) -> str:
        names = [c.name for c in self.classes]
        width = max(len(n) for n in names + ["true\\pred"]) + 1
        cell = max(7, max(len(n) for n in names) + 1)
        lines = ["true\\pred".ljust(width) + "".join(n.rjust(cell) for n in names)]
        data = self.row_normalized() * 100.0 if percent else self.counts
        for n, row in zip(names, data):
            cells = "".join((f"{v:.1f}%" if percent else str(int(v))).rjust(cell) for v in row)
            lines.append(n.ljust(width) + cells)
        return "\n".join(lines)


def evaluate(model, samples: Sequence[LabeledSample]) -> Tuple[float, ConfusionMatrix]:
    """Accuracy and confusion matrix of a ClassifierModel on labelled samples."""
    from .features import samples_to_arrays
    from .mlp import predict_batch

    if not samples:
        raise DomainError("test set is empty")
    x, _ = samples_to_arrays(samples)
    if x.shape[1] != model.network.spec.input_dim:
        raise DomainError(f"samples have {x.shape[1]} features, model expects {model.network.spec.input_dim}")
    y_true = model.label_to_output([s.label for s in samples])
    y_pred, _ = predict_batch(model.network, model.prepare(x))
    cm = ConfusionMatrix.from_labels(y_true, y_pred, model.classes)
    return cm.accuracy, cm


@dataclass(frozen=True)
class ClassMetrics:
    material: MaterialClass
    precision: float
    recall: float
    f1: float
    support: int
    precision_undefined: bool = False
    recall_undefined: bool = False
    f1_undefined: bool = False


def _ratio(num: float, den: float) -> Tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def per_class_report(cm: ConfusionMatrix) -> List[ClassMetrics]:
    """Precision/recall/F1 per class; 0/0 ratios come back as 0 with a flag set."""
    c = cm.counts
    out = []
    for k, cls in enumerate(cm.classes):
        tp = float(c[k, k])
        prec, pu = _ratio(tp, float(c[:, k].sum()))
        rec, ru = _ratio(tp, float(c[k, :].sum()))
        f1, fu = _ratio(2 * prec * rec, prec + rec)
        out.append(ClassMetrics(cls, prec, rec, f1, int(c[k, :].sum()), pu, ru, fu or pu or ru))
    return out


def metrics_dict(accuracy: float, cm: ConfusionMatrix) -> Dict:
    return {
        "accuracy": accuracy,
        "n_samples": cm.total,
        "classes": [c.name for c in cm.classes],
        "confusion_matrix": cm.counts.tolist(),
        "per_class": [
            {
                "class": m.material.name,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
                "undefined": [k for k, flag in (("precision", m.precision_undefined),
                                                ("recall", m.recall_undefined),
                                                ("f1", m.f1_undefined)) if flag],
            }
            for m in per_class_report(cm)
        ],
    }


def write_metrics(metrics: Dict, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_report(accuracy: float, cm: ConfusionMatrix) -> str:
    lines = [f"accuracy: {accuracy:.4f}  (n={cm.total})", "", cm.render(), "", cm.render(percent=True), ""]
    lines.append(f"{'class':<14}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}")
    for m in per_class_report(cm):
        flag = "*" if m.precision_undefined or m.recall_undefined else ""
        lines.append(f"{m.material.name:<14}{m.precision:>10.4f}{m.recall:>10.4f}{m.f1:>10.4f}{m.support:>9}{flag}")
    return "\n".join(lines)
