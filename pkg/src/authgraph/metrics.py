"""Binary classification metrics for the detection task.

Precision, recall, and F1 are macro-averaged over both classes; per-class
ratios with zero denominators contribute 0. AUC uses the rank (Mann-Whitney)
formulation with ties counted half, equivalent to trapezoidal ROC
integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingleClass


def compute_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """2x2 counts, rows = true class, cols = predicted class (0 benign, 1 malicious)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((2, 2), dtype=np.int64)
    for t in (0, 1):
        for p in (0, 1):
            cm[t, p] = int(((y_true == t) & (y_pred == p)).sum())
    return cm


def _prf(cm: np.ndarray, positive: int) -> tuple[float, float, float]:
    tp = cm[positive, positive]
    fp = cm[1 - positive, positive]
    fn = cm[positive, 1 - positive]
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return float(precision), float(recall), float(f1)


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float
    confusion: list  # 2x2 nested list

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "accuracy": self.accuracy, "auc": self.auc, "confusion": self.confusion}


def score_predictions(y_true, y_pred, scores) -> Metrics:
    """Macro-averaged metric suite from hard predictions plus ranking scores."""
    cm = confusion_matrix(y_true, y_pred)
    p0, r0, f0 = _prf(cm, 0)
    p1, r1, f1 = _prf(cm, 1)
    total = int(cm.sum())
    acc = float((cm[0, 0] + cm[1, 1]) / total) if total else 0.0
    return Metrics(
        precision=(p0 + p1) / 2.0,
        recall=(r0 + r1) / 2.0,
        f1=(f0 + f1) / 2.0,
        accuracy=acc,
        auc=compute_auc(scores, y_true),
        confusion=cm.tolist(),
    )


def aggregate_metrics(per_seed: list[Metrics]) -> dict:
    """Mean and population standard deviation over seeds, plus summed confusion."""
    keys = ("precision", "recall", "f1", "accuracy", "auc")
    vals = {k: np.array([getattr(m, k) for m in per_seed], dtype=np.float64) for k in keys}
    return {
        "per_seed": [m.to_dict() for m in per_seed],
        "mean": {k: float(v.mean()) for k, v in vals.items()},
        "std": {k: float(v.std(ddof=0)) for k, v in vals.items()},
        "confusion_total": np.sum([m.confusion for m in per_seed], axis=0).tolist(),
        "std_estimator": "population",
    }
