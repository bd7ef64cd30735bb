"""ID classification metrics and threshold-sweep OOD detection metrics.

Score convention throughout: larger score means more ID-like. Threshold
sweeps group tied scores, so every metric here is invariant under strictly
monotone transformations of the scores.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError, ParameterError

Array = np.ndarray


@dataclass
class IdMetrics:
    acc: float
    precision: float
    recall: float
    f1: float
    wp: float
    wf1: float
    per_class_acc: list[float]
    confusion: np.ndarray  # (K, K), rows = gold, cols = prediction

    def as_dict(self) -> dict:
        return {
            "acc": self.acc, "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "wp": self.wp, "wf1": self.wf1,
            "per_class_acc": list(self.per_class_acc),
            "confusion": self.confusion.tolist(),
        }


@dataclass
class OodMetrics:
    fpr95: float
    der: float
    aupr_in: float
    aupr_out: float
    auroc: float

    def as_dict(self) -> dict:
        return {"fpr95": self.fpr95, "der": self.der, "aupr_in": self.aupr_in,
                "aupr_out": self.aupr_out, "auroc": self.auroc}


@dataclass
class EvalReport:
    id_metrics: IdMetrics
    ood_metrics: dict[str, OodMetrics]
    score_table: dict[str, list[dict]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "id_metrics": self.id_metrics.as_dict(),
            "ood_metrics": {k: v.as_dict() for k, v in
                            sorted(self.ood_metrics.items())},
            "score_table": {k: v for k, v in sorted(self.score_table.items())},
        }


def confusion_matrix(preds, golds, num_classes: int) -> Array:
    preds = np.asarray(preds, dtype=int)
    golds = np.asarray(golds, dtype=int)
    if preds.shape != golds.shape:
        raise ParameterError(
            f"metrics: {len(preds)} predictions vs {len(golds)} gold labels"
        )
    if preds.size and (preds.min() < 0 or preds.max() >= num_classes
                       or golds.min() < 0 or golds.max() >= num_classes):
        raise ParameterError("metrics: label outside 0..K-1")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (golds, preds), 1)
    return cm


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def id_metrics(preds, golds, num_classes: int) -> IdMetrics:
    """Six-way ID report: accuracy, macro P/R/F1, support-weighted WP/WF1.

    Per-class ratios with empty denominators contribute 0.
    """
    cm = confusion_matrix(preds, golds, num_classes)
    total = cm.sum()
    if total == 0:
        raise ParameterError("metrics: empty input")
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    prec_c = np.array([_safe_div(tp[i], predicted[i]) for i in range(num_classes)])
    rec_c = np.array([_safe_div(tp[i], support[i]) for i in range(num_classes)])
    f1_c = np.array([
        _safe_div(2 * prec_c[i] * rec_c[i], prec_c[i] + rec_c[i])
        for i in range(num_classes)
    ])
    weights = support / total
    precision = float(prec_c.mean())
    recall = float(rec_c.mean())
    return IdMetrics(
        acc=float(tp.sum() / total),
        precision=precision,
        recall=recall,
        f1=_safe_div(2 * precision * recall, precision + recall),
        wp=float((weights * prec_c).sum()),
        wf1=float((weights * f1_c).sum()),
        per_class_acc=[_safe_div(tp[i], support[i]) for i in range(num_classes)],
        confusion=cm,
    )


def _check_two_classes(scores, is_id):
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(is_id, dtype=bool)
    if scores.shape != flags.shape:
        raise ParameterError("metrics: scores and flags must have equal length")
    if flags.all() or not flags.any():
        raise MetricError(
            "metrics: both ID and OOD samples are required for a threshold sweep"
        )
    return scores, flags


def _sweep(scores: Array, flags: Array):
    """TPR/FPR at each unique threshold, descending (predict ID iff s >= t)."""
    thresholds = np.unique(scores)[::-1]
    n_id = int(flags.sum())
    n_ood = int((~flags).sum())
    tpr = np.array([(scores[flags] >= t).sum() / n_id for t in thresholds])
    fpr = np.array([(scores[~flags] >= t).sum() / n_ood for t in thresholds])
    return thresholds, tpr, fpr


def roc_auroc(scores, is_id):
    """ROC curve points and trapezoidal AUROC (ties counted half).

    The area is accumulated in integer arithmetic (both the trapezoid sum
    and the tie-averaged pair count are the rational
    numerator / (2 * n_id * n_ood)), so the result equals the
    Mann-Whitney statistic bit-for-bit.
    """
    scores, flags = _check_two_classes(scores, is_id)
    n_id = int(flags.sum())
    n_ood = int((~flags).sum())
    thresholds = np.unique(scores)[::-1]
    numerator = 0
    cum_id = 0
    fpr_pts, tpr_pts = [0.0], [0.0]
    cum_ood = 0
    for t in thresholds:
        in_group = scores == t
        a = int((in_group & flags).sum())
        b = int((in_group & ~flags).sum())
        numerator += b * (2 * cum_id + a)
        cum_id += a
        cum_ood += b
        tpr_pts.append(cum_id / n_id)
        fpr_pts.append(cum_ood / n_ood)
    auroc = numerator / (2 * n_id * n_ood)
    return list(zip(fpr_pts, tpr_pts)), auroc


def aupr(scores, is_id, positive: str = "ID") -> float:
    """Step-summed area under the precision-recall curve.

    ``positive`` selects which side counts as the positive class; the OOD
    sweep runs in ascending score order (predict OOD iff score <= t).
    """
    scores, flags = _check_two_classes(scores, is_id)
    if positive not in ("ID", "OOD"):
        raise ParameterError(f"metrics: positive must be 'ID' or 'OOD', "
                             f"got {positive!r}")
    if positive == "ID":
        pos = flags
        thresholds = np.unique(scores)[::-1]
        hit = lambda t: scores >= t
    else:
        pos = ~flags
        thresholds = np.unique(scores)
        hit = lambda t: scores <= t
    n_pos = int(pos.sum())
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        sel = hit(t)
        tp = int((sel & pos).sum())
        recall = tp / n_pos
        precision = tp / int(sel.sum())
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return float(area)


def fpr95_der(scores, is_id, tpr_floor: float = 0.95):
    """FPR and detection error rate at the TPR >= 95% operating point.

    The threshold is the largest score value whose TPR reaches the floor
    (which also minimizes FPR among qualifying thresholds); DER assumes
    equal ID/OOD priors.
    """
    scores, flags = _check_two_classes(scores, is_id)
    if int(flags.sum()) < 20:
        warnings.warn(
            "metrics: fewer than 20 ID samples; TPR granularity is coarser "
            "than 5%", stacklevel=2,
        )
    _, tpr, fpr = _sweep(scores, flags)
    idx = int(np.argmax(tpr >= tpr_floor))  # first (largest) qualifying threshold
    fpr95 = float(fpr[idx])
    der = float(0.5 * (1.0 - tpr[idx]) + 0.5 * fpr[idx])
    return fpr95, der


def ood_metrics(scores, is_id) -> OodMetrics:
    _, auroc = roc_auroc(scores, is_id)
    fpr95, der = fpr95_der(scores, is_id)
    return OodMetrics(
        fpr95=fpr95, der=der,
        aupr_in=aupr(scores, is_id, "ID"),
        aupr_out=aupr(scores, is_id, "OOD"),
        auroc=auroc,
    )
