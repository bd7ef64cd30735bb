"""Independent brute-force reference implementations used by the tests.

These deliberately avoid the library's code paths: pair counting instead
of a threshold sweep, explicit dense inverses instead of factorizations,
and a literal double loop for the contrastive sums.
"""

import math

import numpy as np


def auroc_pair_oracle(scores, flags):
    """O(n^2) Mann-Whitney count: P(id > ood) + 0.5 P(id == ood)."""
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    id_scores = scores[flags]
    ood_scores = scores[~flags]
    total = 0.0
    for a in id_scores:
        for b in ood_scores:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(id_scores) * len(ood_scores))


def aupr_enumeration_oracle(scores, flags, positive):
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    pos = flags if positive == "ID" else ~flags
    thresholds = sorted(set(scores.tolist()), reverse=(positive == "ID"))
    area, prev_r = 0.0, 0.0
    for t in thresholds:
        sel = scores >= t if positive == "ID" else scores <= t
        tp = float((sel & pos).sum())
        r = tp / pos.sum()
        p = tp / sel.sum()
        area += (r - prev_r) * p
        prev_r = r
    return area


def fpr95_scan_oracle(scores, flags):
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    for t in sorted(set(scores.tolist()), reverse=True):
        tpr = float((scores[flags] >= t).sum()) / flags.sum()
        fpr = float((scores[~flags] >= t).sum()) / (~flags).sum()
        if tpr >= 0.95:
            return (fpr, 0.5 * (1 - tpr) + 0.5 * fpr)
    return None


def mahalanobis_loop_oracle(z, means, covs, eps):
    """Per-class dense-inverse loop; returns the negated minimum distance."""
    dists = []
    for k in range(len(means)):
        cov = covs[k] + eps[k] * np.eye(covs[k].shape[0])
        delta = np.asarray(z, dtype=float) - means[k]
        dists.append(float(delta @ np.linalg.inv(cov) @ delta))
    return -min(dists)


def contrastive_double_loop_oracle(views, labels, is_id, partner, tau):
    """Literal double-sum evaluation of the two contrastive losses."""
    n = len(views)
    u = np.stack([v / np.linalg.norm(v) for v in views])
    total = 0.0
    for i in range(n):
        denom = sum(math.exp(float(u[i] @ u[k]) / tau)
                    for k in range(n) if k != i)
        if is_id[i]:
            pos = [p for p in range(n) if p != i and labels[p] == labels[i]]
        else:
            pos = [partner[i]]
        inner = sum(
            math.log(math.exp(float(u[i] @ u[p]) / tau) / denom) for p in pos
        )
        total += -inner / len(pos)
    return total / n
