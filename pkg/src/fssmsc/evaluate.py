"""Label inference from the learned embedding and clustering metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class ClusteringResult:
    predicted: np.ndarray
    acc: float
    nmi: float
    ari: float
    confusion: np.ndarray


def embed(A, Z):
    """Low-dimensional representation ``F = A Z`` of every sample, ``(k, n)``."""
    A, Z = np.asarray(A), np.asarray(Z)
    if A.ndim != 2 or Z.ndim != 2 or A.shape[1] != Z.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, Z {Z.shape}")
    return A @ Z


def infer_labels(F, labels):
    """Give every sample the label of its nearest labeled embedding.

    ``labels`` are the ids of the first ``len(labels)`` columns of ``F``.
    Ties go to the lowest labeled index, so labeled samples keep their own
    label unless an earlier labeled sample has an identical embedding.
    """
    F = np.asarray(F, dtype=float)
    labels = np.asarray(labels)
    n_ell = labels.size
    if n_ell == 0:
        raise ValueError("empty labeled set")
    Fl = F[:, :n_ell]
    chunk = max(1, 2**22 // max(1, n_ell * F.shape[0]))
    out = np.empty(F.shape[1], dtype=labels.dtype)
    for start in range(0, F.shape[1], chunk):
        block = F[:, start : start + chunk]
        # exact differences (not the norm expansion) keep tie-breaking honest
        d = np.sum((block[:, :, None] - Fl[:, None, :]) ** 2, axis=0)
        out[start : start + chunk] = labels[np.argmin(d, axis=1)]
    return out


def _check_pair(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def contingency(pred, truth):
    """Counts ``N[i, j]`` of samples in predicted class ``i`` and true class ``j``."""
    pred, truth = _check_pair(pred, truth)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    N = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(N, (pi, ti), 1)
    return N


def accuracy(pred, truth) -> float:
    """Fraction of samples whose predicted id equals the true id."""
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        return 0.0
    return float(np.mean(pred == truth))


def matched_accuracy(pred, truth) -> float:
    """Accuracy under the best one-to-one relabeling of predicted classes."""
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        return 0.0
    N = contingency(pred, truth)
    rows, cols = linear_sum_assignment(N, maximize=True)
    return float(N[rows, cols].sum() / pred.size)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Mutual information normalized by the geometric mean of the two entropies."""
    pred, truth = _check_pair(pred, truth)
    if pred.size == 0:
        raise ValueError("empty partitions")
    N = contingency(pred, truth)
    h_p = _entropy(N.sum(axis=1))
    h_t = _entropy(N.sum(axis=0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    if h_p == 0.0 or h_t == 0.0:
        return 0.0
    P = N / N.sum()
    outer = np.outer(P.sum(axis=1), P.sum(axis=0))
    nz = P > 0
    mi = float(np.sum(P[nz] * np.log(P[nz] / outer[nz])))
    return float(min(1.0, max(0.0, mi / np.sqrt(h_p * h_t))))


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def ari(pred, truth) -> float:
    """Adjusted Rand index from the contingency table; 1.0 when both partitions
    are equally trivial (the index is then 0/0)."""
    pred, truth = _check_pair(pred, truth)
    if pred.size < 2:
        raise ValueError("ARI needs at least two samples")
    N = contingency(pred, truth)
    index = int(_comb2(N).sum())
    a = int(_comb2(N.sum(axis=1)).sum())
    b = int(_comb2(N.sum(axis=0)).sum())
    total = int(_comb2(pred.size))
    # (index - E) / (max - E) scaled by 2 * total: integer numerator and denominator
    num = 2 * (index * total - a * b)
    den = (a + b) * total - 2 * a * b
    if den == 0:
        return 1.0
    return num / den


def score(pred, truth) -> ClusteringResult:
    pred, truth = _check_pair(pred, truth)
    classes = np.unique(np.concatenate([pred, truth]))
    pi = np.searchsorted(classes, pred)
    ti = np.searchsorted(classes, truth)
    confusion = np.zeros((classes.size, classes.size), dtype=np.int64)
    np.add.at(confusion, (ti, pi), 1)
    return ClusteringResult(pred, accuracy(pred, truth), nmi(pred, truth), ari(pred, truth), confusion)
