"""Must-link / cannot-link matrices derived from the labeled prefix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstraintSet:
    """Normalized pairwise constraint graphs over the ``n_ell`` labeled samples.

    ``M`` carries ``1/n_m`` on every ordered same-class pair ``i != j`` and
    ``C`` carries ``1/n_c`` on every ordered cross-class pair; ``L_M`` and
    ``L_C`` are their combinatorial Laplacians.
    """

    M: np.ndarray
    C: np.ndarray
    L_M: np.ndarray
    L_C: np.ndarray
    n_m: int
    n_c: int

    @property
    def n_ell(self) -> int:
        return self.M.shape[0]


def laplacian(W):
    return np.diag(W.sum(axis=1)) - W


def build_constraints(labels) -> ConstraintSet:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size < 2:
        raise ValueError("need at least two labeled samples")
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    diff = labels[:, None] != labels[None, :]
    n_m = int(same.sum())
    n_c = int(diff.sum())
    if n_c == 0:
        raise ValueError("no cannot-link pairs: all labeled samples share one class")
    if n_m == 0:
        raise ValueError("no must-link pairs: every labeled sample has a distinct class")
    M = same / n_m
    C = diff / n_c
    return ConstraintSet(M, C, laplacian(M), laplacian(C), n_m, n_c)
