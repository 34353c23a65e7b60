"""Landmark selection by k-means on the concatenated views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KMeansResult:
    """Outcome of :func:`kmeans`.

    ``centers`` is ``(D, m)``; ``assignments`` holds 0-based center indices;
    ``inertia_trace[t]`` is the inertia after Lloyd iteration ``t``.
    """

    centers: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations_used: int
    inertia_trace: tuple = ()


@dataclass(frozen=True)
class LandmarkSet:
    per_view: list

    @property
    def m(self) -> int:
        return self.per_view[0].shape[1]

    @property
    def dims(self) -> list[int]:
        return [U.shape[0] for U in self.per_view]

    def stacked(self) -> np.ndarray:
        return np.vstack(self.per_view)


def _sq_dists(X, C, x_sq):
    # (n, m) squared distances; clipped because the expansion can round below 0
    d = x_sq[:, None] - 2.0 * (X.T @ C) + np.einsum("ij,ij->j", C, C)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X, m, rng, x_sq):
    n = X.shape[1]
    idx = np.empty(m, dtype=int)
    idx[0] = rng.integers(n)
    closest = _sq_dists(X, X[:, idx[:1]], x_sq)[:, 0]
    taken = np.zeros(n, dtype=bool)
    taken[idx[0]] = True
    for j in range(1, m):
        w = np.where(taken, 0.0, closest)
        total = w.sum()
        if total > 0:
            idx[j] = rng.choice(n, p=w / total)
        else:
            # remaining points coincide with chosen centers
            idx[j] = rng.choice(np.flatnonzero(~taken))
        taken[idx[j]] = True
        closest = np.minimum(closest, _sq_dists(X, X[:, idx[j : j + 1]], x_sq)[:, 0])
    return X[:, idx].copy()


def _inertia(X, C, assign):
    R = X - C[:, assign]
    return float(np.einsum("ij,ij->", R, R))


def kmeans(points, m: int, seed: int = 0, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeding.

    Iterates until the assignments stop changing or ``max_iter`` updates
    have been made. A center that loses all its points is moved onto the
    point currently farthest from its own center.

    Parameters
    ----------
    points : ndarray, shape (D, n)
        Samples as columns.
    m : int
        Number of centers, ``1 <= m <= n``.
    seed : int
        Seed for the k-means++ draw.
    max_iter : int
        Cap on center updates.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("points must be a (D, n) matrix with D >= 1")
    n = X.shape[1]
    if not 1 <= m <= n:
        raise ValueError(f"number of centers m={m} must satisfy 1 <= m <= n={n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite value in k-means input")

    rng = np.random.default_rng(seed)
    x_sq = np.einsum("ij,ij->j", X, X)
    C = _kmeans_pp(X, m, rng, x_sq)
    assign = np.argmin(_sq_dists(X, C, x_sq), axis=1)
    trace = [_inertia(X, C, assign)]

    it = 0
    for it in range(1, max_iter + 1):
        counts = np.bincount(assign, minlength=m)
        sums = np.zeros_like(C)
        np.add.at(sums.T, assign, X.T)
        nonempty = counts > 0
        C = C.copy()
        C[:, nonempty] = sums[:, nonempty] / counts[nonempty]
        empty = np.flatnonzero(~nonempty)
        if empty.size:
            resid = np.einsum("ij,ij->j", X - C[:, assign], X - C[:, assign])
            far = np.argsort(-resid, kind="stable")[: empty.size]
            C[:, empty] = X[:, far]
        new_assign = np.argmin(_sq_dists(X, C, x_sq), axis=1)
        trace.append(_inertia(X, C, new_assign))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    else:
        it = max_iter

    return KMeansResult(C, assign, trace[-1], it, tuple(trace))


def select_landmarks(ds, m: int, seed: int = 0, max_iter: int = 100) -> LandmarkSet:
    """Cluster the stacked views into ``m`` centers and split them per view."""
    result = kmeans(ds.concatenated(), m, seed=seed, max_iter=max_iter)
    return split_centers(result.centers, ds.dims)


def split_centers(centers, dims) -> LandmarkSet:
    edges = np.cumsum([0, *dims])
    return LandmarkSet([centers[a:b].copy() for a, b in zip(edges[:-1], edges[1:])])
