"""
Multi-view datasets: in-memory representation, CSV/JSON storage, labeled
subset selection and a seeded union-of-subspaces generator.

Views are stored feature-major, ``d_v x n``, so column ``i`` of every view is
sample ``i``. Labeled samples always occupy the leading ``n_ell`` columns.
Class ids are dense integers ``1..k``; ``0`` marks an unlabeled sample.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MANIFEST_NAME = "dataset.json"


class DatasetError(ValueError):
    """Raised for malformed datasets, manifests or data files."""


@dataclass(frozen=True)
class MultiViewDataset:
    """Multi-view feature matrices with an optional labeled prefix.

    Attributes
    ----------
    views : list of ndarray
        One ``(d_v, n)`` float array per view.
    labels : ndarray or None
        Length-``n`` int array of the supervision actually given to the
        method. Entries ``1..k`` for the first ``n_ell`` columns, ``0`` after.
    truth : ndarray or None
        Length-``n`` ground-truth class ids, used only for scoring.
    n_ell : int
        Number of labeled samples.
    order : ndarray
        ``order[i]`` is the original index of the sample now in column ``i``.
    """

    views: list
    labels: np.ndarray | None = None
    truth: np.ndarray | None = None
    n_ell: int = 0
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        views = [np.asarray(X, dtype=float) for X in self.views]
        if not views:
            raise DatasetError("dataset has no views")
        for v, X in enumerate(views):
            if X.ndim != 2:
                raise DatasetError(f"view {v} is not a matrix")
        n = views[0].shape[1]
        if n == 0:
            raise DatasetError("empty dataset")
        if any(X.shape[1] != n for X in views):
            raise DatasetError("column-count mismatch across views")
        for v, X in enumerate(views):
            if not np.all(np.isfinite(X)):
                raise DatasetError(f"non-finite value in view {v}")
        object.__setattr__(self, "views", views)

        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=int)
            if labels.shape != (n,):
                raise DatasetError("labels length does not match sample count")
            if np.any(labels < 0):
                raise DatasetError("negative label id")
            n_ell = int(np.count_nonzero(labels))
            if np.any(labels[:n_ell] == 0) or np.any(labels[n_ell:] != 0):
                raise DatasetError("labeled samples must occupy the leading columns")
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "n_ell", n_ell)
        elif self.n_ell:
            raise DatasetError("n_ell > 0 but no labels given")

        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=int)
            if truth.shape != (n,) or np.any(truth < 1):
                raise DatasetError("truth must hold a class id >= 1 for every sample")
            object.__setattr__(self, "truth", truth)

        order = np.arange(n) if self.order is None else np.asarray(self.order, dtype=int)
        if order.shape != (n,):
            raise DatasetError("order length does not match sample count")
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.views[0].shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [X.shape[0] for X in self.views]

    @property
    def k(self) -> int:
        """Number of classes: distinct ids among the labeled prefix, else in truth."""
        if self.n_ell:
            return len(np.unique(self.labels[: self.n_ell]))
        if self.truth is not None:
            return len(np.unique(self.truth))
        return 0

    @property
    def prefix_labels(self) -> np.ndarray:
        return self.labels[: self.n_ell] if self.labels is not None else np.zeros(0, dtype=int)

    def concatenated(self) -> np.ndarray:
        """All views stacked row-wise, ``(sum d_v, n)``."""
        return np.vstack(self.views)


@dataclass(frozen=True)
class DatasetManifest:
    view_files: list
    labels_file: str | None
    n: int
    dims: list
    truth_file: str | None = None
    format_version: int = FORMAT_VERSION

    @property
    def n_views(self) -> int:
        return len(self.view_files)

    def to_json(self) -> dict:
        out = {
            "format_version": self.format_version,
            "views": list(self.view_files),
            "n": self.n,
            "dims": list(self.dims),
        }
        if self.labels_file is not None:
            out["labels"] = self.labels_file
        if self.truth_file is not None:
            out["truth"] = self.truth_file
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        try:
            views = obj["views"]
            n = int(obj["n"])
            dims = [int(d) for d in obj["dims"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed manifest: {exc}") from None
        if obj.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise DatasetError(f"unsupported format_version {obj.get('format_version')}")
        if len(views) != len(dims):
            raise DatasetError("view count mismatch")
        return cls(views, obj.get("labels"), n, dims, obj.get("truth"))


@dataclass(frozen=True)
class SyntheticSpec:
    k_clusters: int
    subspace_dim: int
    view_dims: tuple
    points_per_cluster: int
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.k_clusters < 1 or self.subspace_dim < 1 or self.points_per_cluster < 1:
            raise ValueError("k_clusters, subspace_dim and points_per_cluster must be >= 1")
        if not self.view_dims or min(self.view_dims) < 1:
            raise ValueError("view_dims must be a non-empty list of positive ints")
        if self.subspace_dim > min(self.view_dims):
            raise ValueError("subspace_dim exceeds the smallest view dimension")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


# ---------------------------------------------------------------------------
# Labels


def reindex_labels(raw, ids=None):
    """Map positive ids densely onto ``1..k`` in increasing order; 0 stays 0.

    ``ids`` fixes the id set when several arrays must share one mapping.

    >>> reindex_labels([1, 3, 3, 0]).tolist()
    [1, 2, 2, 0]
    """
    raw = np.asarray(raw, dtype=int)
    if np.any(raw < 0):
        raise DatasetError("label id outside the valid range (negative)")
    if ids is None:
        ids = np.unique(raw[raw > 0])
    lookup = {int(c): i + 1 for i, c in enumerate(ids)}
    return np.array([lookup.get(int(c), 0) for c in raw], dtype=int)


def _labeled_first(labels):
    """Stable permutation moving labeled columns to the front."""
    labels = np.asarray(labels)
    return np.concatenate([np.flatnonzero(labels > 0), np.flatnonzero(labels == 0)])


def from_arrays(views, labels=None, truth=None) -> MultiViewDataset:
    """Build a dataset from columns in arbitrary order.

    ``labels`` may carry zeros anywhere; labeled columns are moved to the
    front and the permutation is kept in ``order``. When every sample is
    labeled and ``truth`` is omitted, the labels double as ground truth.
    """
    views = [np.asarray(X, dtype=float) for X in views]
    n = views[0].shape[1] if views and views[0].ndim == 2 else 0
    if labels is None:
        perm = np.arange(n)
        return MultiViewDataset([X[:, perm] for X in views], None,
                                None if truth is None else reindex_labels(truth), 0, perm)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,):
        raise DatasetError("labels length does not match sample count")
    ids = labels[labels > 0]
    if truth is not None:
        truth = np.asarray(truth, dtype=int)
        if np.any(truth < 0):
            raise DatasetError("label id outside the valid range (negative)")
        ids = np.concatenate([ids, truth[truth > 0]])
    ids = np.unique(ids)
    labels = reindex_labels(labels, ids)
    if truth is None and np.all(labels > 0):
        truth = labels
    elif truth is not None:
        truth = reindex_labels(truth, ids)
    perm = _labeled_first(labels)
    return MultiViewDataset(
        [X[:, perm] for X in views],
        labels[perm],
        None if truth is None else truth[perm],
        int(np.count_nonzero(labels)),
        perm,
    )


def take_labeled_prefix(ds: MultiViewDataset, ratio: float, seed: int = 0) -> MultiViewDataset:
    """Reveal labels for a class-stratified subset of ``ceil(ratio * n)`` samples.

    Every class gets at least one labeled sample; the remaining budget is
    shared in proportion to class size (largest remainder). The chosen
    samples move to the leading columns, both groups keeping their relative
    order.
    """
    if ds.truth is None:
        raise DatasetError("take_labeled_prefix needs ground truth for every sample")
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]")
    n = ds.n
    budget = min(n, math.ceil(ratio * n - 1e-9))
    classes, counts = np.unique(ds.truth, return_counts=True)
    if budget < len(classes):
        raise DatasetError(
            f"cannot label every class: {len(classes)} classes but only {budget} labeled slots"
        )

    alloc = np.ones(len(classes), dtype=int)
    extra = budget - len(classes)
    if extra:
        share = (counts - 1) / max(1, (counts - 1).sum()) * extra
        alloc += np.floor(share).astype(int)
        rest = budget - alloc.sum()
        by_remainder = np.argsort(-(share - np.floor(share)), kind="stable")
        for c in by_remainder[:rest]:
            alloc[c] += 1
    alloc = np.minimum(alloc, counts)

    rng = np.random.default_rng(seed)
    chosen = np.zeros(n, dtype=bool)
    for c, a in zip(classes, alloc):
        members = np.flatnonzero(ds.truth == c)
        chosen[rng.choice(members, size=a, replace=False)] = True

    perm = np.concatenate([np.flatnonzero(chosen), np.flatnonzero(~chosen)])
    n_ell = int(chosen.sum())
    truth = ds.truth[perm]
    labels = np.where(np.arange(n) < n_ell, truth, 0)
    return MultiViewDataset([X[:, perm] for X in ds.views], labels, truth, n_ell, ds.order[perm])


def zscore(ds: MultiViewDataset) -> MultiViewDataset:
    """Standardize every feature to zero mean and unit variance (constant features -> 0)."""
    views = []
    for X in ds.views:
        mu = X.mean(axis=1, keepdims=True)
        sd = X.std(axis=1, keepdims=True)
        views.append((X - mu) / np.where(sd > 0, sd, 1.0))
    return MultiViewDataset(views, ds.labels, ds.truth, ds.n_ell, ds.order)


# ---------------------------------------------------------------------------
# Synthetic data


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Sample a union of ``k`` random ``r``-dimensional subspaces in every view.

    Each point has one latent coefficient vector ``w ~ 3 N(0, I_r)`` shared
    by all views; view ``v`` observes ``B_c^(v) w + noise``. Columns are
    shuffled, then interleaved class by class so every prefix is stratified.
    All samples carry ground-truth labels.
    """
    rng = np.random.default_rng(spec.seed)
    k, r, p = spec.k_clusters, spec.subspace_dim, spec.points_per_cluster
    bases = [
        [np.linalg.qr(rng.standard_normal((d, r)))[0] for d in spec.view_dims]
        for _ in range(k)
    ]
    n = k * p
    truth = np.repeat(np.arange(1, k + 1), p)
    W = 3.0 * rng.standard_normal((r, n))
    views = []
    for v, d in enumerate(spec.view_dims):
        X = np.empty((d, n))
        for c in range(k):
            cols = slice(c * p, (c + 1) * p)
            X[:, cols] = bases[c][v] @ W[:, cols]
        if spec.noise_sigma > 0:
            X += spec.noise_sigma * rng.standard_normal((d, n))
        views.append(X)

    shuffled = rng.permutation(n)
    # round-robin over classes, each class in shuffled order
    per_class = [shuffled[truth[shuffled] == c] for c in range(1, k + 1)]
    perm = np.array([per_class[c][j] for j in range(p) for c in range(k)])
    truth = truth[perm]
    return MultiViewDataset([X[:, perm] for X in views], truth, truth, n, np.arange(n))


def synthetic(k=3, r=2, dims=(20, 15), per_cluster=100, noise=0.05, seed=7) -> MultiViewDataset:
    """Shorthand for :func:`generate_synthetic`."""
    return generate_synthetic(SyntheticSpec(k, r, tuple(dims), per_cluster, noise, seed))


# ---------------------------------------------------------------------------
# Storage


def _atomic_write_text(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix_to_csv(X: np.ndarray) -> str:
    # one sample per row; %.17g round-trips every double exactly
    return "".join(",".join(f"{x:.17g}" for x in row) + "\n" for row in X.T)


def _read_matrix_csv(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if rows and len(row) != len(rows[0]):
                raise DatasetError(f"{path}:{lineno}: row length {len(row)}, expected {len(rows[0])}")
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: unparsable value") from None
    if not rows:
        raise DatasetError(f"{path}: no samples")
    X = np.array(rows, dtype=float).T
    if not np.all(np.isfinite(X)):
        raise DatasetError(f"{path}: non-finite value")
    return X


def _read_labels(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: label is not an integer") from None
    return np.array(out, dtype=int)


def save_dataset(ds: MultiViewDataset, directory) -> DatasetManifest:
    """Write one CSV per view, label files and ``dataset.json`` into ``directory``.

    Columns are written in their current order. A ``truth`` file is written
    only when ground truth carries information that ``labels`` does not.
    """
    if ds.n == 0:
        raise DatasetError("empty dataset")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    view_files = []
    for v, X in enumerate(ds.views):
        name = f"view{v + 1}.csv"
        _atomic_write_text(directory / name, _matrix_to_csv(X))
        view_files.append(name)

    labels_file = truth_file = None
    if ds.labels is not None:
        labels_file = "labels.txt"
        _atomic_write_text(directory / labels_file, "".join(f"{c}\n" for c in ds.labels))
    if ds.truth is not None and (ds.labels is None or not np.array_equal(ds.truth, ds.labels)):
        truth_file = "truth.txt"
        _atomic_write_text(directory / truth_file, "".join(f"{c}\n" for c in ds.truth))

    manifest = DatasetManifest(view_files, labels_file, ds.n, ds.dims, truth_file)
    _atomic_write_text(directory / MANIFEST_NAME, json.dumps(manifest.to_json(), indent=2) + "\n")
    return manifest


def load_dataset(path) -> MultiViewDataset:
    """Read a dataset from a manifest path or the directory holding ``dataset.json``."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc})") from None
    manifest = DatasetManifest.from_json(obj)
    root = path.parent

    views = [_read_matrix_csv(root / f) for f in manifest.view_files]
    for v, (X, d) in enumerate(zip(views, manifest.dims)):
        if X.shape != (d, manifest.n):
            raise DatasetError(
                f"view {v + 1}: file holds {X.shape[1]} samples x {X.shape[0]} features, "
                f"manifest declares {manifest.n} x {d}"
            )
    labels = truth = None
    if manifest.labels_file is not None:
        labels = _read_labels(root / manifest.labels_file)
        if labels.shape != (manifest.n,):
            raise DatasetError("labels file length does not match n")
    if manifest.truth_file is not None:
        truth = _read_labels(root / manifest.truth_file)
        if truth.shape != (manifest.n,):
            raise DatasetError("truth file length does not match n")
    return from_arrays(views, labels, truth)
