"""End-to-end fit: labeled prefix, landmarks, constraints, solve, inference, scores."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import constraints, data, evaluate, landmarks, solver


@dataclass
class FitResult:
    dataset: data.MultiViewDataset
    landmarks: landmarks.LandmarkSet
    state: solver.SolverState
    diagnostics: solver.ConvergenceDiagnostics
    embedding: np.ndarray
    predicted: np.ndarray
    scores: evaluate.ClusteringResult | None
    seconds_solve: float
    seconds_total: float

    @property
    def metrics(self) -> dict:
        if self.scores is None:
            return {"acc": None, "nmi": None, "ari": None}
        return {"acc": self.scores.acc, "nmi": self.scores.nmi, "ari": self.scores.ari}


def prepare(ds, label_ratio=None, n_landmarks=100, seed=0, normalize=False):
    """Select the labeled prefix and landmarks; returns ``(ds, lm, cs)``.

    With ground truth available, ``label_ratio`` of the samples are revealed
    (stratified). Otherwise the labels stored with the dataset are used.
    """
    if normalize:
        ds = data.zscore(ds)
    if label_ratio is not None and ds.truth is not None:
        ds = data.take_labeled_prefix(ds, label_ratio, seed)
    if ds.n_ell < 2:
        raise data.DatasetError("need at least two labeled samples")
    lm = landmarks.select_landmarks(ds, min(n_landmarks, ds.n), seed=seed)
    cs = constraints.build_constraints(ds.prefix_labels)
    return ds, lm, cs


def fit_prepared(ds, lm, cs, cfg: solver.SolverConfig, t_start=None) -> FitResult:
    t_start = time.perf_counter() if t_start is None else t_start
    t0 = time.perf_counter()
    state, diag = solver.solve(ds, lm, cs, cfg)
    t_solve = time.perf_counter() - t0
    F = evaluate.embed(state.A, state.Z)
    pred = evaluate.infer_labels(F, ds.prefix_labels)
    scores = evaluate.score(pred, ds.truth) if ds.truth is not None else None
    return FitResult(ds, lm, state, diag, F, pred, scores, t_solve, time.perf_counter() - t_start)


def fit(ds, cfg: solver.SolverConfig, label_ratio=0.05, n_landmarks=100, seed=0, normalize=False) -> FitResult:
    t_start = time.perf_counter()
    ds, lm, cs = prepare(ds, label_ratio, n_landmarks, seed, normalize)
    return fit_prepared(ds, lm, cs, cfg, t_start)
