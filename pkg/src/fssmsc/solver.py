"""
Alternating augmented-Lagrangian solver for the joint anchor-graph /
landmark-embedding model.

Variables (``k`` classes, ``m`` landmarks, ``n`` samples):

* ``A`` (k, m)  landmark embeddings, rows orthonormal
* ``Z`` (m, n)  anchor graph, entries in ``[0, m_Z]``
* ``q`` (m,)    surrogate landmark degrees, entries in ``[eps_q, C_q]``
* ``B`` (m, n)  split copy of ``Z`` carrying the reconstruction term
* ``Lambda`` (m, n)  multiplier for ``B = Z``

One sweep updates ``A`` (trace-ratio eigenproblem), ``Z`` (one projected
gradient step), ``q`` (one projected gradient step), ``B`` (ridge least
squares) and finally ``Lambda`` (dual ascent).
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla


class SolverError(RuntimeError):
    pass


class InfeasibleStateError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Scalar parameters of the model and the iteration.

    ``lam`` is the augmented-Lagrangian penalty (``lambda`` is reserved in
    Python). ``C_q=None`` means ``C_q = n``; ``eta_z=None`` / ``eta_q=None``
    mean ``1/lam``. ``stop_tol=0`` runs exactly ``max_iter`` sweeps.
    """

    lambda_Z: float = 0.05
    lambda_M: float = 1e3
    beta: float = 1e-3
    lam: float = 100.0
    lambda_0: float = 100.0
    m_Z: float = 1.0
    C_q: float | None = None
    eps: float = 1e-5
    eps_q: float = 1e-5
    eta_z: float | None = None
    eta_q: float | None = None
    max_iter: int = 30
    stop_tol: float = 0.0
    seed: int = 0
    tr_tol: float = 1e-8
    tr_max_iter: int = 100

    def resolved(self, n: int) -> "SolverConfig":
        """Fill data-dependent defaults and validate."""
        cfg = replace(
            self,
            C_q=float(n) if self.C_q is None else float(self.C_q),
            eta_z=1.0 / self.lam if self.eta_z is None else self.eta_z,
            eta_q=1.0 / self.lam if self.eta_q is None else self.eta_q,
        )
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("lambda_Z", "lambda_M", "lam", "lambda_0", "m_Z", "eps", "eps_q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if self.C_q is not None and not self.eps_q <= self.C_q:
            raise ValueError("eps_q must not exceed C_q")
        for name in ("eta_z", "eta_q"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_iter < 0 or self.stop_tol < 0:
            raise ValueError("max_iter and stop_tol must be >= 0")


@dataclass
class SolverState:
    A: np.ndarray
    Z: np.ndarray
    q: np.ndarray
    B: np.ndarray
    Lambda: np.ndarray

    def copy(self) -> "SolverState":
        return SolverState(self.A.copy(), self.Z.copy(), self.q.copy(), self.B.copy(), self.Lambda.copy())

    def nbytes(self) -> int:
        return sum(x.nbytes for x in (self.A, self.Z, self.q, self.B, self.Lambda))


@dataclass(frozen=True)
class BSolveCache:
    """Cholesky factor of ``lam I + sum_v U_v^T U_v`` and ``G = sum_v U_v^T X_v``."""

    factor: tuple
    UtU: np.ndarray
    G: np.ndarray
    lam: float

    def matrix(self) -> np.ndarray:
        return self.UtU + self.lam * np.eye(self.UtU.shape[0])

    def solve(self, rhs):
        # non-finite input propagates and is reported by the sweep loop
        return sla.cho_solve(self.factor, rhs, check_finite=False)

    def nbytes(self) -> int:
        return self.factor[0].nbytes + self.UtU.nbytes + self.G.nbytes


@dataclass(frozen=True)
class TraceRatioProblem:
    """``max_{A A^T = I} Tr(A L_d A^T) / Tr(A L_f A^T)``; ``shift`` is the ridge added to ``L_f``."""

    L_f: np.ndarray
    L_d: np.ndarray
    k: int
    shift: float = 0.0


class ObjectiveParts(NamedTuple):
    phi_s_tilde: float
    phi_M: float
    phi_C: float
    tau1: float
    tau2: float


@dataclass(frozen=True)
class ZGradientContext:
    tau1: float
    tau2: float
    L_pc: np.ndarray


@dataclass
class ConvergenceDiagnostics:
    """Per-sweep traces; index ``j`` describes the transition into iterate ``j + 1``."""

    lagrangian: list = field(default_factory=list)
    stopc: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)
    delta_B: list = field(default_factory=list)
    delta_Z: list = field(default_factory=list)
    delta_q: list = field(default_factory=list)
    delta_Lambda: list = field(default_factory=list)
    orth_error: list = field(default_factory=list)
    multiplier_residual: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    L_h_estimate: float = 0.0
    lam: float = 0.0
    eta_z: float = 0.0
    eta_q: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.stopc)

    @property
    def lambda_threshold(self) -> float:
        """Penalty above which the descent guarantee applies: ``L_h + 2 + 2 L_h^2``."""
        return self.L_h_estimate + 2.0 + 2.0 * self.L_h_estimate**2

    @property
    def descent_condition_met(self) -> bool:
        # the step-size conditions involve constants that are not estimated
        return self.lam > self.lambda_threshold

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "lagrangian", "stopc", "primal_residual"])
        for j, row in enumerate(zip(self.lagrangian, self.stopc, self.primal_residual), start=1):
            w.writerow([j, *(repr(float(x)) for x in row)])
        return buf.getvalue()

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(self.to_csv())
        os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Initialization


def _check_compat(ds, lm):
    if ds.n_views != len(lm.per_view):
        raise ValueError(f"dataset has {ds.n_views} views, landmarks have {len(lm.per_view)}")
    for v, (X, U) in enumerate(zip(ds.views, lm.per_view)):
        if X.shape[0] != U.shape[0]:
            raise ValueError(f"view {v}: feature dim {X.shape[0]} vs landmark dim {U.shape[0]}")


def make_cache(ds, lm, lam: float) -> BSolveCache:
    _check_compat(ds, lm)
    UtU = sum(U.T @ U for U in lm.per_view)
    G = sum(U.T @ X for U, X in zip(lm.per_view, ds.views))
    factor = sla.cho_factor(UtU + lam * np.eye(lm.m), lower=False)
    return BSolveCache(factor, UtU, G, lam)


def init_state(ds, lm, cfg: SolverConfig, k: int | None = None):
    """Initial iterate: ridge least-squares ``B``, its shrunk/clipped copy ``Z``,
    ``q = clip(Z Z^T 1)``, and zero ``A`` and ``Lambda``.

    Returns ``(state, cache)``.
    """
    cfg = cfg.resolved(ds.n)
    k = ds.k if k is None else k
    cache = make_cache(ds, lm, cfg.lam)
    B = cache.solve(cache.G)
    Z = np.clip(B - cfg.lambda_Z / cfg.lam, 0.0, cfg.m_Z)
    q = np.clip(Z @ Z.sum(axis=0), cfg.eps_q, cfg.C_q)
    m, n = Z.shape
    state = SolverState(np.zeros((k, m)), Z, q, B, np.zeros((m, n)))
    return state, cache


# ---------------------------------------------------------------------------
# A-update: trace ratio


def build_trace_ratio(st: SolverState, cs, cfg: SolverConfig) -> TraceRatioProblem:
    k, m = st.A.shape
    Zl = st.Z[:, : cs.n_ell]
    s = st.q ** -0.5
    Ws = s[:, None] * (st.Z @ st.Z.T) * s[None, :]
    L_f = cfg.lambda_M * (Zl @ cs.L_M @ Zl.T) + np.eye(m) - Ws
    L_f = 0.5 * (L_f + L_f.T)
    lo = sla.eigh(L_f, eigvals_only=True, subset_by_index=[0, 0])[0]
    shift = 0.0
    if lo < 1e-10:
        shift = 1e-10 - lo
        L_f = L_f + shift * np.eye(m)
    L_d = Zl @ cs.L_C @ Zl.T + (cfg.eps / k) * np.eye(m)
    L_d = 0.5 * (L_d + L_d.T)
    return TraceRatioProblem(L_f, L_d, k, shift)


def _ratio(V, L_d, L_f):
    return np.einsum("ij,ij->", V, L_d @ V) / np.einsum("ij,ij->", V, L_f @ V)


def _top_k(S, k):
    m = S.shape[0]
    return sla.eigh(S, subset_by_index=[m - k, m - 1])[1]


def solve_trace_ratio(p: TraceRatioProblem, tol: float = 1e-8, max_iter: int = 100):
    """Maximize the trace ratio by iterated shifted eigenproblems.

    Starting from the top-``k`` eigenvectors of ``L_d``, repeat
    ``V <- top_k(L_d - rho L_f)`` and ``rho <- Tr(V^T L_d V) / Tr(V^T L_f V)``
    until the relative change in ``rho`` is at most ``tol``.

    Returns
    -------
    A : ndarray, shape (k, m)
        Row-orthonormal maximizer.
    rho : float
        Attained ratio.
    history : list of float
        ``rho`` after the initial guess and after every iteration.
    """
    L_d, L_f, k = p.L_d, p.L_f, p.k
    if k > L_d.shape[0]:
        raise ValueError("subspace dimension exceeds matrix size")
    if not (np.all(np.isfinite(L_d)) and np.all(np.isfinite(L_f))):
        raise SolverError("non-finite trace-ratio matrices")
    V = _top_k(L_d, k)
    rho = _ratio(V, L_d, L_f)
    history = [rho]
    for _ in range(max_iter):
        V_new = _top_k(L_d - rho * L_f, k)
        rho_new = _ratio(V_new, L_d, L_f)
        if rho_new < rho:
            # rounding-level decrease at the fixed point: keep the better subspace
            break
        V = V_new
        history.append(rho_new)
        done = abs(rho_new - rho) <= tol * max(1.0, abs(rho))
        rho = rho_new
        if done:
            break
    return V.T.copy(), float(rho), history


def update_A(st, cs, cfg):
    A, rho, _ = solve_trace_ratio(build_trace_ratio(st, cs, cfg), cfg.tr_tol, cfg.tr_max_iter)
    return A, rho


# ---------------------------------------------------------------------------
# Objective pieces


def eval_objective_parts(st: SolverState, cs, cfg: SolverConfig) -> ObjectiveParts:
    A, Z = st.A, st.Z
    AZs = A @ (Z * st.q[:, None] ** -0.5)
    phi_s = float(np.sum(A * A) - np.sum(AZs * AZs))
    Fl = A @ Z[:, : cs.n_ell]
    phi_M = float(np.sum((Fl @ cs.L_M) * Fl))
    phi_C = float(np.sum((Fl @ cs.L_C) * Fl))
    tau1 = phi_s + cfg.lambda_M * phi_M
    tau2 = phi_C + cfg.eps
    return ObjectiveParts(phi_s, phi_M, phi_C, tau1, tau2)


def z_gradient_context(st, cs, cfg) -> ZGradientContext:
    parts = eval_objective_parts(st, cs, cfg)
    t1, t2 = parts.tau1, parts.tau2
    L_pc = (2.0 * cfg.lambda_M / t2) * cs.L_M - (2.0 * t1 / t2**2) * cs.L_C
    return ZGradientContext(t1, t2, L_pc)


def objective_P(st, cs, cfg) -> float:
    """Z-subproblem objective (without the box indicator)."""
    parts = eval_objective_parts(st, cs, cfg)
    r = st.q - st.Z @ st.Z.sum(axis=0)
    return (
        cfg.beta * parts.tau1 / parts.tau2
        - float(np.sum(st.Lambda * st.Z))
        + cfg.lambda_Z * float(st.Z.sum())
        + 0.5 * cfg.lam * float(np.sum((st.B - st.Z) ** 2))
        + 0.5 * cfg.lambda_0 * float(r @ r)
    )


def objective_Q(st, cs, cfg) -> float:
    """q-subproblem objective (without the box indicator)."""
    parts = eval_objective_parts(st, cs, cfg)
    r = st.q - st.Z @ st.Z.sum(axis=0)
    return cfg.beta * parts.phi_s_tilde / parts.tau2 + 0.5 * cfg.lambda_0 * float(r @ r)


# ---------------------------------------------------------------------------
# Z-, q-, B-, Lambda-updates


def grad_P(st: SolverState, cs, cfg: SolverConfig, ctx: ZGradientContext | None = None):
    """Gradient of the Z-subproblem objective at the current state."""
    if ctx is None:
        ctx = z_gradient_context(st, cs, cfg)
    A, Z, q = st.A, st.Z, st.q
    n_ell = cs.n_ell
    s = q**-0.5
    col = Z.sum(axis=0)
    r = Z @ col - q

    g = cfg.lam * (Z - st.B) - st.Lambda + cfg.lambda_Z
    if cfg.beta:
        g[:, :n_ell] += cfg.beta * (A.T @ ((A @ Z[:, :n_ell]) @ ctx.L_pc))
        g -= (2.0 * cfg.beta / ctx.tau2) * (s[:, None] * (A.T @ (A @ (s[:, None] * Z))))
    g += cfg.lambda_0 * (np.outer(r, col) + (r @ Z)[None, :])
    return g


def update_Z(st, grad, cfg):
    return np.clip(st.Z - cfg.eta_z * grad, 0.0, cfg.m_Z)


def grad_Q(st: SolverState, cs, cfg: SolverConfig):
    """Gradient of the q-subproblem objective at the current state."""
    Z, q = st.Z, st.q
    g = cfg.lambda_0 * (q - Z @ Z.sum(axis=0))
    if cfg.beta:
        tau2 = eval_objective_parts(st, cs, cfg).tau2
        AtA = st.A.T @ st.A
        W = Z @ Z.T
        # diag(W D^{-1/2} AtA D^{-3/2})
        d = np.einsum("ib,bi->i", W * q[None, :] ** -0.5, AtA) * q**-1.5
        g += (cfg.beta / tau2) * d
    return g


def update_q(st, grad, cfg):
    return np.clip(st.q - cfg.eta_q * grad, cfg.eps_q, cfg.C_q)


def update_B(st, cache: BSolveCache, cfg):
    return cache.solve(cache.G + cfg.lam * st.Z - st.Lambda)


def update_multiplier(st, cfg):
    return st.Lambda + cfg.lam * (st.B - st.Z)


# ---------------------------------------------------------------------------
# Augmented Lagrangian and diagnostics


def orthonormality_error(A) -> float:
    k = A.shape[0]
    return float(np.max(np.abs(A @ A.T - np.eye(k)))) if k else 0.0


def check_feasible(st, cfg, atol=1e-8):
    """Raise :class:`InfeasibleStateError` naming the violated constraint set.

    ``A = 0`` is accepted as the pre-first-sweep initialization.
    """
    if np.any(st.Z < 0) or np.any(st.Z > cfg.m_Z):
        raise InfeasibleStateError("Z outside [0, m_Z]")
    C_q = np.inf if cfg.C_q is None else cfg.C_q
    if np.any(st.q < cfg.eps_q) or np.any(st.q > C_q):
        raise InfeasibleStateError("q outside [eps_q, C_q]")
    if np.any(st.A) and orthonormality_error(st.A) > atol:
        raise InfeasibleStateError("A rows are not orthonormal")


def h_value(B, ds, lm) -> float:
    return 0.5 * sum(float(np.sum((X - U @ B) ** 2)) for X, U in zip(ds.views, lm.per_view))


def eval_lagrangian(st, ds, lm, cs, cfg) -> float:
    """Augmented Lagrangian at a feasible state (indicator terms are 0)."""
    cfg = cfg.resolved(ds.n)
    check_feasible(st, cfg)
    parts = eval_objective_parts(st, cs, cfg)
    D = st.B - st.Z
    r = st.q - st.Z @ st.Z.sum(axis=0)
    return (
        h_value(st.B, ds, lm)
        + cfg.lambda_Z * float(np.abs(st.Z).sum())
        + float(np.sum(st.Lambda * D))
        + cfg.beta * parts.tau1 / parts.tau2
        + 0.5 * cfg.lam * float(np.sum(D * D))
        + 0.5 * cfg.lambda_0 * float(r @ r)
    )


def _lagrangian_cached(st, cache, x_sq, cs, cfg):
    # h(B) = 1/2 sum ||X||^2 - <G, B> + 1/2 <B, UtU B>, avoiding X - U B per view
    parts = eval_objective_parts(st, cs, cfg)
    D = st.B - st.Z
    r = st.q - st.Z @ st.Z.sum(axis=0)
    h = 0.5 * x_sq - float(np.sum(cache.G * st.B)) + 0.5 * float(np.sum(st.B * (cache.UtU @ st.B)))
    return (
        h
        + cfg.lambda_Z * float(st.Z.sum())
        + float(np.sum(st.Lambda * D))
        + cfg.beta * parts.tau1 / parts.tau2
        + 0.5 * cfg.lam * float(np.sum(D * D))
        + 0.5 * cfg.lambda_0 * float(r @ r)
    )


def estimate_L_h(lm, tol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest eigenvalue of ``sum_v U_v^T U_v`` by power iteration.

    This is the Lipschitz constant of the reconstruction gradient
    ``B -> sum_v U_v^T (U_v B - X_v)``.
    """
    S = sum(U.T @ U for U in lm.per_view)
    x = np.random.default_rng(0).standard_normal(S.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = S @ x
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        new = float(x @ y)
        x = y / nrm
        if abs(new - est) <= tol * max(abs(new), 1e-300):
            est = new
            break
        est = new
    return max(est, 0.0)


def solve(ds, lm, cs, cfg: SolverConfig, k: int | None = None, state=None, cache=None, callback=None):
    """Run the alternating scheme.

    Parameters
    ----------
    ds, lm, cs
        Dataset (labeled prefix first), landmarks and constraint set.
    cfg : SolverConfig
    k : int, optional
        Embedding dimension; defaults to the number of labeled classes.
    state, cache : optional
        Warm start; both default to :func:`init_state`.
    callback : callable, optional
        Called as ``callback(j, state)`` after sweep ``j`` (1-based).

    Returns
    -------
    state : SolverState
    diagnostics : ConvergenceDiagnostics
    """
    cfg = cfg.resolved(ds.n)
    if state is None or cache is None:
        state, cache = init_state(ds, lm, cfg, k)
    st = state.copy()
    diag = ConvergenceDiagnostics(
        L_h_estimate=estimate_L_h(lm), lam=cfg.lam, eta_z=cfg.eta_z, eta_q=cfg.eta_q
    )
    x_sq = sum(float(np.sum(X * X)) for X in ds.views)

    for j in range(1, cfg.max_iter + 1):
        prev = st.copy()
        try:
            st.A, rho = update_A(st, cs, cfg)
        except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
            raise SolverError(f"A-update failed at iteration {j}: {exc}") from exc
        st.Z = update_Z(st, grad_P(st, cs, cfg), cfg)
        st.q = update_q(st, grad_Q(st, cs, cfg), cfg)
        st.B = update_B(st, cache, cfg)
        st.Lambda = update_multiplier(st, cfg)

        for name in ("A", "Z", "q", "B", "Lambda"):
            if not np.all(np.isfinite(getattr(st, name))):
                raise SolverError(f"non-finite {name} at iteration {j}")

        dB, dZ = st.B - prev.B, st.Z - prev.Z
        diag.stopc.append(max(float(np.max(np.abs(dB))), float(np.max(np.abs(dZ)))))
        diag.delta_B.append(float(np.linalg.norm(dB)))
        diag.delta_Z.append(float(np.linalg.norm(dZ)))
        diag.delta_q.append(float(np.linalg.norm(st.q - prev.q)))
        diag.delta_Lambda.append(float(np.linalg.norm(st.Lambda - prev.Lambda)))
        diag.primal_residual.append(float(np.linalg.norm(st.B - st.Z)))
        diag.orth_error.append(orthonormality_error(st.A))
        grad_h = cache.UtU @ st.B - cache.G
        diag.multiplier_residual.append(float(np.max(np.abs(st.Lambda + grad_h))))
        diag.rho.append(rho)
        diag.lagrangian.append(_lagrangian_cached(st, cache, x_sq, cs, cfg))

        if callback is not None:
            callback(j, st)
        if cfg.stop_tol > 0 and diag.stopc[-1] <= cfg.stop_tol:
            break
    return st, diag
