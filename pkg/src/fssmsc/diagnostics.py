"""
Runtime self-checks: finite-difference gradients, trace-ratio optimality,
feasibility along a run, and monotone descent of the augmented Lagrangian
when the penalty is above the descent threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import constraints, solver
from .landmarks import LandmarkSet

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.status:7s} {self.name}" + (f"  ({self.detail})" if self.detail else "")


def random_orthonormal_rows(rng, k, m):
    return np.linalg.qr(rng.standard_normal((m, k)))[0].T


def random_interior_state(rng, m, n, n_ell, k, cfg, cs=None):
    """A random strictly feasible state with every coordinate away from its bounds."""
    Z = rng.uniform(0.05, 0.95, (m, n)) * cfg.m_Z
    q = Z @ Z.sum(axis=0) * rng.uniform(0.5, 1.5, m)
    q = np.clip(q, 2 * cfg.eps_q, 0.9 * cfg.C_q)
    return solver.SolverState(
        random_orthonormal_rows(rng, k, m),
        Z,
        q,
        Z + 0.1 * rng.standard_normal((m, n)),
        rng.standard_normal((m, n)),
    )


def random_labels(rng, n_ell, k):
    labels = np.concatenate([np.arange(1, k + 1), np.arange(1, k + 1), rng.integers(1, k + 1, n_ell - 2 * k)])
    return rng.permutation(labels)


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def gradient_errors(seed=0, points=20, m=8, n=30, n_ell=10, k=3, cfg=None):
    """Worst relative error of ``grad_P`` and ``grad_Q`` against central differences."""
    rng = np.random.default_rng(seed)
    cfg = (cfg or solver.SolverConfig(beta=1.0, lambda_M=10.0)).resolved(n)
    worst_P = worst_Q = 0.0
    for _ in range(points):
        cs = constraints.build_constraints(random_labels(rng, n_ell, k))
        st = random_interior_state(rng, m, n, n_ell, k, cfg)
        gP = solver.grad_P(st, cs, cfg)
        fd = central_difference(lambda: solver.objective_P(st, cs, cfg), st.Z)
        worst_P = max(worst_P, np.linalg.norm(gP - fd) / np.linalg.norm(fd))
        gQ = solver.grad_Q(st, cs, cfg)
        fd = central_difference(lambda: solver.objective_Q(st, cs, cfg), st.q)
        worst_Q = max(worst_Q, np.linalg.norm(gQ - fd) / np.linalg.norm(fd))
    return worst_P, worst_Q


def random_trace_ratio_problem(rng, m=10, k=2):
    Q = rng.standard_normal((m, m))
    L_f = Q @ Q.T / m + 0.1 * np.eye(m)
    S = rng.standard_normal((m, m))
    return solver.TraceRatioProblem(L_f, 0.5 * (S + S.T), k)


def best_sampled_ratio(rng, p, samples):
    m = p.L_d.shape[0]
    best = -np.inf
    for start in range(0, samples, 5000):
        b = min(5000, samples - start)
        V = np.linalg.qr(rng.standard_normal((b, m, p.k)))[0]
        num = np.einsum("bik,ij,bjk->b", V, p.L_d, V)
        den = np.einsum("bik,ij,bjk->b", V, p.L_f, V)
        best = max(best, float(np.max(num / den)))
    return best


def check_gradients(seed=0, points=20) -> CheckResult:
    eP, eQ = gradient_errors(seed, points)
    ok = eP < 1e-5 and eQ < 1e-5
    return CheckResult("gradient finite differences", PASS if ok else FAIL, f"rel err P {eP:.1e}, Q {eQ:.1e}")


def check_trace_ratio(seed=0, problems=10, samples=20000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_gap = np.inf
    monotone = True
    for _ in range(problems):
        p = random_trace_ratio_problem(rng)
        _, rho, hist = solver.solve_trace_ratio(p)
        monotone &= bool(np.all(np.diff(hist) >= -1e-12))
        worst_gap = min(worst_gap, rho - best_sampled_ratio(rng, p, samples))
    ok = monotone and worst_gap >= 0
    return CheckResult("trace-ratio optimality", PASS if ok else FAIL,
                       f"min(rho - best sampled) {worst_gap:.2e}, monotone {monotone}")


def feasibility_violations(st, cfg):
    """Largest violation of each constraint set (0 when feasible)."""
    return {
        "Z": max(0.0, -float(st.Z.min()), float(st.Z.max()) - cfg.m_Z),
        "q": max(0.0, cfg.eps_q - float(st.q.min()), float(st.q.max()) - cfg.C_q),
        "A": solver.orthonormality_error(st.A),
    }


def check_feasibility(ds, lm, cs, cfg) -> CheckResult:
    cfg = cfg.resolved(ds.n)
    worst = {"Z": 0.0, "q": 0.0, "A": 0.0}

    def record(j, st):
        for key, val in feasibility_violations(st, cfg).items():
            worst[key] = max(worst[key], val)

    _, diag = solver.solve(ds, lm, cs, cfg, callback=record)
    mult = max(diag.multiplier_residual, default=0.0)
    ok = worst["Z"] == 0 and worst["q"] == 0 and worst["A"] <= 1e-8 and mult <= 1e-6
    return CheckResult("feasibility and multiplier identity", PASS if ok else FAIL,
                       f"Z {worst['Z']:.1e}, q {worst['q']:.1e}, AA^T-I {worst['A']:.1e}, "
                       f"Lambda+grad h {mult:.1e}")


def descent_lambda(lm, lam=None):
    L_h = solver.estimate_L_h(lm)
    threshold = L_h + 2.0 + 2.0 * L_h**2
    return (max(100.0, threshold + 1.0) if lam is None else lam), threshold


def check_descent(ds, lm, cs, cfg, lam=None, iterations=200) -> CheckResult:
    lam, threshold = descent_lambda(lm, lam)
    if not lam > threshold:
        return CheckResult("Lagrangian descent", SKIPPED,
                           f"lambda {lam:g} <= L_h + 2 + 2 L_h^2 = {threshold:g}")
    cfg = replace(cfg, lam=lam, eta_z=None, eta_q=None, max_iter=iterations, stop_tol=0.0)
    _, diag = solver.solve(ds, lm, cs, cfg)
    L = np.asarray(diag.lagrangian)
    rise = float(np.max(np.diff(L[1:]), initial=-np.inf))
    ok = rise <= 1e-8
    return CheckResult("Lagrangian descent", PASS if ok else FAIL,
                       f"lambda {lam:.4g}, largest increase after sweep 2: {rise:.3g}")


def run_checks(ds, lm: LandmarkSet, cs, cfg, lam=None, seed=0) -> list:
    return [
        check_gradients(seed),
        check_trace_ratio(seed),
        check_feasibility(ds, lm, cs, cfg),
        check_descent(ds, lm, cs, cfg, lam),
    ]
