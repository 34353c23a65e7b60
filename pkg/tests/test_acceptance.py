"""Acceptance criteria, each at its stated tolerance. Every test records one
PASS/FAIL line, collected in the terminal summary."""

import json
import time
from dataclasses import dataclass, field

import numpy as np
import pytest

import oracles
from fssmsc import cli, constraints, data, evaluate, landmarks, pipeline, solver
from fssmsc.solver import SolverConfig


# ---------------------------------------------------------------------------
# feasibility bookkeeping shared by every solver run below


@dataclass
class Feasibility:
    Z: float = 0.0
    q: float = 0.0
    A: float = 0.0
    multiplier: float = 0.0
    sweeps: int = 0
    runs: list = field(default_factory=list)

    def tracked_solve(self, name, ds, lm, cs, cfg):
        cfg_r = cfg.resolved(ds.n)
        UtU = sum(U.T @ U for U in lm.per_view)
        G = sum(U.T @ X for U, X in zip(lm.per_view, ds.views))

        def record(j, st):
            self.Z = max(self.Z, -float(st.Z.min()), float(st.Z.max()) - cfg_r.m_Z)
            self.q = max(self.q, cfg_r.eps_q - float(st.q.min()), float(st.q.max()) - cfg_r.C_q)
            k = st.A.shape[0]
            self.A = max(self.A, float(np.max(np.abs(st.A @ st.A.T - np.eye(k)))))
            self.multiplier = max(self.multiplier, float(np.max(np.abs(st.Lambda + UtU @ st.B - G))))
            self.sweeps += 1

        self.runs.append(name)
        return solver.solve(ds, lm, cs, cfg, callback=record)


FEAS = Feasibility()


def benchmark(noise=0.05, seed=7, label_ratio=0.1, run_seed=0):
    ds = data.synthetic(k=3, r=2, dims=(20, 15), per_cluster=100, noise=noise, seed=seed)
    return pipeline.prepare(ds, label_ratio, 30, seed=run_seed)


@pytest.fixture(scope="module")
def reference():
    return benchmark()


def fit(name, prepared, cfg):
    ds, lm, cs = prepared
    t0 = time.perf_counter()
    st, diag = FEAS.tracked_solve(name, ds, lm, cs, cfg)
    seconds = time.perf_counter() - t0
    pred = evaluate.infer_labels(evaluate.embed(st.A, st.Z), ds.prefix_labels)
    return st, diag, evaluate.score(pred, ds.truth), seconds


@pytest.fixture(scope="module")
def descent_run(reference):
    ds, lm, cs = reference
    L_h = solver.estimate_L_h(lm)
    lam = max(100.0, L_h + 2 + 2 * L_h**2 + 1)
    t0 = time.perf_counter()
    _, diag = FEAS.tracked_solve("descent", ds, lm, cs, SolverConfig(lam=lam, max_iter=200))
    return lam, L_h, diag, time.perf_counter() - t0


@pytest.fixture(scope="module")
def default_run(reference):
    return fit("defaults", reference, SolverConfig())


@pytest.fixture(scope="module")
def ablation():
    betas = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
    acc = {b: [] for b in [0.0, *betas]}
    for seed in range(5):
        prepared = benchmark(noise=0.15, seed=seed, label_ratio=0.02, run_seed=seed)
        for b in acc:
            acc[b].append(fit(f"ablation beta={b} seed={seed}", prepared, SolverConfig(beta=b))[2].acc)
    return betas, {b: float(np.mean(v)) for b, v in acc.items()}


@pytest.fixture(scope="module")
def scaling():
    out = {}
    for per_cluster in (1000, 2000):
        ds = data.synthetic(k=5, r=2, dims=(20, 15), per_cluster=per_cluster, seed=1)
        ds, lm, cs = pipeline.prepare(ds, 50 / ds.n, 100, seed=0)
        assert ds.n_ell == 50
        times = []
        for rep in range(3):
            t0 = time.perf_counter()
            st, _ = FEAS.tracked_solve(f"scaling n={ds.n} rep={rep}", ds, lm, cs, SolverConfig())
            times.append(time.perf_counter() - t0)
        cache = solver.make_cache(ds, lm, SolverConfig().lam)
        out[ds.n] = (min(times), st.nbytes() + cache.nbytes())
    return out


# ---------------------------------------------------------------------------


def test_c01_gradient_suite(criterion):
    t0 = time.perf_counter()
    worst_P = worst_Q = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        st = oracles.interior_state(rng, m=8, n=30, k=3)
        cs = constraints.build_constraints(oracles.labels_for(rng, n_ell=10, k=3))
        ref = oracles.fd(lambda: oracles.P_oracle(st, cs, oracles.CFG), st.Z)
        worst_P = max(worst_P, np.linalg.norm(solver.grad_P(st, cs, oracles.CFG) - ref) / np.linalg.norm(ref))
        ref = oracles.fd(lambda: oracles.Q_oracle(st, cs, oracles.CFG), st.q)
        worst_Q = max(worst_Q, np.linalg.norm(solver.grad_Q(st, cs, oracles.CFG) - ref) / np.linalg.norm(ref))
    seconds = time.perf_counter() - t0
    ok = worst_P < 1e-5 and worst_Q < 1e-5 and seconds < 5
    assert criterion(1, "gradient suite", ok,
                     f"max rel err P {worst_P:.1e}, Q {worst_Q:.1e} (< 1e-5); {seconds:.2f}s (< 5s)")


def test_c02_trace_ratio_optimality(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    gaps, monotone = [], True
    for _ in range(10):
        S = rng.standard_normal((10, 10))
        L_f = S @ S.T / 10 + 0.1 * np.eye(10)
        D = rng.standard_normal((10, 10))
        L_d = D + D.T
        _, rho, hist = solver.solve_trace_ratio(solver.TraceRatioProblem(L_f, L_d, 2))
        monotone &= bool(np.all(np.diff(hist) >= 0))
        best = -np.inf
        for _ in range(10):
            V = np.linalg.qr(rng.standard_normal((10_000, 10, 2)))[0]
            r = np.einsum("bik,ij,bjk->b", V, L_d, V) / np.einsum("bik,ij,bjk->b", V, L_f, V)
            best = max(best, float(r.max()))
        gaps.append(rho - best)
    seconds = time.perf_counter() - t0
    ok = min(gaps) >= 0 and monotone and seconds < 30
    assert criterion(2, "trace-ratio optimality", ok,
                     f"min(rho - best of 1e5) {min(gaps):.3g} (>= 0), monotone {monotone}; {seconds:.1f}s (< 30s)")


def test_c03_descent_and_convergence(criterion, descent_run):
    lam, L_h, diag, seconds = descent_run
    L = np.asarray(diag.lagrangian)
    rise = float(np.max(np.diff(L[1:])))
    ratios = {}
    for name in ("delta_B", "delta_Z", "delta_q", "delta_Lambda"):
        seq = np.asarray(getattr(diag, name))
        ratios[name] = seq[-1] / seq[0] if seq[0] > 0 else np.inf
    ok = (rise <= 1e-8 and all(r < 0.1 for r in ratios.values()) and diag.iterations == 200 and seconds < 60)
    detail = (f"lambda {lam:.4g} (L_h {L_h:.4g}); largest rise of L from iteration 2: {rise:.3g} (<= 1e-8); "
              + ", ".join(f"{k[6:]} last/first {v:.3g}" for k, v in ratios.items()) + f" (< 0.1); {seconds:.1f}s")
    assert criterion(3, "descent and convergence", ok, detail)


def test_c04_stopping_curve(criterion, default_run):
    _, diag, _, _ = default_run
    s = diag.stopc
    ok = len(s) == 30 and s[4] < 0.2 * s[0] and s[29] < s[4]
    assert criterion(4, "stopping-curve shape", ok,
                     f"StopC_1 {s[0]:.3g}, StopC_5 {s[4]:.3g} (ratio {s[4] / s[0]:.3f} < 0.2), "
                     f"StopC_30 {s[29]:.3g} (< StopC_5)")


def test_c05_end_to_end_quality(criterion, default_run, reference):
    t0 = time.perf_counter()
    benchmark()
    prep = time.perf_counter() - t0
    _, _, scores, seconds = default_run
    ok = scores.acc >= 0.95 and scores.ari >= 0.90 and prep + seconds < 30
    assert criterion(5, "end-to-end quality", ok,
                     f"ACC {scores.acc:.4f} (>= 0.95), ARI {scores.ari:.4f} (>= 0.90), "
                     f"NMI {scores.nmi:.4f}; {prep + seconds:.2f}s")


def test_c06_ablation_direction(criterion, ablation):
    betas, mean_acc = ablation
    tuned = max(betas, key=lambda b: mean_acc[b])
    ok = mean_acc[tuned] >= mean_acc[0.0] - 0.02
    assert criterion(6, "ablation direction", ok,
                     f"mean ACC tuned beta={tuned:g}: {mean_acc[tuned]:.4f}, beta=0: {mean_acc[0.0]:.4f} "
                     f"(tuned >= beta0 - 0.02)")


def test_c07_linear_scaling(criterion, scaling):
    (t1, b1), (t2, b2) = scaling[5000], scaling[10000]
    ok = t2 / t1 <= 2.6 and b2 / b1 <= 2.2
    assert criterion(7, "linear scaling", ok,
                     f"solve {t1:.2f}s -> {t2:.2f}s (ratio {t2 / t1:.2f} <= 2.6), "
                     f"resident bytes {b1} -> {b2} (ratio {b2 / b1:.2f} <= 2.2)")


def test_c08_feasibility(criterion, descent_run, default_run, ablation, scaling):
    f = FEAS
    ok = f.Z == 0 and f.q == 0 and f.A <= 1e-8 and f.multiplier <= 1e-6
    assert criterion(8, "feasibility invariants", ok,
                     f"{len(f.runs)} runs, {f.sweeps} sweeps: Z viol {f.Z:.1e}, q viol {f.q:.1e}, "
                     f"|AA^T-I| {f.A:.1e} (<= 1e-8), |Lambda + grad h| {f.multiplier:.1e} (<= 1e-6)")


def test_c09_metric_oracles(criterion):
    worst = 0.0
    checked = 0

    def compare(pred, truth):
        p, t = np.array(pred), np.array(truth)
        return max(
            abs(evaluate.accuracy(p, t) - oracles.plain_accuracy(pred, truth)),
            abs(evaluate.matched_accuracy(p, t) - oracles.matched_accuracy(pred, truth)),
            abs(evaluate.nmi(p, t) - oracles.nmi(pred, truth)),
            abs(evaluate.ari(p, t) - oracles.ari(pred, truth)),
        )

    rng = np.random.default_rng(9)
    for n in range(2, 9):
        parts = oracles.partitions(n)
        if n <= 6:
            pairs = [(p, t) for p in parts for t in parts]
        else:
            # every partition on each side against a fixed sample of the other
            sample = [parts[i] for i in rng.choice(len(parts), 8, replace=False)]
            pairs = [(p, t) for p in parts for t in sample] + [(t, p) for p in parts for t in sample]
        for pred, truth in pairs:
            worst = max(worst, compare(pred, truth))
            checked += 1
    ari_example = evaluate.ari([1, 1, 2, 2], [1, 2, 1, 2])
    ok = worst <= 1e-12 and ari_example == -1 / 3
    assert criterion(9, "metric oracles", ok,
                     f"{checked} partition pairs, max deviation {worst:.1e} (<= 1e-12); "
                     f"ARI([1,1,2,2],[1,2,1,2]) = {ari_example!r} (required -1/3)")


def test_c10_determinism(criterion, tmp_path):
    ds_dir = tmp_path / "ds"
    assert cli.main(["synth", "--clusters", "3", "--views", "2", "--dims", "20,15", "--per-cluster", "100",
                     "--noise", "0.05", "--seed", "7", "--out", str(ds_dir)]) == 0
    flags = ["--landmarks", "30", "--label-ratio", "0.1", "--seed", "0"]
    reports, traces = [], []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["run", str(ds_dir), *flags, "--out", str(out), "--trace", str(tmp_path / "trace.csv")]) == 0
        rep = json.loads((out / "report.json").read_text())
        for key in ("seconds_solve", "seconds_total"):
            rep.pop(key)
        reports.append(rep)
        traces.append((tmp_path / "trace.csv").read_bytes())
    ok = reports[0] == reports[1] and traces[0] == traces[1]
    assert criterion(10, "determinism", ok,
                     f"reports equal (timing fields excluded): {reports[0] == reports[1]}, "
                     f"traces byte-equal: {traces[0] == traces[1]}")
