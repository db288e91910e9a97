"""Acceptance criteria. Each test prints one [PASS]/[FAIL] line via the ``criterion`` fixture."""

import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from heavykrr import theory
from heavykrr.cli import dispatch
from heavykrr.config import load_config, packaged_config_path
from heavykrr.harness import fn_sum_samples, loglog_slope, rate_sweep, run_experiment
from heavykrr.kernel import FunctionExpansion, KernelSpec, MarginalSpec, gram, l2_inner
from heavykrr.krr import Dataset, fit, sym_eig
from heavykrr.noise import NoiseModel
from heavykrr.risk import empirical_quantile, excess_risk_closed, excess_risk_mc

mp.mp.dps = 40
RBF = KernelSpec()
NORMAL = MarginalSpec()
GAUSS = "gaussian(variance=3)"
STUDENT = "student_t(df=3)"


def replication_config(seed=0):
    return load_config(packaged_config_path(), ["risk_method.kind=closed_form", f"master_seed={seed}"])


@pytest.fixture(scope="module")
def replication():
    cfg = replication_config()
    start = time.perf_counter()
    table, log = run_experiment(cfg, workers=1)
    return cfg, table, log, time.perf_counter() - start


def _ratio(table, alpha, level):
    return table.get(STUDENT, alpha, level) / table.get(GAUSS, alpha, level)


# --- 1. quantile experiment replication ---------------------------------------------


def test_c1a_heavy_tail_blowup_smallest_alpha(replication, criterion):
    cfg, table, log, wall = replication
    r = _ratio(table, cfg.alphas[0], 0.999)
    ok = criterion("1a Q_t(0.999)/Q_gauss(0.999) >= 2 at alpha=1e-4", r >= 2, f"ratio={r:.4f}")
    assert ok


def test_c1b_median_agreement(replication, criterion):
    cfg, table, log, wall = replication
    ratios = [_ratio(table, a, 0.5) for a in cfg.alphas]
    ok = all(0.67 <= r <= 1.5 for r in ratios)
    criterion("1b Q_t(0.5)/Q_gauss(0.5) in [0.67, 1.5] for every alpha", ok, " ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_c1c_regularization_suppresses_blowup(replication, criterion):
    cfg, table, log, wall = replication
    ratios = [_ratio(table, a, 0.999) for a in cfg.alphas]
    ok = all(b <= a for a, b in zip(ratios, ratios[1:]))
    criterion("1c 0.999-level ratio nonincreasing in alpha", ok, " ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_c1_runtime(replication, criterion):
    cfg, table, log, wall = replication
    ok = wall <= 300 and log.failures == 0 and len(log.rows) == 2 * 5 * 10_000
    criterion("1 runtime <= 5 min single-threaded (n=20, M=10000)", ok, f"{wall:.1f}s, failures={log.failures}")
    assert ok


@pytest.mark.slow
def test_c1c_five_repetition_medians(replication, criterion):
    cfg, table, log, wall = replication
    per_rep = [[_ratio(table, a, 0.999) for a in cfg.alphas]]
    for seed in range(1, 5):
        t, _ = run_experiment(replication_config(seed))
        per_rep.append([_ratio(t, a, 0.999) for a in cfg.alphas])
    med = np.median(np.array(per_rep), axis=0)
    ok = all(b <= a for a, b in zip(med, med[1:]))
    criterion("1c (medians of 5 repetitions) 0.999-level ratio nonincreasing in alpha", ok,
              " ".join(f"{r:.3f}" for r in med))
    assert ok


# --- 2. effective sample size curves -------------------------------------------------


def test_c2_n0_curves(criterion):
    deltas = np.geomspace(1e-3, 0.5, 200)
    curves = {q: np.array([theory.n0(d, 2.0, 10.0, q, 1.0) for d in deltas]) for q in (3, 4, 6)}
    mask = deltas <= 0.1
    ordered = bool(np.all(curves[3][mask] > curves[4][mask]) and np.all(curves[4][mask] > curves[6][mask]))
    v = theory.n0(0.1, 2.0, 10.0, 3, 1.0)
    ok = ordered and abs(v - 2.2764) <= 1e-3
    criterion("2 n0 curves strictly decrease in q for delta <= 0.1 and n0(0.1; q=3) = 2.2764 +- 1e-3", ok,
              f"ordered={ordered}, n0={v:.6f}")
    assert ok


# --- 3. rate along the alpha1 schedule -------------------------------------------------


def test_c3_rate_sweep(criterion):
    cfg = load_config(
        packaged_config_path(),
        ["risk_method.kind=closed_form", "trials=200", 'noise_models=[{"kind": "gaussian", "variance": 3}]'],
    )
    start = time.perf_counter()
    rows = rate_sweep(cfg, "alpha1", [50, 100, 200, 400, 800], 0.1, nu=0.5)
    wall = time.perf_counter() - start
    med = [r.median_risk for r in rows]
    slope = rows[0].slope_estimate
    decreasing = all(b < a for a, b in zip(med, med[1:]))
    ok = decreasing and -1.0 <= slope <= -0.2 and wall <= 600
    criterion("3 median risk strictly decreasing in n, slope in [-1.0, -0.2], runtime <= 10 min", ok,
              f"slope={slope:.3f}, decreasing={decreasing}, {wall:.1f}s")
    assert ok


# --- 4. Hilbert-space noise sum tails ---------------------------------------------------


@pytest.fixture(scope="module")
def fn_samples():
    g = fn_sum_samples(RBF, NORMAL, NoiseModel.gaussian(3.0), 20, 100_000)
    t = fn_sum_samples(RBF, NORMAL, NoiseModel.student_t(3.0), 20, 100_000)
    return g, t


def test_c4a_fn_tail_ratio(fn_samples, criterion):
    g, t = fn_samples
    r = empirical_quantile(t, 0.999) / empirical_quantile(g, 0.999)
    ok = criterion("4a heavy/light Delta2 quantile ratio at 0.999 >= 2 (n=20, M=1e5)", r >= 2, f"ratio={r:.4f}")
    assert ok


def test_c4b_fn_median_ratio(fn_samples, criterion):
    g, t = fn_samples
    r = empirical_quantile(t, 0.5) / empirical_quantile(g, 0.5)
    ok = criterion("4b heavy/light Delta2 quantile ratio at 0.5 <= 1.5", r <= 1.5, f"ratio={r:.4f}")
    assert ok


def test_c4c_fn_scaling_slope(criterion):
    ns = [25, 100, 400, 1600]
    qs = [empirical_quantile(fn_sum_samples(RBF, NORMAL, NoiseModel.gaussian(3.0), n, 500), 0.9) for n in ns]
    slope = loglog_slope(ns, qs)
    ok = criterion("4c slope of the delta=0.1 Delta2 quantile vs n in [-0.65, -0.35]", -0.65 <= slope <= -0.35,
                   f"slope={slope:.4f} (M=500 per n)")
    assert ok


# --- 5. oracle equivalence ---------------------------------------------------------------


def _brute_quantile(values, level):
    M = len(values)
    cands = [t for t in values if sum(1 for v in values if v <= t) / M >= level]
    return min(cands)


def test_c5_oracle_suite(criterion):
    r = np.random.default_rng(2024)
    worst = {}

    err = 0.0
    for _ in range(200):
        n = int(r.integers(1, 6))
        xs, ys, alpha = r.normal(size=n), r.normal(size=n), 10 ** r.uniform(-4, 1)
        K = np.exp(-np.subtract.outer(xs, xs) ** 2 / 2)
        c_oracle = np.linalg.inv(K + n * alpha * np.eye(n)) @ ys
        c = fit(RBF, Dataset(xs, ys), alpha).expansion.coefficients
        err = max(err, float(np.max(np.abs(c - c_oracle)) / max(1.0, np.max(np.abs(c_oracle)))))
    worst["krr"] = err

    err = 0.0
    for _ in range(50):
        a, b = r.uniform(-6, 6, size=2)
        val, _ = integrate.quad(
            lambda x: math.exp(-(x - a) ** 2 / 2 - (x - b) ** 2 / 2 - x * x / 2) / math.sqrt(2 * math.pi),
            -math.inf, math.inf, epsabs=1e-13, epsrel=1e-13,
        )
        err = max(err, abs(l2_inner(RBF, NORMAL, a, b) - val))
    worst["l2"] = err

    bad_pairs = 0
    for i in range(20):
        f = FunctionExpansion(r.uniform(-3, 3, size=4), r.normal(size=4))
        g = FunctionExpansion(r.uniform(-3, 3, size=3), r.normal(size=3))
        closed = excess_risk_closed(RBF, NORMAL, f, g).value
        est = excess_risk_mc(RBF, NORMAL, f, g, 100_000, np.random.default_rng(10_000 + i))
        bad_pairs += abs(closed - est.value) > 3 * est.std_error

    mismatches = 0
    for _ in range(1000):
        size = int(r.integers(1, 40))
        vals = list(np.round(r.normal(size=size), 1))
        level = float(r.choice([r.uniform(), 0.0, 1.0, 0.5, 0.999]))
        mismatches += empirical_quantile(vals, level) != _brute_quantile(vals, level)

    ok = worst["krr"] <= 1e-8 and worst["l2"] <= 1e-8 and bad_pairs == 0 and mismatches == 0
    criterion("5 oracle equivalence (KRR inversion, L2 quadrature, closed vs MC risk, quantile scan)", ok,
              f"krr={worst['krr']:.1e} l2={worst['l2']:.1e} mc_outside_3se={bad_pairs}/20 quantile_mismatch={mismatches}/1000")
    assert ok


# --- 6. theory formulas ----------------------------------------------------------------------


def _mp_capacity_free(alpha, delta, n, nu, R, sup, sigma, Q, q, c1, c2):
    a, d, s = mp.mpf(alpha), mp.mpf(delta), min(mp.mpf(nu), 1)
    L = mp.log(6 / d)
    c_tilde = 2 * max(sup + R, R)
    C_d = 2 * mp.sqrt(2) * max(c_tilde, max(mp.power(6 * c1, mp.mpf(1) / q), 1 / mp.sqrt(c2)))
    eta = max(mp.power(Q / (d * mp.mpf(n) ** (q - 1)), mp.mpf(1) / q), sigma * mp.sqrt(mp.log(6 * c1 / d) / n))
    return R * a**s + C_d / mp.sqrt(a) * (L / n + mp.sqrt(a ** (2 * s) * L / n) + eta)


def _mp_capacity(alpha, delta, n, nu, q, c1, p, Dt, c):
    a, d, s = mp.mpf(alpha), mp.mpf(delta), min(mp.mpf(nu), 1)
    N = Dt * a ** (-mp.mpf(p))
    L = mp.log(8 / d)
    eta = max(
        mp.power(1 / (d * mp.mpf(n) ** (q - 1)), mp.mpf(1) / q) * mp.power(1 / (a * N), mp.mpf(q - 2) / (2 * q)),
        mp.sqrt(mp.log(8 * c1 / d) / n),
    )
    return c * (a**s + L / (mp.sqrt(a) * n) + mp.sqrt(N * L / n) + mp.sqrt(N) * eta)


def test_c6_theory_suite(criterion):
    r = np.random.default_rng(6)
    fails = []

    for delta in (0.5, 0.1, 1e-2, 1e-4):
        for q in (3, 4, 6):
            m = theory.n0(delta, 2.0, 10.0, q)
            if m >= 1:
                p_, s_ = theory.eta_capacity_free_branches(delta, m, 2.0, 10.0, q)
                if abs(p_ - s_) > 1e-6 * s_:
                    fails.append(f"n0 branches q={q} delta={delta}")
    for n in (10**2, 10**3, 10**4):
        rc = theory.regime_change_delta(n, 1.0, 1.0, 3)
        p_, s_ = theory.fn_confidence_branches(rc.delta, n, 1.0, 1.0, 3)
        if not rc.found or abs(p_ - s_) > 1e-6 * s_:
            fails.append(f"delta_bar n={n}")

    for n in np.unique(np.round(np.logspace(0, 6, 30))):
        for delta in np.logspace(-8, -0.01, 30):
            d1, d2 = theory.in_D1(n, delta, 2, 10, 3), theory.in_D2(n, delta, 2, 10, 3)
            if d1 == d2 or d1 != (n >= theory.n0(delta, 2, 10, 3)):
                fails.append("partition")

    ns = [10, 30, 100, 300, 1000, 10**4, 10**6]
    for delta in (0.5, 0.1, 1e-3):
        for sched in (
            lambda n, d: theory.schedule_alpha1(n, d, 0.5),
            lambda n, d: theory.schedule_alpha2(n, d, 1.0, 3).pre_clamp,
            lambda n, d: theory.schedule_alpha_capacity(n, d, 1.0, 0.5),
        ):
            vals = [sched(n, delta) for n in ns]
            if not all(b < a for a, b in zip(vals, vals[1:])):
                fails.append("schedule monotone in n")
            if not sched(100, delta / 10) >= sched(100, delta):
                fails.append("schedule monotone in 1/delta")

    xs = r.normal(size=20)
    C = gram(RBF, xs) / 20
    lam = sym_eig(C).eigenvalues
    for alpha in (1e-3, 0.1, 1.0):
        oracle = np.trace(C @ np.linalg.inv(C + alpha * np.eye(20)))
        N = theory.effective_dimension(lam, alpha)
        if abs(N - oracle) > 1e-8 or N > lam.sum() / alpha + 1e-12:
            fails.append(f"effdim alpha={alpha}")

    worst = 0.0
    for _ in range(50):
        alpha, delta, n = 10 ** r.uniform(-4, 1), 10 ** r.uniform(-4, np.log10(0.5)), float(int(10 ** r.uniform(1, 6)))
        nu, R, sup = r.uniform(0.5, 2), r.uniform(0.1, 5), r.uniform(0, 5)
        sigma, Q, q = r.uniform(0.1, 5), 10 ** r.uniform(-1, 2), int(r.integers(3, 9))
        c1, c2, p, Dt, c = r.uniform(1, 5), r.uniform(0.2, 5), r.uniform(0.1, 0.9), r.uniform(0.1, 10), r.uniform(0.5, 3)
        free = theory.capacity_free_bound(
            alpha, delta, n, RBF, theory.SourceCondition(nu, R, sup), theory.NoiseMoments(sigma, Q, q),
            theory.FnConstants(c1, c2),
        ).total
        cap = theory.capacity_bound(
            alpha, delta, n, RBF, theory.SourceCondition(nu, R, sup), theory.EigenDecay(p, D_tilde=Dt),
            theory.NoiseMoments(sigma, Q, q), theory.FnConstants(c1, c2), multiplier=c,
        ).total
        ref_free = float(_mp_capacity_free(alpha, delta, n, nu, R, sup, sigma, Q, q, c1, c2))
        ref_cap = float(_mp_capacity(alpha, delta, n, nu, q, c1, p, Dt, c))
        worst = max(worst, abs(free / ref_free - 1), abs(cap / ref_cap - 1))
    if worst > 1e-10:
        fails.append(f"bound re-evaluation rel={worst:.1e}")

    ok = not fails
    criterion("6 theory formulas (branch equality, partition, schedules, effdim, 50 random bound draws)", ok,
              f"max bound rel err={worst:.1e}" + (f"; failures: {sorted(set(fails))}" if fails else ""))
    assert ok


# --- 7. determinism of the run command -------------------------------------------------------


def test_c7_run_determinism(tmp_path, criterion, capsys):
    outs = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}"
        code = dispatch(["run", "--config", packaged_config_path(), "--out", str(out), "--workers", str(workers),
                         "--set", "trials=150", "--set", "risk_method.m=2000"])
        assert code == 0
        outs.append(out)
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in ("quantiles.csv", "raw.csv"))
    ok = criterion("7 run twice (1 and 4 workers) gives byte-identical quantiles.csv and raw.csv", same)
    assert ok
