"""Acceptance criteria, one test each.

Every test prints a single ``[ACCEPT n] PASS|FAIL`` line with the measured
quantities, then asserts. Several of these take minutes on one core; run
``pytest tests/test_acceptance.py -v`` to see the summary lines.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import dense_pi, random_spec, two_state
from mdpsim import (CenteredObservable, ChainSpec, HomogenizedCoefficients, PeriodicEnv,
                    SimulationParams, bound_continuous, bound_jump, center, cell_resolving_dt,
                    cell_resolving_h_beta, diffusion_theta, drift_theta, euler_ensemble,
                    gaussian_tube_exit_prob, homogenize_chain, mdp_scan, negligibility_scan,
                    qv_density, solve_poisson, stationary_dist, tail_table,
                    timechange_ensemble, tube_exit_oracle, tube_exit_rate,
                    verify_decomposition)
from mdpsim.cli import main

pytestmark = pytest.mark.acceptance

EPS_GRID = [0.2, 0.1, 0.05, 0.02]
SIGMA_MAX = 2.0


@pytest.fixture
def report(capsys):
    def emit(n, ok, elapsed, limit, detail):
        within = limit is None or elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        budget = "" if limit is None else f" (limit {limit:.0f} s)"
        with capsys.disabled():
            print(f"\n[ACCEPT {n:2d}] {status}  {elapsed:7.1f} s{budget}  {detail}")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f} s over {limit} s"
    return emit


def resolving(T):
    return lambda eps: cell_resolving_dt(eps, 0.1, SIGMA_MAX, T, cells=10)


def test_01_homogenized_constants(tmp_path, report):
    t0 = time.perf_counter()
    cfg = tmp_path / "two.json"
    cfg.write_text(json.dumps({"environment": {
        "kind": "chain", "states": [1.0, 2.0], "generator": [[-1, 1], [1, -1]],
        "observable": [1.0, 0.0]}}))
    assert main(["homogenize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    vals = {}
    for line in (tmp_path / "homogenize.csv").read_text().splitlines():
        if not line.startswith("#") and not line.startswith("name"):
            name, idx, v = line.split(",")
            vals[(name, idx)] = float(v)
    err_two = max(abs(vals[("b_eff", "")] - 0.8), abs(vals[("a_eff", "")] - 1.6))
    worst = 0.0
    rng = np.random.default_rng(2024)
    for _ in range(20):
        spec = random_spec(rng, m=5, density=0.5)
        pi = dense_pi(spec.generator)
        w = pi / spec.states**2
        co = homogenize_chain(spec)
        worst = max(worst, abs(co.a_eff - 1 / w.sum()) / (1 / w.sum()),
                    abs(co.b_eff - (spec.observable * w).sum() / w.sum()))
    elapsed = time.perf_counter() - t0
    report(1, err_two <= 1e-12 and worst <= 1e-10, elapsed, 1.0,
           f"two-state error {err_two:.1e}; random 5-state worst deviation {worst:.1e}")


def test_02_poisson_machinery(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    res, hpi = 0.0, 0.0
    for _ in range(50):
        spec = random_spec(rng, m=int(rng.integers(2, 8)), density=rng.uniform())
        f = center(spec, rng.normal(size=spec.m), rng.uniform(0.2, 2.0, spec.m))
        dec = solve_poisson(spec, f)
        res = max(res, np.abs(spec.generator @ dec.h - f.values).max())
        hpi = max(hpi, abs(dec.h @ stationary_dist(spec)))
    sym = ChainSpec([1.0, 2.0], [[-1.0, 1.0], [1.0, -1.0]], [0.0, 0.0])
    m = qv_density(sym, np.array([-0.5, 0.5]))
    m_err = np.abs(m - 1.0).max()
    elapsed = time.perf_counter() - t0
    report(2, res <= 1e-10 and hpi <= 1e-10 and m_err <= 1e-12, elapsed, 5.0,
           f"max residual {res:.1e}, max |h.pi| {hpi:.1e}, two-state m error {m_err:.1e}")


def test_03_decomposition_identity_and_qv(report):
    t0 = time.perf_counter()
    sym = ChainSpec([1.0, 2.0], [[-1.0, 1.0], [1.0, -1.0]], [0.0, 0.0])
    three = ChainSpec([1.0, 2.0, 3.0], [[-1.0, 0.6, 0.4], [0.5, -1.5, 1.0], [2.0, 1.0, -3.0]],
                      [1.0, 0.0, -1.0])
    checks = [
        ("two-state f=(1,-1)", verify_decomposition(
            sym, CenteredObservable(np.array([1.0, -1.0]), 0.0), 1e3, 1000, 31)),
        ("three-state drift", verify_decomposition(three, drift_theta(three), 1e3, 1000, 32)),
    ]
    elapsed = time.perf_counter() - t0
    ok = all(c.identity_ok and c.jumps_ok and c.qv_ok for _, c in checks)
    detail = "; ".join(
        f"{name}: identity {c.max_identity_residual:.1e}, Var(M_U)/U {c.var_M_over_U:.4f} "
        f"vs {c.qv_rate:.4f} (3 SE {3 * c.var_se:.4f})" for name, c in checks)
    report(3, ok, elapsed, 120.0, detail)


def test_04_tail_bounds(report):
    t0 = time.perf_counter()
    spec = two_state()
    rows = []
    for f in (drift_theta(spec), diffusion_theta(spec)):
        rows += tail_table(spec, f, 10.0, [1, 2, 3, 4], [5, 10, 20], 10_000, 41)
    three = ChainSpec([1.0, 2.0, 3.0], [[-1.0, 0.6, 0.4], [0.5, -1.5, 1.0], [2.0, 1.0, -3.0]],
                      [3.0, 0.0, -3.0])
    rows += tail_table(three, center(three, three.observable, np.ones(3)), 10.0,
                       [1, 2, 3, 4], [5, 10, 20], 10_000, 42)
    rng = np.random.default_rng(43)
    kdiff = max(abs(bound_jump(r, q, 0.0) - bound_continuous(r, q))
                for r, q in rng.uniform(0.01, 10.0, (1000, 2)))
    elapsed = time.perf_counter() - t0
    violated = sum(r.violated for r in rows)
    nonzero = sum(r.count > 0 for r in rows)
    slack = min(r.bound - r.ucl99 for r in rows)
    report(4, violated == 0 and kdiff <= 1e-15, elapsed, 300.0,
           f"{len(rows)} cells, {violated} violated, {nonzero} with hits, "
           f"min(bound - ucl99) {slack:.3f}; K=0 difference {kdiff:.1e}")


def test_05_scheme_equivalence(report):
    t0 = time.perf_counter()
    spec = two_state()
    # Euler needs steps well inside one environment cell; time change does not
    pe = SimulationParams(0.1, 0.1, T=1.0, dt=2e-5, seed=51)
    pt = SimulationParams(0.1, 0.1, T=1.0, dt=1e-3, seed=52)
    eu = euler_ensemble(pe, spec, 10_000, with_drift=False).terminal
    tc, _ = timechange_ensemble(pt, spec, 10_000)
    p = stats.ks_2samp(eu, tc).pvalue
    elapsed = time.perf_counter() - t0
    report(5, p > 0.01, elapsed, 300.0,
           f"KS p = {p:.3f}; Var Euler {eu.var():.4f}, Var time change {tc.var():.4f}")


def test_06_girsanov(report):
    t0 = time.perf_counter()
    spec = two_state()
    p = SimulationParams(0.1, 0.1, T=1.0, dt=1e-4, seed=61)
    free = euler_ensemble(p, spec, 10_000, with_drift=False, key=(0,))
    drift = euler_ensemble(p, spec, 10_000, with_drift=True, key=(1,))
    w = np.exp(free.log_weight)
    w_se = w.std(ddof=1) / math.sqrt(w.size)
    z = stats.norm.ppf(0.995)
    rw = w * free.terminal
    m1, s1 = rw.mean(), rw.std(ddof=1) / math.sqrt(rw.size)
    m2, s2 = drift.terminal.mean(), drift.terminal.std(ddof=1) / math.sqrt(drift.n)
    overlap = (m1 - z * s1 <= m2 + z * s2) and (m2 - z * s2 <= m1 + z * s1)
    ok = abs(w.mean() - 1.0) <= 3 * w_se and overlap
    elapsed = time.perf_counter() - t0
    report(6, ok, elapsed, 300.0,
           f"mean weight {w.mean():.4f} +- {w_se:.4f}; reweighted E[X_T] {m1:.4f} +- {s1:.4f}, "
           f"drifted {m2:.4f} +- {s2:.4f}")


def test_07_homogenization_trend(report):
    # Drifted time-change paths: exact in space, so only the auxiliary step
    # (eps/10) must resolve the cells; Euler would need far smaller steps.
    t0 = time.perf_counter()
    spec = two_state()
    T = 1.0
    sups, last = [], None
    for k, eps in enumerate(EPS_GRID):
        p = SimulationParams(eps, 0.1, T=T, dt=1e-3, h_beta=cell_resolving_h_beta(eps, 10),
                             seed=71)
        last, sup = timechange_ensemble(p, spec, 10_000, with_drift=True, key=(k,))
        sups.append(sup.mean())
    co = homogenize_chain(spec)
    z = (last - co.b_eff * T) / (p.eps_kappa * math.sqrt(co.a_eff * T))
    p_ks = stats.kstest(z, "norm").pvalue
    decreasing = all(a > b for a, b in zip(sups, sups[1:]))
    elapsed = time.perf_counter() - t0
    report(7, decreasing and p_ks > 0.01, elapsed, 900.0,
           "mean sup deviation " + ", ".join(f"{s:.4f}" for s in sups)
           + f"; KS p at eps=0.02 {p_ks:.3f} (mean {z.mean():+.3f}, var {z.var():.3f})")


def test_08_mdp_rate_limit_model(report):
    t0 = time.perf_counter()
    a, b, T = 1.6, 0.8, 1.0
    eta = math.sqrt(2 * a * T)  # predicted rate exactly 1
    kappa = 0.25
    eps = 0.05 ** (1 / (2 * kappa))
    env = PeriodicEnv.constant(math.sqrt(a), b)
    res = mdp_scan(env, [eps], kappa, eta, T=T, dt=2e-5 * T, estimator="tilted",
                   n_replicas=100_000, seed=81, check_consistency=False)
    row = res.rows[0]
    exact = gaussian_tube_exit_prob(eta, T, math.sqrt(row.eps2kappa * a))
    lo, hi = row.ci(0.99)
    rel = abs(row.neg_rate / row.predicted_rate - 1)
    elapsed = time.perf_counter() - t0
    report(8, rel <= 0.15 and lo <= exact <= hi, elapsed, 900.0,
           f"-eps^2k log p = {row.neg_rate:.4f} vs {row.predicted_rate:.4f} ({rel:.1%}); "
           f"p_hat {row.p_hat:.4e} CI99 [{lo:.4e}, {hi:.4e}], exact {exact:.4e}")


def _monotone_with_one_inversion(vals, ses):
    d = np.diff(vals)
    joint = np.sqrt(np.asarray(ses[:-1]) ** 2 + np.asarray(ses[1:]) ** 2)
    for sign in (1.0, -1.0):
        bad = sign * d < 0
        if bad.sum() == 0 or (bad.sum() == 1 and np.all(np.abs(d[bad]) <= joint[bad])):
            return True
    return False


def test_09_mdp_trend_random_environment(report):
    t0 = time.perf_counter()
    T, eta = 0.1, 0.5
    res = mdp_scan(two_state(), EPS_GRID, 0.1, eta, T=T, dt=resolving(T), n_replicas=10_000,
                   seed=91)
    rates = res.column("neg_rate")
    ses = np.array([r.eps2kappa * r.stderr / r.p_hat for r in res.rows])
    mono = _monotone_with_one_inversion(rates, ses)
    rel = abs(rates[-1] / res.predicted - 1)
    elapsed = time.perf_counter() - t0
    report(9, mono and rel <= 0.35 and all(r.usable for r in res.rows), elapsed, 1800.0,
           "-eps^2k log p = " + ", ".join(f"{v:.4f}" for v in rates)
           + f"; predicted {res.predicted:.4f}; final off by {rel:.1%}")


def test_10_negligibility_trend(report):
    t0 = time.perf_counter()
    T = 1.0
    parts, ok = [], True
    for which, eta in (("drift", 0.15), ("diffusion", 0.5)):
        res = negligibility_scan(two_state(), EPS_GRID, 0.1, eta, T=T, dt=resolving(T),
                                 which=which, n_replicas=3000, seed=101)
        if not all(r.usable for r in res.rows):
            ok = False
            parts.append(f"{which}: empty row")
            continue
        L = res.scaled_log_p
        dec = -np.diff(L)
        good = bool(np.all(dec > 0) and dec[-1] >= 0.5 * dec[0])
        ok &= good
        parts.append(f"{which} (eta {eta}): eps^2k log p = "
                     + ", ".join(f"{v:.3f}" for v in L))
    elapsed = time.perf_counter() - t0
    report(10, ok, elapsed, 1800.0, "; ".join(parts))


def test_11_tube_rate_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(111)
    worst = 0.0
    for _ in range(10):
        eta, T = rng.uniform(0.1, 3.0), rng.uniform(0.2, 5.0)
        co = HomogenizedCoefficients(rng.normal(), rng.uniform(0.2, 5.0))
        exact = tube_exit_rate(eta, T, co)
        worst = max(worst, abs(tube_exit_oracle(eta, T, co, n=100) / exact - 1))
    elapsed = time.perf_counter() - t0
    report(11, worst <= 1e-3, elapsed, 60.0, f"worst relative gap {worst:.2e}")


def test_12_determinism(tmp_path, report):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "environment": {"kind": "chain", "states": [1.0, 2.0],
                        "generator": [[-1, 1], [1, -1]], "observable": [1.0, 0.0]},
        "simulation": {"epsilon": [0.2, 0.1, 0.05], "kappa": 0.1, "T": 0.1, "dt": 1e-3},
        "scan": {"eta": 0.3, "estimator": "tilted", "replicas": 500},
        "seed": 12,
    }))
    bodies = {}
    for sub, fname in (("mdp-scan", "mdp-scan.csv"),
                       ("negligibility-scan", "negligibility-scan.csv")):
        for threads in (1, 2, 5):
            out = tmp_path / f"{sub}-{threads}"
            assert main([sub, "--config", str(cfg), "--out", str(out),
                         "--threads", str(threads)]) == 0
            text = (out / fname).read_text()
            bodies.setdefault(sub, set()).add(
                "".join(l for l in text.splitlines(True) if not l.startswith("#")))
    elapsed = time.perf_counter() - t0
    ok = all(len(v) == 1 for v in bodies.values())
    report(12, ok, elapsed, None,
           ", ".join(f"{k}: {len(v)} distinct bodies over 3 thread counts" for k, v in bodies.items()))
