"""Acceptance criteria, each at its stated tolerance and runtime budget.

A PASS/FAIL line per criterion is printed at the end of the pytest run.
"""
import time

import numpy as np
import pytest

from factorate.assignment import Schedule, SelectionOnU, StaggeredAdoption, assign
from factorate.dgp import BinaryChoice, DgpConfig, InteractiveFE, NoiseSpec, build_truth, delta_e_proxy
from factorate.estimator import assemble, identification_bound
from factorate.harness import (
    NoiseScaleConfig,
    NormalityConfig,
    SweepConfig,
    run_consistency_sweep,
    run_holder_decay,
    run_noise_scale_study,
    run_normality_study,
    summarize,
)
from factorate.linalg import min_norm_least_squares, svd, truncate, truncated_pinv
from factorate.oracle import oracle_ate, oracle_beta
from factorate.panel import PanelData, build_regression, common_measurements, design, observe, read_panel_csv, write_panel_csv
from factorate.pcr import Fixed, pcr_fit
from factorate.rng import derive_seed
from oracles import constant_columns

pytestmark = pytest.mark.acceptance


def linear_panel(sigma=0.0, n=100, T=100, seed=0):
    truth = build_truth(DgpConfig(n, T, 3, InteractiveFE(factor_dim=3), NoiseSpec(sigma_max=sigma), seed=seed))
    a = assign(SelectionOnU(), truth.unit_factors, T, seed=seed, schedule=Schedule(T - 1, 2))
    return truth, observe(truth, a)


def test_criterion_1_identification_exactness(record):
    start = time.perf_counter()
    truth, panel = linear_panel()
    t_star = 99
    worst = 0.0
    for target in ("att", "atu", "ate"):
        d = design(panel, t_star, target)
        res = assemble(panel, d, oracle_beta(truth, d, 0), oracle_beta(truth, d, 1))
        worst = max(worst, abs(res.ate_hat - oracle_ate(truth, d.target_set, t_star)))
    elapsed = time.perf_counter() - start
    record(f"max |error| over ATT/ATU/ATE = {worst:.3g} (tol 1e-8), {elapsed:.2f}s")
    assert worst <= 1e-8
    assert elapsed < 5


def test_criterion_2_pcr_noiseless_recovery(record):
    start = time.perf_counter()
    truth, panel = linear_panel()
    d = design(panel, 99, "att")
    reg = build_regression(panel, d, 0)
    beta0 = pcr_fit(reg, Fixed(truth.rank))
    resid = float(np.linalg.norm(reg.covariates @ beta0.values - reg.response))
    beta1 = pcr_fit(build_regression(panel, d, 1), Fixed(truth.rank))
    err = abs(assemble(panel, d, beta0, beta1).ate_hat - oracle_ate(truth, d.i1, 99))
    elapsed = time.perf_counter() - start
    record(f"residual = {resid:.3g} (tol 1e-8), |ATT error| = {err:.3g} (tol 1e-6), {elapsed:.2f}s")
    assert truth.rank == 4
    assert resid <= 1e-8
    assert err <= 1e-6
    assert elapsed < 5


def test_criterion_3_consistency_trend(record):
    start = time.perf_counter()
    cfg = SweepConfig(
        dgp=DgpConfig(50, 50, 3, InteractiveFE(factor_dim=3), NoiseSpec(sigma_max=0.5)),
        mechanism=SelectionOnU(),
        target="att",
        sizes=((50, 50), (100, 100), (200, 200), (400, 400)),
        n_seeds=50,
        rank="oracle",
        base_seed=0,
    )
    summary = summarize(run_consistency_sweep(cfg), "att")
    medians = [s["median_abs_error"] for s in summary["sizes"]]
    elapsed = time.perf_counter() - start
    record("medians " + ", ".join(f"{m:.4f}" for m in medians)
           + f"; last/first = {medians[-1] / medians[0]:.3f} (<= 0.5), {elapsed:.1f}s")
    assert all(b <= a for a, b in zip(medians, medians[1:]))
    assert medians[-1] <= 0.5 * medians[0]
    assert elapsed <= 600


def test_criterion_4_identification_bound(record):
    start = time.perf_counter()
    rank = 10
    margins = []
    for s in range(20):
        seed = derive_seed(4, s)
        truth = build_truth(DgpConfig(100, 51, 2, BinaryChoice(link="logistic", proxy_rank=rank), NoiseSpec(sigma_max=0), seed=seed))
        a = assign(SelectionOnU(), truth.unit_factors, 51, seed=seed, schedule=Schedule(50, 2))
        panel = observe(truth, a)
        d = design(panel, 50, "ate")
        b0, b1 = oracle_beta(truth, d, 0), oracle_beta(truth, d, 1)
        err = abs(assemble(panel, d, b0, b1).ate_hat - oracle_ate(truth, d.target_set, 50))
        bound = identification_bound(delta_e_proxy(truth, rank), b0, b1, d.m_count).bound
        margins.append((err, bound))
    elapsed = time.perf_counter() - start
    worst = max(e / b for e, b in margins)
    record(f"max error/bound over 20 seeds = {worst:.3g} (<= 1), {elapsed:.2f}s")
    assert all(e <= b for e, b in margins)
    assert elapsed < 60


def test_criterion_5_holder_decay(record):
    start = time.perf_counter()
    parts = []
    ok = True
    for q in (1, 2):
        curve = run_holder_decay(DgpConfig(200, 200, q, BinaryChoice(link="logistic")), range(1, 17))
        vals = [v for _, v in curve]
        mono = all(b <= a for a, b in zip(vals, vals[1:]))
        at12 = dict(curve)[12]
        ok &= mono and at12 < 1e-2
        parts.append(f"q={q}: monotone={mono}, r=12 -> {at12:.3g}")
    elapsed = time.perf_counter() - start
    record("; ".join(parts) + f" (tol 1e-2), {elapsed:.2f}s")
    assert ok
    assert elapsed < 60


def test_criterion_6_asymptotic_normality(record):
    start = time.perf_counter()
    cfg = NormalityConfig(
        dgp=DgpConfig(400, 50, 3, InteractiveFE(), NoiseSpec(law="gaussian", sigma_max=1.0)),
        target="ate",
        n_reps=500,
    )
    rows, summary = run_normality_study(cfg)
    stats = summary["oracle_weights"]
    elapsed = time.perf_counter() - start
    record(f"M={rows[0]['m']}, coverage = {stats['coverage_1.96']:.3f} ([0.92, 0.98]), "
           f"sd = {stats['sd']:.3f} ([0.9, 1.1]), KS = {stats['ks_statistic']:.3f}, {elapsed:.1f}s")
    assert rows[0]["m"] == 400 and len(rows) == 500
    assert 0.92 <= stats["coverage_1.96"] <= 0.98
    assert 0.9 <= stats["sd"] <= 1.1
    assert elapsed <= 300


def test_criterion_7_hoeffding_scale(record):
    start = time.perf_counter()
    cfg = NoiseScaleConfig(DgpConfig(100, 10, 3, InteractiveFE(), NoiseSpec(sigma_max=1.0)), sizes=(100, 400), n_reps=200)
    out = run_noise_scale_study(cfg)
    elapsed = time.perf_counter() - start
    record(f"sd(M=100) = {out['sd'][0]:.4f}, sd(M=400) = {out['sd'][1]:.4f}, ratio = {out['ratio']:.3f} ([0.4, 0.6]), {elapsed:.2f}s")
    assert 0.4 <= out["ratio"] <= 0.6
    assert elapsed < 60


def test_criterion_8_core_property_suites(record, tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    checks = {}

    ok = True
    for shape in [(6, 4), (4, 6), (5, 5), (9, 2)]:
        m = rng.standard_normal(shape)
        f = svd(m)
        p = truncated_pinv(f, len(f))
        ok &= np.abs(f.reconstruct() - m).max() <= 1e-8
        ok &= np.abs(f.u.T @ f.u - np.eye(len(f))).max() <= 1e-10
        ok &= np.abs(m @ p @ m - m).max() <= 1e-8 and np.abs(p @ m @ p - p).max() <= 1e-8
    checks["svd/pinv identities"] = bool(ok)

    m = rng.standard_normal((8, 6))
    best = np.linalg.norm(m - truncate(svd(m), 2))
    checks["Eckart-Young"] = all(
        best <= np.linalg.norm(m - rng.standard_normal((8, 2)) @ rng.standard_normal((2, 6))) + 1e-8 for _ in range(100)
    )

    x = rng.standard_normal((3, 7))
    beta = min_norm_least_squares(x, x @ rng.standard_normal(7))
    null = np.linalg.svd(x)[2][3:].T
    checks["min-norm minimality"] = all(
        np.linalg.norm(beta) <= np.linalg.norm(beta + null @ rng.standard_normal(4)) + 1e-8 for _ in range(100)
    )

    ok = True
    for seed in range(20):
        u = rng.uniform(size=(50, 2))
        a = assign(StaggeredAdoption(start=seed % 5, weights=(0.6, 0.4)), u, 15, seed=seed)
        ok &= bool(np.all(np.diff(a, axis=1) >= 0))
    checks["staggered monotonicity"] = ok

    checks["common measurements brute force"] = all(
        common_measurements(a) == constant_columns(a)
        for a in (rng.integers(0, 2, size=(rng.integers(1, 5), 8)) for _ in range(200))
    )

    panel = PanelData(rng.standard_normal((7, 5)) * 1e3, rng.integers(0, 2, size=(7, 5)))
    write_panel_csv(panel, tmp_path / "p.csv")
    back = read_panel_csv(tmp_path / "p.csv")
    checks["CSV round trip"] = bool(
        np.array_equal(back.outcomes, panel.outcomes) and np.array_equal(back.treatments, panel.treatments)
    )

    cfg = SweepConfig(DgpConfig(30, 30, 3, InteractiveFE(), NoiseSpec(sigma_max=0.5)), sizes=((30, 30), (45, 45)), n_seeds=3)
    checks["determinism across thread counts"] = run_consistency_sweep(cfg, workers=1) == run_consistency_sweep(cfg, workers=4)

    elapsed = time.perf_counter() - start
    failed = [k for k, v in checks.items() if not v]
    record(f"{len(checks) - len(failed)}/{len(checks)} suites pass" + (f", failing: {failed}" if failed else "") + f", {elapsed:.2f}s")
    assert not failed
    assert elapsed < 60
