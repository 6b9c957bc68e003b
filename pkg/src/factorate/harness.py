"""Monte Carlo experiments: consistency sweeps, the normality and
noise-scale studies, and the rank-decay curve of the approximation error.

Each replication is a pure function of its config and its
``(size index, seed index)`` pair; seeds are derived with the counter
RNG, so results do not depend on how many worker threads run them.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from factorate import dgp
from factorate.assignment import AssignmentMechanism, Rct, Schedule, SelectionOnU, assign, propensity
from factorate.config import to_plain
from factorate.errors import FactorateError, ValidationError
from factorate.estimator import assemble, estimate, fit_weights
from factorate.linalg import max_error_curve
from factorate.oracle import (
    assumption_report,
    disperse_exponent,
    oracle_ate,
    oracle_beta,
    sigma_bar,
    signal_matrix,
    weight_error,
)
from factorate.panel import design, observe
from factorate.pcr import Fixed, RankStrategy, parse_rank
from factorate.rng import derive_seed

THREADS_ENV = "FACTORATE_THREADS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit count, else ``$FACTORATE_THREADS``, else 1."""
    if workers is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            workers = 1
    if workers < 1:
        raise ValidationError("worker count must be >= 1")
    return workers


def _fan_out(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class PanelLayout:
    """How simulated panels are laid out around the target measurement.

    ``n_common=None`` pins every measurement but the last to a common
    treatment (alternating per ``treated_every``); ``t_star=None`` targets
    the last measurement.
    """

    n_common: int | None = None
    treated_every: int = 2
    t_star: int | None = None

    def schedule(self, T: int) -> Schedule:
        return Schedule(n_common=T - 1 if self.n_common is None else self.n_common,
                        treated_every=self.treated_every)

    def target_measurement(self, T: int) -> int:
        return T - 1 if self.t_star is None else self.t_star


def _resolve_rank(rank) -> RankStrategy | str:
    if isinstance(rank, str):
        return "oracle" if rank.strip().lower() == "oracle" else parse_rank(rank)
    return rank


def _sized(template: dgp.DgpConfig, n: int, T: int, seed: int) -> dgp.DgpConfig:
    return dataclasses.replace(template, n_units=n, n_measurements=T, seed=seed)


def _preflight(template: dgp.DgpConfig, mech: AssignmentMechanism, sizes, layout: PanelLayout) -> None:
    """Catch DGP/mechanism/layout incompatibilities before any replication runs."""
    for n, T in sizes:
        cfg = _sized(template, n, T, 0)
        try:
            dgp._check_family(cfg)
            propensity(mech, np.zeros((1, cfg.latent_dim)), T)
            sched = layout.schedule(T)
            if sched.n_common >= T:
                raise ValidationError(f"layout pins {sched.n_common} of {T} measurements")
            t_star = layout.target_measurement(T)
            if not 0 <= t_star < T:
                raise ValidationError(f"t_star {t_star} outside [0, {T})")
            if t_star < sched.n_common:
                raise ValidationError("t_star falls inside the common-treatment block")
        except FactorateError as exc:
            raise ValidationError(f"incompatible configuration at size ({n}, {T}): {exc}") from None


@dataclass(frozen=True)
class SweepConfig:
    dgp: dgp.DgpConfig
    mechanism: AssignmentMechanism = field(default_factory=SelectionOnU)
    target: str = "att"
    sizes: tuple[tuple[int, int], ...] = ((50, 50), (100, 100), (200, 200), (400, 400))
    n_seeds: int = 50
    rank: str = "oracle"
    base_seed: int = 0
    layout: PanelLayout = field(default_factory=PanelLayout)

    def __post_init__(self):
        sizes = tuple((int(n), int(t)) for n, t in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ValidationError("sweep needs at least one size")
        for (n0, t0), (n1, t1) in zip(sizes, sizes[1:]):
            if not (n1 > n0 and t1 > t0):
                raise ValidationError("sizes must be strictly increasing in both N and T")
        if self.n_seeds < 1:
            raise ValidationError("n_seeds must be >= 1")
        if self.target.lower() not in ("att", "atu", "ate"):
            raise ValidationError(f"sweep target must be att, atu or ate, got {self.target!r}")
        _resolve_rank(self.rank)


# Column order of records.csv; documented in the README.
RECORD_FIELDS = (
    "size_index", "n_units", "n_measurements", "t_bar", "n0", "n1", "m", "m0", "m1",
    "seed_index", "seed", "ate_hat", "oracle", "abs_error",
    "rank0", "rank1", "beta0_l1", "beta0_l2", "beta1_l1", "beta1_l2",
    "oracle_beta0_l2", "oracle_beta1_l2",
    "beta0_error", "beta0_error_rowspace", "beta1_error", "beta1_error_rowspace",
    "span_residual0", "span_residual1", "well_balanced0", "well_balanced1",
    "subspace_residual0", "subspace_residual1", "rank_bar0", "rank_bar1",
)


@dataclass(frozen=True)
class RunRecord:
    size_index: int
    n_units: int
    n_measurements: int
    t_bar: int
    n0: int
    n1: int
    m: int
    m0: int
    m1: int
    seed_index: int
    seed: int
    ate_hat: float
    oracle: float
    abs_error: float
    rank0: int
    rank1: int
    beta0_l1: float
    beta0_l2: float
    beta1_l1: float
    beta1_l2: float
    oracle_beta0_l2: float
    oracle_beta1_l2: float
    beta0_error: float
    beta0_error_rowspace: float
    beta1_error: float
    beta1_error_rowspace: float
    span_residual0: float
    span_residual1: float
    well_balanced0: float
    well_balanced1: float
    subspace_residual0: float
    subspace_residual1: float
    rank_bar0: int
    rank_bar1: int
    wall_time: float = field(default=0.0, compare=False)

    def row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in RECORD_FIELDS]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def run_replication(cfg: SweepConfig, size_index: int, seed_index: int) -> RunRecord:
    start = time.perf_counter()
    n, T = cfg.sizes[size_index]
    seed = derive_seed(cfg.base_seed, size_index, seed_index)
    dcfg = _sized(cfg.dgp, n, T, seed)
    truth = dgp.build_truth(dcfg)
    a = assign(cfg.mechanism, truth.unit_factors, T, seed=seed, schedule=cfg.layout.schedule(T))
    panel = observe(truth, a)
    t_star = cfg.layout.target_measurement(T)
    des = design(panel, t_star, cfg.target.lower())
    if not des.i0 or not des.i1:
        raise ValidationError(
            f"size ({n}, {T}) seed {seed_index}: one arm is empty at t_star; "
            "the mechanism does not give overlap at this size"
        )
    reports = [assumption_report(truth, des, arm) for arm in (0, 1)]
    rank = _resolve_rank(cfg.rank)
    betas = []
    for arm in (0, 1):
        strategy = Fixed(max(reports[arm].rank_bar, 1)) if rank == "oracle" else rank
        betas.append(fit_weights(panel, des, arm, strategy))
    result = assemble(panel, des, betas[0], betas[1], str(cfg.rank))
    oracle = oracle_ate(truth, des.target_set, t_star)
    errors = []
    oracle_l2 = []
    for arm in (0, 1):
        b_or = oracle_beta(truth, des, arm)
        oracle_l2.append(b_or.l2)
        errors.append(weight_error(betas[arm], b_or, signal_matrix(truth, des, arm)))
    return RunRecord(
        size_index=size_index,
        n_units=n,
        n_measurements=T,
        t_bar=len(des.common_meas),
        n0=len(des.i0),
        n1=len(des.i1),
        m=des.m_count,
        m0=len(des.m0),
        m1=len(des.m1),
        seed_index=seed_index,
        seed=seed,
        ate_hat=result.ate_hat,
        oracle=oracle,
        abs_error=abs(result.ate_hat - oracle),
        rank0=betas[0].rank_used,
        rank1=betas[1].rank_used,
        beta0_l1=betas[0].l1,
        beta0_l2=betas[0].l2,
        beta1_l1=betas[1].l1,
        beta1_l2=betas[1].l2,
        oracle_beta0_l2=oracle_l2[0],
        oracle_beta1_l2=oracle_l2[1],
        beta0_error=errors[0][0],
        beta0_error_rowspace=errors[0][1],
        beta1_error=errors[1][0],
        beta1_error_rowspace=errors[1][1],
        span_residual0=reports[0].span_residual,
        span_residual1=reports[1].span_residual,
        well_balanced0=reports[0].well_balanced_ratio,
        well_balanced1=reports[1].well_balanced_ratio,
        subspace_residual0=reports[0].subspace_residual,
        subspace_residual1=reports[1].subspace_residual,
        rank_bar0=reports[0].rank_bar,
        rank_bar1=reports[1].rank_bar,
        wall_time=time.perf_counter() - start,
    )


def run_consistency_sweep(cfg: SweepConfig, workers: int | None = None) -> list[RunRecord]:
    """One record per ``(size, seed)``, sorted by ``(size_index, seed_index)``."""
    _preflight(cfg.dgp, cfg.mechanism, cfg.sizes, cfg.layout)
    tasks = [(si, s) for si in range(len(cfg.sizes)) for s in range(cfg.n_seeds)]
    records = _fan_out(lambda task: run_replication(cfg, *task), tasks, resolve_workers(workers))
    return sorted(records, key=lambda r: (r.size_index, r.seed_index))


def _disperse_fit(records: Sequence[RunRecord], arm: int) -> float | None:
    """Fitted weight-dispersion exponent for ``arm`` from per-size medians."""
    samples = []
    for si in sorted({r.size_index for r in records}):
        rows = [r for r in records if r.size_index == si]
        imputed = [r.m1 if arm == 0 else r.m0 for r in rows]
        if min(imputed) == 0:
            return None
        ratios = [getattr(r, f"oracle_beta{arm}_l2") / k for r, k in zip(rows, imputed)]
        n_a = float(np.median([r.n1 if arm else r.n0 for r in rows]))
        samples.append((n_a, float(np.median(ratios))))
    try:
        return disperse_exponent(samples)
    except ValidationError:
        return None


def summarize(records: Sequence[RunRecord], target: str = "att") -> dict:
    """Per-size aggregates of ``abs_error``; all re-derivable from records.csv."""
    sizes = []
    for si in sorted({r.size_index for r in records}):
        rows = [r for r in records if r.size_index == si]
        err = np.array([r.abs_error for r in rows])
        q25, q50, q75 = np.quantile(err, [0.25, 0.5, 0.75])
        sizes.append({
            "size_index": si,
            "n_units": rows[0].n_units,
            "n_measurements": rows[0].n_measurements,
            "n_records": len(rows),
            "median_abs_error": float(q50),
            "q25_abs_error": float(q25),
            "q75_abs_error": float(q75),
            "iqr_abs_error": float(q75 - q25),
            "mean_abs_error": float(err.mean()),
            "max_abs_error": float(err.max()),
        })
    medians = [s["median_abs_error"] for s in sizes]
    out = {
        "target": target,
        "sizes": sizes,
        "medians_nonincreasing": bool(all(b <= a for a, b in zip(medians, medians[1:]))),
        "median_ratio_last_first": medians[-1] / medians[0] if medians and medians[0] > 0 else None,
    }
    # only arms that impute a nonempty set have a meaningful exponent
    t = target.lower()
    arms = {"att": (0,), "atu": (1,), "ate": (0, 1)}.get(t, ())
    out["disperse_exponent"] = {str(a): _disperse_fit(records, a) for a in arms}
    return out


def write_records_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(r.row())


def read_records_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_sweep_outputs(cfg: SweepConfig, records: Sequence[RunRecord], out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    summary = summarize(records, cfg.target)
    summary["config"] = to_plain(cfg)
    # timings vary run to run, so they stay out of records.csv
    summary["wall_time_total"] = float(sum(r.wall_time for r in records))
    write_json(summary, out / "summary.json")
    return summary


# ---------------------------------------------------------------- normality


@dataclass(frozen=True)
class NormalityConfig:
    dgp: dgp.DgpConfig
    mechanism: AssignmentMechanism = field(default_factory=lambda: Rct(0.5))
    target: str = "ate"
    n_reps: int = 500
    base_seed: int = 0
    rank: str = "oracle"
    layout: PanelLayout = field(default_factory=PanelLayout)

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValidationError("n_reps must be >= 1")
        _resolve_rank(self.rank)


def _normality_rep(cfg: NormalityConfig, rep: int) -> dict:
    seed = derive_seed(cfg.base_seed, 0, rep)
    T = cfg.dgp.n_measurements
    dcfg = dataclasses.replace(cfg.dgp, seed=seed)
    truth = dgp.build_truth(dcfg)
    a = assign(cfg.mechanism, truth.unit_factors, T, seed=seed, schedule=cfg.layout.schedule(T))
    panel = observe(truth, a)
    t_star = cfg.layout.target_measurement(T)
    des = design(panel, t_star, cfg.target.lower())
    if not des.i0 or not des.i1:
        raise ValidationError(f"replication {rep}: one arm is empty at t_star")
    b0, b1 = oracle_beta(truth, des, 0), oracle_beta(truth, des, 1)
    oracle = oracle_ate(truth, des.target_set, t_star)
    with_oracle = assemble(panel, des, b0, b1, "oracle").ate_hat
    rank = _resolve_rank(cfg.rank)
    if rank == "oracle":
        est = [fit_weights(panel, des, arm, Fixed(max(assumption_report(truth, des, arm).rank_bar, 1)))
               for arm in (0, 1)]
        with_estimated = assemble(panel, des, est[0], est[1]).ate_hat
    else:
        with_estimated = estimate(panel, t_star, cfg.target.lower(), rank).ate_hat
    sb = sigma_bar(des, b0, b1, truth.sigma_tensor).sigma_bar
    scale = np.sqrt(des.m_count) / sb if sb > 0 else 0.0
    return {
        "rep": rep,
        "seed": seed,
        "m": des.m_count,
        "sigma_bar": sb,
        "oracle": oracle,
        "error_oracle_weights": with_oracle - oracle,
        "error_estimated_weights": with_estimated - oracle,
        "z_oracle": scale * (with_oracle - oracle),
        "z_estimated": scale * (with_estimated - oracle),
    }


NORMALITY_FIELDS = ("rep", "seed", "m", "sigma_bar", "oracle", "error_oracle_weights",
                    "error_estimated_weights", "z_oracle", "z_estimated")


def _z_summary(z: np.ndarray, degenerate: bool) -> dict:
    out = {
        "mean": float(z.mean()),
        "sd": float(z.std(ddof=1)) if z.size > 1 else 0.0,
        "coverage_1.96": float(np.mean(np.abs(z) <= 1.96)),
    }
    out["ks_statistic"] = None if degenerate else float(stats.kstest(z, "norm").statistic)
    return out


def run_normality_study(cfg: NormalityConfig, workers: int | None = None) -> tuple[list[dict], dict]:
    """Standardized errors per replication plus their summary.

    Both weight choices share the standardizer built from oracle weights
    and the true noise scales. When that standardizer is zero (no noise)
    every ``z`` is reported as 0 and the summary flags the case.
    """
    T = cfg.dgp.n_measurements
    _preflight(cfg.dgp, cfg.mechanism, [(cfg.dgp.n_units, T)], cfg.layout)
    rows = _fan_out(lambda rep: _normality_rep(cfg, rep), list(range(cfg.n_reps)), resolve_workers(workers))
    rows.sort(key=lambda r: r["rep"])
    degenerate = any(r["sigma_bar"] == 0 for r in rows)
    if degenerate:
        warnings.warn("sigma_bar is zero: standardized errors are undefined and reported as 0")
    summary = {
        "n_reps": len(rows),
        "degenerate": degenerate,
        "oracle_weights": _z_summary(np.array([r["z_oracle"] for r in rows]), degenerate),
        "estimated_weights": _z_summary(np.array([r["z_estimated"] for r in rows]), degenerate),
    }
    return rows, summary


def write_table_csv(rows: Sequence[dict], fields: Sequence[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])


# ----------------------------------------------------------- noise scaling


@dataclass(frozen=True)
class NoiseScaleConfig:
    """Spread of the observed-outcome noise average at two target sizes."""

    dgp: dgp.DgpConfig
    sizes: tuple[int, ...] = (100, 400)
    n_reps: int = 200
    base_seed: int = 0
    mechanism: AssignmentMechanism = field(default_factory=lambda: Rct(0.5))
    layout: PanelLayout = field(default_factory=PanelLayout)

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ValidationError("need at least two sizes")
        if self.n_reps < 2:
            raise ValidationError("n_reps must be >= 2")


def mean_noise_term(truth: dgp.LatentTruth, des) -> float:
    """``(1/M) (sum_{M1} eps_{t*,1} - sum_{M0} eps_{t*,0})``."""
    t = des.t_star
    eps = truth.noise_tensor
    return float((eps[list(des.m1), t, 1].sum() - eps[list(des.m0), t, 0].sum()) / des.m_count)


def run_noise_scale_study(cfg: NoiseScaleConfig) -> dict:
    """sd of the mean-noise term per size; ``ratio`` is last over first."""
    T = cfg.dgp.n_measurements
    sds = []
    for si, n in enumerate(cfg.sizes):
        terms = []
        for rep in range(cfg.n_reps):
            seed = derive_seed(cfg.base_seed, si, rep)
            truth = dgp.build_truth(_sized(cfg.dgp, n, T, seed))
            a = assign(cfg.mechanism, truth.unit_factors, T, seed=seed, schedule=cfg.layout.schedule(T))
            des = design(observe(truth, a), cfg.layout.target_measurement(T), "ate")
            terms.append(mean_noise_term(truth, des))
        sds.append(float(np.std(terms, ddof=1)))
    return {"sizes": list(cfg.sizes), "sd": sds, "ratio": sds[-1] / sds[0] if sds[0] > 0 else None}


# ------------------------------------------------------------- rank decay


def run_holder_decay(cfg: dgp.DgpConfig, ranks: Sequence[int]) -> list[tuple[int, float]]:
    """``(r, Delta_E proxy)`` pairs: best max-entry error among ranks ``<= r``."""
    ranks = sorted({int(r) for r in ranks})
    if not ranks or ranks[0] < 1:
        raise ValidationError("ranks must be positive integers")
    dgp._check_family(cfg)
    if isinstance(cfg.outcome_family, dgp.LINEAR_FAMILIES):
        warnings.warn("linear outcome family: the curve drops to zero at the exact rank")
        mean = dgp.build_truth(cfg).mean_tensor
    else:
        mean = dgp.binary_choice_mean(cfg, dgp.sample_unit_factors(cfg))
    flat = dgp.flatten(mean)
    limit = min(flat.shape)
    if ranks[-1] > limit:
        raise ValidationError(f"rank {ranks[-1]} exceeds matrix min-dimension {limit}")
    curve = np.minimum.accumulate(max_error_curve(flat, ranks[-1]))
    return [(r, float(curve[r - 1])) for r in ranks]


def write_curve_csv(curve: Sequence[tuple[int, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "delta_e_proxy"))
        for r, v in curve:
            w.writerow((r, f"{v:.17g}"))
