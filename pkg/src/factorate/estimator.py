"""Synthetic treatment-effect estimator and identification-bound arithmetic."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from factorate.dgp import LatentTruth
from factorate.errors import DimensionError, EmptyTargetError, ValidationError
from factorate.oracle import oracle_ate, oracle_beta
from factorate.panel import ObservedDesign, PanelData, TargetSpec, build_regression, design
from factorate.pcr import DEFAULT_STRATEGY, RankStrategy, WeightVector, pcr_fit


def _arm_sum(panel: PanelData, des: ObservedDesign, beta: WeightVector, a: int) -> float:
    donors = des.donors(a)
    if tuple(beta.units) != tuple(donors) or len(beta.values) != len(donors):
        raise DimensionError(f"weights for arm {a} are not aligned with I^({a})")
    col = panel.outcomes[:, des.t_star]
    observed = col[list(des.targets(a))].sum()
    imputed = float(np.dot(beta.values, col[list(donors)])) if donors else 0.0
    return float(observed + imputed)


def ate_hat(panel: PanelData, des: ObservedDesign, beta0: WeightVector, beta1: WeightVector) -> float:
    """Observed outcomes of ``M^(a)`` plus weighted donor outcomes, differenced across arms."""
    m = des.m_count
    return (_arm_sum(panel, des, beta1, 1) - _arm_sum(panel, des, beta0, 0)) / m


@dataclass(frozen=True)
class EstimateResult:
    ate_hat: float
    beta0: WeightVector
    beta1: WeightVector
    design: dict
    rank_used: dict
    flags: dict = field(default_factory=dict)
    strategy: str = ""
    observed_design: ObservedDesign | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        def weights(w: WeightVector) -> dict:
            return {"units": list(w.units), "values": [float(x) for x in w.values],
                    "rank_used": w.rank_used, "l1": w.l1, "l2": w.l2}

        return {
            "ate_hat": float(self.ate_hat),
            "target": self.design.get("target"),
            "design": self.design,
            "rank_used": self.rank_used,
            "strategy": self.strategy,
            "flags": self.flags,
            "beta0": weights(self.beta0),
            "beta1": weights(self.beta1),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_weights(panel: PanelData, des: ObservedDesign, a: int, strategy: RankStrategy) -> WeightVector:
    """PCR weights for arm ``a``; zero when there is nothing to impute."""
    if not des.targets(1 - a):
        return WeightVector.zeros(des.donors(a))
    return pcr_fit(build_regression(panel, des, a), strategy)


def assemble(
    panel: PanelData,
    des: ObservedDesign,
    beta0: WeightVector,
    beta1: WeightVector,
    strategy: str = "",
) -> EstimateResult:
    """Wrap given weights (estimated or oracle) into an :class:`EstimateResult`."""
    flags = {
        "t_star_excluded_from_common": des.t_star_excluded,
        "empty_imputation_arm0": not des.m1,
        "empty_imputation_arm1": not des.m0,
    }
    return EstimateResult(
        ate_hat=ate_hat(panel, des, beta0, beta1),
        beta0=beta0,
        beta1=beta1,
        design=des.summary(),
        rank_used={"0": beta0.rank_used, "1": beta1.rank_used},
        flags=flags,
        strategy=strategy,
        observed_design=des,
    )


def estimate(
    panel: PanelData,
    t_star: int,
    target: TargetSpec = "ate",
    strategy: RankStrategy = DEFAULT_STRATEGY,
) -> EstimateResult:
    """design -> regression inputs -> PCR per arm -> ATE_hat."""
    des = design(panel, t_star, target)
    if not des.i0 or not des.i1:
        missing = 0 if not des.i0 else 1
        raise EmptyTargetError(f"no unit has treatment {missing} at t_star; the effect is undefined")
    beta0 = fit_weights(panel, des, 0, strategy)
    beta1 = fit_weights(panel, des, 1, strategy)
    return assemble(panel, des, beta0, beta1, str(strategy))


@dataclass(frozen=True)
class IdentificationBound:
    delta_e: float
    l1_beta0: float
    l1_beta1: float
    m_count: int

    @property
    def bound(self) -> float:
        return self.delta_e * (1 + (self.l1_beta0 + self.l1_beta1) / self.m_count)


def identification_bound(delta_e: float, beta0, beta1, m_count: int) -> IdentificationBound:
    """``delta_e * (1 + (||beta0||_1 + ||beta1||_1) / M)``; betas may be vectors or l1 norms."""
    if delta_e < 0:
        raise ValidationError("delta_e must be >= 0")
    if m_count < 1:
        raise ValidationError("m_count must be >= 1")

    def l1(b) -> float:
        vals = getattr(b, "values", b)
        return float(np.sum(np.abs(vals))) if np.ndim(vals) else float(abs(vals))

    return IdentificationBound(float(delta_e), l1(beta0), l1(beta1), int(m_count))


COMPONENTS = ("mean_noise", "beta_noise", "delta_noise", "delta_mean", "approx", "span")


def bias_variance_report(result: EstimateResult, truth: LatentTruth) -> dict:
    """Split ``ATE_hat - E[ATE_M | U]`` into additive pieces.

    Per arm ``a`` (entering with sign ``+`` for ``a = 1``), with oracle
    weights ``beta`` and ``Delta = beta_hat - beta``:

    * ``mean_noise``  noise of the observed ``M^(a)`` outcomes
    * ``beta_noise``  ``<beta, eps>`` over donors
    * ``delta_noise`` ``<Delta, eps>``
    * ``delta_mean``  ``<Delta, E[Y]>``
    * ``approx``      ``sum beta eta - sum_{M^(1-a)} eta``
    * ``span``        failure of the linear span inclusion, if any

    All terms are divided by ``M``. The pieces sum to the realized error
    up to rounding.
    """
    if truth is None:
        raise ValidationError("bias/variance split needs the simulation truth")
    des = result.observed_design
    if des is None:
        raise ValidationError("result carries no design")
    m = des.m_count
    t = des.t_star
    out = {f"{c}_{a}": 0.0 for a in (0, 1) for c in COMPONENTS}
    for a, b_hat in ((0, result.beta0), (1, result.beta1)):
        sign = 1.0 if a else -1.0
        donors = list(des.donors(a))
        beta = oracle_beta(truth, des, a).values
        delta = np.asarray(b_hat.values) - beta
        eps = truth.noise_tensor[donors, t, a]
        mean = truth.mean_tensor[donors, t, a]
        eta = truth.approx_tensor[:, t, a]
        lam = truth.lin_unit_factors
        to_impute = list(des.targets(1 - a))
        lam_target = lam[to_impute].sum(axis=0) if to_impute else np.zeros(lam.shape[1])
        parts = {
            "mean_noise": truth.noise_tensor[list(des.targets(a)), t, a].sum(),
            "beta_noise": beta @ eps,
            "delta_noise": delta @ eps,
            "delta_mean": delta @ mean,
            "approx": beta @ eta[donors] - eta[to_impute].sum(),
            "span": (lam[donors].T @ beta - lam_target) @ truth.lin_meas_factors[t, a],
        }
        for c, v in parts.items():
            out[f"{c}_{a}"] = sign * float(v) / m
    for c in COMPONENTS:
        out[c] = out[f"{c}_0"] + out[f"{c}_1"]
    out["total_error"] = result.ate_hat - oracle_ate(truth, des.target_set, t)
    out["component_sum"] = float(sum(out[c] for c in COMPONENTS))
    out["bias"] = out["delta_noise"] + out["delta_mean"] + out["approx"] + out["span"]
    out["variance"] = out["mean_noise"] + out["beta_noise"]
    return out
