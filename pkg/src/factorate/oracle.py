"""Truth-side quantities for simulations: oracle causal targets, oracle
minimum-norm weights, assumption checks and the normality standardizer."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from factorate.dgp import LatentTruth
from factorate.errors import DimensionError, EmptyCommonMeasurementsError, EmptyTargetError, ValidationError
from factorate.linalg import min_norm_least_squares, numerical_rank, svd
from factorate.panel import ObservedDesign
from factorate.pcr import WeightVector

# singular values above this fraction of s_1 count toward the rank
RANK_TOL = 1e-9


def oracle_ate(truth: LatentTruth, target_set: Sequence[int], t_star: int) -> float:
    """``E[ATE_M | U]``: mean over ``M`` of ``f_{t*,1}(U_n) - f_{t*,0}(U_n)``."""
    units = list(target_set)
    if not units:
        raise EmptyTargetError("empty target set")
    effect = truth.mean_tensor[units, t_star, 1] - truth.mean_tensor[units, t_star, 0]
    return float(np.mean(effect))


@dataclass(frozen=True)
class OracleTargets:
    ate_given_u: float
    att: float | None
    atu: float | None
    ate: float


def oracle_targets(truth: LatentTruth, des: ObservedDesign) -> OracleTargets:
    n_units = truth.shape[0]
    t = des.t_star
    return OracleTargets(
        ate_given_u=oracle_ate(truth, des.target_set, t),
        att=oracle_ate(truth, des.i1, t) if des.i1 else None,
        atu=oracle_ate(truth, des.i0, t) if des.i0 else None,
        ate=oracle_ate(truth, range(n_units), t),
    )


def min_norm_weights(donor_factors, target_factor) -> tuple[np.ndarray, float]:
    """Minimum-norm ``beta`` with ``donor_factors.T @ beta ~= target_factor``.

    ``donor_factors`` is ``(N_a, r)`` (one row per donor). Also returns the
    distance from ``target_factor`` to the span of the donor rows, which is
    zero when the linear span inclusion holds.
    """
    lam = np.asarray(donor_factors, dtype=float)
    target = np.asarray(target_factor, dtype=float).reshape(-1)
    if lam.ndim != 2 or lam.shape[1] != target.shape[0]:
        raise DimensionError("donor factors and target factor dimensions disagree")
    if lam.shape[0] == 0:
        return np.zeros(0), float(np.linalg.norm(target))
    beta = min_norm_least_squares(lam.T, target)
    return beta, float(np.linalg.norm(lam.T @ beta - target))


def oracle_beta(truth: LatentTruth, des: ObservedDesign, a: int) -> WeightVector:
    donors = des.donors(a)
    lam = truth.lin_unit_factors
    to_impute = list(des.targets(1 - a))
    target = lam[to_impute].sum(axis=0) if to_impute else np.zeros(lam.shape[1])
    beta, resid = min_norm_weights(lam[list(donors)], target)
    rank = numerical_rank(svd(lam[list(donors)]).s, RANK_TOL) if donors else 0
    return WeightVector(values=beta, rank_used=rank, units=tuple(donors), span_residual=resid)


def signal_matrix(truth: LatentTruth, des: ObservedDesign, a: int) -> np.ndarray:
    """``X^lr = [<lambda_n, rho_{t, a_t}>]`` over common measurements x donors of arm ``a``."""
    if not des.common_meas:
        raise EmptyCommonMeasurementsError("no common measurements")
    rho = np.array([truth.lin_meas_factors[t, at] for t, at in des.common_meas])
    lam = truth.lin_unit_factors[list(des.donors(a))]
    return rho @ lam.T


@dataclass(frozen=True)
class AssumptionReport:
    arm: int
    span_residual: float
    well_balanced_ratio: float
    subspace_residual: float
    beta_l2: float
    beta_l1: float
    rank_bar: int
    nominal_rank: int
    disperse_exponent: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def rowspace_basis(x_lr: np.ndarray) -> np.ndarray:
    f = svd(x_lr)
    r = numerical_rank(f.s, RANK_TOL)
    return f.v[:, :r]


def assumption_report(truth: LatentTruth, des: ObservedDesign, a: int) -> AssumptionReport:
    x_lr = signal_matrix(truth, des, a)
    t_bar, n_a = x_lr.shape
    f = svd(x_lr)
    r_bar = numerical_rank(f.s, RANK_TOL)
    ratio = float(f.s[r_bar - 1] / np.sqrt(t_bar * n_a / r_bar)) if r_bar else 0.0
    v = f.v[:, :r_bar]
    lam = truth.lin_unit_factors[list(des.donors(a))]
    x_star = lam @ truth.lin_meas_factors[des.t_star, a]
    norm = np.linalg.norm(x_star)
    resid = x_star - v @ (v.T @ x_star)
    sub = float(np.linalg.norm(resid) / norm) if norm > 0 else 0.0
    beta = oracle_beta(truth, des, a)
    return AssumptionReport(
        arm=a,
        span_residual=float(beta.span_residual),
        well_balanced_ratio=ratio,
        subspace_residual=sub,
        beta_l2=beta.l2,
        beta_l1=beta.l1,
        rank_bar=r_bar,
        nominal_rank=truth.rank,
    )


def weight_error(beta_hat, beta_oracle, x_lr) -> tuple[float, float]:
    """``(||beta_hat - beta||_2, ||P_row(X^lr) (beta_hat - beta)||_2)``."""
    b_hat = np.asarray(getattr(beta_hat, "values", beta_hat), dtype=float)
    b = np.asarray(getattr(beta_oracle, "values", beta_oracle), dtype=float)
    x_lr = np.asarray(x_lr, dtype=float)
    if b_hat.shape != b.shape or x_lr.shape[1] != b.shape[0]:
        raise DimensionError("weight vectors and X^lr columns are misaligned")
    delta = b_hat - b
    v = rowspace_basis(x_lr)
    return float(np.linalg.norm(delta)), float(np.linalg.norm(v.T @ delta))


@dataclass(frozen=True)
class NormalityStandardizer:
    sigma_bar_0: float
    sigma_bar_1: float

    @property
    def sigma_bar(self) -> float:
        return float(np.hypot(self.sigma_bar_0, self.sigma_bar_1))


def _arm_sigma(des: ObservedDesign, beta: WeightVector, sigma_col: np.ndarray, a: int) -> float:
    donors = des.donors(a)
    if tuple(beta.units) != tuple(donors):
        raise DimensionError(f"weights for arm {a} are not aligned with its donor set")
    in_m = np.isin(np.asarray(donors, dtype=int), np.asarray(des.targets(a), dtype=int))
    coef = beta.values + in_m.astype(float)
    return float(np.sqrt(np.sum((coef * sigma_col[list(donors)]) ** 2) / des.m_count))


def sigma_bar(des: ObservedDesign, beta0: WeightVector, beta1: WeightVector, sigma_tensor) -> NormalityStandardizer:
    """Per-arm standardizer; units in ``M^(a)`` carry weight ``1 + beta_n``."""
    if sigma_tensor is None:
        raise ValidationError("sigma_bar needs the noise-scale tensor")
    sig = np.asarray(sigma_tensor, dtype=float)
    return NormalityStandardizer(
        sigma_bar_0=_arm_sigma(des, beta0, sig[:, des.t_star, 0], 0),
        sigma_bar_1=_arm_sigma(des, beta1, sig[:, des.t_star, 1], 1),
    )


def disperse_exponent(samples: Sequence[tuple[float, float]]) -> float:
    """Fitted ``w`` in ``||beta||_2 / M_{1-a} ~ N_a^{-w}`` from ``(N_a, ratio)`` pairs."""
    if len(samples) < 3:
        raise ValidationError("need at least 3 (N_a, norm) samples")
    n_a = np.array([s[0] for s in samples], dtype=float)
    ratio = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(n_a) <= 0):
        raise ValidationError("sample sizes must be strictly increasing")
    if np.any(n_a <= 0) or np.any(ratio <= 0):
        raise ValidationError("sizes and norms must be positive")
    slope = np.polyfit(np.log(n_a), np.log(ratio), 1)[0]
    return float(-slope)
