"""Simulation ground truth: latent unit factors, outcome mean families,
noise, and the potential-outcome tensor.

Tensors are indexed ``[n, t, a]`` with ``a in {0, 1}``. Unit-level
coefficients of every family are quantile transforms of the latent
confounder ``U_n`` (so the same ``U_n`` can also drive assignment);
measurement-level coefficients are independent keyed draws.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import expit, ndtr

from factorate import rng
from factorate.errors import DimensionError, ValidationError
from factorate.linalg import best_rank_at_most, rank_r_max_error, svd


@dataclass(frozen=True)
class CoefficientLaw:
    """Law of a family coefficient: ``uniform`` on ``[low, high]`` or ``constant``."""

    kind: str = "uniform"
    low: float = -1.0
    high: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "constant"):
            raise ValidationError(f"unknown coefficient law {self.kind!r}")
        if self.kind == "uniform" and not self.high >= self.low:
            raise ValidationError("uniform law needs high >= low")

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniform [0, 1) variates through the law's quantile function."""
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.full_like(u, self.value)
        return self.low + (self.high - self.low) * u


@dataclass(frozen=True)
class TwoWayFE:
    """``<a 1_p, beta_n> + mu_n + w_t``; unit coefficients take ``p + 1`` latent coordinates."""

    treat_dim: int = 1
    effect_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    level_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    meas_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    kind = "two_way_fe"

    def unit_dim(self, q: int) -> int:
        return self.treat_dim + 1


@dataclass(frozen=True)
class InteractiveFE:
    """``a * beta + <mu_n, w_t>`` with ``k``-dimensional factors."""

    factor_dim: int = 3
    treatment_effect: float = 1.0
    factor_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    meas_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    kind = "interactive_fe"

    def unit_dim(self, q: int) -> int:
        return self.factor_dim


@dataclass(frozen=True)
class TensorFactor:
    """``<mu_n, w_t^(a)>``: treatment-specific measurement factors."""

    factor_dim: int = 3
    factor_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    meas_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    kind = "tensor_factor"

    def unit_dim(self, q: int) -> int:
        return self.factor_dim


@dataclass(frozen=True)
class Dictionary:
    """``sum_l alpha_{n,l} b_l(a, x_t)`` over polynomial monomials in ``(a, x)``.

    The basis is the first ``n_basis`` of ``1, a, x, a x, x^2, a x^2, ...``
    (``a^2 = a`` for binary treatment), truncated to total degree ``degree``.
    """

    n_basis: int = 4
    degree: int = 2
    coef_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    meas_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    kind = "dictionary"

    def unit_dim(self, q: int) -> int:
        return self.n_basis

    def monomials(self) -> list[tuple[int, int]]:
        """``(power of a, power of x)`` pairs in basis order."""
        out = [(0, 0)]
        if self.degree >= 1:
            out.append((1, 0))
        for j in range(1, self.degree + 1):
            out.append((0, j))
            if j + 1 <= self.degree:
                out.append((1, j))
        return out


@dataclass(frozen=True)
class BinaryChoice:
    """Smoothed binary-choice mean ``F(scale * (a * beta + inner))``.

    ``inner`` is ``<mu_n, w_t>`` over all ``q`` latent coordinates
    (``interactive``) or ``mu_n + w_t`` on the first coordinate
    (``additive``). ``proxy_rank`` is the target rank of the SVD
    linearization used as ``(lambda, rho)``.
    """

    link: str = "logistic"
    treatment_effect: float = 1.0
    scale: float = 1.0
    inner: str = "interactive"
    proxy_rank: int = 10
    factor_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    meas_law: CoefficientLaw = field(default_factory=CoefficientLaw)
    kind = "binary_choice"

    def __post_init__(self):
        if self.link not in ("logistic", "probit"):
            raise ValidationError(f"unknown link {self.link!r}")
        if self.inner not in ("interactive", "additive"):
            raise ValidationError(f"unknown inner form {self.inner!r}")

    def unit_dim(self, q: int) -> int:
        return q if self.inner == "interactive" else 1

    def link_fn(self, x: np.ndarray) -> np.ndarray:
        return expit(x) if self.link == "logistic" else ndtr(x)


OutcomeFamily = Union[TwoWayFE, InteractiveFE, TensorFactor, Dictionary, BinaryChoice]
LINEAR_FAMILIES = (TwoWayFE, InteractiveFE, TensorFactor, Dictionary)


@dataclass(frozen=True)
class NoiseSpec:
    """Mean-zero noise with per-cell scale at most ``sigma_max``.

    ``profile="constant"`` uses ``sigma_max`` everywhere; ``"heteroskedastic"``
    draws each scale uniformly on ``[sigma_max / 2, sigma_max]``.
    """

    law: str = "gaussian"
    sigma_max: float = 1.0
    profile: str = "constant"

    def __post_init__(self):
        if self.law not in ("gaussian", "uniform"):
            raise ValidationError(f"unknown noise law {self.law!r}")
        if self.profile not in ("constant", "heteroskedastic"):
            raise ValidationError(f"unknown noise profile {self.profile!r}")
        if not np.isfinite(self.sigma_max) or self.sigma_max < 0:
            raise ValidationError(f"sigma_max must be finite and >= 0, got {self.sigma_max}")


@dataclass(frozen=True)
class DgpConfig:
    n_units: int
    n_measurements: int
    latent_dim: int = 1
    outcome_family: OutcomeFamily = field(default_factory=InteractiveFE)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 1 or self.n_measurements < 1 or self.latent_dim < 1:
            raise ValidationError("n_units, n_measurements and latent_dim must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class LatentTruth:
    """Everything the simulator knows.

    ``lin_meas_factors`` has shape ``(T, 2, r)``; ``approx_tensor`` holds
    ``eta = mean - <lambda, rho>`` and ``delta_e`` is its max magnitude.
    """

    unit_factors: np.ndarray
    lin_unit_factors: np.ndarray
    lin_meas_factors: np.ndarray
    mean_tensor: np.ndarray
    approx_tensor: np.ndarray
    noise_tensor: np.ndarray
    sigma_tensor: np.ndarray
    delta_e: float
    family: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.mean_tensor.shape[0], self.mean_tensor.shape[1]

    @property
    def rank(self) -> int:
        return self.lin_unit_factors.shape[1]

    @property
    def potential_outcomes(self) -> np.ndarray:
        return self.mean_tensor + self.noise_tensor

    def linear_mean(self) -> np.ndarray:
        """``<lambda_n, rho_{t,a}>`` as an ``(N, T, 2)`` tensor."""
        return np.einsum("nr,tar->nta", self.lin_unit_factors, self.lin_meas_factors)

    def flat_mean(self) -> np.ndarray:
        return flatten(self.mean_tensor)


def flatten(tensor: np.ndarray) -> np.ndarray:
    """``(N, T, 2)`` -> ``(N, 2T)`` with column ``a * T + t``."""
    return np.concatenate([tensor[:, :, 0], tensor[:, :, 1]], axis=1)


def sample_unit_factors(cfg: DgpConfig) -> np.ndarray:
    n = np.arange(cfg.n_units)[:, None]
    j = np.arange(cfg.latent_dim)[None, :]
    return rng.uniform(cfg.seed, "dgp/unit-factors", n, j)


def _meas_draws(cfg: DgpConfig, tag: str, law: CoefficientLaw, dim: int) -> np.ndarray:
    t = np.arange(cfg.n_measurements)[:, None]
    j = np.arange(dim)[None, :]
    return law.transform(rng.uniform(cfg.seed, "dgp/" + tag, t, j))


def _linear_factors(cfg: DgpConfig, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fam = cfg.outcome_family
    n, T = cfg.n_units, cfg.n_measurements
    if isinstance(fam, TwoWayFE):
        p = fam.treat_dim
        beta = fam.effect_law.transform(u[:, :p])
        mu = fam.level_law.transform(u[:, p])
        w = _meas_draws(cfg, "twfe/w", fam.meas_law, 1)[:, 0]
        lam = np.column_stack([beta, mu, np.ones(n)])
        rho = np.zeros((T, 2, p + 2))
        for a in (0, 1):
            rho[:, a, :p] = a
            rho[:, a, p] = 1.0
            rho[:, a, p + 1] = w
        return lam, rho
    if isinstance(fam, InteractiveFE):
        k = fam.factor_dim
        mu = fam.factor_law.transform(u[:, :k])
        w = _meas_draws(cfg, "ife/w", fam.meas_law, k)
        lam = np.column_stack([np.ones(n), mu])
        rho = np.zeros((T, 2, k + 1))
        for a in (0, 1):
            rho[:, a, 0] = a * fam.treatment_effect
            rho[:, a, 1:] = w
        return lam, rho
    if isinstance(fam, TensorFactor):
        k = fam.factor_dim
        lam = fam.factor_law.transform(u[:, :k])
        rho = np.stack(
            [_meas_draws(cfg, f"tensor/w{a}", fam.meas_law, k) for a in (0, 1)], axis=1
        )
        return lam, rho
    if isinstance(fam, Dictionary):
        lam = fam.coef_law.transform(u[:, : fam.n_basis])
        x = _meas_draws(cfg, "dict/x", fam.meas_law, 1)[:, 0]
        mons = fam.monomials()[: fam.n_basis]
        rho = np.zeros((T, 2, fam.n_basis))
        for a in (0, 1):
            for ell, (pa, px) in enumerate(mons):
                rho[:, a, ell] = (a**pa) * x**px
        return lam, rho
    raise TypeError(f"not a linear family: {type(fam).__name__}")


def _check_family(cfg: DgpConfig) -> None:
    fam = cfg.outcome_family
    dims = {
        TwoWayFE: ("treat_dim",),
        InteractiveFE: ("factor_dim",),
        TensorFactor: ("factor_dim",),
        Dictionary: ("n_basis", "degree"),
        BinaryChoice: ("proxy_rank",),
    }[type(fam)]
    for name in dims:
        if getattr(fam, name) < 1:
            raise DimensionError(f"{fam.kind}.{name} must be >= 1")
    need = fam.unit_dim(cfg.latent_dim)
    if need > cfg.latent_dim:
        raise DimensionError(
            f"{fam.kind} needs {need} latent coordinates but latent_dim={cfg.latent_dim}"
        )
    if isinstance(fam, Dictionary) and fam.n_basis > len(fam.monomials()):
        raise DimensionError(
            f"degree {fam.degree} allows at most {len(fam.monomials())} basis functions"
        )
    if isinstance(fam, BinaryChoice) and fam.proxy_rank > min(cfg.n_units, 2 * cfg.n_measurements):
        raise DimensionError("proxy_rank exceeds min(N, 2T)")


def binary_choice_mean(cfg: DgpConfig, u: np.ndarray) -> np.ndarray:
    fam = cfg.outcome_family
    T = cfg.n_measurements
    if fam.inner == "interactive":
        mu = fam.factor_law.transform(u)
        w = _meas_draws(cfg, "binary/w", fam.meas_law, cfg.latent_dim)
        base = mu @ w.T
    else:
        mu = fam.factor_law.transform(u[:, 0])
        w = _meas_draws(cfg, "binary/w", fam.meas_law, 1)[:, 0]
        base = mu[:, None] + w[None, :]
    mean = np.empty((cfg.n_units, T, 2))
    for a in (0, 1):
        mean[:, :, a] = fam.link_fn(fam.scale * (a * fam.treatment_effect + base))
    return mean


def svd_linearization(mean: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-``rank`` factors ``(lambda, rho)`` of the flattened mean tensor."""
    n, T, _ = mean.shape
    f = svd(flatten(mean))
    lam = f.u[:, :rank] * f.s[:rank]
    v = f.v[:, :rank]
    rho = np.stack([v[:T], v[T:]], axis=1)
    return lam, rho


def noise_scales(cfg: DgpConfig) -> np.ndarray:
    spec = cfg.noise
    shape = (cfg.n_units, cfg.n_measurements, 2)
    if spec.profile == "constant":
        return np.full(shape, float(spec.sigma_max))
    n, t, a = np.indices(shape, sparse=True)
    return spec.sigma_max * (0.5 + 0.5 * rng.uniform(cfg.seed, "dgp/sigma", n, t, a))


def sample_noise(cfg: DgpConfig, shape: tuple[int, int, int] | None = None) -> np.ndarray:
    """Mean-zero draws with per-cell scale from :func:`noise_scales`.

    Each cell ``(n, t, a)`` has its own keyed draw, so any sub-panel of a
    larger panel with the same seed sees identical noise.
    """
    spec = cfg.noise
    if shape is None:
        shape = (cfg.n_units, cfg.n_measurements, 2)
    if shape != (cfg.n_units, cfg.n_measurements, 2):
        raise DimensionError(f"shape {shape} does not match config")
    if spec.sigma_max == 0:
        return np.zeros(shape)
    n, t, a = np.indices(shape, sparse=True)
    if spec.law == "gaussian":
        z = rng.normal(cfg.seed, "dgp/noise", n, t, a)
    else:
        z = np.sqrt(3.0) * (2.0 * rng.uniform(cfg.seed, "dgp/noise", n, t, a) - 1.0)
    return noise_scales(cfg) * z


def build_truth(cfg: DgpConfig, rank: int | None = None) -> LatentTruth:
    """Assemble the full ground truth for ``cfg``.

    ``rank`` overrides the linearization rank of nonlinear families; for
    those the linearization uses the rank ``r' <= rank`` with the smallest
    max-entry residual, so ``truth.delta_e == delta_e_proxy(truth, rank)``.
    """
    _check_family(cfg)
    fam = cfg.outcome_family
    u = sample_unit_factors(cfg)
    if isinstance(fam, LINEAR_FAMILIES):
        lam, rho = _linear_factors(cfg, u)
        mean = np.einsum("nr,tar->nta", lam, rho)
        eta = np.zeros_like(mean)
    else:
        mean = binary_choice_mean(cfg, u)
        target = fam.proxy_rank if rank is None else rank
        if not 1 <= target <= min(mean.shape[0], 2 * mean.shape[1]):
            raise DimensionError(f"linearization rank {target} out of range")
        r_best, _ = best_rank_at_most(flatten(mean), target)
        lam, rho = svd_linearization(mean, r_best)
        eta = mean - np.einsum("nr,tar->nta", lam, rho)
    return LatentTruth(
        unit_factors=u,
        lin_unit_factors=lam,
        lin_meas_factors=rho,
        mean_tensor=mean,
        approx_tensor=eta,
        noise_tensor=sample_noise(cfg),
        sigma_tensor=noise_scales(cfg),
        delta_e=float(np.max(np.abs(eta))),
        family=fam.kind,
    )


def delta_e_proxy(truth: LatentTruth, r: int) -> float:
    """Upper bound on the rank-``r`` linear-factor approximation error."""
    return rank_r_max_error(truth.flat_mean(), r)


def binary_indicator_outcomes(truth: LatentTruth, seed: int) -> np.ndarray:
    """0/1 realization ``1{F(.) - e >= 0}`` with uniform ``e`` per cell.

    Optional output mode for binary-choice truths; estimation consumes the
    additive form ``mean + noise``.
    """
    n, t, a = np.indices(truth.mean_tensor.shape, sparse=True)
    e = rng.uniform(seed, "dgp/binary-indicator", n, t, a)
    return (truth.mean_tensor - e >= 0).astype(np.int8)
