"""Treatment assignment mechanisms ``A = h(U)`` plus exogenous randomness.

Every mechanism scores units with a linear map of ``U_n`` (first latent
coordinate unless ``weights`` is given). A :class:`Schedule` can pin an
initial block of measurements to a common treatment, which is how
simulated panels get the common-treatment measurements PCR trains on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import expit, ndtr

from factorate import rng
from factorate.errors import DimensionError, ValidationError


def _per_t(value, T: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(T, float(arr))
    if arr.shape != (T,):
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected T={T}")
    return arr


def linear_score(u: np.ndarray, weights: Sequence[float] | None, intercept: float = 0.0) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if weights is None:
        return u[:, 0] + intercept
    w = np.asarray(weights, dtype=float)
    if w.shape != (u.shape[1],):
        raise DimensionError(f"score weights have length {w.size}, latent_dim is {u.shape[1]}")
    return u @ w + intercept


@dataclass(frozen=True)
class Rct:
    """Treat with probability ``p`` (scalar or one value per measurement)."""

    p: float | tuple[float, ...] = 0.5
    kind = "rct"


@dataclass(frozen=True)
class SelectionOnU:
    """Treat with probability ``logistic(slope * (score(U) - center))``."""

    slope: float = 4.0
    center: float = 0.5
    weights: tuple[float, ...] | None = None
    kind = "selection_on_u"


@dataclass(frozen=True)
class RegressionDiscontinuity:
    """``A = 1`` iff ``score(U) > threshold``; no exogenous noise.

    The treat-when-above rule follows the assignment display; the prose
    of the original example says "lower than", which contradicts it.
    """

    threshold: float | tuple[float, ...] = 0.5
    weights: tuple[float, ...] | None = None
    kind = "regression_discontinuity"


@dataclass(frozen=True)
class RandomUtility:
    """``A = 1`` iff ``gap(U) + nu > threshold`` with ``nu`` logistic, gaussian or none."""

    weights: tuple[float, ...] | None = None
    intercept: float = 0.0
    noise: str = "logistic"
    noise_scale: float = 1.0
    threshold: float | tuple[float, ...] = 0.5
    kind = "random_utility"

    def __post_init__(self):
        if self.noise not in ("logistic", "gaussian", "none"):
            raise ValidationError(f"unknown utility noise {self.noise!r}")


@dataclass(frozen=True)
class StaggeredAdoption:
    """Absorbing treatment: ``A_{n,t} = 1`` iff ``score(U_n) > min_{t' <= t} theta_{t'}``.

    Thresholds are ``+inf`` before ``start`` and then fall linearly from
    ``theta_high`` to ``theta_low`` at the last measurement. ``U_n`` is
    projected to a scalar score first; comparing the vector against a
    vector threshold is not well defined for ``q > 1``.
    """

    start: int = 0
    theta_high: float = 1.0
    theta_low: float = 0.0
    weights: tuple[float, ...] | None = None
    kind = "staggered_adoption"


AssignmentMechanism = Union[Rct, SelectionOnU, RegressionDiscontinuity, RandomUtility, StaggeredAdoption]


@dataclass(frozen=True)
class Schedule:
    """Measurements ``0..n_common-1`` are assigned the same treatment to all units.

    With ``treated_every = m > 0`` every ``m``-th of them (``t % m == m - 1``)
    is all-treated; the rest are all-control. The mechanism decides the
    remaining measurements.
    """

    n_common: int = 0
    treated_every: int = 0

    def __post_init__(self):
        if self.n_common < 0 or self.treated_every < 0:
            raise ValidationError("schedule counts must be >= 0")

    def common_value(self, t: int) -> int:
        m = self.treated_every
        return int(m > 0 and t % m == m - 1)


def staggered_thresholds(mech: StaggeredAdoption, T: int) -> np.ndarray:
    theta = np.full(T, np.inf)
    span = T - 1 - mech.start
    for t in range(max(mech.start, 0), T):
        frac = (t - mech.start) / span if span > 0 else 1.0
        theta[t] = mech.theta_high + frac * (mech.theta_low - mech.theta_high)
    return theta


def propensity(mech: AssignmentMechanism, unit_factors: np.ndarray, T: int) -> np.ndarray:
    """``P(A_{n,t} = 1 | U)`` as an ``(N, T)`` array, ignoring any schedule."""
    u = np.asarray(unit_factors, dtype=float)
    n = u.shape[0]
    if isinstance(mech, Rct):
        p = _per_t(mech.p, T, "p")
        if np.any((p < 0) | (p > 1)):
            raise ValidationError("RCT probabilities must lie in [0, 1]")
        return np.broadcast_to(p, (n, T)).copy()
    if isinstance(mech, SelectionOnU):
        s = linear_score(u, mech.weights)
        return np.broadcast_to(expit(mech.slope * (s - mech.center))[:, None], (n, T)).copy()
    if isinstance(mech, RegressionDiscontinuity):
        theta = _per_t(mech.threshold, T, "threshold")
        return (linear_score(u, mech.weights)[:, None] > theta[None, :]).astype(float)
    if isinstance(mech, RandomUtility):
        theta = _per_t(mech.threshold, T, "threshold")
        margin = linear_score(u, mech.weights, mech.intercept)[:, None] - theta[None, :]
        if mech.noise == "none" or mech.noise_scale == 0:
            return (margin > 0).astype(float)
        if mech.noise == "logistic":
            return expit(margin / mech.noise_scale)
        return ndtr(margin / mech.noise_scale)
    if isinstance(mech, StaggeredAdoption):
        theta_bar = np.minimum.accumulate(staggered_thresholds(mech, T))
        return (linear_score(u, mech.weights)[:, None] > theta_bar[None, :]).astype(float)
    raise TypeError(f"unknown mechanism {type(mech).__name__}")


def assign(
    mech: AssignmentMechanism,
    unit_factors: np.ndarray,
    T: int,
    seed: int = 0,
    schedule: Schedule | None = None,
) -> np.ndarray:
    """Draw an ``(N, T)`` 0/1 treatment matrix.

    Randomness is keyed by ``(seed, n, t)``; RD and staggered adoption are
    deterministic in ``U``.
    """
    u = np.asarray(unit_factors, dtype=float)
    if u.ndim != 2:
        raise DimensionError("unit_factors must be an (N, q) matrix")
    n_units = u.shape[0]
    n_idx = np.arange(n_units)[:, None]
    t_idx = np.arange(T)[None, :]
    if isinstance(mech, RandomUtility):
        theta = _per_t(mech.threshold, T, "threshold")
        gap = linear_score(u, mech.weights, mech.intercept)[:, None]
        if mech.noise == "logistic":
            nu = mech.noise_scale * rng.logistic(seed, "assign/rum", n_idx, t_idx)
        elif mech.noise == "gaussian":
            nu = mech.noise_scale * rng.normal(seed, "assign/rum", n_idx, t_idx)
        else:
            nu = 0.0
        a = (gap + nu > theta[None, :]).astype(np.int8)
    elif isinstance(mech, (Rct, SelectionOnU)):
        p = propensity(mech, u, T)
        v = rng.uniform(seed, "assign/" + mech.kind, n_idx, t_idx)
        # v in [0, 1) so p = 1 always treats and p = 0 never does
        a = (v < p).astype(np.int8)
    else:
        a = propensity(mech, u, T).astype(np.int8)
    if schedule is not None and schedule.n_common:
        if schedule.n_common >= T:
            raise DimensionError(f"schedule pins {schedule.n_common} of {T} measurements")
        for t in range(schedule.n_common):
            a[:, t] = schedule.common_value(t)
    return a


def adoption_times(a: np.ndarray) -> np.ndarray:
    """First treated measurement per unit, ``-1`` for never-treated units."""
    a = np.asarray(a)
    first = np.argmax(a == 1, axis=1)
    return np.where(a.any(axis=1), first, -1)


def mechanism_diagnostics(mech: AssignmentMechanism, a: np.ndarray, unit_factors: np.ndarray) -> dict:
    a = np.asarray(a)
    T = a.shape[1]
    p = propensity(mech, unit_factors, T)
    report = {
        "mechanism": mech.kind,
        "treated_count": a.sum(axis=0).astype(int).tolist(),
        "treated_fraction": a.mean(axis=0).tolist(),
        "propensity_min": float(p.min()),
        "propensity_max": float(p.max()),
        "overlap_violations": int(np.sum((p <= 0.0) | (p >= 1.0))),
    }
    if isinstance(mech, StaggeredAdoption):
        times = adoption_times(a)
        report["adoption_time"] = times.tolist()
        report["adopted_by"] = [int(np.sum((times >= 0) & (times <= t))) for t in range(T)]
    return report
