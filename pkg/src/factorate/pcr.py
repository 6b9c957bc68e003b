"""Principal component regression for the synthetic weights.

Hard-truncate the donor outcome matrix to rank ``k`` and apply its
pseudo-inverse to the response. The response is the raw sum over the
units being imputed (not divided by their count).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from factorate.errors import DimensionError, EmptyCommonMeasurementsError, RangeError, ValidationError
from factorate.linalg import as_matrix, svd, truncated_pinv
from factorate.panel import RegressionInputs


@dataclass(frozen=True)
class Fixed:
    k: int
    kind = "fixed"

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("fixed rank must be >= 1")

    def __str__(self):
        return f"fixed:{self.k}"


@dataclass(frozen=True)
class EnergyThreshold:
    """Smallest ``k`` with ``sum_{l<=k} s_l^2 / sum s_l^2 >= fraction``."""

    fraction: float = 0.999
    kind = "energy"

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValidationError("energy fraction must lie in (0, 1]")

    def __str__(self):
        return f"energy:{self.fraction}"


@dataclass(frozen=True)
class HardThreshold:
    """Keep singular values above ``multiplier * median(s)`` (at least one)."""

    multiplier: float = 2.0
    kind = "hard"

    def __post_init__(self):
        if not self.multiplier > 0:
            raise ValidationError("hard-threshold multiplier must be > 0")

    def __str__(self):
        return f"hard:{self.multiplier}"


RankStrategy = Union[Fixed, EnergyThreshold, HardThreshold]
DEFAULT_STRATEGY = EnergyThreshold(0.999)


def parse_rank(text: str) -> RankStrategy:
    """Parse ``fixed:4``, ``energy:0.999`` or ``hard:2.0``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "fixed":
            return Fixed(int(arg))
        if kind == "energy":
            return EnergyThreshold(float(arg) if arg else 0.999)
        if kind == "hard":
            return HardThreshold(float(arg) if arg else 2.0)
    except ValueError as exc:
        raise ValidationError(f"bad rank strategy {text!r}: {exc}") from None
    raise ValidationError(f"unknown rank strategy {text!r}")


@dataclass(frozen=True)
class WeightVector:
    """Weights over the donor units ``units`` (same order as ``values``).

    ``span_residual`` is only set for oracle weights.
    """

    values: np.ndarray
    rank_used: int
    units: tuple[int, ...]
    span_residual: float | None = None

    def __post_init__(self):
        if len(self.values) != len(self.units):
            raise DimensionError("weight length does not match its unit set")

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    @property
    def l2(self) -> float:
        return float(np.linalg.norm(self.values))

    @classmethod
    def zeros(cls, units) -> "WeightVector":
        units = tuple(units)
        return cls(values=np.zeros(len(units)), rank_used=0, units=units)


def _rank_from_singular_values(s: np.ndarray, strategy: RankStrategy) -> int:
    if isinstance(strategy, Fixed):
        if strategy.k > len(s):
            raise RangeError(f"fixed rank {strategy.k} exceeds min dimension {len(s)}")
        return strategy.k
    if isinstance(strategy, EnergyThreshold):
        energy = s**2
        total = energy.sum()
        if total == 0:
            return 1
        cum = np.cumsum(energy) / total
        return min(len(s), int(np.searchsorted(cum, strategy.fraction - 1e-12)) + 1)
    if isinstance(strategy, HardThreshold):
        return max(1, int(np.sum(s > strategy.multiplier * np.median(s))))
    raise TypeError(f"unknown rank strategy {strategy!r}")


def select_rank(z, strategy: RankStrategy) -> int:
    return _rank_from_singular_values(svd(z).s, strategy)


def pcr_fit(inputs: RegressionInputs, strategy: RankStrategy = DEFAULT_STRATEGY) -> WeightVector:
    z = np.asarray(inputs.covariates, dtype=float)
    if z.shape[0] == 0:
        raise EmptyCommonMeasurementsError("no common measurements to train on")
    z = as_matrix(z, "covariates")
    y = np.asarray(inputs.response, dtype=float)
    if y.shape != (z.shape[0],):
        raise DimensionError("response length does not match covariate rows")
    f = svd(z)
    k = _rank_from_singular_values(f.s, strategy)
    beta = truncated_pinv(f, k) @ y
    return WeightVector(values=beta, rank_used=k, units=tuple(inputs.units))
