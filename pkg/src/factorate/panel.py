"""Observed panels and the index machinery the estimator runs on."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from factorate.dgp import LatentTruth
from factorate.errors import (
    DimensionError,
    EmptyCommonMeasurementsError,
    EmptyTargetError,
    RangeError,
    ValidationError,
)

CSV_HEADER = ("unit", "measurement", "treatment", "outcome")


@dataclass(frozen=True)
class PanelData:
    """Outcomes ``Y`` and treatments ``A``, both ``(N, T)``.

    ``unit_ids`` / ``measurement_ids`` are the external labels; all math
    uses the dense positions.
    """

    outcomes: np.ndarray
    treatments: np.ndarray
    unit_ids: tuple[str, ...] = ()
    measurement_ids: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float)
        a = np.asarray(self.treatments)
        if y.ndim != 2 or y.shape != a.shape:
            raise DimensionError(f"outcomes {y.shape} and treatments {a.shape} must match")
        if not np.all(np.isfinite(y)):
            raise ValidationError("outcomes must be finite")
        if not np.all((a == 0) | (a == 1)):
            raise ValidationError("treatments must be 0/1")
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "treatments", a.astype(np.int8))
        if not self.unit_ids:
            object.__setattr__(self, "unit_ids", tuple(str(i) for i in range(y.shape[0])))
        if not self.measurement_ids:
            object.__setattr__(self, "measurement_ids", tuple(str(t) for t in range(y.shape[1])))
        if len(self.unit_ids) != y.shape[0] or len(self.measurement_ids) != y.shape[1]:
            raise DimensionError("identifier lists do not match panel shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.outcomes.shape

    def measurement_index(self, label) -> int:
        """Dense index for a measurement label, falling back to a position."""
        key = str(label)
        if key in self.measurement_ids:
            return self.measurement_ids.index(key)
        try:
            t = int(key)
        except ValueError:
            raise RangeError(f"unknown measurement {label!r}") from None
        if not 0 <= t < self.shape[1]:
            raise RangeError(f"measurement index {t} out of range")
        return t


def observe(truth: LatentTruth, a: np.ndarray) -> PanelData:
    a = np.asarray(a)
    if a.shape != truth.shape:
        raise DimensionError(f"treatments {a.shape} do not match truth {truth.shape}")
    y = np.take_along_axis(truth.potential_outcomes, a[:, :, None].astype(np.intp), axis=2)[:, :, 0]
    return PanelData(outcomes=y, treatments=a)


def common_measurements(a: np.ndarray) -> list[tuple[int, int]]:
    """Measurements where every unit has the same treatment, with that value."""
    a = np.asarray(a)
    const = np.all(a == a[:1, :], axis=0)
    return [(int(t), int(a[0, t])) for t in np.flatnonzero(const)]


TargetSpec = Union[str, Iterable[int]]


@dataclass(frozen=True)
class ObservedDesign:
    """Index sets for one target measurement and target unit set.

    ``common_meas`` never contains ``t_star``; ``t_star_excluded`` records
    that ``t_star`` would otherwise have qualified.
    """

    t_star: int
    target_set: tuple[int, ...]
    i0: tuple[int, ...]
    i1: tuple[int, ...]
    m0: tuple[int, ...]
    m1: tuple[int, ...]
    common_meas: tuple[tuple[int, int], ...]
    t_star_excluded: bool = False
    target: str = "custom"

    @property
    def m_count(self) -> int:
        return len(self.target_set)

    def donors(self, a: int) -> tuple[int, ...]:
        return self.i1 if a else self.i0

    def targets(self, a: int) -> tuple[int, ...]:
        return self.m1 if a else self.m0

    def summary(self) -> dict:
        return {
            "t_star": self.t_star,
            "target": self.target,
            "N0": len(self.i0),
            "N1": len(self.i1),
            "M": self.m_count,
            "M0": len(self.m0),
            "M1": len(self.m1),
            "T_bar": len(self.common_meas),
        }

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "target": self.target,
            "target_set": list(self.target_set),
            "i0": list(self.i0),
            "i1": list(self.i1),
            "m0": list(self.m0),
            "m1": list(self.m1),
            "common_meas": [list(p) for p in self.common_meas],
            "t_star_excluded": self.t_star_excluded,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def design(panel: PanelData, t_star: int, target: TargetSpec = "ate") -> ObservedDesign:
    """Build index sets; ``target`` is ``att``, ``atu``, ``ate`` or explicit units."""
    n_units, T = panel.shape
    if not 0 <= t_star < T:
        raise RangeError(f"t_star {t_star} outside [0, {T})")
    col = panel.treatments[:, t_star]
    i1 = tuple(int(n) for n in np.flatnonzero(col == 1))
    i0 = tuple(int(n) for n in np.flatnonzero(col == 0))
    if isinstance(target, str):
        name = target.lower()
        presets = {"att": i1, "atu": i0, "ate": tuple(range(n_units))}
        if name not in presets:
            raise ValidationError(f"unknown target {target!r}")
        units = presets[name]
    else:
        name = "custom"
        units = tuple(sorted({int(n) for n in target}))
        if units and not (0 <= units[0] and units[-1] < n_units):
            raise RangeError("target units out of range")
    if not units:
        raise EmptyTargetError("empty target set")
    in_target = np.zeros(n_units, dtype=bool)
    in_target[list(units)] = True
    m1 = tuple(n for n in i1 if in_target[n])
    m0 = tuple(n for n in i0 if in_target[n])
    common = common_measurements(panel.treatments)
    excluded = any(t == t_star for t, _ in common)
    common = tuple((t, at) for t, at in common if t != t_star)
    return ObservedDesign(
        t_star=t_star,
        target_set=units,
        i0=i0,
        i1=i1,
        m0=m0,
        m1=m1,
        common_meas=common,
        t_star_excluded=excluded,
        target=name,
    )


@dataclass(frozen=True)
class RegressionInputs:
    """PCR inputs for arm ``a``: per-measurement sums of the units to impute
    (``response``) against donor outcomes (``covariates``, ``T_bar x N_a``)."""

    response: np.ndarray
    covariates: np.ndarray
    units: tuple[int, ...]
    measurements: tuple[int, ...] = field(default=())
    arm: int = 0


def build_regression(panel: PanelData, des: ObservedDesign, a: int) -> RegressionInputs:
    if not des.common_meas:
        raise EmptyCommonMeasurementsError("no common measurements: PCR cannot be trained")
    donors = des.donors(a)
    if not donors:
        raise DimensionError(f"no donor units under treatment {a} at t_star")
    ts = [t for t, _ in des.common_meas]
    y = panel.outcomes
    to_impute = list(des.targets(1 - a))
    response = y[np.ix_(to_impute, ts)].sum(axis=0) if to_impute else np.zeros(len(ts))
    covariates = y[np.ix_(list(donors), ts)].T
    return RegressionInputs(
        response=response, covariates=covariates, units=donors, measurements=tuple(ts), arm=a
    )


def write_panel_csv(panel: PanelData, path) -> None:
    """Long-format CSV, unit-major, outcomes with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for n, uid in enumerate(panel.unit_ids):
            for t, mid in enumerate(panel.measurement_ids):
                w.writerow([uid, mid, int(panel.treatments[n, t]), f"{panel.outcomes[n, t]:.17g}"])


def read_panel_csv(path) -> PanelData:
    """Parse a long-format panel; every (unit, measurement) cell must appear once.

    Identifiers keep their order of first appearance.
    """
    units: dict[str, int] = {}
    meas: dict[str, int] = {}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValidationError(f"expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"line {lineno}: expected 4 fields, got {len(row)}")
            uid, mid, trt, out = (x.strip() for x in row)
            if trt not in ("0", "1"):
                raise ValidationError(f"line {lineno}: treatment must be 0 or 1, got {trt!r}")
            try:
                val = float(out)
            except ValueError:
                raise ValidationError(f"line {lineno}: bad outcome {out!r}") from None
            units.setdefault(uid, len(units))
            meas.setdefault(mid, len(meas))
            rows.append((units[uid], meas[mid], int(trt), val))
    if not rows:
        raise ValidationError("panel CSV has no rows")
    y = np.full((len(units), len(meas)), np.nan)
    a = np.zeros((len(units), len(meas)), dtype=np.int8)
    seen = np.zeros(y.shape, dtype=bool)
    for n, t, trt, val in rows:
        if seen[n, t]:
            raise ValidationError(f"duplicate cell for unit index {n}, measurement index {t}")
        seen[n, t] = True
        y[n, t] = val
        a[n, t] = trt
    if not seen.all():
        n, t = np.argwhere(~seen)[0]
        raise ValidationError(
            f"missing cell: unit {list(units)[n]!r}, measurement {list(meas)[t]!r}"
        )
    return PanelData(outcomes=y, treatments=a, unit_ids=tuple(units), measurement_ids=tuple(meas))
