"""Build config dataclasses from JSON/TOML documents.

Field names mirror the dataclasses; tagged unions carry a ``kind`` key.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

from factorate import assignment as asg
from factorate import dgp
from factorate.errors import ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FAMILIES = {cls.kind: cls for cls in (dgp.TwoWayFE, dgp.InteractiveFE, dgp.TensorFactor, dgp.Dictionary, dgp.BinaryChoice)}
MECHANISMS = {
    cls.kind: cls
    for cls in (asg.Rct, asg.SelectionOnU, asg.RegressionDiscontinuity, asg.RandomUtility, asg.StaggeredAdoption)
}


def load_document(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _build(cls, data: dict, skip=("kind",)):
    if not isinstance(data, dict):
        raise ValidationError(f"{cls.__name__} config must be a table/object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key in skip:
            continue
        if key not in names:
            raise ValidationError(f"unknown field {key!r} for {cls.__name__}")
        if key.endswith("_law"):
            value = _build(dgp.CoefficientLaw, value, skip=())
        kwargs[key] = _tuplify(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{cls.__name__}: {exc}") from None


def _tagged(registry: dict, data: dict, what: str):
    if not isinstance(data, dict) or "kind" not in data:
        raise ValidationError(f"{what} needs a 'kind' field")
    kind = data["kind"]
    if kind not in registry:
        raise ValidationError(f"unknown {what} kind {kind!r}; expected one of {sorted(registry)}")
    return _build(registry[kind], data)


def outcome_family_from_dict(data: dict) -> dgp.OutcomeFamily:
    return _tagged(FAMILIES, data, "outcome_family")


def mechanism_from_dict(data: dict) -> asg.AssignmentMechanism:
    return _tagged(MECHANISMS, data, "mechanism")


def schedule_from_dict(data: dict | None) -> asg.Schedule:
    return _build(asg.Schedule, data or {}, skip=())


def dgp_config_from_dict(data: dict, **overrides) -> dgp.DgpConfig:
    if not isinstance(data, dict):
        raise ValidationError("dgp config must be a table/object")
    data = {**data, **overrides}
    known = {f.name for f in dataclasses.fields(dgp.DgpConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown dgp fields {sorted(unknown)}")
    kwargs = dict(data)
    if "outcome_family" in kwargs:
        kwargs["outcome_family"] = outcome_family_from_dict(kwargs["outcome_family"])
    if "noise" in kwargs:
        kwargs["noise"] = _build(dgp.NoiseSpec, kwargs["noise"], skip=())
    for key in ("n_units", "n_measurements"):
        if key not in kwargs:
            raise ValidationError(f"dgp config is missing {key!r}")
    try:
        return dgp.DgpConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"DgpConfig: {exc}") from None


def to_plain(obj):
    """Dataclass tree -> JSON-ready dict, tagging unions with ``kind``."""
    if dataclasses.is_dataclass(obj):
        out = {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        kind = getattr(type(obj), "kind", None)
        if isinstance(kind, str) and not isinstance(obj, dgp.CoefficientLaw):
            out = {"kind": kind, **out}
        return out
    if isinstance(obj, (list, tuple)):
        return [to_plain(x) for x in obj]
    return obj
