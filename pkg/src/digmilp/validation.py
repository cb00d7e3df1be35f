"""Input validation shared by the estimators and the command line."""
from __future__ import annotations

import math
from numbers import Integral, Real

from .exceptions import ValidationError
from .instance import MilpInstance


def check_instances(X, min_count: int = 1, same_mode: bool = True) -> list[MilpInstance]:
    """Materialize ``X`` as a list of instances and check it is usable."""
    if isinstance(X, MilpInstance):
        X = [X]
    try:
        instances = list(X)
    except TypeError:
        raise ValidationError(f"expected a sequence of MilpInstance, got {type(X).__name__}") from None
    if len(instances) < min_count:
        raise ValidationError(f"need at least {min_count} instance(s), got {len(instances)}")
    for k, inst in enumerate(instances):
        if not isinstance(inst, MilpInstance):
            raise ValidationError(f"item {k} is {type(inst).__name__}, not MilpInstance")
    if same_mode and len({i.mode for i in instances}) > 1:
        raise ValidationError("instances mix GeneralInteger and Binary modes")
    return instances


def check_int(value, name: str, low: int | None = None, high: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise ValidationError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValidationError(f"{name} must be <= {high}, got {value}")
    return value


def check_real(value, name: str, low=None, high=None, low_open=False, high_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite number, got {value!r}")
    value = float(value)
    if low is not None and (value < low or (low_open and value == low)):
        raise ValidationError(f"{name} must be {'>' if low_open else '>='} {low}, got {value}")
    if high is not None and (value > high or (high_open and value == high)):
        raise ValidationError(f"{name} must be {'<' if high_open else '<='} {high}, got {value}")
    return value
