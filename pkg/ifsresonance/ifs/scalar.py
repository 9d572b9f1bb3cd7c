"""
Exact (Fraction) and floating (float) real numbers behind one alias.

Exact mode is closed under +, -, * and /; a float reaching an exact
computation raises MixedModeError instead of silently degrading it.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Union

from ifsresonance.errors import DomainError, MixedModeError

Scalar = Union[Fraction, float]
ScalarLike = Union[Fraction, float, int, str]


def is_exact(value: object) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def to_scalar(value: ScalarLike, exact: bool) -> Scalar:
    if exact:
        if isinstance(value, float):
            raise MixedModeError(f"float {value!r} cannot enter an exact computation")
        if isinstance(value, str):
            try:
                return Fraction(value.strip())
            except (ValueError, ZeroDivisionError) as e:
                raise DomainError(f"not a rational number: {value!r}") from e
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return float(Fraction(text)) if "/" in text else float(text)
        except (ValueError, ZeroDivisionError) as e:
            raise DomainError(f"not a number: {value!r}") from e
    return float(value)


def parse_scalar(value: ScalarLike) -> Scalar:
    """Strings and ints parse exactly, floats stay floats."""
    if isinstance(value, float):
        return value
    return to_scalar(value, exact=True)


def common_mode(values: Iterable[Scalar]) -> bool:
    """True when every value is exact, False when every value is a float."""
    modes = {is_exact(v) for v in values}
    if len(modes) > 1:
        raise MixedModeError("exact and float values mixed in one computation")
    return modes != {False}


def log_abs(value: Scalar) -> float:
    """log|value| without underflow for tiny exact rationals."""
    if value == 0:
        raise DomainError("logarithm of zero")
    if is_exact(value):
        frac = Fraction(value)
        return math.log(abs(frac.numerator)) - math.log(frac.denominator)
    return math.log(abs(value))


def power(base: Scalar, exponent: int) -> Scalar:
    if is_exact(base):
        return Fraction(base) ** exponent
    return float(base) ** exponent


def equal(a: Scalar, b: Scalar, tol: float) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(float(a) - float(b)) <= tol * max(1.0, abs(float(a)), abs(float(b)))


def at_most(a: Scalar, b: Scalar, tol: float) -> bool:
    if is_exact(a) and is_exact(b):
        return a <= b
    return float(a) <= float(b) + tol * max(1.0, abs(float(a)), abs(float(b)))
