"""
Helpful type declarations and guards.

Exact arithmetic uses :class:`fractions.Fraction`; anything that has
passed through floating point linear algebra is a :class:`float`.
Most containers here are plain tuples so that values stay immutable.
"""

from fractions import Fraction
from typing import Any, NewType, TypeAlias, TypeGuard

Scalar: TypeAlias = Fraction | float
"""A coefficient: exact rational, or float once exactness is lost."""

Vector: TypeAlias = tuple[Scalar, ...]
"""A vector of scalars."""

Matrix: TypeAlias = tuple[Vector, ...]
"""A matrix stored row-major as a tuple of rows."""

PositiveInt = NewType("PositiveInt", int)
"""Positive integer."""


def is_positive_int(val: Any) -> TypeGuard[PositiveInt]:
    """true if val is an int, s.t. val >= 1"""
    if not isinstance(val, int) or isinstance(val, bool):
        return False
    return val >= 1


OddInt = NewType("OddInt", int)
"""Odd positive integer, used for node counts so that 0 is a node."""


def is_odd_int(val: Any) -> TypeGuard[OddInt]:
    """true if val is a positive odd int."""
    return is_positive_int(val) and val % 2 == 1


def is_exact(values: Any) -> bool:
    """True iff every scalar in a (nested) tuple is a Fraction or an int.

    Floats that happen to hold integers do not count as exact.
    """
    if isinstance(values, (Fraction, int)) and not isinstance(values, bool):
        return True
    if isinstance(values, float):
        return False
    return all(is_exact(v) for v in values)

