"""Utility functions: multi-index combinatorics and exact roots."""

import itertools
import math
from collections.abc import Iterator, Sequence
from fractions import Fraction
from typing import Optional

import primefac

from gibbsx.types import Scalar


MultiIndex = tuple[int, ...]
"""Non-decreasing tuple of (0-based) coordinate indices."""


def canonical_indices(dim: int, order: int) -> Iterator[MultiIndex]:
    """All sorted multi-indices of length ``order`` over ``range(dim)``.

    There are :math:`\\binom{d + k - 1}{k}` of them.
    Order 0 yields the single empty tuple.

    :raises ValueError: if dim or order is negative.
    """
    if dim < 0 or order < 0:
        raise ValueError("dim and order must be non-negative")
    return itertools.combinations_with_replacement(range(dim), order)


def index_to_exponents(index: Sequence[int], dim: int) -> tuple[int, ...]:
    """Exponent vector of the monomial corresponding to a multi-index.

    ``(0, 1, 1)`` in dimension 3 is :math:`x_0 x_1^2`, so ``(1, 2, 0)``.
    """
    e = [0] * dim
    for i in index:
        e[i] += 1
    return tuple(e)


def exponents_to_index(exponents: Sequence[int]) -> MultiIndex:
    """Inverse of :func:`index_to_exponents`."""
    return tuple(i for i, e in enumerate(exponents) for _ in range(e))


def multinomial(n: int, parts: Sequence[int]) -> int:
    """Multinomial coefficient :math:`n! / (p_1! \\cdots p_r!)`.

    :raises ValueError: if the parts do not sum to n or any is negative.
    """
    if any(p < 0 for p in parts):
        raise ValueError("parts must be non-negative")
    if sum(parts) != n:
        raise ValueError(f"parts {tuple(parts)} do not sum to {n}")
    result = math.factorial(n)
    for p in parts:
        result //= math.factorial(p)
    return result


def multiplicity(index: Sequence[int]) -> int:
    """Number of distinct orderings of a multi-index."""
    counts: dict[int, int] = {}
    for i in index:
        counts[i] = counts.get(i, 0) + 1
    return multinomial(len(index), list(counts.values()))


def exponent_factorial(exponents: Sequence[int]) -> int:
    """Product of the factorials of an exponent vector."""
    return math.prod(math.factorial(e) for e in exponents)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Tuples of ``parts`` non-negative ints summing to ``total``.

    Yielded in lexicographically decreasing order, so ``(2, 0)`` comes
    before ``(1, 1)`` and ``(0, 2)``.
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first, *rest)


def exact_sqrt(q: Fraction) -> Optional[Fraction]:
    """Square root of q if it is rational, None otherwise.

    :raises ValueError: if q is negative.
    """
    if q < 0:
        raise ValueError("q cannot be negative")
    if q == 0:
        return Fraction(0)
    num = primefac.introot(q.numerator)
    den = primefac.introot(q.denominator)
    if num * num != q.numerator or den * den != q.denominator:
        return None
    return Fraction(num, den)


def fraction_str(q: Fraction) -> str:
    """``"1/10"`` style text; integers print without a denominator."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def scalar_str(c: Scalar) -> str:
    """Text of a coefficient, exact when it is a Fraction."""
    if isinstance(c, Fraction):
        return fraction_str(c)
    return repr(float(c))

