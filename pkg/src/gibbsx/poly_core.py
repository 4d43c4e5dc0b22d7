"""Sparse multivariate polynomials with exact rational coefficients.

Also here: the expression parser, recentring at a point, extraction of
derivative tensors and the :math:`t`-graded substitution
:math:`h \\mapsto B \\cdot (t^\\alpha * h)`.

Coefficients are :class:`fractions.Fraction` unless a float basis was
substituted, in which case they are floats.
Exponents of :math:`t` are always Fractions, so grades never collide
through rounding.
"""

import logging
import math
import re
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from gibbsx import config
from gibbsx.tensor_core import DimensionError, SymmetricTensor
from gibbsx.types import Scalar, is_exact
from gibbsx.utils import (
    canonical_indices,
    exponent_factorial,
    index_to_exponents,
    scalar_str,
)

logger = logging.getLogger(__name__)

Exponents = tuple[int, ...]
"""Exponent vector of a monomial."""

Coefficient = Union[Scalar, int]


class SparsePoly:
    """A polynomial in ``dim`` variables stored as exponents to coefficient.

    Zero coefficients are never stored, so the zero polynomial has no
    terms.
    Instances are conventionally immutable.
    """

    def __init__(
        self,
        dim: int,
        terms: Optional[Mapping[Sequence[int], Coefficient]] = None,
    ) -> None:
        """
        :raises ValueError: if dim is negative or an exponent vector is
            malformed.
        """
        if dim < 0:
            raise ValueError("dim must be non-negative")
        self._dim = dim
        self._terms: dict[Exponents, Scalar] = {}
        if terms is None:
            return
        for exps, c in terms.items():
            e = tuple(exps)
            if len(e) != dim:
                raise ValueError(
                    f"exponent vector {e} does not have length {dim}"
                )
            if any(not isinstance(x, int) or x < 0 for x in e):
                raise ValueError(f"exponents must be non-negative ints: {e}")
            if c == 0:
                continue
            coef: Scalar = Fraction(c) if isinstance(c, int) else c
            if e in self._terms:
                coef = self._terms[e] + coef
                if coef == 0:
                    del self._terms[e]
                    continue
            self._terms[e] = coef

    @classmethod
    def zero(cls, dim: int) -> "SparsePoly":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: Coefficient) -> "SparsePoly":
        """The constant polynomial c."""
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, dim: int, i: int) -> "SparsePoly":
        """The coordinate polynomial :math:`x_i` (0-based).

        :raises ValueError: if i is out of range.
        """
        if not 0 <= i < dim:
            raise ValueError(f"variable {i} out of range for dim {dim}")
        return cls(dim, {tuple(int(j == i) for j in range(dim)): 1})

    @classmethod
    def linear_form(
        cls, coeffs: Sequence[Coefficient]
    ) -> "SparsePoly":
        """:math:`\\sum_j c_j x_j`."""
        dim = len(coeffs)
        return cls(
            dim,
            {
                tuple(int(j == i) for j in range(dim)): c
                for i, c in enumerate(coeffs)
            },
        )

    @property
    def dim(self) -> int:
        """Number of variables."""
        return self._dim

    @property
    def terms(self) -> dict[Exponents, Scalar]:
        """A copy of the exponents to coefficient map."""
        return dict(self._terms)

    def coefficient(self, exps: Sequence[int]) -> Scalar:
        """Coefficient of a monomial, zero if absent."""
        return self._terms.get(tuple(exps), Fraction(0))

    def monomials(self) -> Iterator[tuple[Exponents, Scalar]]:
        """Terms in graded-lex order (the printing order)."""
        return iter(sorted(self._terms.items(), key=_graded_key))

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_exact(self) -> bool:
        """True when every coefficient is a Fraction."""
        return is_exact(tuple(self._terms.values()))

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    @property
    def constant_term(self) -> Scalar:
        return self.coefficient((0,) * self._dim)

    def variables_used(self) -> tuple[bool, ...]:
        """For each variable, whether some monomial has it."""
        return tuple(
            any(e[i] > 0 for e in self._terms) for i in range(self._dim)
        )

    def _check_dim(self, other: "SparsePoly") -> None:
        if other.dim != self.dim:
            raise DimensionError(
                f"polynomials in {self.dim} and {other.dim} variables"
            )

    def __add__(self, other: object) -> "SparsePoly":
        if isinstance(other, (int, Fraction, float)):
            other = SparsePoly.constant(self.dim, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check_dim(other)
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return SparsePoly(self.dim, terms)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly(self.dim, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other: object) -> "SparsePoly":
        if isinstance(other, (int, Fraction, float)):
            other = SparsePoly.constant(self.dim, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: object) -> "SparsePoly":
        return (-self) + other

    def __mul__(self, other: object) -> "SparsePoly":
        if isinstance(other, (int, Fraction, float)):
            return SparsePoly(
                self.dim, {e: c * other for e, c in self._terms.items()}
            )
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check_dim(other)
        terms: dict[Exponents, Scalar] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return SparsePoly(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "SparsePoly":
        """Non-negative integer powers by repeated squaring.

        :raises ValueError: if n is negative.
        """
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative int")
        result = SparsePoly.constant(self.dim, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def max_coefficient_diff(self, other: "SparsePoly") -> float:
        """Largest absolute coefficient-wise difference."""
        self._check_dim(other)
        keys = set(self._terms) | set(other._terms)
        return max(
            (
                abs(float(self.coefficient(e) - other.coefficient(e)))
                for e in keys
            ),
            default=0.0,
        )

    def evaluate(self, point: Sequence[Coefficient]) -> Scalar:
        """Value at a point; exact when point and coefficients are exact.

        :raises DimensionError: if the point has the wrong length.
        """
        if len(point) != self.dim:
            raise DimensionError(
                f"point of length {len(point)} for dim {self.dim}"
            )
        total: Scalar = Fraction(0)
        for e, c in self._terms.items():
            total += c * math.prod(x**k for x, k in zip(point, e) if k)
        if not self.is_exact or not is_exact(tuple(point)):
            return float(total)
        return total

    def evaluate_array(self, points: np.ndarray) -> np.ndarray:
        """Vectorised float evaluation at points of shape ``(..., dim)``.

        :raises DimensionError: if the last axis is not of length dim.
        """
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DimensionError("last axis must have length dim")
        out = np.zeros(pts.shape[:-1], dtype=float)
        for e, c in self._terms.items():
            term = np.full(pts.shape[:-1], float(c))
            for i, k in enumerate(e):
                if k:
                    term = term * pts[..., i] ** k
            out = out + term
        return out

    def partial(self, i: int) -> "SparsePoly":
        """Partial derivative in variable i."""
        terms: dict[Exponents, Scalar] = {}
        for e, c in self._terms.items():
            if e[i] == 0:
                continue
            e2 = e[:i] + (e[i] - 1,) + e[i + 1 :]
            terms[e2] = c * e[i]
        return SparsePoly(self.dim, terms)

    def compose(self, subs: Sequence["SparsePoly"]) -> "SparsePoly":
        """Substitute ``subs[i]`` for variable i.

        All substitutes must share one dimension, which becomes the
        dimension of the result.

        :raises DimensionError: if len(subs) != dim or the substitutes
            disagree in dimension.
        """
        if len(subs) != self.dim:
            raise DimensionError(
                f"{len(subs)} substitutes for {self.dim} variables"
            )
        if not subs:
            return SparsePoly(0, {(): self.constant_term})
        out_dim = subs[0].dim
        if any(s.dim != out_dim for s in subs):
            raise DimensionError("substitutes differ in dimension")

        powers: list[list[SparsePoly]] = [
            [SparsePoly.constant(out_dim, 1)] for _ in subs
        ]

        def power(i: int, k: int) -> SparsePoly:
            while len(powers[i]) <= k:
                powers[i].append(powers[i][-1] * subs[i])
            return powers[i][k]

        result = SparsePoly.zero(out_dim)
        for e, c in self.monomials():
            term = SparsePoly.constant(out_dim, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def chop(self, tol: float) -> "SparsePoly":
        """Drop float coefficients of magnitude at most tol.

        Exact coefficients are kept whatever their size.
        """
        return SparsePoly(
            self.dim,
            {
                e: c
                for e, c in self._terms.items()
                if isinstance(c, Fraction) or abs(c) > tol
            },
        )

    def to_str(self, names: Optional[Sequence[str]] = None) -> str:
        """Canonical text, with explicit ``*`` and ``^``.

        Terms come in increasing total degree; within a degree,
        higher powers of earlier variables come first.
        Exact polynomials print in a form :func:`parse_poly` reads back.
        """
        if names is None:
            names = default_names(self.dim)
        if len(names) != self.dim:
            raise DimensionError("wrong number of variable names")
        if not self._terms:
            return "0"
        parts: list[str] = []
        for e, c in self.monomials():
            factors = [
                name if k == 1 else f"{name}^{k}"
                for name, k in zip(names, e)
                if k
            ]
            negative = c < 0
            mag = -c if negative else c
            if not factors:
                body = scalar_str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([scalar_str(mag), *factors])
            if not parts:
                parts.append(f"-{body}" if negative else body)
            else:
                parts.append(f"- {body}" if negative else f"+ {body}")
        return " ".join(parts)

    def __str__(self) -> str:
        return self.to_str()

    def __repr__(self) -> str:
        return f"SparsePoly({self.dim}, {self.to_str()!r})"


def _graded_key(item: tuple[Exponents, Scalar]) -> tuple[int, Exponents]:
    e = item[0]
    return (sum(e), tuple(-k for k in e))


def default_names(dim: int) -> tuple[str, ...]:
    """``x, y, z`` for up to three variables, ``x1 ... xd`` beyond."""
    if dim <= 3:
        return ("x", "y", "z")[:dim]
    return tuple(f"x{i + 1}" for i in range(dim))


# Parsing


class PolySyntaxError(ValueError):
    """Malformed polynomial text."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownVariableError(PolySyntaxError):
    """A name that is not one of the declared variables."""

    def __init__(self, name: str, position: int) -> None:
        super().__init__(f"unknown variable {name!r}", position)
        self.name = name


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
    | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op>[-+*^/()])
    """,
    re.VERBOSE,
)

_VAR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PolySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        assert kind is not None
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over

    .. code-block:: text

        expr   := term (("+" | "-") term)*
        term   := unary ("*" unary)*
        unary  := ("+" | "-") unary | power
        power  := atom ("^" INTEGER)?
        atom   := NUMBER ("/" INTEGER)? | NAME | "(" expr ")"
    """

    def __init__(self, text: str, names: Sequence[str]) -> None:
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = {n: k for k, n in enumerate(names)}
        self.dim = len(names)

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_op(self, ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    def fail_unexpected(self) -> None:
        tok = self.peek()
        opens = tok.kind == "op" and tok.text == "("
        if tok.kind in ("num", "name") or opens:
            raise PolySyntaxError(
                "implicit multiplication is not allowed", tok.pos
            )
        if tok.kind == "end":
            raise PolySyntaxError("unexpected end of input", tok.pos)
        raise PolySyntaxError(f"unexpected {tok.text!r}", tok.pos)

    def parse(self) -> SparsePoly:
        if self.peek().kind == "end":
            raise PolySyntaxError("empty expression", 0)
        result = self.expr()
        if self.peek().kind != "end":
            self.fail_unexpected()
        return result

    def expr(self) -> SparsePoly:
        result = self.term()
        while self.at_op("+-"):
            op = self.advance().text
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> SparsePoly:
        result = self.unary()
        while self.at_op("*"):
            self.advance()
            result = result * self.unary()
        return result

    def unary(self) -> SparsePoly:
        if self.at_op("+-"):
            op = self.advance().text
            operand = self.unary()
            return -operand if op == "-" else operand
        return self.power()

    def power(self) -> SparsePoly:
        base = self.atom()
        if not self.at_op("^"):
            return base
        self.advance()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            raise PolySyntaxError("negative exponent", tok.pos)
        if tok.kind != "num":
            raise PolySyntaxError(
                "exponent must be a non-negative integer literal", tok.pos
            )
        if not tok.text.isdigit():
            raise PolySyntaxError("fractional exponent", tok.pos)
        self.advance()
        if self.at_op("/"):
            raise PolySyntaxError("fractional exponent", self.peek().pos)
        return base ** int(tok.text)

    def atom(self) -> SparsePoly:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            value = Fraction(tok.text)
            if self.at_op("/"):
                slash = self.advance()
                den = self.peek()
                if den.kind != "num" or not den.text.isdigit():
                    raise PolySyntaxError(
                        "'/' is only allowed in rational literals", slash.pos
                    )
                self.advance()
                if int(den.text) == 0:
                    raise PolySyntaxError("zero denominator", den.pos)
                value = value / int(den.text)
            return SparsePoly.constant(self.dim, value)
        if tok.kind == "name":
            self.advance()
            if tok.text not in self.names:
                raise UnknownVariableError(tok.text, tok.pos)
            return SparsePoly.variable(self.dim, self.names[tok.text])
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            if not self.at_op(")"):
                if self.peek().kind == "end":
                    raise PolySyntaxError("missing ')'", self.peek().pos)
                self.fail_unexpected()
            self.advance()
            return inner
        self.fail_unexpected()
        raise AssertionError("unreachable")


def parse_poly(text: str, names: Sequence[str]) -> SparsePoly:
    """Parse polynomial text over the given ordered variable names.

    Accepts integer, decimal and ``p/q`` literals, the variables,
    ``+ - * ^`` and parentheses.
    Exponents are non-negative integer literals.
    Implicit multiplication such as ``2x`` is rejected.

    :raises ValueError: if the variable names are empty, repeated or
        not identifiers.
    :raises UnknownVariableError: for a name not among ``names``.
    :raises PolySyntaxError: for anything else malformed, with the
        offending position.
    """
    if not names:
        raise ValueError("at least one variable is required")
    if len(set(names)) != len(names):
        raise ValueError("variable names must be distinct")
    for n in names:
        if not _VAR_RE.match(n):
            raise ValueError(f"{n!r} is not a valid variable name")
    return _Parser(text, names).parse()


# Recentring and derivatives


def shift(f: SparsePoly, x_star: Sequence[Coefficient]) -> SparsePoly:
    """The polynomial :math:`h \\mapsto f(x^* + h)`, computed exactly.

    :raises DimensionError: if len(x_star) != f.dim.
    """
    if len(x_star) != f.dim:
        raise DimensionError(
            f"point of length {len(x_star)} for dim {f.dim}"
        )
    subs = [SparsePoly.variable(f.dim, i) + c for i, c in enumerate(x_star)]
    return f.compose(subs)


def derivative_tensor(f: SparsePoly, k: int) -> SymmetricTensor:
    """:math:`\\nabla^k f(0)` as a symmetric tensor.

    The component at a multi-index is the coefficient of the matching
    monomial times the product of the factorials of its exponents.

    :raises ValueError: if k is negative.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    comps: dict[tuple[int, ...], Scalar] = {}
    for m in canonical_indices(f.dim, k):
        exps = index_to_exponents(m, f.dim)
        c = f.coefficient(exps)
        if c != 0:
            comps[m] = c * exponent_factorial(exps)
    return SymmetricTensor(f.dim, k, comps)


def homogeneous_part(f: SparsePoly, k: int) -> SparsePoly:
    """The terms of total degree exactly k."""
    return SparsePoly(
        f.dim, {e: c for e, c in f.terms.items() if sum(e) == k}
    )


# Graded substitution


class GradedExpansion:
    """A finite sum :math:`\\sum_a t^a P_a(h)` with rational exponents a.

    Every stored polynomial is nonzero.
    Instances are conventionally immutable.
    """

    def __init__(
        self, dim: int, grades: Mapping[Fraction, SparsePoly]
    ) -> None:
        """
        :raises DimensionError: if a grade polynomial is not in dim
            variables.
        """
        self._dim = dim
        for p in grades.values():
            if p.dim != dim:
                raise DimensionError("grade polynomial of wrong dimension")
        self._grades: dict[Fraction, SparsePoly] = {
            Fraction(a): grades[a]
            for a in sorted(grades)
            if not grades[a].is_zero
        }

    @property
    def dim(self) -> int:
        return self._dim

    def exponents(self) -> list[Fraction]:
        """Grade exponents in increasing order."""
        return list(self._grades)

    def items(self) -> Iterator[tuple[Fraction, SparsePoly]]:
        return iter(self._grades.items())

    def __getitem__(self, a: Fraction) -> SparsePoly:
        """Polynomial at grade a; the zero polynomial if absent."""
        return self._grades.get(Fraction(a), SparsePoly.zero(self._dim))

    def __contains__(self, a: object) -> bool:
        return a in self._grades

    def __len__(self) -> int:
        return len(self._grades)

    def below(self, a: Fraction) -> list[tuple[Fraction, SparsePoly]]:
        """Grades with exponent strictly below a."""
        return [(b, p) for b, p in self._grades.items() if b < a]

    def smallest_above(self, a: Fraction) -> Optional[Fraction]:
        """Smallest exponent strictly above a, if any."""
        return next((b for b in self._grades if b > a), None)

    def evaluate(self, t: float, h: Sequence[Coefficient]) -> float:
        """:math:`\\sum_a t^a P_a(h)` in floating point."""
        return sum(
            (t ** float(a) * float(p.evaluate(h)) for a, p in self.items()),
            0.0,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedExpansion):
            return NotImplemented
        return self._dim == other._dim and self._grades == other._grades

    def __repr__(self) -> str:
        inner = ", ".join(f"{a}: {p.to_str()}" for a, p in self.items())
        return f"GradedExpansion({{{inner}}})"


def _check_orthogonal(B: Sequence[Sequence[Coefficient]], dim: int) -> None:
    if len(B) != dim or any(len(row) != dim for row in B):
        raise DimensionError(f"B must be {dim} x {dim}")
    for i in range(dim):
        for j in range(i, dim):
            d = sum(B[r][i] * B[r][j] for r in range(dim))
            target = 1 if i == j else 0
            if abs(float(d) - target) > config.ORTHONORMAL_TOL:
                raise ValueError("B is not orthogonal")


def linear_substitute(
    f: SparsePoly, B: Sequence[Sequence[Coefficient]]
) -> SparsePoly:
    """The polynomial :math:`h \\mapsto f(B h)`.

    :raises DimensionError: if B is not square of size f.dim.
    """
    if len(B) != f.dim or any(len(row) != f.dim for row in B):
        raise DimensionError(f"B must be {f.dim} x {f.dim}")
    if f.dim == 0:
        return f
    return f.compose([SparsePoly.linear_form(list(row)) for row in B])


def grade_of(exps: Sequence[int], alpha: Sequence[Fraction]) -> Fraction:
    """Weighted degree :math:`\\sum_j \\alpha_j e_j`."""
    return sum((a * e for a, e in zip(alpha, exps)), Fraction(0))


def split_by_grade(
    p: SparsePoly, alpha: Sequence[Fraction]
) -> GradedExpansion:
    """Group the monomials of p by their weighted degree."""
    buckets: dict[Fraction, dict[Exponents, Scalar]] = {}
    for e, c in p.terms.items():
        buckets.setdefault(grade_of(e, alpha), {})[e] = c
    return GradedExpansion(
        p.dim, {a: SparsePoly(p.dim, t) for a, t in buckets.items()}
    )


def graded_substitute(
    f: SparsePoly,
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
) -> GradedExpansion:
    """Expand :math:`f(B \\cdot (t^\\alpha * h))` by powers of t.

    A monomial :math:`h^e` of :math:`f(Bh)` carries
    :math:`t^{\\sum_j \\alpha_j e_j}`.
    With a float B, coefficients below ``config.CHOP_TOL`` relative to
    the largest are rounding noise and dropped.

    :raises ValueError: if f(0) != 0, B is not orthogonal or an entry
        of alpha is outside (0, 1/2].
    :raises DimensionError: if shapes disagree.
    """
    if f.constant_term != 0:
        raise ValueError("f must vanish at 0")
    if len(alpha) != f.dim:
        raise DimensionError("alpha must have one entry per variable")
    for a in alpha:
        if not 0 < a <= config.ALPHA_MAX:
            raise ValueError(f"exponent {a} outside (0, 1/2]")
    _check_orthogonal(B, f.dim)
    p = linear_substitute(f, B)
    if not p.is_exact and not p.is_zero:
        scale = max(abs(float(c)) for c in p.terms.values())
        p = p.chop(config.CHOP_TOL * max(1.0, scale))
    result = split_by_grade(p, [Fraction(a) for a in alpha])
    logger.debug("graded substitution gives grades %s", result.exponents())
    return result

