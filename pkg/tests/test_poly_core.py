import sys
from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from gibbsx import poly_core
from gibbsx.poly_core import (
    GradedExpansion,
    PolySyntaxError,
    SparsePoly,
    UnknownVariableError,
    parse_poly,
)
from gibbsx.tensor_core import DimensionError, apply_full

F = Fraction
XY = ("x", "y")
I2 = ((F(1), F(0)), (F(0), F(1)))


def random_poly(
    rng: np.random.Generator, dim: int, degree: int, terms: int
) -> SparsePoly:
    out: dict[tuple[int, ...], int] = {}
    for _ in range(terms):
        k = int(rng.integers(0, degree + 1))
        e = tuple(int(x) for x in rng.multinomial(k, [1 / dim] * dim))
        out[e] = int(rng.integers(-5, 6))
    return SparsePoly(dim, out)


class TestParse:
    def test_canonical_text(self) -> None:
        vectors = [
            ("x^2 + y^4 + x*y^2", "x^2 + x*y^2 + y^4"),
            ("(x-y^2)^2+x^6", "x^2 - 2*x*y^2 + y^4 + x^6"),
            ("1/2*x^2 - 0.25*y", "-1/4*y + 1/2*x^2"),
            ("x - x", "0"),
            ("-(x+y)*(x-y)", "-x^2 + y^2"),
            ("2*(x+1)^0", "2"),
            ("+x^1", "x"),
        ]
        for text, expected in vectors:
            assert parse_poly(text, XY).to_str(XY) == expected

    def test_reparse(self) -> None:
        rng = np.random.default_rng(1)
        for _ in range(20):
            f = random_poly(rng, 2, 6, 5)
            assert parse_poly(f.to_str(XY), XY) == f

    def test_errors(self) -> None:
        vectors = [
            ("2x", 1),
            ("x(y)", 1),
            ("x^-1", 2),
            ("x^1.5", 2),
            ("x^1/2", 3),
            ("(x+1", 4),
            ("", 0),
            ("1/0", 2),
            ("1/x", 1),
            ("x/2", 1),
            ("x +", 3),
            ("x $ y", 2),
        ]
        for text, position in vectors:
            with pytest.raises(PolySyntaxError) as info:
                parse_poly(text, XY)
            assert info.value.position == position

    def test_unknown_variable(self) -> None:
        with pytest.raises(UnknownVariableError) as info:
            parse_poly("x + w", XY)
        assert info.value.position == 4
        assert info.value.name == "w"

    def test_bad_names(self) -> None:
        for names in [(), ("x", "x"), ("x", "2y")]:
            with pytest.raises(ValueError):
                parse_poly("x", names)


class TestArithmetic:
    def test_ring(self) -> None:
        x = SparsePoly.variable(2, 0)
        y = SparsePoly.variable(2, 1)
        assert (x + y) ** 2 == x**2 + 2 * x * y + y**2
        assert (x - y) * (x + y) == x * x - y * y
        assert (x - x).is_zero
        assert (x**3).degree == 3
        assert SparsePoly.zero(2).degree == -1

    def test_evaluate(self) -> None:
        f = parse_poly("x^2 + y^4 + x*y^2", XY)
        assert f.evaluate((F(1), F(-1))) == 3
        assert f.evaluate((F(1, 2), F(0))) == F(1, 4)
        assert isinstance(f.evaluate((0.5, 0.0)), float)
        with pytest.raises(DimensionError):
            f.evaluate((F(1),))

    def test_evaluate_array(self) -> None:
        f = parse_poly("x^2 + y^4 + x*y^2", XY)
        pts = np.array([[[1.0, -1.0], [0.5, 0.0]], [[0.0, 0.0], [2, 1]]])
        got = f.evaluate_array(pts)
        assert got.shape == (2, 2)
        assert got == pytest.approx(np.array([[3.0, 0.25], [0.0, 7.0]]))

    def test_partial(self) -> None:
        f = parse_poly("x^2 + y^4 + x*y^2", XY)
        assert f.partial(0) == parse_poly("2*x + y^2", XY)
        assert f.partial(1) == parse_poly("4*y^3 + 2*x*y", XY)

    def test_variables_used(self) -> None:
        vectors = [
            ("x^2 + x*y^2 + y^4", (True, True)),
            ("x^2", (True, False)),
            ("3", (False, False)),
        ]
        for text, expected in vectors:
            assert parse_poly(text, XY).variables_used() == expected

    def test_chop(self) -> None:
        f = SparsePoly(1, {(1,): 1e-14, (2,): 1.0, (3,): F(1, 10**20)})
        assert f.chop(1e-12).terms == {(2,): 1.0, (3,): F(1, 10**20)}


class TestShift:
    def test_vectors(self) -> None:
        vectors = [
            ("x^2", (F(1),), {(0,): F(1), (1,): F(2), (2,): F(1)}),
            ("x^2*(x-1)^4", (F(1),), {(4,): 1, (5,): 2, (6,): 1}),
            ("x^3 - x", (F(0),), {(3,): 1, (1,): -1}),
        ]
        for text, point, expected in vectors:
            f = parse_poly(text, ("x",))
            assert poly_core.shift(f, point) == SparsePoly(1, expected)

    def test_dimension(self) -> None:
        with pytest.raises(DimensionError):
            poly_core.shift(parse_poly("x", XY), (F(1),))


class TestDerivativeTensor:
    def test_vectors(self) -> None:
        f = parse_poly("x^2 + y^4 + x*y^2", XY)
        T2 = poly_core.derivative_tensor(f, 2)
        assert (T2[(0, 0)], T2[(0, 1)], T2[(1, 1)]) == (2, 0, 0)
        T3 = poly_core.derivative_tensor(f, 3)
        nonzero = {m: c for m, c in T3.components() if c != 0}
        assert nonzero == {(0, 1, 1): 2}
        T4 = poly_core.derivative_tensor(parse_poly("y^4", XY), 4)
        assert T4[(1, 1, 1, 1)] == 24

    def test_taylor_identity(self) -> None:
        rng = np.random.default_rng(20250115)
        for _ in range(30):
            dim = int(rng.integers(1, 5))
            f = random_poly(rng, dim, 8, 6)
            h = tuple(F(int(rng.integers(-4, 5)), 3) for _ in range(dim))
            for k in range(9):
                T = poly_core.derivative_tensor(f, k)
                lhs = apply_full(T, h) / factorial(k)
                rhs = poly_core.homogeneous_part(f, k).evaluate(h)
                assert lhs == rhs


class TestHomogeneousPart:
    def test_vectors(self) -> None:
        vectors = [
            ("x^2 + y^4 + x*y^2", 3, "x*y^2"),
            ("x^2 + y^4 + x*y^2", 9, "0"),
            ("(x-y^2)^2 + x^6", 2, "x^2"),
        ]
        for text, k, expected in vectors:
            part = poly_core.homogeneous_part(parse_poly(text, XY), k)
            assert part.to_str(XY) == expected


class TestGradedSubstitute:
    def test_vectors(self) -> None:
        vectors = [
            (
                "x^2 + y^4 + x*y^2",
                (F(1, 2), F(1, 4)),
                {F(1): "x^2 + x*y^2 + y^4"},
            ),
            (
                "x^4 + y^10 + x^2*y^4",
                (F(1, 4), F(1, 10)),
                {F(9, 10): "x^2*y^4", F(1): "x^4 + y^10"},
            ),
            ("x^6", (F(1, 2), F(1, 2)), {F(3): "x^6"}),
        ]
        for text, alpha, expected in vectors:
            g = poly_core.graded_substitute(parse_poly(text, XY), I2, alpha)
            assert {a: p.to_str(XY) for a, p in g.items()} == expected

    def test_errors(self) -> None:
        f = parse_poly("x^2 + y^2", XY)
        half = (F(1, 2), F(1, 2))
        with pytest.raises(ValueError):
            poly_core.graded_substitute(f + 1, I2, half)
        with pytest.raises(ValueError):
            B = ((F(1), F(1)), (F(0), F(1)))
            poly_core.graded_substitute(f, B, half)
        for alpha in [(F(0), F(1, 2)), (F(3, 4), F(1, 2))]:
            with pytest.raises(ValueError):
                poly_core.graded_substitute(f, I2, alpha)

    def test_half_gives_homogeneous_parts(self) -> None:
        rng = np.random.default_rng(7)
        for _ in range(10):
            f = random_poly(rng, 2, 8, 8)
            f = f - f.constant_term
            g = poly_core.graded_substitute(f, I2, (F(1, 2), F(1, 2)))
            for a, p in g.items():
                assert p == poly_core.homogeneous_part(f, int(2 * a))

    def test_sum_of_grades(self) -> None:
        rng = np.random.default_rng(11)
        choices = [F(1, 2), F(1, 4), F(1, 6)]
        for _ in range(100):
            f = random_poly(rng, 3, 6, 6)
            f = f - f.constant_term
            Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            B = tuple(tuple(float(x) for x in row) for row in Q)
            alpha = [choices[int(i)] for i in rng.integers(0, 3, size=3)]
            g = poly_core.graded_substitute(f, B, alpha)
            t = float(rng.uniform(0.01, 1.0))
            h = rng.uniform(-1.0, 1.0, size=3)
            scaled = np.array([t ** float(a) for a in alpha]) * h
            x = Q @ scaled
            expected = float(f.evaluate_array(x))
            got = g.evaluate(t, tuple(float(v) for v in h))
            assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)


class TestGradedExpansion:
    def test_lookup(self) -> None:
        x = SparsePoly.variable(1, 0)
        g = GradedExpansion(
            1, {F(3, 2): x**6, F(1): x**4, F(1, 2): SparsePoly.zero(1)}
        )
        assert g.exponents() == [F(1), F(3, 2)]
        assert g[F(1, 2)].is_zero
        assert g.below(F(3, 2)) == [(F(1), x**4)]
        assert g.smallest_above(F(1)) == F(3, 2)
        assert g.smallest_above(F(3, 2)) is None
        assert g.evaluate(0.25, (F(2),)) == pytest.approx(
            0.25 * 16 + 0.25**1.5 * 64
        )

    def test_dimension(self) -> None:
        with pytest.raises(DimensionError):
            GradedExpansion(2, {F(1): SparsePoly.variable(1, 0)})


if __name__ == "__main__":
    sys.exit(pytest.main(args=[__file__]))
