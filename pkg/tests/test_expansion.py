import math
import sys
from fractions import Fraction

import numpy as np
import pytest
import sympy
from gibbsx import expansion
from gibbsx.expansion import (
    ConsistencyError,
    NotAMinimumError,
    expand,
)
from gibbsx.poly_core import (
    SparsePoly,
    derivative_tensor,
    graded_substitute,
    grade_of,
    linear_substitute,
    parse_poly,
)
from gibbsx.tensor_core import restrict_to_vectors
from gibbsx.utils import index_to_exponents

F = Fraction
XY = ("x", "y")


def poly(text: str, names: tuple[str, ...] = XY) -> SparsePoly:
    return parse_poly(text, names)


class TestChain:
    def test_fixtures(self) -> None:
        vectors = [
            ("x^2 + y^4 + x*y^2", (1, 1)),
            ("x^4 + y^6 + x^2*y^3", (0, 1, 1)),
            ("x^4 + y^10 + x^2*y^4", (0, 1, 0, 0, 1)),
            ("x^2 + y^2", (2,)),
            ("(x - y^2)^2 + x^6", (1, 1)),
        ]
        for text, dims in vectors:
            chain = expansion.build_chain(poly(text))
            assert chain.block_dims() == dims
            assert chain.p_effective == len(dims)
            assert not chain.truncated
            assert chain.F[-1].is_zero

    def test_subspaces(self) -> None:
        chain = expansion.build_chain(poly("x^2 + y^4 + x*y^2"))
        e1 = (F(1), F(0))
        e2 = (F(0), F(1))
        assert chain.F[1].basis == (e2,)
        assert chain.E[0].basis == (e1,)
        assert chain.E[1].basis == (e2,)

    def test_nesting(self) -> None:
        chain = expansion.build_chain(poly("x^4 + y^10 + x^2*y^4"))
        for k in range(1, len(chain.F)):
            assert chain.F[k - 1].contains_subspace(chain.F[k])
        for k, E in enumerate(chain.E, start=1):
            assert chain.F[k - 1].contains_subspace(E)
            assert E.dim + chain.F[k].dim == chain.F[k - 1].dim
        assert sum(chain.block_dims()) == 2

    def test_truncated(self) -> None:
        chain = expansion.build_chain(poly("x^2"), p_max=2)
        assert chain.truncated
        assert chain.block_dims() == (1, 1)
        assert not chain.F[-1].is_zero

    def test_not_a_minimum(self) -> None:
        vectors = ["x^2 - y^2", "x^2 + y", "x^2 + 1"]
        for text in vectors:
            with pytest.raises(NotAMinimumError):
                expansion.build_chain(poly(text))

    def test_p_max_range(self) -> None:
        for p_max in (0, 9):
            with pytest.raises(ValueError):
                expansion.build_chain(poly("x^2 + y^2"), p_max)


class TestAlphaAndBasis:
    def test_alpha(self) -> None:
        vectors = [
            ("x^2 + y^4 + x*y^2", (F(1, 2), F(1, 4))),
            ("x^4 + y^6 + x^2*y^3", (F(1, 4), F(1, 6))),
            ("x^4 + y^10 + x^2*y^4", (F(1, 4), F(1, 10))),
            ("x^2 + y^2", (F(1, 2), F(1, 2))),
        ]
        for text, expected in vectors:
            chain = expansion.build_chain(poly(text))
            assert expansion.assign_alpha(chain) == expected

    def test_axis_aligned(self) -> None:
        chain = expansion.build_chain(poly("x^4 + y^2"))
        B = expansion.adapted_basis(chain)
        assert B == ((F(0), F(1)), (F(1), F(0)))

    def test_rotated(self) -> None:
        chain = expansion.build_chain(poly("(x + y)^2 + (x - y)^4"))
        B = expansion.adapted_basis(chain)
        r = 1 / math.sqrt(2)
        assert np.array(B, dtype=float) == pytest.approx(
            np.array([[r, r], [r, -r]])
        )
        M = np.array(B, dtype=float)
        assert np.abs(M.T @ M - np.eye(2)).max() < 1e-12

    def test_one_dimensional(self) -> None:
        chain = expansion.build_chain(poly("x^6", ("x",)))
        assert expansion.adapted_basis(chain) == ((F(1),),)
        assert expansion.assign_alpha(chain) == (F(1, 6),)


class TestTuples:
    def test_order_4(self) -> None:
        expected = {2: [(2, 0)], 3: [(1, 2)], 4: [(0, 4)]}
        assert expansion.enumerate_tuples(2) == expected

    def test_order_6(self) -> None:
        tuples = expansion.enumerate_tuples(3)
        got = {i for ts in tuples.values() for i in ts}
        assert got == {
            (2, 0, 0),
            (1, 2, 0),
            (0, 4, 0),
            (1, 0, 3),
            (0, 2, 3),
            (0, 0, 6),
        }

    def test_order_8(self) -> None:
        expected = {
            2: [(2, 0, 0, 0)],
            3: [(1, 2, 0, 0)],
            4: [(1, 1, 0, 2), (1, 0, 3, 0), (0, 4, 0, 0)],
            5: [(1, 0, 0, 4), (0, 3, 0, 2), (0, 2, 3, 0)],
            6: [(0, 2, 0, 4), (0, 1, 3, 2), (0, 0, 6, 0)],
            7: [(0, 1, 0, 6), (0, 0, 3, 4)],
            8: [(0, 0, 0, 8)],
        }
        assert expansion.enumerate_tuples(4) == expected

    def test_sub_grade(self) -> None:
        for p in range(1, 5):
            assert expansion.sub_grade_tuples(p) == []
        assert ((0, 2, 0, 0, 4), F(9, 10)) in expansion.sub_grade_tuples(5)

    def test_bad_p(self) -> None:
        with pytest.raises(ValueError):
            expansion.enumerate_tuples(0)


class TestExpand:
    def test_fixtures(self) -> None:
        vectors = [
            ("x^2 + y^4 + x*y^2", "x^2 + x*y^2 + y^4"),
            ("x^4 + y^6 + x^2*y^3", "x^4 + x^2*y^3 + y^6"),
            ("x^4 + y^10 + x^2*y^4", "x^4 + y^10"),
            ("(x - y^2)^2 + x^6", "x^2 - 2*x*y^2 + y^4"),
            ("x^2 + y^2", "x^2 + y^2"),
        ]
        for text, g in vectors:
            result = expand(poly(text))
            assert result.g.to_str(XY) == g
            assert result.g == result.g_tensor
            assert result.is_exact

    def test_single_grade(self) -> None:
        result = expand(poly("x^2 + y^4 + x*y^2"))
        assert result.hypothesis_ok
        assert result.offending == []
        assert result.graded.exponents() == [F(1)]
        assert result.nonconstant == (True, True)
        assert result.alpha_sum == F(3, 4)
        assert result.B == ((F(1), F(0)), (F(0), F(1)))

    def test_counterexample(self) -> None:
        result = expand(poly("x^4 + y^10 + x^2*y^4"))
        assert result.p == 5
        assert not result.hypothesis_ok
        assert [(a, p.to_str(XY)) for a, p in result.offending] == [
            (F(9, 10), "x^2*y^4")
        ]
        (w,) = result.witnesses
        assert w.tuple == (0, 2, 0, 0, 4)
        assert w.grade == F(9, 10)
        assert w.even

    def test_rotated_basis(self) -> None:
        result = expand(poly("(x + y)^2 + (x - y)^4"))
        assert not result.is_exact
        g = result.g
        assert float(g.coefficient((2, 0))) == pytest.approx(2.0)
        assert float(g.coefficient((0, 4))) == pytest.approx(4.0)
        assert len(g) == 2
        assert g.max_coefficient_diff(result.g_tensor) < 1e-9

    def test_shifted_point(self) -> None:
        x = ("x",)
        result = expand(poly("x^2*(x - 1)^4", x), (F(1),))
        assert result.alpha == (F(1, 4),)
        assert result.g.to_str(x) == "x^4"
        assert result.f_star == 0
        assert expand(poly("x^2*(x - 1)^4", x)).alpha == (F(1, 2),)

    def test_higher_grade(self) -> None:
        result = expand(poly("x^4 + y^6 + x^2*y^3 + x^8"))
        assert result.graded.exponents() == [F(1), F(2)]
        assert result.hypothesis_ok

    def test_short_chain_inconsistent(self) -> None:
        with pytest.raises(ConsistencyError):
            expand(poly("x^2 + y^3"), p_max=2)

    def test_not_a_minimum(self) -> None:
        for text in ["x^2 - y^2", "x^2 + x"]:
            with pytest.raises(NotAMinimumError):
                expand(poly(text))

    def test_irrational_point(self) -> None:
        with pytest.raises(ValueError):
            expand(poly("x^2 + y^2"), (0.5, 0.0))


class TestProperties:
    fixtures = [
        "x^2 + y^4 + x*y^2",
        "x^4 + y^6 + x^2*y^3",
        "x^4 + y^10 + x^2*y^4",
        "(x - y^2)^2 + x^6",
        "x^2 + y^2",
    ]

    def test_block_scaling(self) -> None:
        for text in self.fixtures:
            result = expand(poly(text))
            assert expansion.weight_set(result.g, result.alpha) == {F(1)}

    def test_block_scaling_exact(self) -> None:
        result = expand(poly("x^4 + y^6 + x^2*y^3"))
        t = F(1, 2**12)
        h = (F(3), F(-2))
        scaled = (h[0] / 8, h[1] / 4)  # t^(1/4), t^(1/6)
        assert result.g.evaluate(scaled) == t * result.g.evaluate(h)

    def test_nonconstancy(self) -> None:
        for text in self.fixtures:
            assert all(expand(poly(text)).nonconstant)
        flat = expansion.check_nonconstancy(poly("x^2"))
        assert flat == (True, False)

    def test_basis_covariance(self) -> None:
        xyz = ("x", "y", "z")
        f = poly("x^2 + y^4 + z^4 + y^2*z^2", xyz)
        result = expand(f)
        assert result.chain.block_dims() == (1, 2)
        c, s = F(3, 5), F(4, 5)
        B2 = ((F(1), F(0), F(0)), (F(0), c, s), (F(0), -s, c))
        g2, offending = expansion.build_g_graded(
            f, result.chain, B2, result.alpha
        )
        assert offending == []
        assert g2 == linear_substitute(result.g, B2)


def random_admissible(
    rng: np.random.Generator, distinct: bool = False
) -> SparsePoly:
    """Pure even powers per block plus cross terms of grade >= 1.

    With distinct=True no two variables share a block.
    """
    p = int(rng.integers(1, 5))
    d = int(rng.integers(1, 4))
    if distinct:
        d = min(d, p)
        blocks = [int(j) for j in rng.choice(range(1, p + 1), d, False)]
    else:
        blocks = [int(rng.integers(1, p + 1)) for _ in range(d)]
    alpha = [F(1, 2 * j) for j in blocks]
    terms: dict[tuple[int, ...], int] = {}
    for i, j in enumerate(blocks):
        e = [0] * d
        e[i] = 2 * j
        terms[tuple(e)] = int(rng.integers(1, 4))
    for _ in range(6):
        k = int(rng.integers(2, 2 * p + 1))
        e = tuple(int(x) for x in rng.multinomial(k, [1 / d] * d))
        used = {blocks[i] for i, n in enumerate(e) if n}
        grade = sum((a * n for a, n in zip(alpha, e)), F(0))
        if len(used) >= 2 and grade >= 1:
            terms[e] = int(rng.integers(-3, 4))
    return SparsePoly(d, terms)


def cayley(
    rng: np.random.Generator, d: int
) -> tuple[tuple[Fraction, ...], ...]:
    """Rational orthogonal matrix (I - S)(I + S)^-1 for a random skew S."""
    S = sympy.zeros(d, d)
    for i in range(d):
        for j in range(i + 1, d):
            a = sympy.Rational(
                int(rng.integers(-3, 4)), int(rng.integers(1, 3))
            )
            S[i, j], S[j, i] = a, -a
    Q = (sympy.eye(d) - S) * (sympy.eye(d) + S).inv()
    return tuple(
        tuple(F(int(Q[i, j].p), int(Q[i, j].q)) for j in range(d))
        for i in range(d)
    )


def random_psd_start(rng: np.random.Generator) -> SparsePoly:
    """PSD quadratic part plus random terms of degree 3 to 8."""
    d = int(rng.integers(1, 4))
    f = SparsePoly.zero(d)
    for _ in range(int(rng.integers(0, d + 1))):
        row = [int(c) for c in rng.integers(-2, 3, size=d)]
        f = f + SparsePoly.linear_form(row) ** 2
    for _ in range(4):
        k = int(rng.integers(3, 9))
        e = tuple(int(x) for x in rng.multinomial(k, [1 / d] * d))
        f = f + SparsePoly(d, {e: int(rng.integers(-3, 4))})
    return f


class TestRandom:
    @pytest.mark.slow
    def test_dual_construction(self) -> None:
        rng = np.random.default_rng(20250115)
        for _ in range(200):
            f = random_psd_start(rng)
            chain = expansion.build_chain(f)
            alpha = expansion.assign_alpha(chain)
            B = expansion.adapted_basis(chain)
            g, _ = expansion.build_g_graded(f, chain, B, alpha)
            tensors = {
                k: derivative_tensor(f, k)
                for k in range(2, 2 * chain.p_effective + 1)
            }
            g_tensor = expansion.build_g_tensor(chain, B, tensors)
            if g.is_exact and g_tensor.is_exact:
                assert g == g_tensor
            else:
                scale = max(
                    [1.0, *(abs(float(c)) for c in g.terms.values())]
                )
                assert g.max_coefficient_diff(g_tensor) <= 1e-9 * scale

    @pytest.mark.slow
    def test_no_sub_grade_terms(self) -> None:
        rng = np.random.default_rng(4)
        for _ in range(200):
            f = random_admissible(rng)
            result = expand(f)
            assert result.hypothesis_ok
            assert result.offending == []
            assert result.p <= 4
            assert result.g == result.g_tensor

    @pytest.mark.slow
    def test_rotated_frame(self) -> None:
        # In a rotated frame f has monomials of every grade; the chain
        # has to find the blocks again for them to cancel.
        rng = np.random.default_rng(9)
        for _ in range(60):
            f = random_admissible(rng, distinct=True)
            Q = cayley(rng, f.dim)
            assert all(
                sum(Q[r][i] * Q[r][j] for r in range(f.dim)) == int(i == j)
                for i in range(f.dim)
                for j in range(f.dim)
            )
            rotated = linear_substitute(f, Q)
            result = expand(rotated)
            hypothesis_ok, witnesses = expansion.check_hypothesis(
                result.offending,
                {
                    k: derivative_tensor(result.increment, k)
                    for k in range(2, 2 * result.p + 1)
                },
                result.chain,
            )
            assert hypothesis_ok and witnesses == []
            assert result.hypothesis_ok
            assert result.offending == []
            assert result.alpha == expand(f).alpha
            assert expansion.sub_grade_tuples(result.p) == []

            # every block tuple below grade 1 cancels in the tensors
            d = f.dim
            columns = [
                tuple(result.B[i][c] for i in range(d)) for c in range(d)
            ]
            block_of = result.chain.block_of_column()
            for k in range(2, 2 * result.p + 1):
                T = derivative_tensor(result.increment, k)
                S = restrict_to_vectors(T, columns)
                for m, c in S.components():
                    exps = index_to_exponents(m, d)
                    if grade_of(exps, result.alpha) < 1:
                        i = expansion.block_tuple(exps, block_of, result.p)
                        assert abs(float(c)) <= 1e-9, i

    def test_graded_matches_substitution(self) -> None:
        f = poly("x^4 + y^6 + x^2*y^3 + x^8")
        result = expand(f)
        direct = graded_substitute(f, result.B, result.alpha)
        assert direct == result.graded


class TestOneDimensional:
    def test_order(self) -> None:
        x = ("x",)
        vectors = [
            ("x^2*(x - 1)^4", F(0), 2),
            ("x^2*(x - 1)^4", F(1), 4),
            ("x^6 + x^7", F(0), 6),
            ("(x - 1/2)^4", F(1, 2), 4),
        ]
        for text, point, expected in vectors:
            assert expansion.minimum_order_1d(poly(text, x), point) == expected

    def test_errors(self) -> None:
        x = ("x",)
        for text in ["x^3", "-x^2", "0"]:
            with pytest.raises(NotAMinimumError):
                expansion.minimum_order_1d(poly(text, x))
        with pytest.raises(ValueError):
            expansion.minimum_order_1d(poly("x^2 + y^2"))


if __name__ == "__main__":
    sys.exit(pytest.main(args=[__file__]))
