"""The nested subspace chain and the limit polynomial g.

Given a polynomial f with a critical point at 0 and positive
semi-definite Hessian there, this module builds

- the chain :math:`\\mathbb{R}^d = F_0 \\supseteq F_1 \\supseteq \\cdots`,
  where :math:`F_k` is the part of :math:`F_{k-1}` on which the order
  2k derivative tensor vanishes against all of :math:`F_{k-1}`;
- the blocks :math:`E_k`, the orthogonal complement of :math:`F_k` in
  :math:`F_{k-1}`, with :math:`E_p = F_{p-1}` for the last one;
- an orthogonal basis B adapted to the blocks and exponents
  :math:`\\alpha_i = 1/(2j)` on the columns of block j;
- the polynomial g, which is the coefficient of :math:`t^1` in
  :math:`f(B \\cdot (t^\\alpha * h))`.

g is built twice, once by graded substitution and once by contracting
the derivative tensors over admissible block tuples.
The two must agree, and :func:`expand` checks that they do.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from gibbsx import config
from gibbsx.poly_core import (
    Coefficient,
    GradedExpansion,
    SparsePoly,
    derivative_tensor,
    grade_of,
    graded_substitute,
    shift,
)
from gibbsx.tensor_core import (
    DimensionError,
    Subspace,
    SymmetricTensor,
    kernel_map_nullspace,
    restrict_to_vectors,
)
from gibbsx.types import Matrix, Scalar, Vector, is_exact
from gibbsx.utils import (
    compositions,
    exponent_factorial,
    index_to_exponents,
)

logger = logging.getLogger(__name__)


class NotAMinimumError(ValueError):
    """The point is visibly not a local minimum.

    Raised for a nonzero value or gradient at the recentred point, an
    indefinite Hessian, or a leading odd or negative term in one
    dimension.
    """


class ConsistencyError(Exception):
    """Two computations that must agree do not.

    Also raised when terms of grade below 1 survive in a chain of length
    at most 4, which cannot happen at a local minimum.
    """


@dataclass(frozen=True)
class SubspaceChain:
    """The chain :math:`F_0 \\supseteq \\cdots \\supseteq F_p` and the
    blocks :math:`E_1, \\ldots, E_p`.

    ``F[k]`` is :math:`F_k`; ``E[k - 1]`` is :math:`E_k`.
    Unless the chain is truncated, ``F[p]`` is the zero subspace.
    """

    dim: int
    F: tuple[Subspace, ...]
    E: tuple[Subspace, ...]
    truncated: bool = False

    @property
    def p_effective(self) -> int:
        """Length p of the chain."""
        return len(self.E)

    def block_dims(self) -> tuple[int, ...]:
        """Dimensions of :math:`E_1, \\ldots, E_p`."""
        return tuple(e.dim for e in self.E)

    def blocks(self) -> list[range]:
        """Column ranges of each block in the adapted basis."""
        out: list[range] = []
        start = 0
        for n in self.block_dims():
            out.append(range(start, start + n))
            start += n
        return out

    def block_of_column(self) -> tuple[int, ...]:
        """Block number j (1-based) of each column."""
        return tuple(
            j for j, n in enumerate(self.block_dims(), start=1)
            for _ in range(n)
        )


def _hessian_is_psd(T2: SymmetricTensor) -> bool:
    d = T2.dim
    if d == 0:
        return True
    H = np.array(
        [[float(T2[(i, j)]) for j in range(d)] for i in range(d)],
        dtype=float,
    )
    eig = np.linalg.eigvalsh(H)
    scale = max(1.0, float(np.max(np.abs(eig))))
    return bool(eig[0] >= -config.PSD_TOL * scale)


def build_chain(
    f: SparsePoly, p_max: int = config.DEFAULT_P_MAX
) -> SubspaceChain:
    """Build the subspace chain of f at 0.

    The chain stops at the first k with :math:`F_k = \\{0\\}`.
    If :math:`F_{p_{max}}` is still nonzero the chain is returned with
    ``truncated`` set and :math:`E_{p_{max}} = F_{p_{max} - 1}`.

    :raises ValueError: if p_max is not in [1, config.MAX_P_MAX].
    :raises NotAMinimumError: if f(0) != 0, the gradient at 0 is
        nonzero or the Hessian at 0 is not positive semi-definite.
    """
    if not 1 <= p_max <= config.MAX_P_MAX:
        raise ValueError(f"p_max must be in [1, {config.MAX_P_MAX}]")
    if f.constant_term != 0:
        raise NotAMinimumError("f must vanish at the recentred point")
    if not derivative_tensor(f, 1).is_zero():
        raise NotAMinimumError("nonzero gradient")
    if not _hessian_is_psd(derivative_tensor(f, 2)):
        raise NotAMinimumError("Hessian is not positive semi-definite")

    d = f.dim
    F: list[Subspace] = [Subspace.full(d)]
    E: list[Subspace] = []
    truncated = False
    for k in range(1, p_max + 1):
        prev = F[-1]
        T = derivative_tensor(f, 2 * k)
        # Kernel coordinates are relative to prev.frame(), not its
        # orthonormal basis.
        restricted = restrict_to_vectors(T, prev.frame())
        kernel = kernel_map_nullspace(restricted)
        Fk = Subspace.from_vectors(d, prev.lift(kernel.frame()))
        F.append(Fk)
        logger.debug("dim F_%d = %d", k, Fk.dim)
        if Fk.is_zero:
            E.append(prev)
            break
        if k == p_max:
            truncated = True
            E.append(prev)
            logger.warning(
                "chain truncated at p_max=%d with dim F_%d = %d",
                p_max,
                k,
                Fk.dim,
            )
            break
        E.append(prev.orthogonal_complement(Fk))

    chain = SubspaceChain(d, tuple(F), tuple(E), truncated)
    logger.info(
        "chain of length %d with block dimensions %s",
        chain.p_effective,
        chain.block_dims(),
    )
    return chain


def assign_alpha(chain: SubspaceChain) -> tuple[Fraction, ...]:
    """Exponents :math:`\\alpha_i = 1/(2j)` for columns in block j."""
    return tuple(Fraction(1, 2 * j) for j in chain.block_of_column())


def adapted_basis(chain: SubspaceChain) -> Matrix:
    """Orthogonal matrix whose columns are the bases of
    :math:`E_1, \\ldots, E_p` in order.

    Returned row-major.
    Entries are exact where the block bases are.
    """
    columns = [b for e in chain.E for b in e.basis]
    d = chain.dim
    return tuple(tuple(col[i] for col in columns) for i in range(d))


def _columns(B: Sequence[Sequence[Coefficient]]) -> list[Vector]:
    d = len(B)
    return [tuple(B[i][c] for i in range(d)) for c in range(d)]


def _chop(p: SparsePoly) -> SparsePoly:
    if p.is_exact or p.is_zero:
        return p
    scale = max(abs(float(c)) for c in p.terms.values())
    return p.chop(config.CHOP_TOL * max(1.0, scale))


def _significant(p: SparsePoly) -> SparsePoly:
    """p without float coefficients at or below the offending tolerance."""
    if p.is_exact:
        return p
    return p.chop(config.OFFENDING_TOL)


def g_from_grades(
    graded: GradedExpansion,
) -> tuple[SparsePoly, list[tuple[Fraction, SparsePoly]]]:
    """Grade 1 polynomial and the significant grades below 1."""
    g = graded[Fraction(1)]
    offending: list[tuple[Fraction, SparsePoly]] = []
    for a, p in graded.below(Fraction(1)):
        q = _significant(p)
        if not q.is_zero:
            offending.append((a, q))
    return g, offending


def build_g_graded(
    f: SparsePoly,
    chain: SubspaceChain,
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
) -> tuple[SparsePoly, list[tuple[Fraction, SparsePoly]]]:
    """g as the grade 1 part of :math:`f(B \\cdot (t^\\alpha * h))`.

    f must be recentred, so f(0) = 0.
    Also returns the grades below 1 that have a nonzero coefficient
    (above ``config.OFFENDING_TOL`` for float coefficients).
    Grades above 1 vanish as t goes to 0 and are dropped.

    :raises DimensionError: if f, B and alpha disagree with the chain.
    """
    if f.dim != chain.dim:
        raise DimensionError("f and chain differ in dimension")
    return g_from_grades(graded_substitute(f, B, alpha))


def enumerate_tuples(p: int) -> dict[int, list[tuple[int, ...]]]:
    """Block tuples :math:`(i_1, \\ldots, i_p)` contributing to g.

    For each order k in 2..2p, the tuples with
    :math:`\\sum_j i_j = k` and :math:`\\sum_j i_j / (2j) = 1`,
    in lexicographically decreasing order.

    :raises ValueError: if p < 1.
    """
    if p < 1:
        raise ValueError("p must be positive")
    out: dict[int, list[tuple[int, ...]]] = {}
    for k in range(2, 2 * p + 1):
        out[k] = [
            i for i in compositions(k, p) if _tuple_grade(i) == 1
        ]
    return out


def _tuple_grade(i: Sequence[int]) -> Fraction:
    return sum(
        (Fraction(n, 2 * j) for j, n in enumerate(i, start=1)), Fraction(0)
    )


def _vanishes_by_construction(i: Sequence[int]) -> bool:
    # T_2m is zero against one vector of F_m and the rest from F_{m-1};
    # block j lies in F_{j-1}.
    k = sum(i)
    if k % 2:
        return False
    m = k // 2
    used = [j for j, n in enumerate(i, start=1) if n]
    return min(used) >= m and max(used) >= m + 1


def sub_grade_tuples(p: int) -> list[tuple[tuple[int, ...], Fraction]]:
    """Even block tuples of grade below 1 that the chain does not kill.

    These are the tuples whose tensor contractions must vanish for g to
    be the limit.
    There are none for p <= 4; for p = 5 one of them is
    ``(0, 2, 0, 0, 4)`` at grade 9/10.

    :raises ValueError: if p < 1.
    """
    if p < 1:
        raise ValueError("p must be positive")
    out: list[tuple[tuple[int, ...], Fraction]] = []
    for k in range(2, 2 * p + 1, 2):
        for i in compositions(k, p):
            if any(n % 2 for n in i):
                continue
            grade = _tuple_grade(i)
            if grade < 1 and not _vanishes_by_construction(i):
                out.append((i, grade))
    return out


def block_tuple(
    exps: Sequence[int], block_of: Sequence[int], p: int
) -> tuple[int, ...]:
    """Number of factors from each block in a monomial of h."""
    counts = [0] * p
    for c, e in enumerate(exps):
        counts[block_of[c] - 1] += e
    return tuple(counts)


def _restricted_tensors(
    tensors: Mapping[int, SymmetricTensor],
    B: Sequence[Sequence[Coefficient]],
    orders: Sequence[int],
) -> dict[int, SymmetricTensor]:
    columns = _columns(B)
    return {k: restrict_to_vectors(tensors[k], columns) for k in orders}


def _tuple_terms(
    S: SymmetricTensor,
    block_of: Sequence[int],
    p: int,
    wanted: Optional[set[tuple[int, ...]]] = None,
) -> dict[tuple[int, ...], dict[tuple[int, ...], Scalar]]:
    # Coefficient of h^e in T_k (B h)^k / k! is S[e] / e!.
    out: dict[tuple[int, ...], dict[tuple[int, ...], Scalar]] = {}
    for m, c in S.components():
        if c == 0:
            continue
        exps = index_to_exponents(m, S.dim)
        i = block_tuple(exps, block_of, p)
        if wanted is not None and i not in wanted:
            continue
        out.setdefault(i, {})[exps] = c / exponent_factorial(exps)
    return out


def build_g_tensor(
    chain: SubspaceChain,
    B: Sequence[Sequence[Coefficient]],
    tensors: Mapping[int, SymmetricTensor],
) -> SparsePoly:
    """g from the derivative tensors :math:`T_2, \\ldots, T_{2p}`.

    Sums, over orders k and admissible block tuples i,

    .. math::

        \\frac{1}{k!} \\binom{k}{i_1, \\ldots, i_p}
        T_k \\cdot p_{E_1}(Bh)^{\\otimes i_1} \\otimes \\cdots
        \\otimes p_{E_p}(Bh)^{\\otimes i_p}

    computed by restricting each :math:`T_k` to the columns of B.

    :raises KeyError: if a needed tensor is missing.
    """
    p = chain.p_effective
    block_of = chain.block_of_column()
    admissible = enumerate_tuples(p)
    orders = [k for k in admissible if admissible[k]]
    restricted = _restricted_tensors(tensors, B, orders)
    terms: dict[tuple[int, ...], Scalar] = {}
    for k in orders:
        wanted = set(admissible[k])
        pieces = _tuple_terms(restricted[k], block_of, p, wanted)
        for monos in pieces.values():
            for e, c in monos.items():
                terms[e] = terms.get(e, Fraction(0)) + c
    return _chop(SparsePoly(chain.dim, terms))


@dataclass(frozen=True)
class HypothesisWitness:
    """A block tuple whose terms survive at a grade below 1."""

    tuple: tuple[int, ...]
    grade: Fraction
    poly: SparsePoly
    even: bool


def check_hypothesis(
    offending: Sequence[tuple[Fraction, SparsePoly]],
    tensors: Mapping[int, SymmetricTensor],
    chain: SubspaceChain,
) -> tuple[bool, list[HypothesisWitness]]:
    """Whether every term of grade below 1 vanishes.

    Each surviving polynomial is split by block tuple, and each piece is
    recomputed from the tensors as a cross check.

    :raises ConsistencyError: if anything survives for a chain of
        length at most 4, or the tensors disagree with the graded
        polynomials.
    """
    if not offending:
        return True, []
    p = chain.p_effective
    B = adapted_basis(chain)
    block_of = chain.block_of_column()
    witnesses: list[HypothesisWitness] = []
    for grade, poly in offending:
        pieces: dict[tuple[int, ...], dict[tuple[int, ...], Scalar]] = {}
        for e, c in poly.terms.items():
            pieces.setdefault(block_tuple(e, block_of, p), {})[e] = c
        for i in sorted(pieces, reverse=True):
            piece = SparsePoly(chain.dim, pieces[i])
            k = sum(i)
            S = _restricted_tensors(tensors, B, [k])[k]
            terms = _tuple_terms(S, block_of, p, {i}).get(i, {})
            from_tensor = SparsePoly(chain.dim, terms)
            diff = piece.max_coefficient_diff(from_tensor)
            if diff > config.AGREEMENT_TOL:
                raise ConsistencyError(
                    f"tensor and graded terms differ for tuple {i}"
                )
            witnesses.append(
                HypothesisWitness(
                    i, grade, piece, all(n % 2 == 0 for n in i)
                )
            )
    if p <= config.HYPOTHESIS_FREE_P:
        raise ConsistencyError(
            f"terms of grade below 1 survive for a chain of length {p}; "
            "the point is likely not a minimum"
        )
    logger.warning(
        "%d block tuples survive below grade 1", len(witnesses)
    )
    return False, witnesses


def check_nonconstancy(g: SparsePoly) -> tuple[bool, ...]:
    """For each variable of g, whether g depends on it."""
    return g.variables_used()


def weight_set(
    g: SparsePoly, alpha: Sequence[Fraction]
) -> set[Fraction]:
    """Weighted degrees of the monomials of g.

    g satisfies :math:`g(t^\\alpha * h) = t\\, g(h)` exactly when this is
    ``{1}`` (or empty, for g = 0).
    """
    return {grade_of(e, alpha) for e in g.terms}


@dataclass(frozen=True)
class ExpansionResult:
    """Everything :func:`expand` computes at one point."""

    x_star: tuple[Fraction, ...]
    f_star: Scalar
    increment: SparsePoly
    chain: SubspaceChain
    B: Matrix
    alpha: tuple[Fraction, ...]
    graded: GradedExpansion
    g: SparsePoly
    g_tensor: SparsePoly
    hypothesis_ok: bool
    offending: list[tuple[Fraction, SparsePoly]] = field(default_factory=list)
    witnesses: list[HypothesisWitness] = field(default_factory=list)
    nonconstant: tuple[bool, ...] = ()

    @property
    def p(self) -> int:
        return self.chain.p_effective

    @property
    def truncated(self) -> bool:
        return self.chain.truncated

    @property
    def alpha_sum(self) -> Fraction:
        """:math:`\\sum_i \\alpha_i`, the exponent of t in the mass of
        the well."""
        return sum(self.alpha, Fraction(0))

    @property
    def is_exact(self) -> bool:
        """True when B, and so g, is exact."""
        return is_exact(self.B)


def expand(
    f: SparsePoly,
    x_star: Optional[Sequence[Coefficient]] = None,
    p_max: int = config.DEFAULT_P_MAX,
) -> ExpansionResult:
    """Run the whole construction for f at x_star (default 0).

    :raises NotAMinimumError: as :func:`build_chain`.
    :raises ConsistencyError: if the two constructions of g disagree or
        a short chain has surviving low grades.
    """
    if x_star is None:
        x_star = (Fraction(0),) * f.dim
    point = tuple(Fraction(c) if isinstance(c, int) else c for c in x_star)
    if not is_exact(point):
        raise ValueError("x_star must be rational")
    exact_point = tuple(Fraction(c) for c in point)
    f_star = f.evaluate(exact_point)
    increment = shift(f, exact_point) - f_star

    chain = build_chain(increment, p_max)
    alpha = assign_alpha(chain)
    B = adapted_basis(chain)
    graded = graded_substitute(increment, B, alpha)
    g, offending = g_from_grades(graded)

    p = chain.p_effective
    tensors = {
        k: derivative_tensor(increment, k) for k in range(2, 2 * p + 1)
    }
    g_tensor = build_g_tensor(chain, B, tensors)
    if g.is_exact and g_tensor.is_exact:
        agree = g == g_tensor
    else:
        agree = g.max_coefficient_diff(g_tensor) <= config.AGREEMENT_TOL
    if not agree:
        raise ConsistencyError("graded and tensor constructions of g differ")

    hypothesis_ok, witnesses = check_hypothesis(offending, tensors, chain)
    nonconstant = check_nonconstancy(g)
    if not all(nonconstant):
        logger.warning("g is constant in some variables: %s", nonconstant)
    logger.info(
        "expansion at %s: alpha=%s, hypothesis_ok=%s",
        [str(c) for c in exact_point],
        [str(a) for a in alpha],
        hypothesis_ok,
    )
    return ExpansionResult(
        x_star=exact_point,
        f_star=f_star,
        increment=increment,
        chain=chain,
        B=B,
        alpha=alpha,
        graded=graded,
        g=g,
        g_tensor=g_tensor,
        hypothesis_ok=hypothesis_ok,
        offending=offending,
        witnesses=witnesses,
        nonconstant=nonconstant,
    )


def minimum_order_1d(
    f: SparsePoly, x_star: Coefficient = Fraction(0)
) -> int:
    """Order m of the first nonzero derivative of f at x_star.

    For a strict minimum m is even and the derivative positive; then
    :math:`\\alpha = 1/m` and :math:`g = f^{(m)}(x^*) h^m / m!`.

    :raises ValueError: if f is not univariate.
    :raises NotAMinimumError: if f is constant, m is odd or the
        leading derivative is negative.
    """
    if f.dim != 1:
        raise ValueError("f must be univariate")
    x = Fraction(x_star) if isinstance(x_star, int) else x_star
    inc = shift(f, (x,)) - f.evaluate((x,))
    if inc.is_zero:
        raise NotAMinimumError("f is constant")
    m = min(e[0] for e in inc.terms)
    c = inc.coefficient((m,))
    if m % 2 or c < 0:
        raise NotAMinimumError(
            f"leading term {c}*h^{m} at {x} is not a minimum"
        )
    return m
