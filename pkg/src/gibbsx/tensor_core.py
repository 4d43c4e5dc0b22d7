"""Dense symmetric tensors and the subspaces they act on.

A :class:`SymmetricTensor` of order :math:`k` on :math:`\\mathbb{R}^d`
stores one component per sorted multi-index, so there are
:math:`\\binom{d + k - 1}{k}` of them.
Indices are 0-based.
Components are :class:`fractions.Fraction` while everything stays exact
and :class:`float` once a computation has passed through an irrational
basis or floating point linear algebra.

Kernels are computed over the rationals (with :mod:`sympy`) when the
input is exact, and with :func:`scipy.linalg.null_space` otherwise.
"""

import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg
import sympy

from gibbsx import config
from gibbsx.types import Scalar, Vector, is_exact
from gibbsx.utils import (
    MultiIndex,
    canonical_indices,
    exact_sqrt,
    multiplicity,
)

logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Operands live in spaces of different dimension."""


class OrderError(ValueError):
    """A tensor has the wrong order for the requested operation."""


def _zero_like(exact: bool) -> Scalar:
    return Fraction(0) if exact else 0.0


class SymmetricTensor:
    """A symmetric tensor stored by canonical (sorted) multi-index.

    Instances are conventionally immutable.
    Looking up a permuted index gives the same component as the sorted
    index, so symmetry holds by construction.
    """

    def __init__(
        self,
        dim: int,
        order: int,
        comps: Optional[Mapping[Sequence[int], Scalar]] = None,
    ) -> None:
        """Components not given are zero.

        :raises ValueError: if dim or order is negative, an index is out
            of range or has the wrong length, or two permutations of
            the same index are given different values.
        """
        if dim < 0 or order < 0:
            raise ValueError("dim and order must be non-negative")
        self._dim = dim
        self._order = order

        given: dict[MultiIndex, Scalar] = {}
        if comps is not None:
            for index, value in comps.items():
                if len(index) != order:
                    raise ValueError(
                        f"index {tuple(index)} does not have length {order}"
                    )
                if any(i < 0 or i >= dim for i in index):
                    raise ValueError(f"index {tuple(index)} out of range")
                key = tuple(sorted(index))
                if key in given and given[key] != value:
                    raise ValueError(
                        f"conflicting values for permutations of {key}"
                    )
                given[key] = value

        exact = is_exact(tuple(given.values()))
        zero = _zero_like(exact)
        self._comps: dict[MultiIndex, Scalar] = {
            m: given.get(m, zero) for m in canonical_indices(dim, order)
        }
        self._exact = exact

    @classmethod
    def zeros(cls, dim: int, order: int) -> "SymmetricTensor":
        """The exact zero tensor."""
        return cls(dim, order)

    @property
    def dim(self) -> int:
        """Dimension d of the underlying space."""
        return self._dim

    @property
    def order(self) -> int:
        """Order k of the tensor."""
        return self._order

    @property
    def is_exact(self) -> bool:
        """True when every component is a Fraction."""
        return self._exact

    def components(self) -> Iterator[tuple[MultiIndex, Scalar]]:
        """Canonical components in lexicographic index order."""
        return iter(self._comps.items())

    def __getitem__(self, index: Sequence[int]) -> Scalar:
        """Component at any permutation of a multi-index.

        :raises KeyError: if the index is not a valid index.
        """
        return self._comps[tuple(sorted(index))]

    def __len__(self) -> int:
        return len(self._comps)

    def is_zero(self, tol: float = 0.0) -> bool:
        """True if all components vanish (within tol for floats)."""
        for c in self._comps.values():
            if isinstance(c, Fraction):
                if c != 0:
                    return False
            elif abs(c) > tol:
                return False
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymmetricTensor):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.order == other.order
            and self._comps == other._comps
        )

    def __repr__(self) -> str:
        nonzero = {m: c for m, c in self._comps.items() if c != 0}
        return (
            f"SymmetricTensor(dim={self.dim}, order={self.order}, "
            f"comps={nonzero!r})"
        )


def _check_vector(T: SymmetricTensor, v: Sequence[Scalar]) -> None:
    if len(v) != T.dim:
        raise DimensionError(
            f"vector of length {len(v)} against tensor of dim {T.dim}"
        )


def contract_one(T: SymmetricTensor, v: Sequence[Scalar]) -> SymmetricTensor:
    """Contract a single slot of T with v.

    :raises OrderError: if T has order 0.
    :raises DimensionError: if len(v) != T.dim.
    """
    if T.order == 0:
        raise OrderError("cannot contract an order 0 tensor")
    _check_vector(T, v)
    comps: dict[MultiIndex, Scalar] = {}
    for m in canonical_indices(T.dim, T.order - 1):
        total: Scalar = Fraction(0)
        for i, vi in enumerate(v):
            if vi == 0:
                continue
            total += vi * T[m + (i,)]
        comps[m] = total
    return SymmetricTensor(T.dim, T.order - 1, comps)


def apply_partial(
    T: SymmetricTensor,
    vs: Sequence[Sequence[Scalar]],
    j: Optional[int] = None,
) -> SymmetricTensor:
    """Contract the first j slots of T with ``vs[0], ..., vs[j-1]``.

    The result is a symmetric tensor of order ``T.order - j``.
    If j is omitted all of vs is used.

    :raises OrderError: if j exceeds the order of T.
    :raises ValueError: if fewer than j vectors are given.
    :raises DimensionError: if a vector has the wrong length.
    """
    if j is None:
        j = len(vs)
    if j < 0:
        raise ValueError("j must be non-negative")
    if j > T.order:
        raise OrderError(f"cannot contract {j} slots of order {T.order}")
    if len(vs) < j:
        raise ValueError(f"{j} slots requested but {len(vs)} vectors given")
    result = T
    for v in vs[:j]:
        result = contract_one(result, v)
    return result


def apply_full(T: SymmetricTensor, h: Sequence[Scalar]) -> Scalar:
    """The form :math:`T \\cdot h^{\\otimes k}`.

    Summed over canonical components weighted by the number of
    orderings of each multi-index.

    :raises DimensionError: if len(h) != T.dim.
    """
    _check_vector(T, h)
    total: Scalar = Fraction(0)
    for m, c in T.components():
        if c == 0:
            continue
        total += c * multiplicity(m) * math.prod(h[i] for i in m)
    if not T.is_exact or not is_exact(tuple(h)):
        return float(total)
    return total


def restrict_to_vectors(
    T: SymmetricTensor, vectors: Sequence[Sequence[Scalar]]
) -> SymmetricTensor:
    """Tensor on :math:`\\mathbb{R}^m` with components
    :math:`T \\cdot (v_{j_1} \\otimes \\cdots \\otimes v_{j_k})`.

    The vectors need not be orthonormal; kernels computed from the
    result are in coordinates relative to them.

    :raises DimensionError: if a vector has the wrong length.
    """
    for v in vectors:
        _check_vector(T, v)
    m = len(vectors)
    k = T.order

    # Sorted indices share sorted prefixes, so each partial contraction
    # is computed once.
    cache: dict[MultiIndex, SymmetricTensor] = {(): T}

    def prefix(p: MultiIndex) -> SymmetricTensor:
        if p not in cache:
            cache[p] = contract_one(prefix(p[:-1]), vectors[p[-1]])
        return cache[p]

    comps: dict[MultiIndex, Scalar] = {}
    for index in canonical_indices(m, k):
        if k == 0:
            comps[index] = T[()]
            continue
        last = prefix(index[:-1])
        v = vectors[index[-1]]
        value: Scalar = Fraction(0)
        for i, vi in enumerate(v):
            if vi != 0:
                value += vi * last[(i,)]
        comps[index] = value
    result = SymmetricTensor(m, k, comps)
    return result


class Subspace:
    """A linear subspace of :math:`\\mathbb{R}^d`.

    Holds an orthonormal basis and, when the subspace was built from
    rational data, an exact spanning set of linearly independent
    rational vectors.
    The orthonormal basis is itself exact when every normalisation is a
    rational square root.
    An empty basis is the zero subspace.

    Instances are conventionally immutable.
    """

    def __init__(
        self,
        dim_ambient: int,
        basis: Sequence[Sequence[Scalar]] = (),
        span: Optional[Sequence[Sequence[Scalar]]] = None,
    ) -> None:
        """Wrap an already orthonormal basis.

        Use :meth:`from_vectors` to orthonormalise arbitrary vectors.

        :raises DimensionError: if a vector has the wrong length.
        :raises ValueError: if the basis is not orthonormal.
        """
        if dim_ambient < 0:
            raise ValueError("dim_ambient must be non-negative")
        self._dim_ambient = dim_ambient
        self._basis: tuple[Vector, ...] = tuple(tuple(b) for b in basis)
        for b in self._basis:
            if len(b) != dim_ambient:
                raise DimensionError("basis vector of wrong length")
        if not _is_orthonormal(self._basis):
            raise ValueError("basis is not orthonormal")
        self._span: Optional[tuple[Vector, ...]] = None
        if span is not None:
            self._span = tuple(tuple(s) for s in span)
            if len(self._span) != len(self._basis):
                raise ValueError("span and basis differ in size")

    @classmethod
    def zero(cls, dim_ambient: int) -> "Subspace":
        """The zero subspace."""
        return cls(dim_ambient, (), ())

    @classmethod
    def full(cls, dim_ambient: int) -> "Subspace":
        """The whole space with its canonical basis."""
        basis = [
            tuple(Fraction(int(i == j)) for j in range(dim_ambient))
            for i in range(dim_ambient)
        ]
        return cls(dim_ambient, basis, basis)

    @classmethod
    def from_vectors(
        cls, dim_ambient: int, vectors: Iterable[Sequence[Scalar]]
    ) -> "Subspace":
        """Span of vectors, orthonormalised by Gram-Schmidt.

        Linearly dependent vectors are dropped.
        Each basis vector has a positive first nonzero entry.
        Exact input keeps an exact spanning set.

        :raises DimensionError: if a vector has the wrong length.
        """
        vecs = [tuple(v) for v in vectors]
        for v in vecs:
            if len(v) != dim_ambient:
                raise DimensionError("vector of wrong length")
        if is_exact(tuple(vecs)):
            return cls._from_exact(dim_ambient, vecs)
        return cls._from_float(dim_ambient, vecs)

    @classmethod
    def _from_exact(
        cls, dim_ambient: int, vecs: list[Vector]
    ) -> "Subspace":
        ortho: list[Vector] = []
        independent: list[Vector] = []
        for v in vecs:
            w: list[Scalar] = [Fraction(x) for x in v]
            for u in ortho:
                coef = _dot(w, u) / _dot(u, u)
                w = [wi - coef * ui for wi, ui in zip(w, u)]
            if all(wi == 0 for wi in w):
                continue
            ortho.append(tuple(w))
            independent.append(tuple(Fraction(x) for x in v))

        basis: list[Vector] = []
        for u in ortho:
            norm2 = _dot(u, u)
            assert isinstance(norm2, Fraction)
            root = exact_sqrt(norm2)
            if root is not None:
                b: Vector = tuple(ui / root for ui in u)
            else:
                r = math.sqrt(norm2)
                b = tuple(float(ui) / r for ui in u)
            basis.append(_positive_leading(b))
        return cls(dim_ambient, basis, independent)

    @classmethod
    def _from_float(
        cls, dim_ambient: int, vecs: list[Vector]
    ) -> "Subspace":
        if not vecs or dim_ambient == 0:
            return cls.zero(dim_ambient)
        A = np.array(vecs, dtype=float).T
        if not np.any(A):
            return cls.zero(dim_ambient)
        # Modified Gram-Schmidt keeps the order of the input directions.
        scale = float(np.max(np.linalg.norm(A, axis=0)))
        basis: list[np.ndarray] = []
        for col in A.T:
            w = col.copy()
            for _ in range(2):
                for u in basis:
                    w = w - np.dot(w, u) * u
            norm = float(np.linalg.norm(w))
            if norm <= config.KERNEL_RTOL * scale:
                continue
            basis.append(w / norm)
        out = [
            _positive_leading(tuple(float(x) for x in u)) for u in basis
        ]
        return cls(dim_ambient, out)

    @property
    def dim_ambient(self) -> int:
        """Dimension of the ambient space."""
        return self._dim_ambient

    @property
    def basis(self) -> tuple[Vector, ...]:
        """Orthonormal basis."""
        return self._basis

    @property
    def span(self) -> Optional[tuple[Vector, ...]]:
        """Exact linearly independent spanning set, if known."""
        return self._span

    @property
    def dim(self) -> int:
        """Dimension of the subspace."""
        return len(self._basis)

    @property
    def is_zero(self) -> bool:
        """True for the zero subspace."""
        return not self._basis

    @property
    def is_exact(self) -> bool:
        """True if an exact spanning set is available."""
        return self._span is not None

    def frame(self) -> tuple[Vector, ...]:
        """The exact spanning set if there is one, else the basis.

        Coordinates produced by :meth:`lift` are relative to this.
        """
        return self._span if self._span is not None else self._basis

    def lift(self, coords: Iterable[Sequence[Scalar]]) -> list[Vector]:
        """Ambient vectors :math:`\\sum_j c_j f_j` for frame vectors f_j.

        :raises DimensionError: if a coordinate vector has the wrong
            length.
        """
        frame = self.frame()
        out: list[Vector] = []
        for c in coords:
            if len(c) != len(frame):
                raise DimensionError("coordinate vector of wrong length")
            v: list[Scalar] = [Fraction(0)] * self.dim_ambient
            for cj, fj in zip(c, frame):
                if cj == 0:
                    continue
                v = [vi + cj * fi for vi, fi in zip(v, fj)]
            out.append(tuple(v))
        return out

    def project(self, v: Sequence[Scalar]) -> Vector:
        """Orthogonal projection of v onto this subspace.

        :raises DimensionError: if len(v) != dim_ambient.
        """
        if len(v) != self.dim_ambient:
            raise DimensionError("vector of wrong length")
        p: list[Scalar] = [Fraction(0)] * self.dim_ambient
        for b in self._basis:
            c = _dot(v, b)
            p = [pi + c * bi for pi, bi in zip(p, b)]
        return tuple(p)

    def residual(self, v: Sequence[Scalar]) -> float:
        """Euclidean norm of v minus its projection."""
        p = self.project(v)
        return math.sqrt(float(sum((a - b) ** 2 for a, b in zip(v, p))))

    def contains(
        self, v: Sequence[Scalar], tol: float = config.PROJECTION_TOL
    ) -> bool:
        """True if v lies in the subspace (within tol)."""
        return self.residual(v) <= tol

    def contains_subspace(
        self, other: "Subspace", tol: float = config.PROJECTION_TOL
    ) -> bool:
        """True if every basis vector of other lies in this subspace."""
        return all(self.contains(b, tol) for b in other.basis)

    def orthogonal_complement(self, sub: "Subspace") -> "Subspace":
        """Orthogonal complement of sub inside this subspace.

        sub is assumed to be contained in self.

        :raises DimensionError: if the ambient dimensions differ.
        """
        if sub.dim_ambient != self.dim_ambient:
            raise DimensionError("subspaces of different ambient spaces")
        if sub.is_zero:
            return self
        frame = self.frame()
        exact = self.is_exact and sub.is_exact
        others = sub.frame() if exact else sub.basis
        # Coefficients a with <w, sum_j a_j f_j> = 0 for every w in sub.
        rows = [[_dot(w, f) for f in frame] for w in others]
        coords = nullspace(rows, len(frame), exact=exact)
        return Subspace.from_vectors(self.dim_ambient, self.lift(coords))

    def __repr__(self) -> str:
        return (
            f"Subspace(dim_ambient={self.dim_ambient}, "
            f"basis={self.basis!r})"
        )


def _dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    total: Scalar = Fraction(0)
    for a, b in zip(u, v):
        total += a * b
    return total


def _positive_leading(v: Vector) -> Vector:
    for x in v:
        if abs(x) > config.ORTHONORMAL_TOL:
            if x < 0:
                return tuple(-y for y in v)
            return v
    return v


def _is_orthonormal(basis: Sequence[Vector]) -> bool:
    for i, u in enumerate(basis):
        for j in range(i, len(basis)):
            d = _dot(u, basis[j])
            target = 1 if i == j else 0
            if abs(float(d) - target) > config.ORTHONORMAL_TOL:
                return False
    return True


def nullspace(
    rows: Sequence[Sequence[Scalar]], ncols: int, exact: bool
) -> list[Vector]:
    """A basis of :math:`\\{x : Mx = 0\\}` for the matrix with these rows.

    With exact=True the rows must be rational and the kernel is
    computed by Gaussian elimination over the rationals.
    Otherwise singular values below ``config.KERNEL_RTOL`` times the
    largest count as zero.
    """
    if ncols == 0:
        return []
    if not rows:
        return [
            tuple(Fraction(int(i == j)) for j in range(ncols))
            for i in range(ncols)
        ]
    if exact:
        M = sympy.Matrix(
            [
                [sympy.Rational(c.numerator, c.denominator) for c in r]
                for r in (tuple(Fraction(x) for x in row) for row in rows)
            ]
        )
        return [
            tuple(Fraction(int(e.p), int(e.q)) for e in col)
            for col in M.nullspace()
        ]
    A = np.array(rows, dtype=float)
    N = scipy.linalg.null_space(A, rcond=config.KERNEL_RTOL)
    return [tuple(float(x) for x in col) for col in N.T]


def restrict(T: SymmetricTensor, V: Subspace) -> SymmetricTensor:
    """T restricted to V, in coordinates of V's orthonormal basis.

    :raises DimensionError: if V is not a subspace of T's space.
    """
    if V.dim_ambient != T.dim:
        raise DimensionError(
            f"subspace of R^{V.dim_ambient} against tensor on R^{T.dim}"
        )
    return restrict_to_vectors(T, V.basis)


def kernel_rows(T: SymmetricTensor) -> list[list[Scalar]]:
    """Matrix of the linear map :math:`h \\mapsto T \\cdot h`.

    Rows are indexed by canonical multi-indices of order k - 1,
    columns by coordinates.
    """
    return [
        [T[n + (i,)] for i in range(T.dim)]
        for n in canonical_indices(T.dim, T.order - 1)
    ]


def kernel_map_nullspace(T: SymmetricTensor) -> Subspace:
    """Subspace of h with :math:`T \\cdot h \\otimes h'^{\\otimes 2k-1} = 0`
    for all h'.

    This is the kernel of :math:`h \\mapsto T \\cdot h`.
    It is always contained in the zero set of the form
    :math:`T \\cdot h^{\\otimes 2k}` and may be strictly smaller.

    :raises OrderError: if the order of T is odd or 0.
    """
    if T.order < 2 or T.order % 2 != 0:
        raise OrderError(f"order must be even and >= 2, not {T.order}")
    if T.dim == 0:
        return Subspace.zero(0)
    vectors = nullspace(kernel_rows(T), T.dim, exact=T.is_exact)
    result = Subspace.from_vectors(T.dim, vectors)
    logger.debug(
        "kernel of order %d tensor on R^%d has dimension %d (%s)",
        T.order,
        T.dim,
        result.dim,
        "exact" if T.is_exact else "float",
    )
    return result
