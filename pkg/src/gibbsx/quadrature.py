"""Tensor-product trapezoid quadrature for Gibbs densities in up to three
dimensions.

Densities are handled through their energy E, the density being
:math:`e^{-E}`.
Boxes are fitted automatically so that the density on every face of the
box is below ``config.BOUNDARY_RATIO`` times its maximum.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate

from gibbsx import config
from gibbsx.types import is_odd_int

logger = logging.getLogger(__name__)

Energy = Callable[[np.ndarray], np.ndarray]
"""Maps points of shape ``(..., d)`` to energies of shape ``(...)``."""

MAX_DIM = 3
"""Quadrature is only attempted up to this dimension."""

_LOG_RATIO = -math.log(config.BOUNDARY_RATIO)


class MassLeakageError(ValueError):
    """The density does not decay inside any admissible box."""


def default_nodes(dim: int) -> int:
    """``config.NODES_PER_AXIS``, reduced to the largest odd count that
    keeps the grid within ``config.MAX_NODES``."""
    n = config.NODES_PER_AXIS
    while n > 3 and n**dim > config.MAX_NODES:
        n -= 2
    return n


@dataclass(frozen=True)
class QuadratureSpec:
    """A box with an odd number of trapezoid nodes per axis.

    The centre of the box is always a node.
    """

    dim: int
    box: tuple[tuple[float, float], ...]
    nodes_per_axis: int = config.NODES_PER_AXIS
    scheme: str = "trapezoid"

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dim must be between 1 and {MAX_DIM}")
        if len(self.box) != self.dim:
            raise ValueError("box must have one interval per axis")
        for lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad interval ({lo}, {hi})")
        if not is_odd_int(self.nodes_per_axis):
            raise ValueError("nodes_per_axis must be a positive odd int")
        if self.nodes_per_axis**self.dim > config.MAX_NODES:
            raise ValueError("too many quadrature nodes")
        if self.scheme != "trapezoid":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def centred(
        cls,
        center: Sequence[float],
        half_widths: Sequence[float],
        nodes_per_axis: Optional[int] = None,
    ) -> "QuadratureSpec":
        dim = len(center)
        n = default_nodes(dim) if nodes_per_axis is None else nodes_per_axis
        box = tuple(
            (float(c) - float(w), float(c) + float(w))
            for c, w in zip(center, half_widths)
        )
        return cls(dim, box, n)

    @property
    def total_nodes(self) -> int:
        return self.nodes_per_axis**self.dim

    def axes(self) -> list[np.ndarray]:
        """Node coordinates along each axis."""
        return [
            np.linspace(lo, hi, self.nodes_per_axis) for lo, hi in self.box
        ]

    def points(self) -> np.ndarray:
        """All nodes, shape ``(n, ..., n, dim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def coarsened(self) -> "QuadratureSpec":
        """The same box with every other node."""
        n = (self.nodes_per_axis + 1) // 2
        if n % 2 == 0:
            n += 1
        return QuadratureSpec(self.dim, self.box, n, self.scheme)


def integrate(values: np.ndarray, spec: QuadratureSpec) -> float:
    """Trapezoid integral of values given on the nodes of spec."""
    result = np.asarray(values, dtype=float)
    for ax in reversed(spec.axes()):
        result = scipy.integrate.trapezoid(result, x=ax, axis=-1)
    return float(result)


def _finite_min(E: np.ndarray) -> float:
    finite = E[np.isfinite(E)]
    if finite.size == 0:
        raise MassLeakageError("energy is nowhere finite on the box")
    return float(np.min(finite))


def _face_ok(E: np.ndarray, axis: int, e_min: float) -> bool:
    lo = np.take(E, 0, axis=axis)
    hi = np.take(E, -1, axis=axis)
    return bool(
        np.min(lo) - e_min > _LOG_RATIO and np.min(hi) - e_min > _LOG_RATIO
    )


def boundary_ratio(E: np.ndarray) -> float:
    """Largest density on a face of the box relative to the maximum."""
    e_min = _finite_min(E)
    worst = math.inf
    for axis in range(E.ndim):
        for idx in (0, -1):
            worst = min(worst, float(np.min(np.take(E, idx, axis=axis))))
    return math.exp(-(worst - e_min))


def fit_box(
    energy: Energy,
    dim: int,
    center: Optional[Sequence[float]] = None,
    initial: float = 1.0,
    nodes_per_axis: Optional[int] = None,
) -> QuadratureSpec:
    """Smallest convenient box on whose faces :math:`e^{-E}` is negligible.

    Half widths are doubled per axis until each face passes, then
    shrunk by a quarter for as long as every face still passes.

    :raises MassLeakageError: if a half width would exceed
        ``config.MAX_BOX_HALF_WIDTH``.
    """
    c = np.zeros(dim) if center is None else np.asarray(center, float)
    w = np.full(dim, float(initial))

    def evaluate(widths: np.ndarray) -> tuple[QuadratureSpec, np.ndarray]:
        spec = QuadratureSpec.centred(c, widths, nodes_per_axis)
        with np.errstate(over="ignore", invalid="ignore"):
            E = np.asarray(energy(spec.points()), dtype=float)
        return spec, np.where(np.isnan(E), np.inf, E)

    def bad_axes(E: np.ndarray) -> list[int]:
        e_min = _finite_min(E)
        return [i for i in range(dim) if not _face_ok(E, i, e_min)]

    spec, E = evaluate(w)
    while bad := bad_axes(E):
        for i in bad:
            w[i] *= 2.0
        if np.any(w > config.MAX_BOX_HALF_WIDTH):
            raise MassLeakageError(
                "density does not decay within the largest box"
            )
        spec, E = evaluate(w)

    for i in range(dim):
        while True:
            trial = w.copy()
            trial[i] *= 0.75
            trial_spec, trial_E = evaluate(trial)
            if bad_axes(trial_E):
                break
            w, spec, E = trial, trial_spec, trial_E

    logger.debug("fitted box half widths %s", w.tolist())
    return spec


def density(
    energy: Energy, spec: QuadratureSpec
) -> tuple[np.ndarray, float]:
    """:math:`e^{-(E - E_{min})}` on the nodes, and :math:`E_{min}`.

    :raises MassLeakageError: if the boundary ratio is too large.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.asarray(energy(spec.points()), dtype=float)
    E = np.where(np.isnan(E), np.inf, E)
    ratio = boundary_ratio(E)
    if ratio >= config.BOUNDARY_RATIO:
        raise MassLeakageError(
            f"boundary density ratio {ratio:.3e} on the quadrature box"
        )
    e_min = _finite_min(E)
    return np.exp(-(E - e_min)), e_min


def gibbs_integral(energy: Energy, spec: QuadratureSpec) -> float:
    """:math:`\\int e^{-E}` over the box."""
    values, e_min = density(energy, spec)
    return integrate(values, spec) * math.exp(-e_min)


def resolution_change(energy: Energy, spec: QuadratureSpec) -> float:
    """Relative change of :math:`\\int e^{-E}` when half the nodes are
    used; an upper estimate of the error at full resolution."""
    fine = gibbs_integral(energy, spec)
    coarse = gibbs_integral(energy, spec.coarsened())
    return abs(fine - coarse) / abs(fine)


def marginal_cdfs(
    values: np.ndarray, spec: QuadratureSpec
) -> list[np.ndarray]:
    """Normalised marginal CDF along each axis, on that axis's nodes."""
    axes = spec.axes()
    out: list[np.ndarray] = []
    for i in range(spec.dim):
        m = np.asarray(values, dtype=float)
        # Integrate out the other axes, last first so indices stay valid.
        for j in reversed(range(spec.dim)):
            if j != i:
                m = scipy.integrate.trapezoid(m, x=axes[j], axis=j)
        cdf = scipy.integrate.cumulative_trapezoid(
            m, x=axes[i], initial=0.0
        )
        out.append(cdf / cdf[-1])
    return out


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Sup distance between two CDFs tabulated on the same nodes."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def weighted_ks(
    values: np.ndarray,
    weights: np.ndarray,
    cdf: Callable[[np.ndarray], np.ndarray],
) -> float:
    """KS distance between the weighted point cloud and a reference CDF.

    Both one-sided limits of the empirical CDF are compared at every
    point, as for the classical statistic.
    """
    v = np.asarray(values, dtype=float).ravel()
    wts = np.asarray(weights, dtype=float).ravel()
    order = np.argsort(v, kind="stable")
    v, wts = v[order], wts[order]
    total = float(np.sum(wts))
    upper = np.cumsum(wts) / total
    lower = upper - wts / total
    ref = cdf(v)
    return float(
        max(np.max(np.abs(upper - ref)), np.max(np.abs(lower - ref)))
    )


def node_weights(spec: QuadratureSpec) -> np.ndarray:
    """Trapezoid weight of every node, shape ``(n, ..., n)``."""
    result = np.ones(())
    for ax in spec.axes():
        w = np.full(ax.shape, ax[1] - ax[0])
        w[0] /= 2
        w[-1] /= 2
        result = np.multiply.outer(result, w)
    return result
