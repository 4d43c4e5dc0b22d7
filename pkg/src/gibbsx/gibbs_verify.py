"""Quadrature checks of the limit behaviour of the Gibbs measure
:math:`\\pi_t(dx) = C_t e^{-f(x)/t} dx`.

Single wells are studied in the rescaled coordinates
:math:`x = x^* + B (t^\\alpha * h)`, where
:math:`dx = t^{\\sum \\alpha} dh` and the energy is
:math:`\\tilde f_t(h) = (f(x) - f(x^*))/t`, summed grade by grade.
Everything here is deterministic and limited to three dimensions.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.special

from gibbsx import config
from gibbsx.analysis import (
    CoercivityVerdict,
    check_coercive,
    scaled_increment,
)
from gibbsx.expansion import ExpansionResult
from gibbsx.poly_core import Coefficient, GradedExpansion, SparsePoly
from gibbsx.quadrature import (
    MAX_DIM,
    Energy,
    MassLeakageError,
    QuadratureSpec,
    density,
    fit_box,
    gibbs_integral,
    integrate,
    ks_distance,
    marginal_cdfs,
    node_weights,
    resolution_change,
    weighted_ks,
)

logger = logging.getLogger(__name__)

__all__ = [
    "MassLeakageError",
    "NonCoerciveError",
    "WellOverlapError",
]


class NonCoerciveError(ValueError):
    """The limit polynomial is not coercive, so :math:`e^{-g}` is not a
    probability density."""


class WellOverlapError(ValueError):
    """Two minima are too close for their neighbourhoods to be
    disjoint."""


@dataclass(frozen=True)
class GibbsReport:
    """Outcome of one scaled-law check at one t.

    ``normalizer`` is :math:`C_t^{-1} e^{f^*/t}`.
    ``scaled_distance`` is the largest marginal Kolmogorov-Smirnov
    distance.
    """

    t: float
    normalizer: float
    scaled_distance: float
    marginal_distances: tuple[float, ...]
    passed: bool
    concentration_mass: Optional[float] = None
    well_weights: Optional[tuple[float, ...]] = None
    details: dict[str, float] = field(default_factory=dict)


def _polynomial_energy(f: SparsePoly, t: float, shift: float) -> Energy:
    def energy(x: np.ndarray) -> np.ndarray:
        return (f.evaluate_array(x) - shift) / t

    return energy


def gibbs_normalizer(
    f: SparsePoly,
    t: float,
    quad: Optional[QuadratureSpec] = None,
    center: Optional[Sequence[float]] = None,
) -> float:
    """:math:`C_t^{-1} = \\int e^{-f/t}` by quadrature.

    The box is fitted automatically unless quad is given.
    A warning is logged if halving the nodes changes the result by more
    than ``config.RESOLUTION_RTOL``.

    :raises ValueError: if t <= 0 or f has more than three variables.
    :raises MassLeakageError: if the density does not decay in the box.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not 1 <= f.dim <= MAX_DIM:
        raise ValueError(f"quadrature needs 1 to {MAX_DIM} variables")
    energy = _polynomial_energy(f, t, 0.0)
    spec = quad if quad is not None else fit_box(energy, f.dim, center)
    change = resolution_change(energy, spec)
    if change > config.RESOLUTION_RTOL:
        logger.warning(
            "normaliser changes by %.2e when halving the nodes", change
        )
    return gibbs_integral(energy, spec)


@dataclass(frozen=True)
class ConcentrationReport:
    """Mass of :math:`\\{f \\geq f^* + \\epsilon\\}` along a ladder of t."""

    eps: float
    t_ladder: tuple[float, ...]
    masses: tuple[float, ...]
    monotone: bool
    passed: bool


def check_concentration(
    f: SparsePoly,
    f_star: float,
    eps: float = config.CONCENTRATION_EPS,
    t_ladder: Sequence[float] = config.CONCENTRATION_T_LADDER,
    quad: Optional[QuadratureSpec] = None,
) -> ConcentrationReport:
    """:math:`\\pi_t(\\{f \\geq f^* + \\epsilon\\})` for each t.

    Passes iff the masses do not increase along the (decreasing) ladder
    and the last one is below ``config.CONCENTRATION_TOL``.

    :raises MassLeakageError: if a density does not decay in its box.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    masses: list[float] = []
    for t in t_ladder:
        energy = _polynomial_energy(f, float(t), float(f_star))
        spec = quad if quad is not None else fit_box(energy, f.dim)
        values, _ = density(energy, spec)
        level = f.evaluate_array(spec.points()) >= f_star + eps
        total = integrate(values, spec)
        mass = integrate(np.where(level, values, 0.0), spec) / total
        masses.append(min(1.0, max(0.0, mass)))
        logger.debug("t=%g: mass above level %.3e", t, mass)
    # Small slack for quadrature noise once masses are negligible.
    monotone = all(
        b <= a + 1e-12 for a, b in zip(masses, masses[1:])
    )
    passed = monotone and masses[-1] < config.CONCENTRATION_TOL
    return ConcentrationReport(
        float(eps),
        tuple(float(t) for t in t_ladder),
        tuple(masses),
        monotone,
        passed,
    )


def scaled_energy(graded: GradedExpansion, t: float) -> Energy:
    """:math:`h \\mapsto \\sum_a t^{a - 1} P_a(h)`."""

    def energy(h: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(h)[:-1])
        for a, p in graded.items():
            out = out + t ** float(a - 1) * p.evaluate_array(h)
        return out

    return energy


def _poly_energy(g: SparsePoly) -> Energy:
    return g.evaluate_array


def _union_box(
    a: QuadratureSpec, b: QuadratureSpec
) -> QuadratureSpec:
    box = tuple(
        (min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(a.box, b.box)
    )
    return QuadratureSpec(a.dim, box, a.nodes_per_axis)


def _scaled_distances(
    energy: Energy, reference: Energy, spec: QuadratureSpec
) -> tuple[tuple[float, ...], float, float]:
    values, e_min = density(energy, spec)
    ref_values, ref_min = density(reference, spec)
    cdfs = marginal_cdfs(values, spec)
    ref_cdfs = marginal_cdfs(ref_values, spec)
    distances = tuple(ks_distance(a, b) for a, b in zip(cdfs, ref_cdfs))
    z = integrate(values, spec) * math.exp(-e_min)
    z_ref = integrate(ref_values, spec) * math.exp(-ref_min)
    return distances, z, z_ref


def _require_coercive(
    g: SparsePoly,
    alpha: Sequence[Fraction],
    verdict: Optional[CoercivityVerdict],
) -> None:
    if verdict is None:
        verdict = check_coercive(g, alpha)
    if not verdict.coercive:
        raise NonCoerciveError(
            "g is not coercive; see check_noncoercive_archetype"
        )


def check_scaled_limit(
    f: SparsePoly,
    x_star: Sequence[Coefficient],
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
    g: SparsePoly,
    t: float = config.SCALED_T,
    quad: Optional[QuadratureSpec] = None,
    verdict: Optional[CoercivityVerdict] = None,
) -> GibbsReport:
    """Compare the law of :math:`t^{-\\alpha} * B^{-1}(X_t - x^*)` with the
    law of density proportional to :math:`e^{-g}`.

    Each marginal CDF of the rescaled law is compared with the same
    marginal of :math:`e^{-g}` on a common grid.
    Passes iff the largest distance is below ``config.SCALED_KS_TOL``.

    :raises NonCoerciveError: if g is not coercive.
    :raises ValueError: for more than three variables.
    :raises MassLeakageError: if a density does not decay in its box.
    """
    if not 1 <= f.dim <= MAX_DIM:
        raise ValueError(f"quadrature needs 1 to {MAX_DIM} variables")
    _require_coercive(g, alpha, verdict)
    graded = scaled_increment(f, x_star, B, alpha)
    energy = scaled_energy(graded, t)
    reference = _poly_energy(g)
    if quad is None:
        spec = _union_box(
            fit_box(energy, f.dim), fit_box(reference, f.dim)
        )
    else:
        spec = quad
    distances, z, z_ref = _scaled_distances(energy, reference, spec)
    alpha_sum = float(sum(alpha, Fraction(0)))
    distance = max(distances)
    passed = distance < config.SCALED_KS_TOL
    logger.info(
        "scaled law at t=%g: KS distance %.3e (%s)",
        t,
        distance,
        "pass" if passed else "fail",
    )
    return GibbsReport(
        t=t,
        normalizer=t**alpha_sum * z,
        scaled_distance=distance,
        marginal_distances=distances,
        passed=passed,
        details={"normalizer_ratio": z / z_ref, "limit_integral": z_ref},
    )


def laplace_normalizer_ratio(
    expansion: ExpansionResult,
    t: float,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """:math:`C_t^{-1} e^{f^*/t} / (t^{\\sum \\alpha} \\int e^{-g})`.

    Tends to 1 as t goes to 0 for a single coercive well.
    """
    energy = scaled_energy(expansion.graded, t)
    reference = _poly_energy(expansion.g)
    if quad is None:
        d = expansion.g.dim
        spec = _union_box(fit_box(energy, d), fit_box(reference, d))
    else:
        spec = quad
    return gibbs_integral(energy, spec) / gibbs_integral(reference, spec)


@dataclass(frozen=True)
class LimitWeights:
    """Limit masses of the wells of a multi-well Gibbs measure.

    Only the wells with the smallest :math:`\\sum_j \\alpha_{ij}` (the
    set J) keep mass, in proportion to :math:`\\int e^{-g_i}`.
    """

    alpha_sums: tuple[Fraction, ...]
    J: tuple[int, ...]
    integrals: tuple[float, ...]
    weights: tuple[float, ...]


def _limit_integral(g: SparsePoly) -> float:
    energy = _poly_energy(g)
    return gibbs_integral(energy, fit_box(energy, g.dim))


def limit_weights(expansions: Sequence[ExpansionResult]) -> LimitWeights:
    """Limit weights from the exponents and :math:`\\int e^{-g_i}`.

    :raises MassLeakageError: if some :math:`e^{-g_i}` is not
        integrable in practice.
    """
    if not expansions:
        raise ValueError("at least one well is required")
    sums = tuple(e.alpha_sum for e in expansions)
    smallest = min(sums)
    J = tuple(i for i, s in enumerate(sums) if s == smallest)
    integrals = tuple(
        _limit_integral(e.g) if i in J else 0.0
        for i, e in enumerate(expansions)
    )
    total = sum(integrals)
    weights = tuple(z / total for z in integrals)
    return LimitWeights(sums, J, integrals, weights)


@dataclass(frozen=True)
class WellsReport:
    """Quadrature masses of the wells against their limit weights."""

    t: float
    delta: float
    limit: LimitWeights
    masses: tuple[float, ...]
    measured_weights: tuple[float, ...]
    conditional_distances: tuple[float, ...]
    max_deviation: float
    passed: bool


def _check_separation(
    minima: Sequence[Sequence[Coefficient]], delta: float
) -> None:
    pts = [np.array([float(c) for c in m]) for m in minima]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if float(np.linalg.norm(pts[i] - pts[j])) <= 3 * delta:
                raise WellOverlapError(
                    f"minima {i} and {j} are within {3 * delta}"
                )


def _well_energy(
    graded: GradedExpansion,
    alpha: Sequence[Fraction],
    t: float,
    delta: float,
) -> Energy:
    base = scaled_energy(graded, t)
    scale = np.array([t ** float(a) for a in alpha])

    def energy(h: np.ndarray) -> np.ndarray:
        inside = np.linalg.norm(h * scale, axis=-1) < delta
        return np.where(inside, base(h), np.inf)

    return energy


def check_multi_well(
    f: SparsePoly,
    minima: Sequence[Sequence[Coefficient]],
    expansions: Sequence[ExpansionResult],
    t: float = config.SCALED_T,
    delta: float = config.WELL_DELTA,
    verdicts: Optional[Sequence[CoercivityVerdict]] = None,
) -> WellsReport:
    """Masses of :math:`\\pi_t` on the balls of radius delta around each
    minimum, against the limit weights.

    Each mass is computed in the rescaled coordinates of its well.
    Measured weights are the masses normalised over the wells; the mass
    outside the balls is exponentially small in 1/t and not computed.
    Also reports, per well, the largest marginal KS distance between
    the conditional rescaled law and :math:`e^{-g_i}`.
    Passes iff every measured weight is within ``config.SCALED_KS_TOL``
    of its limit.

    :raises WellOverlapError: if two minima are within 3 delta.
    :raises NonCoerciveError: if some :math:`g_i` is not coercive.
    :raises ValueError: if minima and expansions differ in number or
        the dimension exceeds three.
    """
    if len(minima) != len(expansions):
        raise ValueError("one expansion per minimum is required")
    if not 1 <= f.dim <= MAX_DIM:
        raise ValueError(f"quadrature needs 1 to {MAX_DIM} variables")
    _check_separation(minima, delta)
    for i, e in enumerate(expansions):
        v = verdicts[i] if verdicts is not None else None
        _require_coercive(e.g, e.alpha, v)

    limit = limit_weights(expansions)
    masses: list[float] = []
    distances: list[float] = []
    for e in expansions:
        graded = scaled_increment(f, e.x_star, e.B, e.alpha)
        energy = _well_energy(graded, e.alpha, t, delta)
        reference = _poly_energy(e.g)
        spec = _union_box(
            fit_box(energy, f.dim), fit_box(reference, f.dim)
        )
        dists, z, _ = _scaled_distances(energy, reference, spec)
        masses.append(t ** float(e.alpha_sum) * z)
        distances.append(max(dists))

    total = sum(masses)
    measured = tuple(m / total for m in masses)
    deviation = max(abs(a - b) for a, b in zip(measured, limit.weights))
    passed = deviation < config.SCALED_KS_TOL
    logger.info(
        "well weights at t=%g: measured %s, limit %s",
        t,
        [round(w, 6) for w in measured],
        [round(w, 6) for w in limit.weights],
    )
    return WellsReport(
        t=t,
        delta=delta,
        limit=limit,
        masses=tuple(masses),
        measured_weights=measured,
        conditional_distances=tuple(distances),
        max_deviation=deviation,
        passed=passed,
    )


ARCHETYPE = "(x - y^2)^2 + x^6"
"""The non-coercive archetype, in variables x and y."""

ARCHETYPE_EXPONENT = Fraction(7, 12)
"""Exponent of t in the normaliser of the archetype."""


def archetype_limit_normalizer() -> float:
    """:math:`\\sqrt{\\pi} \\int_0^\\infty x^{-1/2} e^{-x^6} dx
    = \\sqrt{\\pi}\\, \\Gamma(1/12) / 6`."""
    return math.sqrt(math.pi) * float(scipy.special.gamma(1 / 12)) / 6


def _archetype_energy(t: float) -> Energy:
    # Coordinates (s, v) with Y = t^(1/12) s and (Y^2 - X) / t^(1/2) = v,
    # so U = X / t^(1/6) = s^2 - t^(1/3) v and the Jacobian is t^(7/12).
    c = t ** (1 / 3)

    def energy(sv: np.ndarray) -> np.ndarray:
        s = sv[..., 0]
        v = sv[..., 1]
        return (s**2 - c * v) ** 6 + v**2

    return energy


def archetype_normalizer_ratio(
    t: float, quad: Optional[QuadratureSpec] = None
) -> float:
    """:math:`C_t^{-1} / t^{7/12}` for the archetype, divided by its
    limit :func:`archetype_limit_normalizer`."""
    energy = _archetype_energy(t)
    spec = quad if quad is not None else fit_box(energy, 2)
    return gibbs_integral(energy, spec) / archetype_limit_normalizer()


def archetype_u_cdf(a: np.ndarray) -> np.ndarray:
    """Limit CDF of :math:`X_t / t^{1/6}`, density
    :math:`\\propto x^{-1/2} e^{-x^6}` on :math:`x \\geq 0`."""
    x = np.clip(np.asarray(a, dtype=float), 0.0, None)
    return np.asarray(scipy.special.gammainc(1 / 12, x**6))


def archetype_v_cdf(a: np.ndarray) -> np.ndarray:
    """Limit CDF of :math:`(Y_t^2 - X_t) / t^{1/2}`, density
    :math:`\\propto e^{-y^2}`."""
    return np.asarray(0.5 * (1.0 + scipy.special.erf(a)))


def check_noncoercive_archetype(
    t: float = config.ARCHETYPE_T, quad: Optional[QuadratureSpec] = None
) -> GibbsReport:
    """Law of :math:`(X_t / t^{1/6}, (Y_t^2 - X_t) / t^{1/2})` for
    :math:`f = (x - y^2)^2 + x^6`, against
    :math:`C x^{-1/2} e^{-x^6} 1_{x \\geq 0} \\otimes
    \\pi^{-1/2} e^{-y^2}`.

    Passes iff both marginal KS distances are below
    ``config.ARCHETYPE_KS_TOL``.

    :raises MassLeakageError: if the density does not decay in the box.
    """
    energy = _archetype_energy(t)
    spec = quad if quad is not None else fit_box(energy, 2)
    values, e_min = density(energy, spec)
    weights = values * node_weights(spec)
    pts = spec.points()
    u = pts[..., 0] ** 2 - t ** (1 / 3) * pts[..., 1]
    v = pts[..., 1]
    ks_u = weighted_ks(u, weights, archetype_u_cdf)
    ks_v = weighted_ks(v, weights, archetype_v_cdf)
    total = float(np.sum(weights))
    negative = float(np.sum(weights[u < 0])) / total
    z = integrate(values, spec) * math.exp(-e_min)
    distance = max(ks_u, ks_v)
    passed = distance < config.ARCHETYPE_KS_TOL
    logger.info(
        "archetype at t=%g: KS %.3e / %.3e, mass below 0 %.2e",
        t,
        ks_u,
        ks_v,
        negative,
    )
    return GibbsReport(
        t=t,
        normalizer=t ** float(ARCHETYPE_EXPONENT) * z,
        scaled_distance=distance,
        marginal_distances=(ks_u, ks_v),
        passed=passed,
        details={
            "negative_mass": negative,
            "normalizer_ratio": z / archetype_limit_normalizer(),
        },
    )


def flat_function(x: np.ndarray) -> np.ndarray:
    """:math:`e^{-1/x^2}` on :math:`|x| < 1`, :math:`x^2 + e^{-1} - 1`
    elsewhere; 0 at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        inner = np.exp(-1.0 / x**2)
    return np.where(np.abs(x) < 1, inner, x**2 + math.exp(-1) - 1)


def _flat_energy(t: float) -> Energy:
    scale = math.sqrt(math.log(1 / t))

    def energy(z: np.ndarray) -> np.ndarray:
        x = z[..., 0] / scale
        with np.errstate(divide="ignore", over="ignore"):
            inner = np.exp(math.log(1 / t) - 1.0 / x**2)
        outer = (x**2 + math.exp(-1) - 1) / t
        return np.where(np.abs(x) < 1, inner, outer)

    return energy


def uniform_cdf(a: np.ndarray) -> np.ndarray:
    """CDF of the uniform law on (-1, 1)."""
    return np.clip((np.asarray(a, dtype=float) + 1) / 2, 0.0, 1.0)


def check_flat_minimum(
    t: float = config.FLAT_T, quad: Optional[QuadratureSpec] = None
) -> GibbsReport:
    """Law of :math:`\\sqrt{\\log(1/t)}\\, X_t` for the infinitely flat
    minimum of :func:`flat_function`, against the uniform law on
    (-1, 1).

    Passes iff the KS distance is below ``config.FLAT_KS_TOL``.

    :raises ValueError: unless 0 < t < 1.
    :raises MassLeakageError: if the density does not decay in the box.
    """
    if not 0 < t < 1:
        raise ValueError("t must be in (0, 1)")
    energy = _flat_energy(t)
    spec = quad if quad is not None else fit_box(energy, 1)
    values, e_min = density(energy, spec)
    (cdf,) = marginal_cdfs(values, spec)
    nodes = spec.axes()[0]
    distance = ks_distance(cdf, uniform_cdf(nodes))
    support = float(np.max(np.abs(nodes[values > config.BOUNDARY_RATIO])))
    z = integrate(values, spec) * math.exp(-e_min)
    passed = distance < config.FLAT_KS_TOL
    logger.info(
        "flat minimum at t=%g: KS %.3e (%s)",
        t,
        distance,
        "pass" if passed else "fail",
    )
    return GibbsReport(
        t=t,
        normalizer=z / math.sqrt(math.log(1 / t)),
        scaled_distance=distance,
        marginal_distances=(distance,),
        passed=passed,
        details={"support": support},
    )
