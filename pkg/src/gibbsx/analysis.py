"""Numerical checks on an expansion: coercivity of g, and convergence of
the rescaled increment to g.

Write :math:`\\delta_s h` for the anisotropic dilation
:math:`(s^{\\alpha_1} h_1, \\ldots, s^{\\alpha_d} h_d)` and
:math:`\\rho(h) = \\sum_k \\|h_{A_k}\\|^{2k}` for the anisotropic norm,
where :math:`A_k` is the set of coordinates with
:math:`\\alpha_i = 1/(2k)`.
Then :math:`g(\\delta_s h) = s\\, g(h)` and
:math:`\\rho(\\delta_s h) = s\\, \\rho(h)`, so g is coercive iff it is
positive on the anisotropic sphere :math:`\\{\\rho = 1\\}`,
and then :math:`g \\geq c \\rho` with c its minimum there.

Verdicts here are numerical, not certificates.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.optimize
from scipy.stats import qmc

from gibbsx import config
from gibbsx.expansion import weight_set
from gibbsx.poly_core import (
    Coefficient,
    GradedExpansion,
    SparsePoly,
    linear_substitute,
    shift,
    split_by_grade,
)

logger = logging.getLogger(__name__)


def _alpha_blocks(alpha: Sequence[Fraction]) -> list[list[int]]:
    groups: dict[Fraction, list[int]] = {}
    for i, a in enumerate(alpha):
        groups.setdefault(Fraction(a), []).append(i)
    return [groups[a] for a in sorted(groups, reverse=True)]


def anisotropic_norm(
    h: Sequence[float] | np.ndarray,
    alpha: Sequence[Fraction],
    blocks: Optional[Sequence[Sequence[int]]] = None,
) -> float:
    """:math:`\\rho(h) = \\sum_k \\|h_{A_k}\\|^{1/\\alpha_{A_k}}`.

    With :math:`\\alpha = 1/(2k)` on block :math:`A_k` the exponent is
    2k.
    Blocks default to the groups of equal exponents.
    """
    x = np.asarray(h, dtype=float)
    if blocks is None:
        blocks = _alpha_blocks(alpha)
    total = 0.0
    for block in blocks:
        if not block:
            continue
        power = 1.0 / (2.0 * float(alpha[block[0]]))
        sq = float(np.sum(x[list(block)] ** 2))
        total += sq**power
    return total


def dilate(
    h: np.ndarray, alpha: Sequence[Fraction], s: float
) -> np.ndarray:
    """:math:`\\delta_s h`, applied along the last axis."""
    scale = np.array([s ** float(a) for a in alpha])
    return np.asarray(h, dtype=float) * scale


@dataclass(frozen=True)
class CoercivityVerdict:
    """Estimated minimum of g on the anisotropic unit sphere.

    The witness is the minimising sphere point, present only when the
    verdict is not coercive.
    """

    coercive: bool
    sphere_min: float
    witness: Optional[tuple[float, ...]] = None
    starts: int = config.COERCIVE_STARTS
    numerical: bool = True


def _sphere_starts(
    dim: int, n: int, seed: int, alpha: Sequence[Fraction]
) -> np.ndarray:
    sampler = qmc.Sobol(dim, scramble=True, rng=np.random.default_rng(seed))
    pts = 2.0 * sampler.random(n) - 1.0
    out = []
    for u in pts:
        r = anisotropic_norm(u, alpha)
        if r > 0:
            out.append(dilate(u, alpha, 1.0 / r))
    return np.array(out)


def check_coercive(
    g: SparsePoly,
    alpha: Sequence[Fraction],
    blocks: Optional[Sequence[Sequence[int]]] = None,
    starts: int = config.COERCIVE_STARTS,
    seed: int = config.COERCIVE_SEED,
    workers: Optional[int] = None,
) -> CoercivityVerdict:
    """Estimate whether g is coercive.

    Minimises :math:`u \\mapsto g(\\delta_{1/\\rho(u)} u)` by L-BFGS-B
    from ``starts`` scrambled Sobol points, in a thread pool of
    ``workers`` threads (default :func:`config.worker_count`).
    Results are reduced in start order, so the verdict does not depend
    on the number of threads.

    :raises ValueError: if g does not scale like t under the dilation,
        or alpha does not match g.
    """
    if len(alpha) != g.dim:
        raise ValueError("alpha must have one entry per variable of g")
    weights = weight_set(g, alpha)
    if weights - {Fraction(1)}:
        raise ValueError(
            f"g has weighted degrees {sorted(weights)}, expected only 1"
        )
    d = g.dim
    if d == 0 or g.is_zero:
        return CoercivityVerdict(False, 0.0, (), starts)

    def on_sphere(u: np.ndarray) -> np.ndarray:
        r = anisotropic_norm(u, alpha, blocks)
        if r <= 1e-300:
            return np.full(d, np.nan)
        return dilate(u, alpha, 1.0 / r)

    def objective(u: np.ndarray) -> float:
        v = on_sphere(u)
        if np.isnan(v).any():
            return math.inf
        return float(g.evaluate_array(v))

    def run(u0: np.ndarray) -> tuple[float, np.ndarray]:
        res = scipy.optimize.minimize(
            objective,
            u0,
            method="L-BFGS-B",
            bounds=[(-2.0, 2.0)] * d,
        )
        v = on_sphere(res.x)
        return float(g.evaluate_array(v)), v

    points = _sphere_starts(d, starts, seed, alpha)
    n_workers = workers if workers is not None else config.worker_count()
    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        results = list(executor.map(run, points))

    best_value, best_point = min(results, key=lambda r: r[0])
    coercive = best_value > config.COERCIVE_THRESHOLD
    witness = None if coercive else tuple(float(x) for x in best_point)
    logger.info(
        "sphere minimum %.3e over %d starts: %s",
        best_value,
        len(points),
        "coercive" if coercive else "not coercive",
    )
    return CoercivityVerdict(coercive, best_value, witness, len(points))


def growth_lower_bound(verdict: CoercivityVerdict) -> float:
    """The constant c with :math:`g(h) \\geq c\\, \\rho(h)` for all h.

    :raises ValueError: if the verdict is not coercive.
    """
    if not verdict.coercive:
        raise ValueError("g is not coercive")
    return verdict.sphere_min


def lattice_grid(dim: int, points: int, radius: float) -> np.ndarray:
    """Centred lattice with ``points`` nodes per axis on
    :math:`[-R, R]^d`, shape ``(points**dim, dim)``."""
    axis = np.linspace(-radius, radius, points)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def scaled_increment(
    f: SparsePoly,
    x_star: Sequence[Coefficient],
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
) -> GradedExpansion:
    """Grades of :math:`f(x^* + B(t^\\alpha * h)) - f(x^*)`."""
    point = tuple(Fraction(c) if isinstance(c, int) else c for c in x_star)
    inc = shift(f, point) - f.evaluate(point)
    return split_by_grade(
        linear_substitute(inc, B), [Fraction(a) for a in alpha]
    )


def residual(
    graded: GradedExpansion,
    g: SparsePoly,
    t: float,
    points: np.ndarray,
) -> np.ndarray:
    """:math:`r(t, h) = f(x^* + B(t^\\alpha * h))/t - f(x^*)/t - g(h)`.

    Summed grade by grade, so grade 1 terms cancel exactly against g.
    """
    out = (graded[Fraction(1)] - g).evaluate_array(points)
    for a, p in graded.items():
        if a == 1:
            continue
        out = out + t ** float(a - 1) * p.evaluate_array(points)
    return np.asarray(out)


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors :math:`\\max_h |r(t, h)|` along a decreasing ladder of t."""

    grid: tuple[tuple[float, ...], ...]
    t_ladder: tuple[float, ...]
    max_abs_err: tuple[float, ...]
    fitted_rate: Optional[float]
    expected_rate: Optional[Fraction]
    offending_grade: Optional[Fraction]
    divergent: bool
    passed: bool


def _fit_rate(
    t_ladder: Sequence[float], errors: Sequence[float]
) -> Optional[float]:
    pairs = [(t, e) for t, e in zip(t_ladder, errors) if e > 0]
    if len(pairs) < 2:
        return None
    x = np.log([t for t, _ in pairs])
    y = np.log([e for _, e in pairs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def verify_pointwise_limit(
    f: SparsePoly,
    x_star: Sequence[Coefficient],
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
    g: SparsePoly,
    grid: Optional[np.ndarray] = None,
    t_ladder: Sequence[float] = config.LIMIT_T_LADDER,
) -> ConvergenceReport:
    """Measure :math:`r(t, h) \\to 0` on a grid of h.

    Passes when the error at the smallest t is below
    ``config.LIMIT_TOL`` times :math:`1 + \\max |g|` and the log-log
    slope of the error is at least the gap :math:`a_{min} - 1` to the
    next grade, less ``config.RATE_SLACK``.
    A grade below 1 makes the error grow as t decreases; that is
    reported as divergent with the lowest such grade.

    :raises ValueError: if the ladder is not strictly decreasing.
    """
    ladder = tuple(float(t) for t in t_ladder)
    if any(b >= a for a, b in zip(ladder, ladder[1:])) or not ladder:
        raise ValueError("t_ladder must be strictly decreasing")
    if grid is None:
        grid = lattice_grid(
            g.dim, config.LIMIT_GRID_POINTS, config.LIMIT_GRID_RADIUS
        )
    pts = np.asarray(grid, dtype=float)
    graded = scaled_increment(f, x_star, B, alpha)

    errors = tuple(
        float(np.max(np.abs(residual(graded, g, t, pts)))) for t in ladder
    )
    fitted = _fit_rate(ladder, errors)
    low = graded.below(Fraction(1))
    offending = low[0][0] if low else None
    a_min = graded.smallest_above(Fraction(1))
    expected = a_min - 1 if a_min is not None else None

    g_scale = 1.0 + float(np.max(np.abs(g.evaluate_array(pts))))
    small_enough = errors[-1] <= config.LIMIT_TOL * g_scale
    divergent = offending is not None or (
        fitted is not None and fitted < 0
    )
    fast_enough = (
        fitted is None
        or expected is None
        or fitted >= float(expected) - config.RATE_SLACK
    )
    passed = small_enough and fast_enough and not divergent
    if divergent:
        logger.warning(
            "rescaled increment diverges (fitted rate %s, grade %s)",
            fitted,
            offending,
        )
    return ConvergenceReport(
        grid=tuple(tuple(float(x) for x in p) for p in pts),
        t_ladder=ladder,
        max_abs_err=errors,
        fitted_rate=fitted,
        expected_rate=expected,
        offending_grade=offending,
        divergent=divergent,
        passed=passed,
    )


@dataclass(frozen=True)
class UniformReport:
    """Sup of :math:`|r(t, \\cdot)|` over a lattice in a ball."""

    radius: float
    t: float
    points: int
    sup_error: float
    sup_g: float
    passed: bool

    def __bool__(self) -> bool:
        return self.passed


def verify_uniform_on_compact(
    f: SparsePoly,
    x_star: Sequence[Coefficient],
    B: Sequence[Sequence[Coefficient]],
    alpha: Sequence[Fraction],
    g: SparsePoly,
    radius: float = config.UNIFORM_RADIUS,
    t: float = config.UNIFORM_T,
) -> UniformReport:
    """Uniform convergence on the ball of the given radius.

    Uses ``config.UNIFORM_POINTS`` nodes per axis, fewer if that would
    exceed ``config.UNIFORM_MAX_NODES``.
    Passes iff the sup error is below ``config.LIMIT_TOL`` times
    :math:`1 + \\sup |g|`.
    """
    d = g.dim
    n = config.UNIFORM_POINTS
    while n > 3 and n**d > config.UNIFORM_MAX_NODES:
        n -= 2
    pts = lattice_grid(d, n, radius)
    pts = pts[np.linalg.norm(pts, axis=-1) <= radius * (1 + 1e-12)]
    graded = scaled_increment(f, x_star, B, alpha)
    sup_err = float(np.max(np.abs(residual(graded, g, t, pts))))
    sup_g = float(np.max(np.abs(g.evaluate_array(pts))))
    passed = sup_err <= config.LIMIT_TOL * (1.0 + sup_g)
    logger.info(
        "uniform check on radius %g at t=%g: sup error %.3e (%s)",
        radius,
        t,
        sup_err,
        "pass" if passed else "fail",
    )
    return UniformReport(radius, t, len(pts), sup_err, sup_g, passed)
