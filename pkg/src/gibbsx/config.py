"""Tolerances, defaults and environment settings.

Every threshold used across the package is a documented module level
constant here, so that a reader can see all the numerical decisions
in one place.
"""

import os
from fractions import Fraction

ORTHONORMAL_TOL = 1e-12
"""Maximum deviation of pairwise dot products from the Kronecker delta."""

KERNEL_RTOL = 1e-9
"""Singular values below this times the largest count as zero."""

PROJECTION_TOL = 1e-9
"""Residual allowed when checking that a vector lies in a subspace."""

PSD_TOL = 1e-9
"""Relative eigenvalue slack when checking a Hessian is semi-definite."""

OFFENDING_TOL = 1e-9
"""Absolute coefficient size that makes a sub-grade-1 term offending."""

AGREEMENT_TOL = 1e-9
"""Coefficient-wise tolerance between the two constructions of g."""

CHOP_TOL = 1e-12
"""Relative size under which float coefficients are treated as noise."""

DEFAULT_P_MAX = 6
"""Default cap on the length of the subspace chain."""

MAX_P_MAX = 8
"""Largest chain length a request may ask for."""

HYPOTHESIS_FREE_P = 4
"""Up to this chain length every sub-grade-1 term provably vanishes."""

COERCIVE_THRESHOLD = 1e-8
"""Estimated anisotropic sphere minimum above which g counts as coercive."""

COERCIVE_STARTS = 256
"""Number of quasi-random starting points for the sphere minimisation."""

COERCIVE_SEED = 20250115
"""Seed of the scrambled Sobol sequence, so verdicts are reproducible."""

LIMIT_T_LADDER: tuple[float, ...] = tuple(10.0**-k for k in range(1, 9))
"""Geometric ladder 1e-1 ... 1e-8 for the pointwise limit check."""

LIMIT_GRID_POINTS = 9
"""Lattice points per axis in the pointwise limit grid."""

LIMIT_GRID_RADIUS = 2.0
"""Half width of the pointwise limit grid."""

LIMIT_TOL = 1e-3
"""Relative error allowed at the smallest t of the ladder."""

RATE_SLACK = 0.1
"""Allowed shortfall of the fitted decay rate."""

UNIFORM_RADIUS = 2.0
"""Radius of the ball for the uniform convergence check."""

UNIFORM_POINTS = 17
"""Lattice points per axis for the uniform convergence check."""

UNIFORM_MAX_NODES = 10**5
"""Cap on the number of lattice points in the uniform check."""

UNIFORM_T = 1e-6
"""The t at which the uniform check is judged."""

NODES_PER_AXIS = 401
"""Default odd number of quadrature nodes per axis."""

MAX_NODES = 10**6
"""Cap on the total number of quadrature nodes."""

BOUNDARY_RATIO = 1e-12
"""Boundary integrand must be below this times the maximum."""

RESOLUTION_RTOL = 1e-6
"""Target relative change of a normaliser when nodes are doubled."""

MAX_BOX_HALF_WIDTH = 1e3
"""Largest half width the automatic box may grow to."""

SCALED_T = 1e-5
"""Default t of the single and multiple well checks."""

SCALED_KS_TOL = 0.02
"""Pass threshold for scaled-law distances and weight deviations."""

ARCHETYPE_T = 1e-6
"""Default t of the non-coercive archetype check."""

ARCHETYPE_KS_TOL = 0.03
"""Pass threshold of the archetype check."""

FLAT_T = 1e-8
"""Default t of the flat minimum check."""

FLAT_KS_TOL = 0.05
"""Pass threshold of the flat minimum check."""

CONCENTRATION_EPS = 0.1
"""Default level epsilon for the concentration check."""

CONCENTRATION_T_LADDER: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
"""Default ladder of the concentration check."""

CONCENTRATION_TOL = 1e-3
"""Mass allowed above the level at the end of the ladder."""

WELL_DELTA = 0.25
"""Radius of the balls around each well."""

SCHEMA = "gibbsx/1"
"""Version tag of the JSON report."""

THREADS_ENV = "GIBBSX_THREADS"
"""Environment variable capping worker threads."""

ALPHA_MAX = Fraction(1, 2)
"""Largest admissible scaling exponent."""


def worker_count() -> int:
    """Number of worker threads to use.

    Reads ``GIBBSX_THREADS``; falls back to the CPU count.
    Values that are not positive integers are ignored.
    """
    cpus = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return cpus
    try:
        n = int(raw)
    except ValueError:
        return cpus
    return n if n >= 1 else cpus
