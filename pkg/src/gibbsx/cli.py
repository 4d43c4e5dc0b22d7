"""Command line front end.

``gibbsx analyze`` expands a polynomial at a point and optionally runs
the numerical checks; ``gibbsx wells`` compares the masses of several
wells with their limit weights.
A human summary goes to stdout and, with ``--out``, the JSON report to
a file.

Exit codes: 0 success, 2 terms survive below grade 1, 3 g is not
coercive, 4 invalid input (including points that are not minima).
"""

import enum
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, NoReturn, Optional

import click
import typer

from gibbsx import config
from gibbsx.analysis import (
    CoercivityVerdict,
    check_coercive,
    verify_pointwise_limit,
    verify_uniform_on_compact,
)
from gibbsx.expansion import (
    ConsistencyError,
    ExpansionResult,
    NotAMinimumError,
    expand,
)
from gibbsx.gibbs_verify import (
    ARCHETYPE,
    MassLeakageError,
    NonCoerciveError,
    check_concentration,
    check_multi_well,
    check_noncoercive_archetype,
    check_scaled_limit,
)
from gibbsx.poly_core import SparsePoly, parse_poly
from gibbsx.quadrature import MAX_DIM
from gibbsx.report import (
    ReportDocument,
    coercivity_section,
    concentration_section,
    convergence_section,
    expansion_section,
    gibbs_section,
    uniform_section,
    wells_section,
)
from gibbsx.utils import fraction_str

logger = logging.getLogger(__name__)

VERIFY_CHOICES = frozenset({"limit", "gibbs", "uniform"})
"""Names accepted by ``--verify``."""


class ExitCode(enum.IntEnum):
    OK = 0
    HYPOTHESIS = 2
    NON_COERCIVE = 3
    INPUT = 4


class RequestError(ValueError):
    """A request that cannot be run as given."""


def parse_vector(text: str) -> tuple[Fraction, ...]:
    """``"1/2,-1,0.25"`` as exact rationals.

    :raises RequestError: if an entry is not a rational literal.
    """
    try:
        return tuple(Fraction(s.strip()) for s in text.split(","))
    except (ValueError, ZeroDivisionError) as e:
        raise RequestError(f"bad point {text!r}: {e}") from e


def parse_minima(text: str) -> tuple[tuple[Fraction, ...], ...]:
    """``"a,b;c,d"`` as a tuple of points."""
    return tuple(parse_vector(p) for p in text.split(";") if p.strip())


@dataclass(frozen=True)
class AnalysisRequest:
    """Everything one run of the tool needs."""

    poly_text: str
    names: tuple[str, ...]
    x_star: Optional[tuple[Fraction, ...]] = None
    p_max: int = config.DEFAULT_P_MAX
    verify: frozenset[str] = frozenset()
    t_ladder: tuple[float, ...] = config.LIMIT_T_LADDER
    gibbs_t: float = config.SCALED_T
    minima: tuple[tuple[Fraction, ...], ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.names:
            raise RequestError("at least one variable is required")
        if not 1 <= self.p_max <= config.MAX_P_MAX:
            raise RequestError(
                f"p_max must be between 1 and {config.MAX_P_MAX}"
            )
        unknown = self.verify - VERIFY_CHOICES
        if unknown:
            raise RequestError(f"unknown checks {sorted(unknown)}")
        points = self.minima if self.x_star is None else (self.x_star,)
        for p in points:
            if len(p) != len(self.names):
                raise RequestError(
                    f"point has {len(p)} coordinates for "
                    f"{len(self.names)} variables"
                )
        if self.gibbs_t <= 0:
            raise RequestError("t must be positive")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def point(self) -> tuple[Fraction, ...]:
        if self.x_star is None:
            return (Fraction(0),) * self.dim
        return self.x_star

    def to_dict(self) -> dict[str, Any]:
        return {
            "poly": self.poly_text,
            "vars": list(self.names),
            "x_star": [fraction_str(c) for c in self.point],
            "p_max": self.p_max,
            "verify": sorted(self.verify),
            "t_ladder": list(self.t_ladder),
            "gibbs_t": self.gibbs_t,
            "minima": [[fraction_str(c) for c in m] for m in self.minima],
        }


def _parse(request: AnalysisRequest) -> SparsePoly:
    try:
        return parse_poly(request.poly_text, request.names)
    except ValueError as e:
        raise RequestError(str(e)) from e


def _run_gibbs(
    f: SparsePoly,
    e: ExpansionResult,
    verdict: CoercivityVerdict,
    request: AnalysisRequest,
    doc: ReportDocument,
) -> None:
    if f.dim > MAX_DIM:
        doc.errors.append(
            f"Gibbs checks need at most {MAX_DIM} variables"
        )
        return
    try:
        if verdict.coercive:
            scaled = check_scaled_limit(
                f,
                e.x_star,
                e.B,
                e.alpha,
                e.g,
                t=request.gibbs_t,
                verdict=verdict,
            )
            doc.gibbs["scaled"] = gibbs_section(scaled)
            doc.concentration = concentration_section(
                check_concentration(f, float(e.f_star))
            )
        elif _is_archetype(f, request):
            doc.gibbs["archetype"] = gibbs_section(
                check_noncoercive_archetype()
            )
        else:
            doc.errors.append("scaled law skipped: g is not coercive")
    except MassLeakageError as err:
        doc.errors.append(str(err))


def _is_archetype(f: SparsePoly, request: AnalysisRequest) -> bool:
    if f.dim != 2 or any(request.point):
        return False
    return f == parse_poly(ARCHETYPE, ("x", "y"))


def cmd_analyze(request: AnalysisRequest) -> ReportDocument:
    """Expand at the requested point and run the requested checks.

    Never raises for bad input; failures are recorded in the report
    with the matching exit code.
    """
    doc = ReportDocument(request=request.to_dict())
    try:
        f = _parse(request)
        e = expand(f, request.point, request.p_max)
    except (RequestError, NotAMinimumError, ConsistencyError) as err:
        doc.errors.append(str(err))
        doc.exit_code = ExitCode.INPUT
        return doc

    doc.expansion = expansion_section(e, request.names)
    verdict = check_coercive(e.g, e.alpha)
    doc.coercivity = coercivity_section(verdict)
    if not e.hypothesis_ok:
        doc.exit_code = ExitCode.HYPOTHESIS
    elif not verdict.coercive:
        doc.exit_code = ExitCode.NON_COERCIVE

    if "limit" in request.verify:
        doc.convergence = convergence_section(
            verify_pointwise_limit(
                f, e.x_star, e.B, e.alpha, e.g, t_ladder=request.t_ladder
            )
        )
    if "uniform" in request.verify:
        doc.uniform = uniform_section(
            verify_uniform_on_compact(f, e.x_star, e.B, e.alpha, e.g)
        )
    if "gibbs" in request.verify:
        _run_gibbs(f, e, verdict, request, doc)
    return doc


def cmd_wells(request: AnalysisRequest) -> ReportDocument:
    """Expand at every minimum and compare the well masses at
    ``request.gibbs_t`` with the limit weights."""
    doc = ReportDocument(request=request.to_dict())
    try:
        if not request.minima:
            raise RequestError("at least one minimum is required")
        f = _parse(request)
        values = {f.evaluate(m) for m in request.minima}
        if len(values) != 1:
            raise RequestError(
                "the minima have different values "
                f"{sorted(str(v) for v in values)}"
            )
        expansions = [expand(f, m, request.p_max) for m in request.minima]
    except (RequestError, NotAMinimumError, ConsistencyError) as err:
        doc.errors.append(str(err))
        doc.exit_code = ExitCode.INPUT
        return doc

    verdicts = [check_coercive(e.g, e.alpha) for e in expansions]
    sections = [
        {
            "expansion": expansion_section(e, request.names),
            "coercivity": coercivity_section(v),
        }
        for e, v in zip(expansions, verdicts)
    ]
    if not all(e.hypothesis_ok for e in expansions):
        doc.exit_code = ExitCode.HYPOTHESIS
    try:
        report = check_multi_well(
            f, request.minima, expansions, request.gibbs_t,
            verdicts=verdicts,
        )
    except NonCoerciveError as err:
        doc.errors.append(str(err))
        doc.exit_code = ExitCode.NON_COERCIVE
    except ValueError as err:
        # WellOverlapError among others
        doc.errors.append(str(err))
        doc.exit_code = ExitCode.INPUT
    else:
        doc.wells = wells_section(report, expansions)
    if doc.wells is None:
        doc.wells = {}
    doc.wells["wells"] = sections
    return doc


app = typer.Typer(
    help="Scaling limits of Gibbs measures at degenerate minima.",
    add_completion=False,
    no_args_is_help=True,
)


@app.callback()
def _configure(
    verbose: Annotated[
        int,
        typer.Option(
            "--verbose", "-v", count=True, help="-v info, -vv debug."
        ),
    ] = 0,
) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _names(text: str) -> tuple[str, ...]:
    return tuple(n.strip() for n in text.split(",") if n.strip())


def _verify(text: str) -> frozenset[str]:
    return frozenset(v.strip() for v in text.split(",") if v.strip())


def _finish(doc: ReportDocument, out: Optional[Path]) -> NoReturn:
    if out is not None:
        out.write_text(doc.to_json(), encoding="utf-8")
    typer.echo(doc.summary(), nl=False)
    raise typer.Exit(code=int(doc.exit_code))


def _request_failed(
    err: RequestError, raw: dict[str, Any]
) -> ReportDocument:
    doc = ReportDocument(request=raw, exit_code=ExitCode.INPUT)
    doc.errors.append(str(err))
    return doc


PolyOption = Annotated[str, typer.Option("--poly", help="Polynomial f.")]
VarsOption = Annotated[
    str, typer.Option("--vars", help="Comma separated variable names.")
]
PmaxOption = Annotated[
    int, typer.Option("--pmax", help="Cap on the chain length.")
]
OutOption = Annotated[
    Optional[Path], typer.Option("--out", help="Write the JSON report.")
]
TOption = Annotated[
    float, typer.Option("--t", help="Temperature of the Gibbs checks.")
]


@app.command()
def analyze(
    poly: PolyOption,
    var_names: VarsOption,
    point: Annotated[
        Optional[str], typer.Option("--min", help="Point, e.g. 1,0.")
    ] = None,
    pmax: PmaxOption = config.DEFAULT_P_MAX,
    verify: Annotated[
        str, typer.Option("--verify", help="Any of limit,gibbs,uniform.")
    ] = "",
    t: TOption = config.SCALED_T,
    out: OutOption = None,
) -> None:
    """Expand f at a minimum and report alpha, B and g."""
    raw = {"poly": poly, "vars": var_names, "min": point, "verify": verify}
    try:
        request = AnalysisRequest(
            poly_text=poly,
            names=_names(var_names),
            x_star=None if point is None else parse_vector(point),
            p_max=pmax,
            verify=_verify(verify),
            gibbs_t=t,
        )
    except RequestError as err:
        _finish(_request_failed(err, raw), out)
    _finish(cmd_analyze(request), out)


@app.command()
def wells(
    poly: PolyOption,
    var_names: VarsOption,
    minima: Annotated[
        str, typer.Option("--minima", help='Points, e.g. "-1;1".')
    ],
    pmax: PmaxOption = config.DEFAULT_P_MAX,
    t: TOption = config.SCALED_T,
    out: OutOption = None,
) -> None:
    """Limit weights of several global minima."""
    raw = {"poly": poly, "vars": var_names, "minima": minima}
    try:
        request = AnalysisRequest(
            poly_text=poly,
            names=_names(var_names),
            p_max=pmax,
            gibbs_t=t,
            minima=parse_minima(minima),
        )
    except RequestError as err:
        _finish(_request_failed(err, raw), out)
    _finish(cmd_wells(request), out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the tool and return its exit code.

    Usage errors exit with 4, not the usual 2, which here means that
    terms survive below grade 1.
    """
    args = list(argv) if argv is not None else sys.argv[1:]
    try:
        code = app(args=args, standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return int(ExitCode.INPUT)
    except click.exceptions.Abort:
        return int(ExitCode.INPUT)
    return int(code or 0)
