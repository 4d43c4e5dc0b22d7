"""The JSON report written by the command line tool.

A report is a plain tree of dicts, lists, strings, numbers and ``None``,
so that :meth:`ReportDocument.to_dict` and
:meth:`ReportDocument.from_dict` are exact inverses.
Exponents and grades are written as fraction strings such as ``"1/10"``
and the entries of B as strings with 17 significant digits, so nothing
is lost on reload.

The timestamp is taken from ``SOURCE_DATE_EPOCH`` when it is set, which
makes reports of identical requests byte-identical.
"""

import datetime
import json
import math
import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

from gibbsx import config
from gibbsx.__about__ import __version__
from gibbsx.analysis import (
    CoercivityVerdict,
    ConvergenceReport,
    UniformReport,
)
from gibbsx.expansion import ExpansionResult
from gibbsx.gibbs_verify import ConcentrationReport, GibbsReport, WellsReport
from gibbsx.types import Scalar
from gibbsx.utils import fraction_str, scalar_str

JSON = dict[str, Any]

_SECTIONS = (
    "request",
    "expansion",
    "coercivity",
    "convergence",
    "uniform",
    "concentration",
    "gibbs",
    "wells",
)


def _num(x: Optional[float]) -> Optional[float]:
    """Finite floats pass; None, inf and nan become None."""
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _fixed(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def _fracs(values: Sequence[Fraction]) -> list[str]:
    return [fraction_str(Fraction(v)) for v in values]


def _entry(c: Scalar) -> str:
    if isinstance(c, Fraction):
        return fraction_str(c)
    return format(float(c), ".17g")


def timestamp() -> str:
    """ISO 8601 time in UTC, from ``SOURCE_DATE_EPOCH`` if set."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    if raw is not None and raw.strip().isdigit():
        when = datetime.datetime.fromtimestamp(
            int(raw), tz=datetime.timezone.utc
        )
    else:
        when = datetime.datetime.now(tz=datetime.timezone.utc)
    return when.replace(microsecond=0).isoformat()


def expansion_section(e: ExpansionResult, names: Sequence[str]) -> JSON:
    """Chain, basis, exponents, g and the hypothesis check."""
    return {
        "x_star": _fracs(e.x_star),
        "f_star": scalar_str(e.f_star),
        "p": e.p,
        "truncated": e.truncated,
        "block_dims": list(e.chain.block_dims()),
        "alpha": _fracs(e.alpha),
        "alpha_sum": fraction_str(e.alpha_sum),
        "B": [[_entry(c) for c in row] for row in e.B],
        "B_exact": e.is_exact,
        "g": e.g.to_str(names),
        "grades": _fracs(e.graded.exponents()),
        "hypothesis_ok": e.hypothesis_ok,
        "offending": [
            {"grade": fraction_str(a), "poly": p.to_str(names)}
            for a, p in e.offending
        ],
        "witnesses": [
            {
                "tuple": list(w.tuple),
                "grade": fraction_str(w.grade),
                "poly": w.poly.to_str(names),
                "even": w.even,
            }
            for w in e.witnesses
        ],
        "nonconstant": list(e.nonconstant),
    }


def coercivity_section(v: CoercivityVerdict) -> JSON:
    return {
        "coercive": v.coercive,
        "sphere_min": _num(v.sphere_min),
        "witness": None if v.witness is None else list(v.witness),
        "starts": v.starts,
        "numerical": v.numerical,
    }


def convergence_section(r: ConvergenceReport) -> JSON:
    return {
        "grid_points": len(r.grid),
        "t_ladder": list(r.t_ladder),
        "max_abs_err": [_num(e) for e in r.max_abs_err],
        "fitted_rate": _num(r.fitted_rate),
        "expected_rate": (
            None if r.expected_rate is None
            else fraction_str(r.expected_rate)
        ),
        "offending_grade": (
            None if r.offending_grade is None
            else fraction_str(r.offending_grade)
        ),
        "divergent": r.divergent,
        "passed": r.passed,
    }


def uniform_section(r: UniformReport) -> JSON:
    return {
        "radius": r.radius,
        "t": r.t,
        "points": r.points,
        "sup_error": _num(r.sup_error),
        "sup_g": _num(r.sup_g),
        "passed": r.passed,
    }


def concentration_section(r: ConcentrationReport) -> JSON:
    return {
        "eps": r.eps,
        "t_ladder": list(r.t_ladder),
        "masses": list(r.masses),
        "monotone": r.monotone,
        "passed": r.passed,
    }


def gibbs_section(r: GibbsReport) -> JSON:
    return {
        "t": r.t,
        "normalizer": _num(r.normalizer),
        "scaled_distance": _num(r.scaled_distance),
        "marginal_distances": [_num(d) for d in r.marginal_distances],
        "passed": r.passed,
        "details": {k: _num(v) for k, v in sorted(r.details.items())},
    }


def wells_section(
    r: WellsReport, expansions: Sequence[ExpansionResult]
) -> JSON:
    return {
        "t": r.t,
        "delta": r.delta,
        "alpha_sums": _fracs(r.limit.alpha_sums),
        "J": list(r.limit.J),
        "limit_integrals": [_num(z) for z in r.limit.integrals],
        "limit_weights": [_num(w) for w in r.limit.weights],
        "masses": [_num(m) for m in r.masses],
        "measured_weights": [_num(w) for w in r.measured_weights],
        "conditional_distances": [
            _num(d) for d in r.conditional_distances
        ],
        "max_deviation": _num(r.max_deviation),
        "passed": r.passed,
        "minima": [_fracs(e.x_star) for e in expansions],
    }


@dataclass
class ReportDocument:
    """One run of the tool: the request echo and a section per check.

    Sections that were not run are ``None`` (``gibbs`` is empty).
    """

    request: JSON
    exit_code: int = 0
    expansion: Optional[JSON] = None
    coercivity: Optional[JSON] = None
    convergence: Optional[JSON] = None
    uniform: Optional[JSON] = None
    concentration: Optional[JSON] = None
    gibbs: dict[str, JSON] = field(default_factory=dict)
    wells: Optional[JSON] = None
    errors: list[str] = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=timestamp)
    schema: str = config.SCHEMA

    def to_dict(self) -> JSON:
        return {
            "schema": self.schema,
            "version": self.version,
            "timestamp": self.timestamp,
            "exit_code": int(self.exit_code),
            "errors": list(self.errors),
            **{name: getattr(self, name) for name in _SECTIONS},
        }

    @classmethod
    def from_dict(cls, data: JSON) -> "ReportDocument":
        """Rebuild a document written by :meth:`to_dict`.

        :raises ValueError: if the schema tag is not ``config.SCHEMA``.
        """
        schema = data.get("schema")
        if schema != config.SCHEMA:
            raise ValueError(f"unsupported report schema {schema!r}")
        return cls(
            request=data["request"],
            exit_code=data["exit_code"],
            expansion=data.get("expansion"),
            coercivity=data.get("coercivity"),
            convergence=data.get("convergence"),
            uniform=data.get("uniform"),
            concentration=data.get("concentration"),
            gibbs=data.get("gibbs", {}),
            wells=data.get("wells"),
            errors=data.get("errors", []),
            version=data["version"],
            timestamp=data["timestamp"],
            schema=schema,
        )

    def to_json(self) -> str:
        """Canonical text: sorted keys, two space indent, final newline."""
        return (
            json.dumps(self.to_dict(), sort_keys=True, indent=2,
                       allow_nan=False)
            + "\n"
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        """Short human readable account of the report."""
        lines = [f"gibbsx {self.version}: exit code {self.exit_code}"]
        lines += [f"error: {msg}" for msg in self.errors]
        e = self.expansion
        if e is not None:
            lines.append(f"alpha = ({', '.join(e['alpha'])})")
            lines.append(f"g = {e['g']}")
            if e["truncated"]:
                lines.append("chain truncated at p_max")
            if not e["hypothesis_ok"]:
                grades = ", ".join(o["grade"] for o in e["offending"])
                lines.append(f"terms survive below grade 1 at {grades}")
        c = self.coercivity
        if c is not None:
            verdict = "coercive" if c["coercive"] else "not coercive"
            lines.append(
                f"g is {verdict} (sphere minimum {c['sphere_min']})"
            )
            if c["witness"] is not None:
                lines.append(f"witness direction {c['witness']}")
        for name in ("convergence", "uniform", "concentration"):
            section = getattr(self, name)
            if section is not None:
                status = "pass" if section["passed"] else "fail"
                lines.append(f"{name}: {status}")
        for name, section in sorted(self.gibbs.items()):
            status = "pass" if section["passed"] else "fail"
            lines.append(
                f"{name}: distance {section['scaled_distance']} ({status})"
            )
        w = self.wells
        if w is not None and "measured_weights" in w:
            weights = ", ".join(_fixed(x) for x in w["measured_weights"])
            limit = ", ".join(_fixed(x) for x in w["limit_weights"])
            lines.append(f"well weights {weights} (limit {limit})")
        return "\n".join(lines) + "\n"
