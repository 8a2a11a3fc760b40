"""Classical stability baselines: absolute and relative residuals for
approximately exponential data, and the alpha-series sandwich bound.

These operate on plain value maps (keys are whatever the caller indexes
by, values are ln f) so they work for any pairing convention; the CLI
feeds them semigroup pairs, tests also use additive ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .errors import SeriesDivergenceError, SuperstabError
from .instance import ConstantBound, IdentityMap, Instance, eval_log_f, validate_instance
from .pipeline import PipelineConfig, Verdict, run_superstability
from .semigroup import POS_REAL, Element

Triple = tuple[Hashable, Hashable, Hashable]  # (x, y, x*y) under the caller's operation

NEAR_EXPONENTIAL = "NearExponential"
BOUNDED = "Bounded"
NEITHER = "Neither"


def baker_residual(
    log_values: Mapping[Hashable, float],
    pairs: Sequence[Triple],
    exp_tol: float = 1e-9,
    bound: float = 10.0,
) -> tuple[float, str]:
    """sup |f(xy) - f(x) f(y)| plus a sample classification.

    ``NearExponential`` when the log-residual stays below ``exp_tol``,
    ``Bounded`` when sup |f| <= ``bound``, ``Neither`` otherwise.  Values
    arrive in log-domain; the residual itself is formed at raw scale, so
    this is a desk-scale diagnostic by design.
    """
    if not pairs:
        raise ValueError("baker_residual needs at least one pair")
    worst = 0.0
    worst_log = 0.0
    for x, y, xy in pairs:
        lx, ly, lxy = _fetch(log_values, x), _fetch(log_values, y), _fetch(log_values, xy)
        worst = max(worst, abs(math.exp(lxy) - math.exp(lx + ly)))
        worst_log = max(worst_log, abs(lxy - lx - ly))
    if worst_log <= exp_tol:
        return worst, NEAR_EXPONENTIAL
    if max(math.exp(v) for v in log_values.values()) <= bound:
        return worst, BOUNDED
    return worst, NEITHER


def ger_residual(
    log_values: Mapping[Hashable, float],
    pairs: Sequence[Triple],
    form: str = "multiplicative",
) -> float:
    """sup |f(xy)/D - 1| with D = f(x) f(y) or D = f(x) + f(y).

    The multiplicative denominator is the standard relative-error
    quotient and the default; ``literal_additive`` divides by the sum
    instead.  Both are exposed because the additive reading appears in
    the literature verbatim; the difference is intentional, not a bug.
    """
    if form not in ("multiplicative", "literal_additive"):
        raise ValueError(f"unknown form {form!r}")
    if not pairs:
        raise ValueError("ger_residual needs at least one pair")
    worst = 0.0
    for x, y, xy in pairs:
        lx, ly, lxy = _fetch(log_values, x), _fetch(log_values, y), _fetch(log_values, xy)
        if form == "multiplicative":
            quotient = math.exp(lxy - lx - ly)
        else:
            denom_log = _log_add(lx, ly)
            if not math.isfinite(denom_log):
                raise SuperstabError(f"denominator is not finite for pair ({x!r}, {y!r})")
            quotient = math.exp(lxy - denom_log)
        worst = max(worst, abs(quotient - 1.0))
    return worst


def _fetch(values: Mapping, key) -> float:
    try:
        return values[key]
    except KeyError:
        raise SuperstabError(f"no value for point {key!r}") from None


def _log_add(la: float, lb: float) -> float:
    if la < lb:
        la, lb = lb, la
    return la + math.log1p(math.exp(lb - la))


# -- the alpha series ---------------------------------------------------------

_ALPHA_MAX_TERMS = 64


def jung_alpha(x: float, tol: float = 1e-15) -> float:
    """Value of sum_{n>=1} x^{-(2^n - 1)} for x > 1."""
    return jung_alpha_terms(x, tol)[0]


def jung_alpha_terms(x: float, tol: float = 1e-15) -> tuple[float, int]:
    """The series value together with the number of terms taken.

    The n-th term is x^{-(2^n - 1)} (the telescoped product of squared
    powers), so terms decay doubly exponentially; summation stops when the
    next term falls below ``tol`` relative to the running sum, with a hard
    cap of 64 terms.
    """
    if not (x > 1.0):
        raise SeriesDivergenceError(f"alpha series needs x > 1, got {x}")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    total = 0.0
    terms = 0
    exponent = 1  # 2^n - 1
    for _ in range(_ALPHA_MAX_TERMS):
        term = x ** (-exponent)
        total += term
        terms += 1
        exponent = 2 * exponent + 1
        if term < tol * total or term == 0.0:
            break
    return total, terms


# -- the sandwich bound --------------------------------------------------------


@dataclass(frozen=True)
class SandwichCheck:
    """One grid point of the relative-error sandwich
    (1-delta)^alpha(x) <= a^x / f(x) <= (1+delta)^alpha(x)."""

    x: float
    delta: float
    alpha: float
    lower: float
    upper: float
    ratio: float
    holds: bool

    def to_obj(self) -> dict:
        return {
            "x": self.x,
            "delta": self.delta,
            "alpha": self.alpha,
            "lower": self.lower,
            "upper": self.upper,
            "ratio": self.ratio,
            "holds": self.holds,
        }


CSV_COLUMNS = ("x", "alpha", "lower", "ratio", "upper", "holds")


def sandwich_csv_rows(checks: Sequence[SandwichCheck]) -> list[list]:
    return [[c.x, c.alpha, c.lower, c.ratio, c.upper, c.holds] for c in checks]


def jung_sandwich(
    inst: Instance,
    delta: float,
    grid: Sequence[float] | None = None,
    rel_tol: float = 1e-9,
    config: PipelineConfig | None = None,
) -> list[SandwichCheck]:
    """Sandwich checks for a positive-real instance with g the identity.

    The base a is estimated as exp(T(1)) from the recovered limit, so an
    exact input f = a^x passes with ratio identically 1.  The instance
    must satisfy the constant-delta ratio hypothesis on its sample;
    that is validated before any recovery runs.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta}")
    if inst.semigroup.kind != POS_REAL or not isinstance(inst.g, IdentityMap):
        raise ValueError("the sandwich bound needs a pos_real instance with g = identity")
    if not isinstance(inst.psi, ConstantBound) or inst.psi.delta > delta + 1e-15:
        raise ValueError("instance bound must be a constant <= delta")

    validation = validate_instance(inst, orbit_depth=1)
    if not validation.hypothesis_holds:
        raise SuperstabError(
            f"constant-delta hypothesis fails on the sample "
            f"(worst violation {validation.worst_violation})"
        )

    report = run_superstability(inst, config or PipelineConfig())
    if report.verdict is not Verdict.SUPERSTABLE_RECOVERED or report.limit is None:
        raise SuperstabError(f"recovery did not complete: verdict {report.verdict.value}")
    identity = inst.identity()
    log_a = report.limit.values[identity]

    xs = list(grid) if grid is not None else [p.real for p in inst.grid]
    checks = []
    for x in xs:
        if not (x > 1.0):
            continue
        alpha = jung_alpha(x)
        lower = (1.0 - delta) ** alpha
        upper = (1.0 + delta) ** alpha
        ratio = math.exp(x * log_a - eval_log_f(inst, Element.from_real(x)))
        holds = (ratio >= lower * (1.0 - rel_tol)) and (ratio <= upper * (1.0 + rel_tol))
        checks.append(
            SandwichCheck(
                x=x, delta=delta, alpha=alpha, lower=lower, upper=upper,
                ratio=ratio, holds=holds,
            )
        )
    if not checks:
        raise ValueError("no grid point with x > 1 to check")
    return checks
