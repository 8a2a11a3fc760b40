"""Problem instances: the function f (kept in log-domain), the exponent
map g, the two-sided bound psi, and the sample grid they are checked on.

An instance bundles everything the recovery pipeline needs.  All f values
are represented as ln f and never exponentiated against deep orbits, so
an instance stays evaluable along a^n y even when f itself would overflow
immediately.

Analytic families get vectorized evaluators (numpy arrays over whole
orbits and pair grids); table-backed variants fall back to per-element
lookups through canonical serialized keys.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AnchorError, CoverageError, OrbitRangeError
from .semigroup import (
    FREE_MONOID,
    POS_REAL,
    Element,
    SemigroupDescriptor,
    canonical_key,
    combine,
    orbit_elements,
    power,
)

# a pair is flagged only when it exceeds its bound by more than this,
# relative to the bound's own scale; log/exp round-trips sit well below
HYPOTHESIS_REL_TOL = 1e-9

_LOG_RANGE_LIMIT = 700.0  # beyond this, exp() leaves float64


# -- multiplicative maps ----------------------------------------------------
#
# The common map m behind the analytic families: m(y) = y on positive
# reals, m(y) = prod_i bases[i]^{e_i(y)} on the free monoid.  Negative
# bases are allowed (the map then alternates sign along orbits).


def _mult_log_sign(bases: tuple[float, ...], exps: tuple[int, ...]) -> tuple[float, int]:
    logmag = 0.0
    parity = 0
    for b, e in zip(bases, exps):
        logmag += e * math.log(abs(b))
        if b < 0:
            parity += e
    return logmag, (-1 if parity % 2 else 1)


def _mult_value(bases: tuple[float, ...], exps: tuple[int, ...]) -> float:
    logmag, sign = _mult_log_sign(bases, exps)
    if logmag > _LOG_RANGE_LIMIT:
        raise OrbitRangeError("multiplicative map value exceeds float range; reduce the orbit depth")
    return sign * math.exp(logmag)


def map_value(semigroup: SemigroupDescriptor, bases: tuple[float, ...], x: Element) -> float:
    if semigroup.kind == POS_REAL:
        return x.real
    return _mult_value(bases, x.exp)


# -- function specs ---------------------------------------------------------


@dataclass(frozen=True)
class ExactExponential:
    """ln f(y) = c * m(y) with m the multiplicative map above.

    These are precisely the exact solutions of f(xy) = f(y)^g(x) when g
    equals the same map m (identity on positive reals, mult_form with the
    same bases on the free monoid).
    """

    c: float
    bases: tuple[float, ...] = ()

    kind = "exact_exponential"

    def to_obj(self) -> dict:
        obj = {"kind": self.kind, "c": self.c}
        if self.bases:
            obj["bases"] = list(self.bases)
        return obj


@dataclass(frozen=True)
class Perturbed:
    """An exact family plus a named bounded log-perturbation.

    Families:

    * ``inv_square_log`` -- sign * ln(1 + amplitude / m(y)^2); decays to 0
      along anchor orbits, so the recovered limit is the base solution;
    * ``sin_log``        -- amplitude * sin(frequency * t(y)) with t the raw
      value (pos_real) or the exponent sum (free monoid).
    """

    base: ExactExponential
    family: str
    amplitude: float
    sign: int = -1
    frequency: float = 1.0

    kind = "perturbed"

    def __post_init__(self):
        if self.family not in ("inv_square_log", "sin_log"):
            raise ValueError(f"unknown perturbation family {self.family!r}")
        if self.amplitude < 0:
            raise ValueError("perturbation amplitude must be nonnegative")
        if self.sign not in (-1, 1):
            raise ValueError("perturbation sign must be +1 or -1")

    def to_obj(self) -> dict:
        pert: dict = {"family": self.family, "amplitude": self.amplitude}
        if self.family == "inv_square_log":
            pert["sign"] = self.sign
        else:
            pert["frequency"] = self.frequency
        return {"kind": self.kind, "base": self.base.to_obj(), "perturbation": pert}


@dataclass(frozen=True)
class TableFunction:
    """f stored as explicit positive values on finitely many elements.

    Serializes as a JSON map keyed by the canonical element form; entries
    are kept in canonical key order so equal tables compare and emit
    identically regardless of construction order.
    """

    entries: tuple[tuple[Element, float], ...]
    orbit_depth: int

    kind = "table"

    def __post_init__(self):
        for x, v in self.entries:
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"table value for {canonical_key(x)} must be finite and > 0")
        ordered = tuple(sorted(self.entries, key=lambda item: canonical_key(item[0])))
        object.__setattr__(self, "entries", ordered)
        object.__setattr__(self, "_lookup", {canonical_key(x): v for x, v in ordered})

    def value_at(self, x: Element) -> float:
        key = canonical_key(x)
        try:
            return self._lookup[key]
        except KeyError:
            raise CoverageError(f"function table has no entry for element {key}", missing_key=key) from None

    def covers(self, x: Element) -> bool:
        return canonical_key(x) in self._lookup

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "orbit_depth": self.orbit_depth,
            "entries": {canonical_key(x): v for x, v in self.entries},
        }


FunctionSpec = ExactExponential | Perturbed | TableFunction


# -- exponent specs ---------------------------------------------------------


@dataclass(frozen=True)
class IdentityMap:
    """g(x) = x; positive reals only."""

    kind = "identity"

    def to_obj(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class LinearForm:
    """g(x) = sum_i weights[i] * e_i(x); free monoid only."""

    weights: tuple[float, ...]

    kind = "linear_form"

    def to_obj(self) -> dict:
        return {"kind": self.kind, "weights": list(self.weights)}


@dataclass(frozen=True)
class MultiplicativeForm:
    """g(x) = prod_i bases[i]^{e_i(x)}; free monoid only.

    This is the multiplicative-map family itself, the only g (besides the
    identity on positive reals) admitting nonconstant exact solutions.
    """

    bases: tuple[float, ...]

    kind = "mult_form"

    def __post_init__(self):
        if any(b == 0 for b in self.bases):
            raise ValueError("mult_form bases must be nonzero")

    def to_obj(self) -> dict:
        return {"kind": self.kind, "bases": list(self.bases)}


@dataclass(frozen=True)
class BoundedSin:
    """g(x) = amplitude * sin(frequency * t(x)); |g| <= amplitude everywhere."""

    amplitude: float
    frequency: float = 1.0

    kind = "bounded_sin"

    def to_obj(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "frequency": self.frequency}


@dataclass(frozen=True)
class TableExponent:
    entries: tuple[tuple[Element, float], ...]

    kind = "table"

    def __post_init__(self):
        ordered = tuple(sorted(self.entries, key=lambda item: canonical_key(item[0])))
        object.__setattr__(self, "entries", ordered)
        object.__setattr__(self, "_lookup", {canonical_key(x): v for x, v in ordered})

    def value_at(self, x: Element) -> float:
        key = canonical_key(x)
        try:
            return self._lookup[key]
        except KeyError:
            raise CoverageError(f"exponent table has no entry for element {key}", missing_key=key) from None

    def covers(self, x: Element) -> bool:
        return canonical_key(x) in self._lookup

    def to_obj(self) -> dict:
        return {"kind": self.kind, "entries": {canonical_key(x): v for x, v in self.entries}}


ExponentSpec = IdentityMap | LinearForm | MultiplicativeForm | BoundedSin | TableExponent


# -- bound specs ------------------------------------------------------------


@dataclass(frozen=True)
class ConstantBound:
    delta: float

    kind = "constant"

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError("constant bound delta must be finite and >= 0")

    def to_obj(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}


@dataclass(frozen=True)
class SeparableBound:
    """psi(x, y) = scale * |m(x)|^x_power * |m(y)|^y_power.

    Non-increasing along anchor orbits exactly when y_power <= 0 (anchors
    have |m(a)| > 1); the validator measures this rather than trusting it.
    """

    scale: float
    x_power: float
    y_power: float

    kind = "separable"

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("separable bound scale must be >= 0")

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "scale": self.scale,
            "x_power": self.x_power,
            "y_power": self.y_power,
        }


@dataclass(frozen=True)
class TableBound:
    entries: tuple[tuple[Element, Element, float], ...]

    kind = "table"

    def __post_init__(self):
        lookup = {(canonical_key(x), canonical_key(y)): v for x, y, v in self.entries}
        object.__setattr__(self, "_lookup", lookup)

    def value_at(self, x: Element, y: Element) -> float:
        key = (canonical_key(x), canonical_key(y))
        try:
            return self._lookup[key]
        except KeyError:
            raise CoverageError(f"bound table has no entry for pair {key}", missing_key=str(key)) from None

    def to_obj(self) -> dict:
        return {"kind": self.kind, "entries": [[x.to_obj(), y.to_obj(), v] for x, y, v in self.entries]}


BoundSpec = ConstantBound | SeparableBound | TableBound


# -- the instance -----------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    semigroup: SemigroupDescriptor
    f: FunctionSpec
    g: ExponentSpec
    psi: BoundSpec
    grid: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if not self.grid:
            raise ValueError("instance grid must be nonempty")
        for p in self.grid:
            self.semigroup.ensure_member(p)
        kind = self.semigroup.kind
        arity = self.semigroup.arity
        if isinstance(self.g, IdentityMap) and kind != POS_REAL:
            raise ValueError("identity exponent map is defined on pos_real semigroups only")
        if isinstance(self.g, (LinearForm, MultiplicativeForm)):
            if kind != FREE_MONOID:
                raise ValueError(f"{self.g.kind} exponent map needs a free_monoid semigroup")
            n = len(self.g.weights if isinstance(self.g, LinearForm) else self.g.bases)
            if n != arity:
                raise ValueError(f"exponent map arity {n} does not match semigroup arity {arity}")
        base = self.f.base if isinstance(self.f, Perturbed) else self.f
        if isinstance(base, ExactExponential) and kind == FREE_MONOID and len(base.bases) != arity:
            raise ValueError("exact_exponential on a free monoid needs one base per generator")

    @property
    def has_tables(self) -> bool:
        return (
            isinstance(self.f, TableFunction)
            or isinstance(self.g, TableExponent)
            or isinstance(self.psi, TableBound)
        )

    def identity(self) -> Element:
        return self.semigroup.identity()

    def to_obj(self) -> dict:
        return {
            "schema": "superstab/instance/v1",
            "semigroup": self.semigroup.to_obj(),
            "f": self.f.to_obj(),
            "g": self.g.to_obj(),
            "psi": self.psi.to_obj(),
            "grid": [p.to_obj() for p in self.grid],
        }


# -- scalar evaluation ------------------------------------------------------


def _f_bases(f: FunctionSpec) -> tuple[float, ...]:
    base = f.base if isinstance(f, Perturbed) else f
    return base.bases if isinstance(base, ExactExponential) else ()


def eval_log_f(inst: Instance, x: Element) -> float:
    """ln f(x); raises CoverageError on a table miss, OrbitRangeError when
    the value cannot be represented."""
    inst.semigroup.ensure_member(x)
    f = inst.f
    if isinstance(f, TableFunction):
        return math.log(f.value_at(x))
    if isinstance(f, ExactExponential):
        value = f.c * map_value(inst.semigroup, f.bases, x)
        if not math.isfinite(value):
            raise OrbitRangeError("ln f overflowed; reduce the orbit depth")
        return value
    base_val = eval_log_f_spec(inst.semigroup, f.base, x)
    return base_val + _perturbation_term(inst.semigroup, f, x)


def eval_log_f_spec(semigroup: SemigroupDescriptor, f: ExactExponential, x: Element) -> float:
    if f.c == 0.0:
        return 0.0
    value = f.c * map_value(semigroup, f.bases, x)
    if not math.isfinite(value):
        raise OrbitRangeError("ln f overflowed; reduce the orbit depth")
    return value


def _perturbation_term(semigroup: SemigroupDescriptor, f: Perturbed, x: Element) -> float:
    if f.family == "inv_square_log":
        # computed from the squared reciprocal so huge orbit points decay
        # to a zero term instead of overflowing
        if semigroup.kind == POS_REAL:
            inv2 = 1.0 / (x.real * x.real)
        else:
            logmag, _ = _mult_log_sign(f.base.bases, x.exp)
            inv2 = math.exp(-2.0 * logmag)
        return f.sign * math.log1p(f.amplitude * inv2)
    t = x.real if semigroup.kind == POS_REAL else float(sum(x.exp))
    return f.amplitude * math.sin(f.frequency * t)


def eval_g(inst: Instance, x: Element) -> float:
    inst.semigroup.ensure_member(x)
    g = inst.g
    if isinstance(g, IdentityMap):
        return x.real
    if isinstance(g, LinearForm):
        total = 0.0
        for w, e in zip(g.weights, x.exp):
            total += w * e
        return total
    if isinstance(g, MultiplicativeForm):
        return _mult_value(g.bases, x.exp)
    if isinstance(g, BoundedSin):
        t = x.real if inst.semigroup.kind == POS_REAL else float(sum(x.exp))
        return g.amplitude * math.sin(g.frequency * t)
    return g.value_at(x)


def eval_psi(inst: Instance, x: Element, y: Element, tilde: bool = False) -> float:
    """psi(x, y), or 1 + psi(x, y) when ``tilde`` is set."""
    psi = inst.psi
    if isinstance(psi, ConstantBound):
        value = psi.delta
    elif isinstance(psi, SeparableBound):
        mx = abs(map_value(inst.semigroup, _f_bases(inst.f), x))
        my = abs(map_value(inst.semigroup, _f_bases(inst.f), y))
        value = psi.scale * mx**psi.x_power * my**psi.y_power
    else:
        value = psi.value_at(x, y)
    return 1.0 + value if tilde else value


def anchor_candidates(inst: Instance) -> list[tuple[Element, float]]:
    """Grid elements with |g| > 1, sorted by descending |g|.

    Ties break on the serialized element form so reports are stable.
    """
    found = []
    for p in inst.grid:
        gv = eval_g(inst, p)
        if abs(gv) > 1.0:
            found.append((p, gv))
    found.sort(key=lambda item: (-abs(item[1]), canonical_key(item[0])))
    return found


# -- vectorized orbit/pair tables -------------------------------------------


def _pos_orbit_values(a: Element, points: list[Element], depth: int) -> np.ndarray:
    # same operations as the canonical element path: a**k, then one multiply
    try:
        pows = np.array([a.real**k for k in range(depth + 1)], dtype=np.float64)
    except OverflowError:
        raise OrbitRangeError("anchor power left the float range; reduce the depth") from None
    vals = np.array([p.real for p in points], dtype=np.float64)
    return pows[:, None] * vals[None, :]


def _free_orbit_logmag_sign(
    bases: tuple[float, ...], a: Element, points: list[Element], depth: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    logw = [math.log(abs(b)) for b in bases]
    neg = [b < 0 for b in bases]
    la = 0.0
    pa = 0
    for i, e in enumerate(a.exp):
        la += e * logw[i]
        if neg[i]:
            pa += e
    lp = np.zeros(len(points), dtype=np.float64)
    pp = np.zeros(len(points), dtype=np.int64)
    for j, p in enumerate(points):
        acc = 0.0
        par = 0
        for i, e in enumerate(p.exp):
            acc += e * logw[i]
            if neg[i]:
                par += e
        lp[j] = acc
        pp[j] = par
    levels = np.arange(depth + 1, dtype=np.float64)
    logmag = levels[:, None] * la + lp[None, :]
    parity = (np.arange(depth + 1, dtype=np.int64)[:, None] * pa + pp[None, :]) % 2
    signs = 1.0 - 2.0 * parity
    esum_a = float(sum(a.exp))
    esums = np.array([float(sum(p.exp)) for p in points], dtype=np.float64)
    esum = np.arange(depth + 1, dtype=np.float64)[:, None] * esum_a + esums[None, :]
    return logmag, signs, esum


def _apply_log_f(inst: Instance, raw, logmag, signs, esum) -> np.ndarray:
    """Evaluate ln f on a prepared batch (pos_real: raw values; free: log
    magnitudes + signs of the multiplicative map, plus exponent sums)."""
    f = inst.f
    base = f.base if isinstance(f, Perturbed) else f
    pos = inst.semigroup.kind == POS_REAL
    if base.c == 0.0:
        out = np.zeros_like(raw if pos else logmag)
    else:
        m = raw if pos else signs * np.exp(logmag)
        out = base.c * m
        if not np.all(np.isfinite(out)):
            raise OrbitRangeError("ln f overflowed along the orbit; reduce the depth")
    if isinstance(f, Perturbed):
        if f.family == "inv_square_log":
            inv2 = 1.0 / (raw * raw) if pos else np.exp(-2.0 * logmag)
            out = out + f.sign * np.log1p(f.amplitude * inv2)
        else:
            t = raw if pos else esum
            out = out + f.amplitude * np.sin(f.frequency * t)
    if not np.all(np.isfinite(out)):
        raise OrbitRangeError("ln f is not finite along the orbit; reduce the depth")
    return out


def orbit_log_f(inst: Instance, a: Element, points: list[Element], depth: int) -> np.ndarray:
    """Table of ln f(a^k y_j), shape (depth+1, len(points))."""
    if isinstance(inst.f, TableFunction):
        out = np.empty((depth + 1, len(points)), dtype=np.float64)
        for j, p in enumerate(points):
            for k, z in enumerate(orbit_elements(inst.semigroup, a, p, depth)):
                out[k, j] = math.log(inst.f.value_at(z))
        return out
    if inst.semigroup.kind == POS_REAL:
        raw = _pos_orbit_values(a, points, depth)
        return _apply_log_f(inst, raw, None, None, None)
    logmag, signs, esum = _free_orbit_logmag_sign(_f_bases(inst.f), a, points, depth)
    return _apply_log_f(inst, None, logmag, signs, esum)


def log_f_values(inst: Instance, points: list[Element]) -> np.ndarray:
    """ln f on a list of points (row 0 of any orbit table)."""
    if isinstance(inst.f, TableFunction):
        return np.array([math.log(inst.f.value_at(p)) for p in points], dtype=np.float64)
    if inst.semigroup.kind == POS_REAL:
        raw = np.array([p.real for p in points], dtype=np.float64)[None, :]
        return _apply_log_f(inst, raw, None, None, None)[0]
    logmag, signs, esum = _free_orbit_logmag_sign(
        _f_bases(inst.f), inst.semigroup.identity(), points, 0
    )
    return _apply_log_f(inst, None, logmag, signs, esum)[0]


def g_values(inst: Instance, points: list[Element]) -> np.ndarray:
    return np.array([eval_g(inst, p) for p in points], dtype=np.float64)


def orbit_psi_tilde(inst: Instance, a: Element, points: list[Element], depth: int) -> np.ndarray:
    """Table of 1 + psi(a, a^k y_j) for k = 0..depth-1, shape (depth, len(points))."""
    m = len(points)
    psi = inst.psi
    if isinstance(psi, ConstantBound):
        return np.full((depth, m), 1.0 + psi.delta, dtype=np.float64)
    if isinstance(psi, SeparableBound):
        bases = _f_bases(inst.f)
        ux = psi.scale * abs(map_value(inst.semigroup, bases, a)) ** psi.x_power
        if inst.semigroup.kind == POS_REAL:
            absm = _pos_orbit_values(a, points, depth - 1)
        else:
            logmag, _, _ = _free_orbit_logmag_sign(bases, a, points, depth - 1)
            absm = np.exp(logmag)
        return 1.0 + ux * absm**psi.y_power
    out = np.empty((depth, m), dtype=np.float64)
    for j, p in enumerate(points):
        for k, z in enumerate(orbit_elements(inst.semigroup, a, p, depth - 1)):
            out[k, j] = 1.0 + psi.value_at(a, z)
    return out


# -- hypothesis validation --------------------------------------------------


@dataclass(frozen=True)
class ValidationFailure:
    kind: str  # "ratio" | "monotonicity" | "closure"
    x: Element | None
    y: Element | None
    anchor: Element | None
    amount: float

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "x": None if self.x is None else self.x.to_obj(),
            "y": None if self.y is None else self.y.to_obj(),
            "anchor": None if self.anchor is None else self.anchor.to_obj(),
            "amount": self.amount,
        }


@dataclass(frozen=True)
class ValidationReport:
    hypothesis_holds: bool
    worst_violation: float
    monotonicity_holds: bool
    anchor_set_nonempty: bool
    checked_pairs: int
    skipped_pairs: int
    failures: tuple[ValidationFailure, ...]
    per_anchor_monotonicity: tuple[tuple[str, bool], ...]
    orbit_closure_ok: bool

    def to_obj(self) -> dict:
        return {
            "hypothesis_holds": self.hypothesis_holds,
            "worst_violation": self.worst_violation,
            "monotonicity_holds": self.monotonicity_holds,
            "anchor_set_nonempty": self.anchor_set_nonempty,
            "checked_pairs": self.checked_pairs,
            "skipped_pairs": self.skipped_pairs,
            "failures": [f.to_obj() for f in self.failures],
            "per_anchor_monotonicity": [[k, ok] for k, ok in self.per_anchor_monotonicity],
            "orbit_closure_ok": self.orbit_closure_ok,
        }


_MAX_REPORTED_FAILURES = 50


def validate_instance(
    inst: Instance, anchors: list[Element] | None = None, orbit_depth: int = 3
) -> ValidationReport:
    """Check the standing hypotheses on the sample grid.

    Verifies, over all grid pairs (x, y) and over y pushed along each
    anchor orbit up to ``orbit_depth``:

    * the two-sided ratio condition  0 <= f(xy)/f(y)^g(x) - 1 <= psi(x, y);
    * monotonicity  psi(x, a y) <= psi(x, y);
    * that the anchor candidate set is nonempty;
    * for table-backed f, closure of the table under the anchor orbits.

    The report is explicitly sample-relative: pairs whose product (or
    orbit point) is outside a table's coverage are skipped and counted.
    """
    candidates = anchor_candidates(inst)
    if anchors is None or not anchors:
        anchors = [a for a, _ in candidates]
    else:
        candidate_keys = {canonical_key(a) for a, _ in candidates}
        for a in anchors:
            if canonical_key(a) not in candidate_keys:
                raise AnchorError(f"element {canonical_key(a)} is not an anchor candidate (|g| <= 1)")

    grid = list(inst.grid)
    failures: list[ValidationFailure] = []
    worst = -math.inf
    checked = 0
    skipped = 0
    closure_ok = True

    # table closure along anchor orbits
    if isinstance(inst.f, TableFunction):
        depth_limit = min(orbit_depth, inst.f.orbit_depth)
        for a in anchors:
            for y in grid:
                for z in orbit_elements(inst.semigroup, a, y, depth_limit):
                    if not inst.f.covers(z):
                        closure_ok = False
                        failures.append(ValidationFailure("closure", None, z, a, math.inf))
                        break

    if inst.has_tables:
        worst, checked, skipped = _validate_pairs_scalar(
            inst, anchors, orbit_depth, failures, worst
        )
    else:
        worst, checked = _validate_pairs_vector(inst, anchors, orbit_depth, failures, worst)

    mono_holds, per_anchor = _validate_monotonicity(inst, anchors, orbit_depth, failures)

    ratio_failures = [f for f in failures if f.kind == "ratio"]
    report = ValidationReport(
        hypothesis_holds=(not ratio_failures) and closure_ok,
        worst_violation=worst if worst > -math.inf else 0.0,
        monotonicity_holds=mono_holds,
        anchor_set_nonempty=bool(candidates),
        checked_pairs=checked,
        skipped_pairs=skipped,
        failures=tuple(failures[:_MAX_REPORTED_FAILURES]),
        per_anchor_monotonicity=tuple(per_anchor),
        orbit_closure_ok=closure_ok,
    )
    return report


def _pair_tolerances(psi_vals: np.ndarray) -> np.ndarray:
    return HYPOTHESIS_REL_TOL * np.maximum(1.0, 1.0 + psi_vals)


def _validate_pairs_vector(inst, anchors, orbit_depth, failures, worst):
    """Ratio-condition sweep on flat arrays; elements are only materialized
    for failure records."""
    grid = list(inst.grid)
    n = len(grid)
    g_grid = g_values(inst, grid)
    pos = inst.semigroup.kind == POS_REAL
    checked = 0

    if pos:
        vals = np.array([p.real for p in grid], dtype=np.float64)
        g_abs_x = np.abs(vals)  # |m(x)| for separable bounds
        base_m = vals
    else:
        logmag, parity, esum = _free_point_stats(_f_bases(inst.f), grid)
        anchor_stats = {}
        g_abs_x = np.exp(logmag)

    # level 0 is the plain grid; deeper levels replace y by a^k y
    level_specs: list[tuple[Element | None, int]] = [(None, 0)]
    for a in anchors:
        level_specs.extend((a, k) for k in range(1, orbit_depth + 1))

    for anchor, k in level_specs:
        if pos:
            shift = anchor.real**k if anchor is not None else 1.0
            y_vals = shift * vals
            prod = vals[:, None] * y_vals[None, :]
            log_fy = _apply_log_f(inst, y_vals, None, None, None)
            log_fxy = _apply_log_f(inst, prod, None, None, None).ravel()
            abs_m_y = np.abs(y_vals)
        else:
            if anchor is not None and anchor not in anchor_stats:
                anchor_stats[anchor] = _free_point_stats(_f_bases(inst.f), [anchor])
            if anchor is None:
                la, pa, ea = 0.0, 0, 0.0
            else:
                st = anchor_stats[anchor]
                la, pa, ea = float(st[0][0]), int(st[1][0]), float(st[2][0])
            y_logmag = logmag + k * la
            y_parity = parity + k * pa
            y_esum = esum + k * ea
            log_fy = _apply_log_f(
                inst, None, y_logmag, 1.0 - 2.0 * (y_parity % 2), y_esum
            )
            log_fxy = _apply_log_f(
                inst,
                None,
                logmag[:, None] + y_logmag[None, :],
                1.0 - 2.0 * ((parity[:, None] + y_parity[None, :]) % 2),
                esum[:, None] + y_esum[None, :],
            ).ravel()
            abs_m_y = np.exp(y_logmag)

        psi_vals = _psi_matrix_from_stats(inst, g_abs_x, abs_m_y).ravel()
        _, viol = kernels.hypothesis_violations(
            log_fxy, np.repeat(g_grid, n), np.tile(log_fy, n), psi_vals
        )
        checked += viol.size
        worst = max(worst, float(viol.max()))
        tol = _pair_tolerances(psi_vals)
        bad = np.nonzero(viol > tol)[0]
        if bad.size:
            shifted = _shifted_grid_elements(inst, anchor, k, grid)
            for flat in bad[:_MAX_REPORTED_FAILURES]:
                i, j = divmod(int(flat), n)
                failures.append(
                    ValidationFailure("ratio", grid[i], shifted[j], anchor, float(viol[flat]))
                )
    return worst, checked


def _free_point_stats(bases, points):
    logw = [math.log(abs(b)) for b in bases]
    neg = [b < 0 for b in bases]
    logmag = np.zeros(len(points), dtype=np.float64)
    parity = np.zeros(len(points), dtype=np.int64)
    esum = np.zeros(len(points), dtype=np.float64)
    for j, p in enumerate(points):
        acc = 0.0
        par = 0
        for i, e in enumerate(p.exp):
            acc += e * logw[i]
            if neg[i]:
                par += e
        logmag[j] = acc
        parity[j] = par
        esum[j] = float(sum(p.exp))
    return logmag, parity, esum


def _psi_matrix_from_stats(inst, abs_m_x: np.ndarray, abs_m_y: np.ndarray) -> np.ndarray:
    psi = inst.psi
    if isinstance(psi, ConstantBound):
        return np.full((abs_m_x.size, abs_m_y.size), psi.delta, dtype=np.float64)
    ux = psi.scale * abs_m_x**psi.x_power
    return ux[:, None] * (abs_m_y**psi.y_power)[None, :]


def _shifted_grid_elements(inst, anchor, k, grid):
    if anchor is None:
        return grid
    ak = power(inst.semigroup, anchor, k)
    return [combine(inst.semigroup, ak, y) for y in grid]


def _validate_pairs_scalar(inst, anchors, orbit_depth, failures, worst):
    grid = list(inst.grid)
    checked = 0
    skipped = 0
    y_sets: list[tuple[Element | None, list[Element]]] = [(None, grid)]
    for a in anchors:
        for k in range(1, orbit_depth + 1):
            ak = power(inst.semigroup, a, k)
            y_sets.append((a, [combine(inst.semigroup, ak, y) for y in grid]))
    for anchor, ys in y_sets:
        for x in grid:
            try:
                gx = eval_g(inst, x)
            except CoverageError:
                skipped += len(ys)
                continue
            for y in ys:
                try:
                    lfy = eval_log_f(inst, y)
                    lfxy = eval_log_f(inst, combine(inst.semigroup, x, y))
                    psi_val = eval_psi(inst, x, y)
                except CoverageError:
                    skipped += 1
                    continue
                r = math.expm1(lfxy - gx * lfy)
                viol = max(-r, r - psi_val)
                checked += 1
                worst = max(worst, viol)
                if viol > HYPOTHESIS_REL_TOL * max(1.0, 1.0 + psi_val):
                    failures.append(ValidationFailure("ratio", x, y, anchor, viol))
    return worst, checked, skipped


def _validate_monotonicity(inst, anchors, orbit_depth, failures):
    grid = list(inst.grid)
    per_anchor: list[tuple[str, bool]] = []
    all_ok = True
    constant = isinstance(inst.psi, ConstantBound)
    separable = isinstance(inst.psi, SeparableBound)
    for a in anchors:
        if constant:
            # psi(x, ay) = psi(x, y) identically
            per_anchor.append((canonical_key(a), True))
            continue
        ok = True
        if separable:
            # the x factor is a fixed nonnegative scale, so monotonicity
            # reduces to the y factor along each orbit; the reported
            # witness pair uses the first grid x
            for y in grid:
                prev_y = y
                prev = eval_psi(inst, grid[0], prev_y)
                for _ in range(orbit_depth):
                    next_y = combine(inst.semigroup, a, prev_y)
                    nxt = eval_psi(inst, grid[0], next_y)
                    gap = nxt - prev
                    if gap > HYPOTHESIS_REL_TOL * max(1.0, abs(prev)):
                        ok = False
                        failures.append(ValidationFailure("monotonicity", grid[0], prev_y, a, gap))
                    prev_y, prev = next_y, nxt
        else:
            for x in grid:
                for y in grid:
                    prev_y = y
                    try:
                        prev = eval_psi(inst, x, prev_y)
                    except CoverageError:
                        continue
                    for _ in range(orbit_depth):
                        next_y = combine(inst.semigroup, a, prev_y)
                        try:
                            nxt = eval_psi(inst, x, next_y)
                        except CoverageError:
                            break
                        gap = nxt - prev
                        if gap > HYPOTHESIS_REL_TOL * max(1.0, abs(prev)):
                            ok = False
                            failures.append(ValidationFailure("monotonicity", x, prev_y, a, gap))
                        prev_y, prev = next_y, nxt
        per_anchor.append((canonical_key(a), ok))
        all_ok = all_ok and ok
    return all_ok, per_anchor


# -- JSON loading -----------------------------------------------------------


def function_spec_from_obj(obj: dict) -> FunctionSpec:
    kind = obj["kind"]
    if kind == "exact_exponential":
        return ExactExponential(c=float(obj["c"]), bases=tuple(obj.get("bases", ())))
    if kind == "perturbed":
        base = function_spec_from_obj(obj["base"])
        if not isinstance(base, ExactExponential):
            raise ValueError("perturbed base must be an exact_exponential spec")
        pert = obj["perturbation"]
        family = pert["family"]
        if family == "inv_square_log":
            return Perturbed(
                base=base,
                family=family,
                amplitude=float(pert["amplitude"]),
                sign=int(pert.get("sign", -1)),
            )
        return Perturbed(
            base=base,
            family=family,
            amplitude=float(pert["amplitude"]),
            frequency=float(pert.get("frequency", 1.0)),
        )
    if kind == "table":
        entries = tuple(
            (Element.from_obj(json.loads(key)), float(v)) for key, v in obj["entries"].items()
        )
        return TableFunction(entries=entries, orbit_depth=int(obj["orbit_depth"]))
    raise ValueError(f"unknown function spec kind {kind!r}")


def exponent_spec_from_obj(obj: dict) -> ExponentSpec:
    kind = obj["kind"]
    if kind == "identity":
        return IdentityMap()
    if kind == "linear_form":
        return LinearForm(weights=tuple(float(w) for w in obj["weights"]))
    if kind == "mult_form":
        return MultiplicativeForm(bases=tuple(float(b) for b in obj["bases"]))
    if kind == "bounded_sin":
        return BoundedSin(amplitude=float(obj["amplitude"]), frequency=float(obj.get("frequency", 1.0)))
    if kind == "table":
        return TableExponent(
            entries=tuple(
                (Element.from_obj(json.loads(key)), float(v)) for key, v in obj["entries"].items()
            )
        )
    raise ValueError(f"unknown exponent spec kind {kind!r}")


def bound_spec_from_obj(obj: dict) -> BoundSpec:
    kind = obj["kind"]
    if kind == "constant":
        return ConstantBound(delta=float(obj["delta"]))
    if kind == "separable":
        return SeparableBound(
            scale=float(obj["scale"]),
            x_power=float(obj["x_power"]),
            y_power=float(obj["y_power"]),
        )
    if kind == "table":
        return TableBound(
            entries=tuple(
                (Element.from_obj(x), Element.from_obj(y), float(v)) for x, y, v in obj["entries"]
            )
        )
    raise ValueError(f"unknown bound spec kind {kind!r}")


def instance_from_obj(obj: dict) -> Instance:
    return Instance(
        semigroup=SemigroupDescriptor.from_obj(obj["semigroup"]),
        f=function_spec_from_obj(obj["f"]),
        g=exponent_spec_from_obj(obj["g"]),
        psi=bound_spec_from_obj(obj["psi"]),
        grid=tuple(Element.from_obj(e) for e in obj["grid"]),
    )
