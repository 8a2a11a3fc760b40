"""Certified fixed-point machinery for the anchored contraction.

For an anchor a with |g(a)| > 1 the operator (J_a h)(y) = h(ay)/g(a) is a
strict contraction with Lipschitz constant L = 1/|g(a)| under the
weighted sup-metric

    d(u, h) = sup_y |u(y) - h(y)| / (1 + psi(a, y)),

where distances may be +inf.  Iterating from ln f converges to the
anchored limit T_a, and every run emits a certificate with the measured
contraction ratios and the a-posteriori bound d(h0, T) <= d(J h0, h0)/(1 - L).

Finite-sample subtlety: on a finite point set the literal sup over the
base points alone does not obey the per-step contraction inequality (the
shifted point ay may fall outside the set).  Successive distances are
therefore measured over the orbit-extended domain, which shrinks by one
level per step; with the validated weight monotonicity this makes the
recorded ratio and geometric-decay guarantees theorems rather than
accidents of the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AnchorError, CoverageError, DomainMismatchError
from .instance import (
    Instance,
    eval_g,
    eval_log_f,
    eval_psi,
    orbit_log_f,
    orbit_psi_tilde,
)
from .semigroup import Element, canonical_key, combine, orbit_elements

DEFAULT_TOL = 1e-10
DEFAULT_N_MAX = 60

_WEIGHT_MONOTONE_TOL = 1e-12


class LogFunction:
    """A log-domain function known on finitely many elements.

    Thin immutable mapping Element -> float; insertion order is the
    deterministic reduction order for sups and serialization.
    """

    __slots__ = ("_mapping",)

    def __init__(self, mapping):
        self._mapping = dict(mapping)

    def __getitem__(self, x: Element) -> float:
        return self._mapping[x]

    def __contains__(self, x: Element) -> bool:
        return x in self._mapping

    def __len__(self) -> int:
        return len(self._mapping)

    def __iter__(self):
        return iter(self._mapping)

    @property
    def domain(self) -> tuple[Element, ...]:
        return tuple(self._mapping)

    def items(self):
        return self._mapping.items()

    def values_at(self, points) -> np.ndarray:
        return np.array([self._mapping[p] for p in points], dtype=np.float64)

    @classmethod
    def from_instance(cls, inst: Instance, points=None) -> "LogFunction":
        pts = list(points if points is not None else inst.grid)
        return cls((p, eval_log_f(inst, p)) for p in pts)


@dataclass(frozen=True)
class TraceStep:
    n: int
    distance: float
    ratio: float | None

    def to_obj(self) -> dict:
        return {"n": self.n, "distance": self.distance, "ratio": self.ratio}


@dataclass(frozen=True)
class IterationTrace:
    steps: tuple[TraceStep, ...]

    def to_obj(self) -> list:
        return [s.to_obj() for s in self.steps]


@dataclass(frozen=True)
class ContractionCertificate:
    lipschitz_bound: float
    measured_ratio: float
    aposteriori_bound: float
    final_distance: float
    iterations: int
    converged: bool

    def to_obj(self) -> dict:
        return {
            "lipschitz_bound": self.lipschitz_bound,
            "measured_ratio": self.measured_ratio,
            "aposteriori_bound": self.aposteriori_bound,
            "final_distance": self.final_distance,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _anchor_value(inst: Instance, a: Element) -> float:
    g_a = eval_g(inst, a)
    if abs(g_a) <= 1.0:
        raise AnchorError(f"|g(a)| = {abs(g_a)} <= 1 at {canonical_key(a)}; not a contraction anchor")
    return g_a


def apply_contraction(inst: Instance, a: Element, h: LogFunction) -> LogFunction:
    """One step of J_a: y -> h(ay)/g(a).

    Defined on every grid point (missing coverage there is an error) and
    on any further point of h's domain whose shift stays covered, so
    repeated application walks down an orbit-extended domain.
    """
    g_a = _anchor_value(inst, a)
    grid_set = set(inst.grid)
    out: dict[Element, float] = {}
    seen = set()
    for y in list(inst.grid) + list(h.domain):
        if y in seen:
            continue
        seen.add(y)
        ay = combine(inst.semigroup, a, y)
        if ay in h:
            out[y] = h[ay] / g_a
        elif y in grid_set:
            # grid points must stay covered; orbit-extension points may drop off
            raise CoverageError(
                f"contraction step needs h at {canonical_key(ay)}", missing_key=canonical_key(ay)
            )
    return LogFunction(out)


def generalized_distance(h1: LogFunction, h2: LogFunction, inst: Instance, a: Element) -> float:
    """Weighted sup-distance; returns +inf when any ratio is not finite."""
    if set(h1.domain) != set(h2.domain):
        raise DomainMismatchError("distance needs functions sharing one domain")
    worst = 0.0
    for y in h1.domain:
        gap = abs(h1[y] - h2[y]) / eval_psi(inst, a, y, tilde=True)
        if not math.isfinite(gap):
            return math.inf
        if gap > worst:
            worst = gap
    return worst


def _check_weight_monotone(P: np.ndarray, points, inst: Instance, a: Element) -> None:
    if P.shape[0] < 2:
        return
    gaps = P[1:, :] - P[:-1, :] * (1.0 + _WEIGHT_MONOTONE_TOL)
    bad = np.argwhere(gaps > _WEIGHT_MONOTONE_TOL)
    if bad.size:
        k, j = bad[0]
        raise ValueError(
            "weight 1+psi(a, .) increases along the anchor orbit "
            f"(anchor {canonical_key(a)}, point {canonical_key(points[j])}, level {int(k) + 1}); "
            "the contraction certificate would be unsound"
        )


def _run_iteration(O: np.ndarray, P: np.ndarray, g_a: float, tol: float):
    """Shared core: distances, stop index, iterate table."""
    d = kernels.successive_defect_sups(O, P, g_a, tol)
    if not math.isfinite(d[0]):
        raise ValueError(
            "initial contraction distance is infinite; the start function is out of scope"
        )
    stop = d.shape[0] - 1
    converged = bool(d[stop] < tol)
    iterations = stop + 1
    iterates = kernels.orbit_iterates(O, g_a)
    return d, stop, converged, iterations, iterates


def _build_trace(d: np.ndarray, stop: int) -> tuple[IterationTrace, float]:
    steps = []
    measured = 0.0
    for n in range(stop + 1):
        ratio = None
        if n >= 1 and d[n - 1] > 0.0:
            ratio = float(d[n] / d[n - 1])
            measured = max(measured, ratio)
        steps.append(TraceStep(n=n, distance=float(d[n]), ratio=ratio))
    return IterationTrace(steps=tuple(steps)), measured


def iterate_fixed_point(
    inst: Instance,
    a: Element,
    start: LogFunction | None = None,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    points=None,
) -> tuple[LogFunction, IterationTrace, ContractionCertificate]:
    """Iterate J_a from ln f (or ``start``) until the successive weighted
    distance drops below ``tol`` or ``n_max`` steps were taken.

    Returns the limit on the base points, the per-step trace, and a
    certificate.  Non-convergence within ``n_max`` is reported through
    ``certificate.converged``, not an exception.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    g_a = _anchor_value(inst, a)
    pts = list(points if points is not None else inst.grid)

    if start is None:
        O = orbit_log_f(inst, a, pts, n_max)
    else:
        O = np.empty((n_max + 1, len(pts)), dtype=np.float64)
        for j, p in enumerate(pts):
            for k, z in enumerate(orbit_elements(inst.semigroup, a, p, n_max)):
                if z not in start:
                    raise CoverageError(
                        f"start function lacks orbit point {canonical_key(z)}",
                        missing_key=canonical_key(z),
                    )
                O[k, j] = start[z]
    P = orbit_psi_tilde(inst, a, pts, n_max)
    _check_weight_monotone(P, pts, inst, a)
    return _finish_iteration(inst, a, pts, O, P, g_a, tol)


def _finish_iteration(inst, a, pts, O, P, g_a, tol):
    d, stop, converged, iterations, iterates = _run_iteration(O, P, g_a, tol)
    limit_values = iterates[iterations, :]
    limit = LogFunction(zip(pts, limit_values.tolist()))
    trace, measured = _build_trace(d, stop)

    lipschitz = 1.0 / abs(g_a)
    aposteriori = float(d[0] / (1.0 - lipschitz))
    final_distance = float(np.max(np.abs(O[0, :] - limit_values) / P[0, :]))
    if final_distance > aposteriori + tol:
        raise RuntimeError(
            "a-posteriori certificate violated: "
            f"d(h0, T) = {final_distance} > {aposteriori} + {tol}"
        )
    cert = ContractionCertificate(
        lipschitz_bound=lipschitz,
        measured_ratio=measured,
        aposteriori_bound=aposteriori,
        final_distance=final_distance,
        iterations=iterations,
        converged=converged,
    )
    return limit, trace, cert


def contraction_probe(
    inst: Instance, a: Element, h1: LogFunction, h2: LogFunction
) -> tuple[float, float]:
    """Distances (d(h1, h2), d(J h1, J h2)) for one contraction check."""
    before = generalized_distance(h1, h2, inst, a)
    after = generalized_distance(
        apply_contraction(inst, a, h1), apply_contraction(inst, a, h2), inst, a
    )
    return before, after


def verify_unique_limit(
    inst: Instance,
    a: Element,
    limit: LogFunction,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
    bump: float = 1.0,
) -> float:
    """Restart the iteration from ln f + bump * (1 + psi(a, .)) and return
    the weighted distance between the two limits.

    The restart start point sits at finite distance (exactly ``bump``)
    from ln f, so both runs must land on the same fixed point; callers
    assert the returned value is small (10 * tol is the customary gate).
    """
    g_a = _anchor_value(inst, a)
    pts = list(limit.domain)
    O = orbit_log_f(inst, a, pts, n_max)
    P_ext = orbit_psi_tilde(inst, a, pts, n_max + 1)
    P = P_ext[:n_max, :]
    _check_weight_monotone(P, pts, inst, a)
    O_bumped = O + bump * P_ext
    restarted, _, cert = _finish_iteration(inst, a, pts, O_bumped, P, g_a, tol)
    if not cert.converged:
        return math.inf
    gap = 0.0
    for y in pts:
        gap = max(gap, abs(restarted[y] - limit[y]) / eval_psi(inst, a, y, tilde=True))
    return gap
