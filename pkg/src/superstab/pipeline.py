"""End-to-end recovery pipeline with stage-by-stage certificates.

Given an instance whose hypothesis band holds on the sample, the pipeline
reconstructs the exact solution as the anchored contraction limit T and
certifies every quantitative claim along the way:

1. hypothesis validation on the sample (ratio band, weight monotonicity,
   nonempty anchor set);
2. sample-relative classification of g (bounded / unbounded / inconclusive);
3. anchored recovery per selected anchor, with contraction certificates
   and a restarted-iteration uniqueness check;
4. orbit defect bounds: |ln f(y a^n) - g(a)^n ln f(y)| against both the
   stepwise sum and its geometric closed form;
5. anchor independence: sup |T_a - T_b| over the grid;
6. the pointwise recovery bound |ln f(y) - T(y)| <= min_a (1+psi(a,y))/(|g(a)|-1);
7. the conclusion residual |T(xy) - g(x) T(y)| over grid pairs, compared
   with the same residual of the raw input.

Because any function satisfying the band globally with unbounded g is
already exact, perturbed inputs can only satisfy the hypothesis on the
finite sample; reports therefore carry an explicit ``hypothesis_scope``
qualifier instead of pretending to a global check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .engine import (
    DEFAULT_N_MAX,
    DEFAULT_TOL,
    ContractionCertificate,
    IterationTrace,
    LogFunction,
    iterate_fixed_point,
    verify_unique_limit,
)
from .errors import CoverageError, OrbitRangeError, PipelineStageError, SuperstabError
from .instance import (
    ExactExponential,
    Instance,
    TableFunction,
    ValidationReport,
    anchor_candidates,
    eval_g,
    eval_psi,
    log_f_values,
    orbit_log_f,
    orbit_psi_tilde,
    validate_instance,
)
from .semigroup import Element, canonical_key, combine, orbit_elements, power


class Verdict(str, Enum):
    SUPERSTABLE_RECOVERED = "SuperstableRecovered"
    BOUNDED_G = "BoundedG"
    HYPOTHESIS_FAILED = "HypothesisFailed"


class GClassification(str, Enum):
    BOUNDED = "Bounded"
    UNBOUNDED_ON_SAMPLE = "UnboundedOnSample"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class PipelineConfig:
    tol: float = DEFAULT_TOL
    n_max: int = DEFAULT_N_MAX
    anchor_count: int = 3
    bound_depth: int = 20
    validation_orbit_depth: int = 3
    conclusion_tol: float = 1e-8
    agreement_tol: float = 1e-8
    bound_tol: float = 1e-9
    growth_threshold: float = 1e6
    probe_depth: int = 60
    include_identity_pairs: bool = False
    strict_hypothesis: bool = True
    extend_products: bool = True
    verify_uniqueness: bool = True

    def to_obj(self) -> dict:
        return {
            "tol": self.tol,
            "n_max": self.n_max,
            "anchor_count": self.anchor_count,
            "bound_depth": self.bound_depth,
            "validation_orbit_depth": self.validation_orbit_depth,
            "conclusion_tol": self.conclusion_tol,
            "agreement_tol": self.agreement_tol,
            "bound_tol": self.bound_tol,
            "growth_threshold": self.growth_threshold,
            "probe_depth": self.probe_depth,
            "include_identity_pairs": self.include_identity_pairs,
            "strict_hypothesis": self.strict_hypothesis,
            "extend_products": self.extend_products,
            "verify_uniqueness": self.verify_uniqueness,
        }


@dataclass(frozen=True)
class BoundCheck:
    """One orbit defect against its geometric majorants at depth n."""

    anchor: Element
    y: Element
    n: int
    lhs: float
    stepwise: float
    rhs: float
    holds: bool
    slack: float

    def to_obj(self) -> dict:
        return {
            "anchor": self.anchor.to_obj(),
            "y": self.y.to_obj(),
            "n": self.n,
            "lhs": self.lhs,
            "stepwise": self.stepwise,
            "rhs": self.rhs,
            "holds": self.holds,
            "slack": self.slack,
        }


@dataclass(frozen=True)
class LimitFunction:
    """A recovered limit with its provenance."""

    anchor: Element
    g_value: float
    values: LogFunction
    certificate: ContractionCertificate
    trace: IterationTrace
    grid_size: int

    def to_obj(self) -> dict:
        items = list(self.values.items())
        return {
            "anchor": self.anchor.to_obj(),
            "g_value": self.g_value,
            "certificate": self.certificate.to_obj(),
            "trace": self.trace.to_obj(),
            "values": [[p.to_obj(), v] for p, v in items[: self.grid_size]],
            "extension_count": len(items) - self.grid_size,
        }


@dataclass(frozen=True)
class FinalBoundRow:
    element: Element
    bound: float
    gap: float
    holds: bool

    def to_obj(self) -> dict:
        return {
            "element": self.element.to_obj(),
            "bound": self.bound,
            "gap": self.gap,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class ConclusionSummary:
    residual: float
    raw_residual: float
    identity_residual: float
    pairs_checked: int
    pairs_skipped: int

    def to_obj(self) -> dict:
        return {
            "residual": self.residual,
            "raw_residual": self.raw_residual,
            "identity_residual": self.identity_residual,
            "pairs_checked": self.pairs_checked,
            "pairs_skipped": self.pairs_skipped,
        }


@dataclass(frozen=True)
class TheoremReport:
    verdict: Verdict
    failing_stage: str | None
    failure_detail: str | None
    hypothesis_scope: str
    g_classification: GClassification
    validation: ValidationReport
    anchors: tuple[tuple[Element, float], ...]
    limit: LimitFunction | None
    bound_checks: tuple[BoundCheck, ...]
    anchor_agreement: float | None
    final_bounds: tuple[FinalBoundRow, ...]
    conclusion: ConclusionSummary | None
    uniqueness_gap: float | None
    config: PipelineConfig = field(default_factory=PipelineConfig)

    def to_obj(self) -> dict:
        return {
            "schema": "superstab/report/v1",
            "verdict": self.verdict.value,
            "failing_stage": self.failing_stage,
            "failure_detail": self.failure_detail,
            "hypothesis_scope": self.hypothesis_scope,
            "g_classification": self.g_classification.value,
            "validation": self.validation.to_obj(),
            "anchors": [[a.to_obj(), g] for a, g in self.anchors],
            "limit": None if self.limit is None else self.limit.to_obj(),
            "bound_checks": {
                "count": len(self.bound_checks),
                "all_hold": all(c.holds for c in self.bound_checks),
                "min_slack": min((c.slack for c in self.bound_checks), default=0.0),
                "rows": [c.to_obj() for c in self.bound_checks],
            },
            "anchor_agreement": self.anchor_agreement,
            "final_bounds": [r.to_obj() for r in self.final_bounds],
            "conclusion": None if self.conclusion is None else self.conclusion.to_obj(),
            "uniqueness_gap": self.uniqueness_gap,
            "config": self.config.to_obj(),
        }


# -- individual operations --------------------------------------------------


def check_partial_bound(
    inst: Instance, a: Element, y: Element, n: int, tol: float = 1e-9
) -> BoundCheck:
    """Orbit defect |ln f(y a^n) - g(a)^n ln f(y)| against its majorants.

    Also verifies that the stepwise sum never exceeds its geometric
    closed form (the closed form majorizes via the monotone weight).
    """
    if n < 0:
        raise ValueError("orbit depth n must be >= 0")
    g_a = eval_g(inst, a)
    if abs(g_a) <= 1.0:
        raise SuperstabError(f"|g(a)| <= 1 at {canonical_key(a)}; not an anchor")
    O = orbit_log_f(inst, a, [y], n)
    P = orbit_psi_tilde(inst, a, [y], n)
    lhs_t, step_t, geo_t = kernels.partial_bound_tables(O, P, g_a)
    lhs = float(lhs_t[n, 0])
    stepwise = float(step_t[n, 0])
    rhs = float(geo_t[n, 0])
    if stepwise > rhs + tol * max(1.0, rhs):
        raise SuperstabError(
            f"stepwise bound {stepwise} exceeds its geometric closed form {rhs}; "
            "the weight is not monotone along this orbit"
        )
    return BoundCheck(
        anchor=a,
        y=y,
        n=n,
        lhs=lhs,
        stepwise=stepwise,
        rhs=rhs,
        holds=bool(lhs <= rhs + tol),
        slack=rhs - lhs,
    )


def check_anchor_independence(
    inst: Instance,
    a: Element,
    b: Element,
    tol: float = DEFAULT_TOL,
    n_max: int = DEFAULT_N_MAX,
) -> float:
    """sup over the grid of |T_a - T_b| for two converged recoveries."""
    limit_a, _, cert_a = iterate_fixed_point(inst, a, tol=tol, n_max=n_max)
    limit_b, _, cert_b = iterate_fixed_point(inst, b, tol=tol, n_max=n_max)
    if not (cert_a.converged and cert_b.converged):
        raise SuperstabError("anchor independence needs both recoveries to converge")
    return max(abs(limit_a[y] - limit_b[y]) for y in inst.grid)


def final_error_bound(inst: Instance, anchors: list[Element], y: Element) -> float:
    """min over the anchors of (1 + psi(a, y)) / (|g(a)| - 1)."""
    if not anchors:
        raise ValueError("final_error_bound needs a nonempty anchor list")
    best = math.inf
    for a in anchors:
        g_a = eval_g(inst, a)
        if abs(g_a) <= 1.0:
            raise SuperstabError(f"|g(a)| <= 1 at {canonical_key(a)}; not an anchor")
        best = min(best, eval_psi(inst, a, y, tilde=True) / (abs(g_a) - 1.0))
    return best


def _conclusion_details(
    inst: Instance, values: LogFunction, include_identity: bool
) -> ConclusionSummary:
    grid = list(inst.grid)
    identity = inst.identity()
    is_identity_pair: list[bool] = []
    prod_vals: list[float] = []
    y_vals: list[float] = []
    g_list: list[float] = []
    skipped = 0
    g_grid = [eval_g(inst, x) for x in grid]
    for i, x in enumerate(grid):
        for y in grid:
            try:
                z = combine(inst.semigroup, x, y)
            except OrbitRangeError:
                skipped += 1
                continue
            if z not in values or y not in values:
                skipped += 1
                continue
            is_identity_pair.append(x == identity and not include_identity)
            prod_vals.append(values[z])
            y_vals.append(values[y])
            g_list.append(g_grid[i])
    if not prod_vals:
        raise CoverageError("no grid pair has an evaluable product; nothing to check")
    res = kernels.linear_residuals(
        np.array(prod_vals), np.array(g_list), np.array(y_vals)
    )
    residual = 0.0
    identity_residual = 0.0
    for ident, value in zip(is_identity_pair, res.tolist()):
        if ident:
            identity_residual = max(identity_residual, value)
        else:
            residual = max(residual, value)
    return ConclusionSummary(
        residual=residual,
        raw_residual=0.0,
        identity_residual=identity_residual,
        pairs_checked=len(prod_vals),
        pairs_skipped=skipped,
    )


def check_conclusion(inst: Instance, values: LogFunction, tol: float = 1e-8) -> float:
    """Largest |T(xy) - g(x) T(y)| over grid pairs with evaluable products.

    Identity-anchored pairs (x = 1, where g is unconstrained) are kept in
    a separate bucket and excluded from the returned maximum.  For exact
    inputs the same residual of raw ln f is verified against ``tol`` as a
    self-check.
    """
    summary = _conclusion_details(inst, values, include_identity=False)
    if isinstance(inst.f, ExactExponential):
        raw = LogFunction((p, float(v)) for p, v in zip(values.domain, log_f_values(inst, list(values.domain))))
        raw_summary = _conclusion_details(inst, raw, include_identity=False)
        if raw_summary.residual > tol:
            raise SuperstabError(
                f"exact input violates its own equation: residual {raw_summary.residual} > {tol}"
            )
    return summary.residual


def classify_g(
    inst: Instance, growth_threshold: float = 1e6, probe_depth: int = 60
) -> GClassification:
    """Sample-relative growth classification of g.

    Bounded when no grid element has |g| > 1; unbounded-on-sample when |g|
    exceeds ``growth_threshold`` along the strongest anchor's own orbit;
    inconclusive otherwise.  This is a heuristic about the sample, not a
    statement about g on the whole semigroup.
    """
    candidates = anchor_candidates(inst)
    if not candidates:
        return GClassification.BOUNDED
    top = candidates[0][0]
    for k in range(1, probe_depth + 1):
        try:
            probe = power(inst.semigroup, top, k)
            value = eval_g(inst, probe)
        except OrbitRangeError:
            # magnitude left the representable range: growth established
            return GClassification.UNBOUNDED_ON_SAMPLE
        except CoverageError:
            break
        if abs(value) >= growth_threshold:
            return GClassification.UNBOUNDED_ON_SAMPLE
    return GClassification.INCONCLUSIVE


# -- evaluation-point extension ----------------------------------------------


def _table_orbit_covered(inst: Instance, anchors: list[Element], z: Element, depth: int) -> bool:
    for a in anchors:
        for w in orbit_elements(inst.semigroup, a, z, depth):
            if isinstance(inst.f, TableFunction) and not inst.f.covers(w):
                return False
    return True


def _evaluation_points(
    inst: Instance, anchors: list[Element], cfg: PipelineConfig, n_eff: int
) -> tuple[list[Element], np.ndarray, int]:
    """Grid plus identity plus pairwise products (where evaluable).

    Also returns the (n, n) index of each grid product within the point
    list (-1 where the product is skipped), so later stages never redo
    the pairing.
    """
    grid = list(inst.grid)
    n = len(grid)
    points = list(grid)
    keys = {canonical_key(p): i for i, p in enumerate(points)}
    skipped = 0
    extras: list[Element] = []
    identity = inst.identity()
    if canonical_key(identity) not in keys:
        extras.append(identity)
    pair_keys: dict[tuple[int, int], str] = {}
    seen_extra = {canonical_key(e) for e in extras}
    for i, x in enumerate(grid):
        for j, y in enumerate(grid):
            try:
                z = combine(inst.semigroup, x, y)
            except OrbitRangeError:
                skipped += 1
                continue
            key = canonical_key(z)
            pair_keys[(i, j)] = key
            if not cfg.extend_products or key in keys or key in seen_extra:
                continue
            seen_extra.add(key)
            extras.append(z)
    if isinstance(inst.f, TableFunction):
        kept = []
        for z in extras:
            if _table_orbit_covered(inst, anchors, z, n_eff):
                kept.append(z)
            else:
                skipped += 1
        extras = kept
    extras.sort(key=canonical_key)
    points = points + extras
    index = {canonical_key(p): i for i, p in enumerate(points)}
    prod_idx = np.full((n, n), -1, dtype=np.int64)
    for (i, j), key in pair_keys.items():
        prod_idx[i, j] = index.get(key, -1)
    return points, prod_idx, skipped


# -- the full pipeline --------------------------------------------------------


def _report_skeleton(inst, cfg, validation, classification):
    return dict(
        hypothesis_scope="verified_on_sample"
        if validation.hypothesis_holds and validation.monotonicity_holds
        else "violated_on_sample",
        g_classification=classification,
        validation=validation,
        anchors=tuple(),
        limit=None,
        bound_checks=tuple(),
        anchor_agreement=None,
        final_bounds=tuple(),
        conclusion=None,
        uniqueness_gap=None,
        config=cfg,
    )


def run_superstability(inst: Instance, config: PipelineConfig | None = None) -> TheoremReport:
    """Run every stage and return the structured report.

    The verdict is ``SuperstableRecovered`` only when all stages pass at
    their configured tolerances; ``BoundedG`` when the sample offers no
    anchor (|g| <= 1 everywhere on the grid); ``HypothesisFailed``
    otherwise, with the failing stage named.
    """
    cfg = config or PipelineConfig()
    n_eff = cfg.n_max
    if isinstance(inst.f, TableFunction):
        n_eff = min(n_eff, inst.f.orbit_depth)

    try:
        candidates = anchor_candidates(inst)
        anchors = [a for a, _ in candidates[: cfg.anchor_count]]
        validation = validate_instance(
            inst, anchors=anchors, orbit_depth=cfg.validation_orbit_depth
        )
    except SuperstabError as exc:
        raise PipelineStageError("validation", exc) from exc

    try:
        classification = classify_g(inst, cfg.growth_threshold, cfg.probe_depth)
    except SuperstabError as exc:
        raise PipelineStageError("classification", exc) from exc

    base = _report_skeleton(inst, cfg, validation, classification)

    if not candidates:
        # bounded branch: no anchor, no contraction; report raw residuals only
        conclusion = _bounded_branch_conclusion(inst, cfg)
        return TheoremReport(
            verdict=Verdict.BOUNDED_G,
            failing_stage=None,
            failure_detail=None,
            **{**base, "conclusion": conclusion},
        )

    base["anchors"] = tuple((a, g) for a, g in candidates[: cfg.anchor_count])

    if cfg.strict_hypothesis and not (
        validation.hypothesis_holds and validation.monotonicity_holds
    ):
        detail = _first_failure_detail(validation)
        return TheoremReport(
            verdict=Verdict.HYPOTHESIS_FAILED,
            failing_stage="validation",
            failure_detail=detail,
            **base,
        )

    points, prod_idx, _ = _evaluation_points(inst, anchors, cfg, n_eff)
    grid_size = len(inst.grid)

    # anchored recoveries
    recoveries: dict[Element, tuple] = {}
    try:
        for a in anchors:
            recoveries[a] = iterate_fixed_point(
                inst, a, tol=cfg.tol, n_max=n_eff, points=points
            )
    except SuperstabError as exc:
        raise PipelineStageError("recovery", exc) from exc
    for a in anchors:
        if not recoveries[a][2].converged:
            return TheoremReport(
                verdict=Verdict.HYPOTHESIS_FAILED,
                failing_stage="recovery",
                failure_detail=f"recovery from anchor {canonical_key(a)} did not converge "
                f"within {n_eff} steps",
                **base,
            )

    primary = anchors[0]
    limit_fn, trace, cert = recoveries[primary]
    limit = LimitFunction(
        anchor=primary,
        g_value=eval_g(inst, primary),
        values=limit_fn,
        certificate=cert,
        trace=trace,
        grid_size=grid_size,
    )
    base["limit"] = limit

    # uniqueness by restart: the bump must be able to decay below tol
    # within the available depth, so it shrinks with |g|^-n_eff; when no
    # meaningful restart fits (very shallow tables) the check is skipped
    # and reported as absent rather than vacuously passed
    uniqueness_gap = None
    if cfg.verify_uniqueness:
        abs_g = abs(eval_g(inst, primary))
        log_bump = math.log(0.1 * cfg.tol) + n_eff * math.log(abs_g)
        bump = 1.0 if log_bump >= 0.0 else math.exp(log_bump)
        if bump >= 100.0 * cfg.tol:
            try:
                uniqueness_gap = verify_unique_limit(
                    inst, primary, limit_fn, tol=cfg.tol, n_max=n_eff, bump=bump
                )
            except SuperstabError as exc:
                raise PipelineStageError("uniqueness", exc) from exc
            base["uniqueness_gap"] = uniqueness_gap
            if uniqueness_gap > 10.0 * cfg.tol:
                return TheoremReport(
                    verdict=Verdict.HYPOTHESIS_FAILED,
                    failing_stage="uniqueness",
                    failure_detail=f"restarted iteration landed {uniqueness_gap} away from the limit",
                    **base,
                )

    # orbit defect bounds on the grid columns
    try:
        bound_checks, bound_fail = _bound_check_stage(inst, anchors, cfg, n_eff)
    except SuperstabError as exc:
        raise PipelineStageError("partial_bounds", exc) from exc
    base["bound_checks"] = bound_checks
    if bound_fail is not None:
        return TheoremReport(
            verdict=Verdict.HYPOTHESIS_FAILED,
            failing_stage="partial_bounds",
            failure_detail=bound_fail,
            **base,
        )

    # anchor independence
    agreement = 0.0
    for i in range(len(anchors)):
        for j in range(i + 1, len(anchors)):
            fa = recoveries[anchors[i]][0]
            fb = recoveries[anchors[j]][0]
            agreement = max(
                agreement, max(abs(fa[y] - fb[y]) for y in inst.grid)
            )
    base["anchor_agreement"] = agreement
    if agreement > cfg.agreement_tol:
        return TheoremReport(
            verdict=Verdict.HYPOTHESIS_FAILED,
            failing_stage="anchor_agreement",
            failure_detail=f"sup|T_a - T_b| = {agreement} > {cfg.agreement_tol}",
            **base,
        )

    # pointwise recovery bound
    final_rows = []
    bound_ok = True
    log_f_grid = log_f_values(inst, list(inst.grid))
    for y, lf in zip(inst.grid, log_f_grid):
        bound = final_error_bound(inst, anchors, y)
        gap = float(abs(float(lf) - limit_fn[y]))
        holds = bool(gap <= bound + cfg.bound_tol)
        bound_ok = bound_ok and holds
        final_rows.append(FinalBoundRow(element=y, bound=bound, gap=gap, holds=holds))
    base["final_bounds"] = tuple(final_rows)
    if not bound_ok:
        worst = max(final_rows, key=lambda r: r.gap - r.bound)
        return TheoremReport(
            verdict=Verdict.HYPOTHESIS_FAILED,
            failing_stage="final_bound",
            failure_detail=f"|ln f - T| = {worst.gap} exceeds bound {worst.bound} "
            f"at {canonical_key(worst.element)}",
            **base,
        )

    # conclusion residuals (recovered vs raw)
    try:
        conclusion = _conclusion_stage(inst, limit_fn, points, prod_idx, cfg)
    except SuperstabError as exc:
        raise PipelineStageError("conclusion", exc) from exc
    base["conclusion"] = conclusion
    if conclusion.residual > cfg.conclusion_tol:
        return TheoremReport(
            verdict=Verdict.HYPOTHESIS_FAILED,
            failing_stage="conclusion",
            failure_detail=f"conclusion residual {conclusion.residual} > {cfg.conclusion_tol}",
            **base,
        )

    return TheoremReport(
        verdict=Verdict.SUPERSTABLE_RECOVERED,
        failing_stage=None,
        failure_detail=None,
        **base,
    )


def _first_failure_detail(validation: ValidationReport) -> str:
    if validation.failures:
        f = validation.failures[0]
        parts = [f.kind]
        if f.x is not None:
            parts.append(f"x={canonical_key(f.x)}")
        if f.y is not None:
            parts.append(f"y={canonical_key(f.y)}")
        if f.anchor is not None:
            parts.append(f"anchor={canonical_key(f.anchor)}")
        parts.append(f"amount={f.amount}")
        return " ".join(parts)
    return f"worst violation {validation.worst_violation}"


def _bound_check_stage(inst, anchors, cfg, n_eff):
    depth = min(cfg.bound_depth, n_eff)
    checks: list[BoundCheck] = []
    failure = None
    grid = list(inst.grid)
    for a in anchors:
        g_a = eval_g(inst, a)
        O = orbit_log_f(inst, a, grid, depth)
        P = orbit_psi_tilde(inst, a, grid, depth)
        lhs_t, step_t, geo_t = kernels.partial_bound_tables(O, P, g_a)
        for n in range(depth + 1):
            for j, y in enumerate(grid):
                lhs = float(lhs_t[n, j])
                stepwise = float(step_t[n, j])
                rhs = float(geo_t[n, j])
                if stepwise > rhs + cfg.bound_tol * max(1.0, rhs):
                    raise SuperstabError(
                        f"stepwise bound exceeds geometric form at depth {n}, "
                        f"point {canonical_key(y)}"
                    )
                holds = bool(lhs <= rhs + cfg.bound_tol)
                checks.append(
                    BoundCheck(
                        anchor=a, y=y, n=n, lhs=lhs, stepwise=stepwise, rhs=rhs,
                        holds=holds, slack=rhs - lhs,
                    )
                )
                if not holds and failure is None:
                    failure = (
                        f"defect {lhs} exceeds geometric bound {rhs} at depth {n}, "
                        f"anchor {canonical_key(a)}, point {canonical_key(y)}"
                    )
    return tuple(checks), failure


def _residual_split(inst, values_vec, prod_idx, g_grid, include_identity):
    """(main residual, identity residual, checked, skipped) from the
    precomputed product index."""
    n = prod_idx.shape[0]
    flat = prod_idx.ravel()
    valid = np.nonzero(flat >= 0)[0]
    if valid.size == 0:
        raise CoverageError("no grid pair has an evaluable product; nothing to check")
    x_idx = valid // n
    y_idx = valid % n
    res = kernels.linear_residuals(
        values_vec[flat[valid]], g_grid[x_idx], values_vec[y_idx]
    )
    identity = inst.identity()
    ident_rows = np.array([p == identity for p in inst.grid], dtype=bool)
    ident_mask = ident_rows[x_idx] & (not include_identity)
    residual = float(res[~ident_mask].max()) if np.any(~ident_mask) else 0.0
    identity_residual = float(res[ident_mask].max()) if np.any(ident_mask) else 0.0
    return residual, identity_residual, int(valid.size), int(flat.size - valid.size)


def _conclusion_stage(inst, limit_fn: LogFunction, points, prod_idx, cfg) -> ConclusionSummary:
    g_grid = np.array([eval_g(inst, x) for x in inst.grid])
    values_vec = limit_fn.values_at(points)
    residual, identity_residual, checked, skipped = _residual_split(
        inst, values_vec, prod_idx, g_grid, cfg.include_identity_pairs
    )
    raw_vec = log_f_values(inst, list(points))
    raw_residual, _, _, _ = _residual_split(
        inst, raw_vec, prod_idx, g_grid, cfg.include_identity_pairs
    )
    return ConclusionSummary(
        residual=residual,
        raw_residual=raw_residual,
        identity_residual=identity_residual,
        pairs_checked=checked,
        pairs_skipped=skipped,
    )


def _bounded_branch_conclusion(inst, cfg) -> ConclusionSummary | None:
    try:
        points, prod_idx, _ = _evaluation_points(inst, [], cfg, 0)
        g_grid = np.array([eval_g(inst, x) for x in inst.grid])
        raw_vec = log_f_values(inst, list(points))
        residual, identity_residual, checked, skipped = _residual_split(
            inst, raw_vec, prod_idx, g_grid, cfg.include_identity_pairs
        )
    except SuperstabError:
        return None
    return ConclusionSummary(
        residual=residual,
        raw_residual=residual,
        identity_residual=identity_residual,
        pairs_checked=checked,
        pairs_skipped=skipped,
    )
