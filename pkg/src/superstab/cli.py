"""Command-line front end.

Commands: generate, validate, analyze, baker, ger, alpha, jung.
Reports are deterministic: equal command lines (including --seed) write
byte-identical files.
"""

from __future__ import annotations

import argparse
import sys

from . import serialize
from .baselines import (
    baker_residual,
    ger_residual,
    jung_alpha_terms,
    jung_sandwich,
    sandwich_csv_rows,
    CSV_COLUMNS,
)
from .errors import SeriesDivergenceError, SuperstabError
from .instance import Instance, eval_log_f, validate_instance
from .pipeline import PipelineConfig, Verdict, run_superstability
from .presets import DEFAULT_SEED, PRESETS
from .semigroup import combine

USAGE_ERROR = 2


def _parse_grid(spec: str) -> list[float]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return [float(v) for v in range(int(lo), int(hi) + 1)]
    return [float(tok) for tok in spec.split(",") if tok]


def _emit(text: str, out: str | None) -> None:
    if out:
        from pathlib import Path

        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str) -> Instance:
    return serialize.load_instance(path)


def cmd_generate(args) -> int:
    builder = PRESETS.get(args.preset)
    if builder is None:
        print(f"error: unknown preset {args.preset!r}; choose from {sorted(PRESETS)}", file=sys.stderr)
        return USAGE_ERROR
    kwargs = {"seed": args.seed}
    if args.grid is not None and args.preset != "free-monoid":
        kwargs["grid"] = _parse_grid(args.grid)
    if args.c is not None:
        kwargs["c"] = args.c
    if args.preset in ("perturbed-cor23", "free-monoid", "jung") and args.delta is not None:
        kwargs["delta"] = args.delta
    if args.preset in ("perturbed-cor23", "free-monoid") and args.amp is not None:
        kwargs["amp"] = args.amp
    if args.preset == "bounded-g" and args.bound is not None:
        kwargs["bound"] = args.bound
    if args.preset == "free-monoid":
        if args.bases is not None:
            kwargs["bases"] = [float(b) for b in args.bases.split(",")]
        if args.max_exp is not None:
            kwargs["max_exp"] = args.max_exp
    try:
        inst = builder(**kwargs)
    except (ValueError, SuperstabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    _emit(serialize.instance_to_json(inst), args.out)
    return 0


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    report = validate_instance(inst, orbit_depth=args.orbit_depth)
    obj = report.to_obj()
    if args.format == "summary":
        ok = report.hypothesis_holds and report.monotonicity_holds
        lines = [
            f"hypothesis_holds    {report.hypothesis_holds}",
            f"worst_violation     {report.worst_violation}",
            f"monotonicity_holds  {report.monotonicity_holds}",
            f"anchor_set_nonempty {report.anchor_set_nonempty}",
            f"checked_pairs       {report.checked_pairs}",
            f"skipped_pairs       {report.skipped_pairs}",
        ]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(serialize.dumps(obj), args.out)
    return 0 if (report.hypothesis_holds and report.monotonicity_holds) else 1


def cmd_analyze(args) -> int:
    inst = _load(args.instance)
    cfg = PipelineConfig(tol=args.tol, n_max=args.nmax, anchor_count=args.anchors)
    report = run_superstability(inst, cfg)
    obj = report.to_obj()
    obj["instance"] = args.instance
    if args.format == "summary":
        _emit(_summary_text(report), args.out)
    elif args.format == "csv":
        _emit(serialize.report_final_bounds_csv(obj), args.out)
    else:
        _emit(serialize.dumps(obj), args.out)
    if report.verdict in (Verdict.SUPERSTABLE_RECOVERED, Verdict.BOUNDED_G):
        return 0
    print(
        f"analysis failed at stage {report.failing_stage}: {report.failure_detail}",
        file=sys.stderr,
    )
    return 1


def _summary_text(report) -> str:
    lines = [
        f"verdict             {report.verdict.value}",
        f"hypothesis_scope    {report.hypothesis_scope}",
        f"g_classification    {report.g_classification.value}",
        f"anchors             {len(report.anchors)}",
    ]
    if report.limit is not None:
        cert = report.limit.certificate
        lines += [
            f"iterations          {cert.iterations}",
            f"lipschitz_bound     {cert.lipschitz_bound}",
            f"measured_ratio      {cert.measured_ratio}",
            f"final_distance      {cert.final_distance}",
            f"aposteriori_bound   {cert.aposteriori_bound}",
        ]
    if report.anchor_agreement is not None:
        lines.append(f"anchor_agreement    {report.anchor_agreement}")
    if report.conclusion is not None:
        lines += [
            f"conclusion_residual {report.conclusion.residual}",
            f"raw_residual        {report.conclusion.raw_residual}",
        ]
    if report.failing_stage:
        lines.append(f"failing_stage       {report.failing_stage}: {report.failure_detail}")
    return "\n".join(lines) + "\n"


def _value_table(inst: Instance):
    values = {}
    triples = []
    for p in inst.grid:
        values[p] = eval_log_f(inst, p)
    for x in inst.grid:
        for y in inst.grid:
            try:
                z = combine(inst.semigroup, x, y)
                if z not in values:
                    values[z] = eval_log_f(inst, z)
            except SuperstabError:
                continue
            triples.append((x, y, z))
    return values, triples


def cmd_baker(args) -> int:
    inst = _load(args.instance)
    values, triples = _value_table(inst)
    residual, label = baker_residual(values, triples)
    _emit(
        serialize.dumps({"residual": residual, "classification": label, "pairs": len(triples)}),
        args.out,
    )
    return 0


def cmd_ger(args) -> int:
    inst = _load(args.instance)
    values, triples = _value_table(inst)
    form = "multiplicative" if args.form == "multiplicative" else "literal_additive"
    residual = ger_residual(values, triples, form=form)
    _emit(
        serialize.dumps({"residual": residual, "form": form, "pairs": len(triples)}),
        args.out,
    )
    return 0


def cmd_alpha(args) -> int:
    try:
        value, terms = jung_alpha_terms(args.x, args.tol)
    except SeriesDivergenceError as exc:
        print(f"error: {exc} (the series converges for x > 1 only)", file=sys.stderr)
        return USAGE_ERROR
    if args.json:
        _emit(serialize.dumps({"x": args.x, "alpha": value, "terms": terms}), args.out)
    else:
        _emit(f"alpha({args.x}) = {value!r}  ({terms} terms)\n", args.out)
    return 0


def cmd_jung(args) -> int:
    inst = _load(args.instance)
    grid = _parse_grid(args.grid) if args.grid else None
    checks = jung_sandwich(inst, args.delta, grid=grid)
    if args.format == "csv":
        _emit(serialize.csv_text(CSV_COLUMNS, sandwich_csv_rows(checks)), args.out)
    else:
        _emit(serialize.dumps({"delta": args.delta, "checks": [c.to_obj() for c in checks]}), args.out)
    return 0 if all(c.holds for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superstab",
        description="Reconstruct exact solutions of f(xy) = f(y)^g(x) from "
        "approximately exponential data, with certified error bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a preset instance file")
    p.add_argument("preset", help=f"one of {sorted(PRESETS)}")
    p.add_argument("--c", type=float, default=None, help="log-slope; drawn from the seed if omitted")
    p.add_argument("--delta", type=float, default=None, help="constant bound width")
    p.add_argument("--amp", type=float, default=None, help="perturbation amplitude (auto if omitted)")
    p.add_argument("--bound", type=float, default=None, help="bounded-g amplitude")
    p.add_argument("--bases", default=None, help="comma-separated generator bases (free-monoid)")
    p.add_argument("--max-exp", type=int, default=None, help="exponent box size (free-monoid)")
    p.add_argument("--grid", default=None, help="grid spec: A..B integers or comma-separated values")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check the hypothesis band on the sample")
    p.add_argument("--instance", required=True)
    p.add_argument("--orbit-depth", type=int, default=3)
    p.add_argument("--format", choices=("json", "summary"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="run the full recovery pipeline")
    p.add_argument("--instance", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--nmax", type=int, default=60)
    p.add_argument("--anchors", type=int, default=3)
    p.add_argument("--format", choices=("json", "csv", "summary"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("baker", help="absolute exponential residual sup|f(xy) - f(x)f(y)|")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baker)

    p = sub.add_parser("ger", help="relative residual sup|f(xy)/D - 1|")
    p.add_argument("--instance", required=True)
    p.add_argument("--form", choices=("multiplicative", "literal"), default="multiplicative")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ger)

    p = sub.add_parser("alpha", help="value of the sandwich exponent series at x")
    p.add_argument("x", type=float)
    p.add_argument("--tol", type=float, default=1e-15)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("jung", help="relative-error sandwich checks on a recovered base")
    p.add_argument("--instance", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--grid", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_jung)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, KeyError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except SuperstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
