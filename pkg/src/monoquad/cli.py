"""Command-line interface.

Subcommands::

    worst-case   closed-form worst case, witness, and oracle confirmation
    ratios       bounds-versus-n table as CSV (optional figure)
    simulate     replicated estimation experiment -> JSON/CSV report
    brute-force  maximize variance / trapezoid error over grid staircases
    lower-bound  adversarial-pair demonstration of the Lp lower bound
    replay       re-run a command from its manifest

Every data-producing command writes a ``<out>.manifest.json`` capturing the
argv, resolved configuration, seed/jobs, and package version; ``replay``
re-executes it and regenerates the outputs byte-for-byte.  Exit codes:
0 success, 2 parse error, 3 invariant violation, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import (adversarial_pair, bound_reports_to_csv, lower_bound_lp,
                       ratio_table, sig12, trapezoid_worst_case,
                       worst_case_certificate)
from .errors import BudgetExceededError, InvariantError, ParseError
from .estimators import (Trapezoid, estimator_from_json, estimator_to_json,
                         point_sampler, sample_size)
from .functions import function_to_json
from .oracle import (REPORT_CSV_COLUMNS, SCHEMA_VERSION, _lp_error_with_se,
                     brute_force_max_trapezoid_error, brute_force_max_variance,
                     config_from_json_dict, config_to_json_dict,
                     exact_estimator_variance, exact_trapezoid_error,
                     replicated_estimates, report_to_csv_row, report_to_json_dict,
                     run_experiment)

__all__ = ["main"]


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def _json_arg(text: str, what: str):
    """Parse an inline JSON argument; '@path' reads the JSON from a file."""
    if text.startswith("@"):
        try:
            raw = Path(text[1:]).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {what} file {text[1:]}: {exc}") from exc
    else:
        raw = text
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON for {what}: {exc}") from exc


def _round_floats(obj):
    """Round every float in a JSON-ready structure to 12 significant digits."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _write_text(path: str, text: str) -> None:
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _write_json(path: str, payload: dict) -> None:
    _write_text(path, json.dumps(_round_floats(payload), indent=2) + "\n")


def _write_manifest(out: str, command: str, argv: list[str], resolved: dict,
                    outputs: list[str]) -> str:
    path = f"{out}.manifest.json"
    _write_json(path, {
        "schema": SCHEMA_VERSION,
        "tool": "monoquad",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "resolved": resolved,
        "outputs": [str(o) for o in outputs],
    })
    return path


def _default_jobs() -> int:
    raw = os.environ.get("MONOQUAD_JOBS")
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError as exc:
        raise ParseError(f"MONOQUAD_JOBS must be an integer, got {raw!r}") from exc
    if jobs < 1:
        raise InvariantError(f"MONOQUAD_JOBS must be >= 1, got {jobs}")
    return jobs


def _resolve_jobs(args) -> int:
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        raise InvariantError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _sibling_png(out: str) -> str:
    return str(Path(out).with_suffix(".png"))


def _spec_name(spec) -> str:
    return estimator_to_json(spec)["kind"]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_worst_case(args) -> int:
    spec = estimator_from_json(_json_arg(args.spec, "estimator spec"))
    cert = worst_case_certificate(spec)
    if cert.metric == "variance":
        oracle_value = exact_estimator_variance(spec, cert.witness)
    else:
        oracle_value = exact_trapezoid_error(spec.n, cert.witness)
    diff = abs(oracle_value - cert.value)
    if diff > 1e-9 * max(1.0, abs(cert.value)):
        raise InvariantError(
            f"closed form {cert.value!r} and oracle {oracle_value!r} disagree at the witness")
    payload = {
        "schema": SCHEMA_VERSION,
        "estimator": estimator_to_json(spec),
        "metric": cert.metric,
        "value": cert.value,
        "witness": function_to_json(cert.witness),
        "oracle_value": oracle_value,
        "oracle_abs_diff": diff,
    }
    _write_json(args.out, payload)
    _write_manifest(args.out, "worst-case", args.recorded_argv,
                    {"estimator": estimator_to_json(spec)}, [args.out])
    print(f"worst-case {cert.metric} for {_spec_name(spec)} (n={sample_size(spec)}): "
          f"{sig12(cert.value)}")
    print(f"witness: {json.dumps(_round_floats(function_to_json(cert.witness)))}")
    print(f"oracle value at witness: {sig12(oracle_value)} (abs diff {diff:.3e})")
    print(f"wrote {args.out}")
    return 0


def cmd_ratios(args) -> int:
    reports = ratio_table(args.n_max)
    _write_text(args.out, bound_reports_to_csv(reports))
    outputs = [args.out]
    if args.plot:
        from .plots import save_ratio_figure

        png = _sibling_png(args.out)
        save_ratio_figure(reports, png)
        outputs.append(png)
    _write_manifest(args.out, "ratios", args.recorded_argv,
                    {"n_max": args.n_max, "plot": bool(args.plot)}, outputs)
    last = reports[-1]
    print(f"wrote {args.out} ({len(reports)} rows)")
    print(f"at n={last.n}: best unbiased / lower bound = {sig12(last.ratio_unbiased)}, "
          f"best unbiased / trapezoid = {sig12(last.ratio_trap)}")
    for path in outputs[1:]:
        print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    merged: dict = {"seed": 0, "p": 2.0, "replications": 10000}
    if args.config is not None:
        file_cfg = _json_arg(f"@{args.config}", "experiment config")
        if not isinstance(file_cfg, dict):
            raise ParseError("experiment config file must hold a JSON object")
        unknown = file_cfg.keys() - {"estimator", "function", "replications", "seed", "p"}
        if unknown:
            raise ParseError(f"unexpected field(s) {sorted(unknown)} in experiment config")
        merged.update(file_cfg)
    if args.estimator is not None:
        merged["estimator"] = _json_arg(args.estimator, "estimator spec")
    if args.function is not None:
        merged["function"] = _json_arg(args.function, "function spec")
    for key in ("replications", "seed", "p"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    for key in ("estimator", "function"):
        if key not in merged:
            raise ParseError(f"an {key} spec is required (flag or config file)")
    config = config_from_json_dict(merged)
    jobs = _resolve_jobs(args)
    report = run_experiment(config, jobs=jobs)

    out = args.out
    if out is None:
        out = "report.json" if args.format == "json" else "report.csv"
    if args.format == "json":
        _write_json(out, report_to_json_dict(report))
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_CSV_COLUMNS)
        writer.writerow(report_to_csv_row(report))
        _write_text(out, buf.getvalue())
    outputs = [out]
    if args.plot:
        from .plots import save_estimates_figure

        estimates = replicated_estimates(config.estimator, config.function,
                                         config.replications, config.seed, jobs=jobs)
        png = _sibling_png(out)
        save_estimates_figure(estimates, report, png)
        outputs.append(png)
    resolved = config_to_json_dict(config)
    resolved.update({"jobs": jobs, "format": args.format, "plot": bool(args.plot)})
    _write_manifest(out, "simulate", args.recorded_argv, resolved, outputs)

    print(f"{_spec_name(config.estimator)} on {json.dumps(function_to_json(config.function))}, "
          f"R={config.replications}, seed={config.seed}, jobs={jobs}")
    print(f"empirical mean    {sig12(report.empirical_mean)}   "
          f"exact integral {sig12(report.exact_integral)}")
    print(f"empirical variance {sig12(report.empirical_variance)}" +
          ("" if report.exact_variance is None
           else f"   exact variance {sig12(report.exact_variance)}"))
    print(f"L{sig12(config.p)} error       {sig12(report.empirical_lp_error)}   "
          f"standard error {sig12(report.standard_error)}")
    print(f"wall time {report.wall_time_s:.3f}s")
    for path in outputs:
        print(f"wrote {path}")
    return 0


def cmd_brute_force(args) -> int:
    spec = estimator_from_json(_json_arg(args.spec, "estimator spec"))
    kwargs = {"cap": args.cap, "method": args.method}
    if isinstance(spec, Trapezoid):
        result = brute_force_max_trapezoid_error(spec.n, args.pieces, args.grid, **kwargs)
        metric = "absolute_error"
        closed = trapezoid_worst_case(spec.n)[0]
    else:
        result = brute_force_max_variance(spec, args.pieces, args.grid, **kwargs)
        metric = "variance"
        closed = worst_case_certificate(spec).value
    payload = {
        "schema": SCHEMA_VERSION,
        "estimator": estimator_to_json(spec),
        "metric": metric,
        "pieces": args.pieces,
        "grid": args.grid,
        "method": result.method,
        "exhaustive": result.exhaustive,
        "candidates": result.candidates,
        "value": result.value,
        "witness": function_to_json(result.witness),
        "closed_form_worst_case": closed,
        "value_over_closed_form": result.value / closed,
    }
    _write_json(args.out, payload)
    _write_manifest(args.out, "brute-force", args.recorded_argv,
                    {"estimator": estimator_to_json(spec), "pieces": args.pieces,
                     "grid": args.grid, "cap": args.cap, "method": args.method},
                    [args.out])
    note = "" if result.exhaustive else "  [heuristic: coordinate ascent, not exhaustive]"
    print(f"max {metric} over {args.pieces}-cell staircases (levels k/{args.grid}): "
          f"{sig12(result.value)}{note}")
    print(f"closed-form worst case over all monotone f: {sig12(closed)} "
          f"(ratio {sig12(result.value / closed)})")
    print(f"witness: {json.dumps(_round_floats(function_to_json(result.witness)))}")
    print(f"candidates evaluated: {result.candidates}")
    print(f"wrote {args.out}")
    return 0


def cmd_lower_bound(args) -> int:
    spec = estimator_from_json(_json_arg(args.spec, "estimator spec"))
    n = sample_size(spec)
    bound = lower_bound_lp(n, args.p)
    pair = adversarial_pair(n, point_sampler(spec), replications=args.replications,
                            seed=args.seed)
    lp1, se1 = _lp_error_with_se(spec, pair.f1, args.p, args.replications, args.seed)
    lp2, se2 = _lp_error_with_se(spec, pair.f2, args.p, args.replications, args.seed)
    if lp1 >= lp2:
        max_lp, max_se = lp1, se1
    else:
        max_lp, max_se = lp2, se2
    passed = max_lp >= bound - 4.0 * max_se
    # The construction separates the two functions by exactly half a cell
    # of width 1/n; report that gap in its exact form rather than as the
    # difference of two rounded integrals.
    gap = 1.0 / (2 * n)
    payload = {
        "schema": SCHEMA_VERSION,
        "estimator": estimator_to_json(spec),
        "n": n,
        "p": args.p,
        "replications": args.replications,
        "seed": args.seed,
        "cell_index": pair.cell_index,
        "interval": list(pair.interval),
        "integral_gap": gap,
        "miss_probability": pair.miss_probability,
        "f1": function_to_json(pair.f1),
        "f2": function_to_json(pair.f2),
        "lp_error_f1": lp1,
        "se_f1": se1,
        "lp_error_f2": lp2,
        "se_f2": se2,
        "max_lp_error": max_lp,
        "theoretical_bound": bound,
        "passed": passed,
    }
    _write_json(args.out, payload)
    outputs = [args.out]
    if args.plot:
        from .plots import save_adversarial_figure

        png = _sibling_png(args.out)
        save_adversarial_figure(pair, png)
        outputs.append(png)
    _write_manifest(args.out, "lower-bound", args.recorded_argv,
                    {"estimator": estimator_to_json(spec), "p": args.p,
                     "replications": args.replications, "seed": args.seed,
                     "plot": bool(args.plot)}, outputs)
    print(f"adversarial pair for {_spec_name(spec)} (n={n}): cell {pair.cell_index} "
          f"of {2 * n}, integral gap {sig12(gap)}, "
          f"empirical miss probability {sig12(pair.miss_probability)}")
    print(f"max empirical L{sig12(args.p)} error {sig12(max_lp)} "
          f"vs theoretical bound {sig12(bound)}")
    print("PASS: empirical error respects the lower bound" if passed
          else "FAIL: empirical error fell below bound - 4*SE")
    for path in outputs:
        print(f"wrote {path}")
    return 0


def cmd_replay(args) -> int:
    try:
        raw = Path(args.manifest).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read manifest {args.manifest}: {exc}") from exc
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid manifest JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("tool") != "monoquad":
        raise ParseError("not a monoquad manifest")
    if manifest.get("schema") != SCHEMA_VERSION:
        raise ParseError(f"unsupported manifest schema {manifest.get('schema')!r}")
    argv = manifest.get("argv")
    if (not isinstance(argv, list) or not argv
            or not all(isinstance(a, str) for a in argv)):
        raise ParseError("manifest has no recorded argv")
    if argv[0] == "replay":
        raise ParseError("refusing to replay a replay")
    print(f"replaying: monoquad {' '.join(argv)}")
    return main(argv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monoquad",
        description="Monte Carlo quadrature of monotone functions: estimators, "
                    "worst-case bounds, and verification experiments.")
    parser.add_argument("--version", action="version", version=f"monoquad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    spec_help = "estimator spec as inline JSON or @file"

    wc = sub.add_parser("worst-case",
                        help="closed-form worst case with witness and oracle check")
    wc.add_argument("--spec", required=True, metavar="JSON", help=spec_help)
    wc.add_argument("--out", default="worst_case.json", help="output JSON path")
    wc.set_defaults(func=cmd_worst_case)

    ra = sub.add_parser("ratios", help="bounds-versus-n table as CSV")
    ra.add_argument("--n-max", type=int, required=True, help="largest sample budget n")
    ra.add_argument("--out", default="ratios.csv", help="output CSV path")
    ra.add_argument("--plot", action="store_true",
                    help="also render a PNG figure next to the CSV")
    ra.set_defaults(func=cmd_ratios)

    si = sub.add_parser("simulate", help="replicated estimation experiment")
    si.add_argument("--config", metavar="FILE",
                    help="experiment config JSON file; inline flags win on conflict")
    si.add_argument("--estimator", metavar="JSON", help=spec_help)
    si.add_argument("--function", metavar="JSON",
                    help="function spec as inline JSON or @file")
    si.add_argument("--replications", type=int, default=None,
                    help="number of replications (default 10000)")
    si.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    si.add_argument("--p", type=float, default=None,
                    help="order of the reported Lp error (default 2)")
    si.add_argument("--jobs", type=int, default=None,
                    help="worker processes (default MONOQUAD_JOBS or 1; "
                         "results never depend on this)")
    si.add_argument("--format", choices=("json", "csv"), default="json",
                    help="report format (default json)")
    si.add_argument("--out", default=None,
                    help="output path (default report.json / report.csv)")
    si.add_argument("--plot", action="store_true",
                    help="also render an estimate histogram PNG")
    si.set_defaults(func=cmd_simulate)

    bf = sub.add_parser("brute-force",
                        help="maximize variance / trapezoid error over grid staircases")
    bf.add_argument("--spec", required=True, metavar="JSON", help=spec_help)
    bf.add_argument("--pieces", type=int, required=True,
                    help="number of staircase cells m")
    bf.add_argument("--grid", type=int, required=True,
                    help="level granularity g (levels are k/g)")
    bf.add_argument("--cap", type=int, default=10_000_000,
                    help="candidate cap for exhaustive enumeration (default 1e7)")
    bf.add_argument("--method", choices=("exhaustive", "ascent"), default="exhaustive",
                    help="exhaustive enumeration or heuristic coordinate ascent")
    bf.add_argument("--out", default="brute_force.json", help="output JSON path")
    bf.set_defaults(func=cmd_brute_force)

    lb = sub.add_parser("lower-bound",
                        help="adversarial-pair demonstration of the Lp lower bound")
    lb.add_argument("--spec", required=True, metavar="JSON", help=spec_help)
    lb.add_argument("--p", type=float, default=2.0, help="error norm order (default 2)")
    lb.add_argument("--replications", type=int, default=10000,
                    help="replications for the empirical estimates (default 10000)")
    lb.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    lb.add_argument("--out", default="lower_bound.json", help="output JSON path")
    lb.add_argument("--plot", action="store_true",
                    help="also render the adversarial pair as a PNG")
    lb.set_defaults(func=cmd_lower_bound)

    rp = sub.add_parser("replay", help="re-run a command from its manifest")
    rp.add_argument("manifest", help="path to a <out>.manifest.json file")
    rp.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = [str(a) for a in argv]
    try:
        args = _parser().parse_args(argv)
        args.recorded_argv = argv
        return args.func(args)
    except ParseError as exc:
        return _fail(2, exc)
    except InvariantError as exc:
        return _fail(3, exc)
    except BudgetExceededError as exc:
        return _fail(4, exc)


def _fail(code: int, exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
