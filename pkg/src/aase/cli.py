"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 zero-support inference error,
4 IO or schema error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    ModelValidationError,
    SchemaError,
    TraceMismatchError,
    UnknownAgentError,
    ZeroSupportError,
)

EXIT_OK, EXIT_VALIDATION, EXIT_ZERO_SUPPORT, EXIT_IO = 0, 2, 3, 4


def _config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    unknown = set(doc) - {"traffic", "run", "bench"}
    if unknown:
        raise SchemaError(f"{path}: $.{sorted(unknown)[0]}", "unknown section")
    return doc


def _out_dir(args) -> Path | None:
    out = getattr(args, "out", None)
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, args, filename: str) -> None:
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        (out / filename).write_text(text if text.endswith("\n") else text + "\n")
        print(out / filename)


def _seed(args, default: int = 0) -> int:
    seed = getattr(args, "seed", None)
    return default if seed is None else seed


# --------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from .io import load_model
    from .model import validate_model

    model = load_model(args.model, validate=False)
    report = validate_model(model)
    if report.ok:
        print(f"{args.model}: ok ({model.n_agents} agents, {model.global_chain.space.size} global states)")
        return EXIT_OK
    print(f"{args.model}: invalid", file=sys.stderr)
    print(report, file=sys.stderr)
    return EXIT_VALIDATION


def cmd_build_traffic(args) -> int:
    from .io import save_model
    from .traffic import TrafficConfig, build_traffic_model

    doc = dict(_config(args).get("traffic", {}))
    if args.n_parallel is not None:
        doc["nParallel"] = args.n_parallel
    if args.n_perpendicular is not None:
        doc["nPerpendicular"] = args.n_perpendicular
    model = build_traffic_model(TrafficConfig.from_dict(doc))
    _emit(save_model(model), args, "traffic_model.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .io import load_model, save_trace
    from .simkit import simulate

    model = load_model(args.model)
    truth, trace = simulate(model, args.horizon, _seed(args))
    _emit(save_trace(trace, model, truth=None if args.no_truth else truth), args, "trace.json")
    return EXIT_OK


def cmd_occlude(args) -> int:
    from .io import load_model, load_trace, save_trace
    from .simkit import OcclusionPattern, apply_occlusion

    model = load_model(args.model)
    trace, truth = load_trace(args.trace, model, with_truth=True)
    try:
        pattern = OcclusionPattern(args.kind, args.fraction, _seed(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    occluded = apply_occlusion(trace, pattern, include_agents=args.include_agents)
    _emit(save_trace(occluded, model, truth=truth), args, "trace_occluded.json")
    return EXIT_OK


def cmd_infer(args) -> int:
    from .inference import exact_smooth, hmm_smooth, map_sequence, sum_product_smooth
    from .io import load_model, load_trace, posterior_to_csv, posterior_to_dict

    model = load_model(args.model)
    trace = load_trace(args.trace, model)
    if args.method == "aase":
        post = sum_product_smooth(model, trace, mode=args.mode)
    elif args.method == "hmm":
        post = hmm_smooth(model.global_chain, trace.global_obs, mode=args.mode)
    else:
        if args.mode != "smooth":
            raise ConfigError("--method exact supports --mode smooth only")
        post = exact_smooth(model, trace)
    labels = model.global_chain.space.labels
    out = _out_dir(args) or Path(".")
    (out / "posterior.json").write_text(json.dumps(posterior_to_dict(post, labels), indent=1) + "\n")
    (out / "posterior.csv").write_text(posterior_to_csv(post, labels))
    print("map:", " ".join(map_sequence(post)))
    print(f"loglik: {post.loglik!r}")
    return EXIT_OK


def cmd_table(args) -> int:
    from .harness import RunConfig, run_table, write_table_outputs

    doc = _config(args)
    run = dict(doc.get("run", {}))
    for key in ("scenarios", "horizon", "trials", "workers", "model_file"):
        value = getattr(args, key)
        if value is not None:
            run[key] = value
    if args.agents_per_direction is not None:
        run["agents_per_direction"] = args.agents_per_direction
    if args.patterns:
        run["patterns"] = args.patterns
    if args.fractions:
        run["fractions"] = args.fractions
    if args.methods:
        run["methods"] = args.methods
    if args.no_timing:
        run["timing"] = False
    if getattr(args, "seed", None) is not None:
        run["seed"] = args.seed
    cfg = RunConfig.from_dict(run, traffic=doc.get("traffic"))
    report = run_table(cfg)
    fmt = getattr(args, "format", None) or "csv"
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(report.to_csv() if fmt == "csv" else json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        for p in write_table_outputs(report, out, fmt, plots=not args.no_plots):
            print(p)
    print(f"majority baseline {report.majority_label}: {report.majority_accuracy:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .harness import BenchConfig, run_bench

    doc = _config(args)
    bench = dict(doc.get("bench", {}))
    if args.n_list:
        bench["n_list"] = args.n_list
    if args.horizon is not None:
        bench["horizon"] = args.horizon
    if args.repeats is not None:
        bench["repeats"] = args.repeats
    if getattr(args, "seed", None) is not None:
        bench["seed"] = args.seed
    report = run_bench(BenchConfig.from_dict(bench, traffic=doc.get("traffic")))
    fmt = getattr(args, "format", None) or "csv"
    text = report.to_csv() if fmt == "csv" else json.dumps(report.to_dict(), indent=2)
    _emit(text, args, f"bench.{fmt}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master RNG seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with traffic/run/bench sections")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="aase", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-traffic", parents=[common], help="write the intersection model as JSON")
    p.add_argument("--n-parallel", type=int)
    p.add_argument("--n-perpendicular", type=int)
    p.set_defaults(func=cmd_build_traffic)

    p = sub.add_parser("simulate", parents=[common], help="sample a trajectory and its observation trace")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, default=300)
    p.add_argument("--no-truth", action="store_true", help="omit the ground-truth section")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("occlude", parents=[common], help="drop global observations from a trace")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--kind", required=True, choices=("ContStart", "ContEnd", "ContRandom", "DiscontRandom"))
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--include-agents", action="store_true", help="also occlude agent channels")
    p.set_defaults(func=cmd_occlude)

    p = sub.add_parser("infer", parents=[common], help="posterior over the global state")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--method", choices=("aase", "hmm", "exact"), default="aase")
    p.add_argument("--mode", choices=("smooth", "filter"), default="smooth")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("table", parents=[common], help="run the occlusion-grid experiment")
    p.add_argument("--model-file", dest="model_file")
    p.add_argument("--scenarios", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--agents-per-direction", type=int, nargs=2, metavar=("LOW", "HIGH"))
    p.add_argument("--patterns", nargs="+")
    p.add_argument("--fractions", type=float, nargs="+")
    p.add_argument("--methods", nargs="+", choices=("AASE", "HMM", "EXACT"))
    p.add_argument("--no-timing", action="store_true", help="leave mean_infer_ms empty for byte-stable reports")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("bench", parents=[common], help="time inference against the number of agents")
    p.add_argument("--n-list", type=int, nargs="+")
    p.add_argument("--horizon", type=int)
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelValidationError, ConfigError, UnknownAgentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ZeroSupportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_SUPPORT
    except (SchemaError, TraceMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
