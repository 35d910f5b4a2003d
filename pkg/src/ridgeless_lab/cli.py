"""Command-line runner.

Exit codes: 0 success, 2 usage error or unknown recipe id, 3 malformed
config, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .closedform import counterexample_expectation, gaussian_exact, lower_bound, sphere_exact
from .config import ConfigError, validate_config
from .estimator import THREADS_ENV, format_float
from .experiments import RECIPES, UnknownRecipe, recipe_config, run_config
from .featmaps import spec_from_json
from .numkit import NumericalFailure, RngStream
from .optimizer import OptimConfig, TrainingDiverged, train
from .rankcheck import DEFAULT_THRESHOLD, MACHINE_BAND, frk_check

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


def parse_range(text: str) -> list[int]:
    """``"1..60"`` -> 1..60 inclusive; ``"5,10,20"`` and ``"7"`` also accepted."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return out


def _load_json(text: str, what: str):
    """Parse inline JSON or read it from a file path."""
    try:
        if os.path.exists(text):
            with open(text) as fh:
                return json.load(fh)
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(what, f"invalid JSON ({exc})") from exc


def _load_spec(text: str):
    try:
        return spec_from_json(_load_json(text, "spec"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("spec", str(exc)) from exc


def _apply_overrides(cfg: dict, args) -> dict:
    for entry in cfg.get("curves", []) + cfg.get("optimize", []):
        est = entry.get("estimator", entry.get("evaluate"))
        if args.seed is not None:
            est["base_seed"] = args.seed + est.get("base_seed", 0) - cfg.get("seed", 0)
        if args.reps is not None:
            est["reps"] = args.reps
        if args.lam is not None:
            est["lam"] = args.lam
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def cmd_estimate(args) -> int:
    cfg = validate_config(_load_json(args.config, "config"))
    cfg = validate_config(_apply_overrides(cfg, args))
    manifest = run_config(cfg, args.out, threads=args.threads, log=_log(args))
    print(os.path.join(args.out, "manifest.json"))
    return 0 if manifest else 1


def cmd_bounds(args) -> int:
    rows = []
    for p in args.p:
        for n in args.n:
            try:
                sphere = format_float(sphere_exact(n, p).value)
            except ValueError:
                sphere = "nan"
            counter = format_float(counterexample_expectation(n, p)) if p >= 2 else "nan"
            rows.append([n, p, format_float(lower_bound(n, p, args.sigma2).value), sphere,
                         format_float(gaussian_exact(n, p).value), counter])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["n", "p", "lower_bound", "sphere_exact", "gaussian_exact", "counterexample"])
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_rankcheck(args) -> int:
    spec = _load_spec(args.spec)
    report = frk_check(spec, args.n, samples=args.samples, threshold=args.threshold,
                       rng=RngStream(args.seed or 0), machine_band=args.machine_band)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "rankcheck.json"), "w", newline="") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(report.summary())
    return 0


def cmd_optimize(args) -> int:
    spec = _load_spec(args.spec)
    if spec.variant != "ntk_param_nn":
        raise ConfigError("spec.variant", "optimization needs variant 'ntk_param_nn'")
    make = OptimConfig.paper if args.scale == "paper" else OptimConfig.desk
    config = make(target_n=args.target_n, seed=args.seed or 0)
    if args.iterations is not None:
        config = OptimConfig(**{**config.__dict__, "iterations": args.iterations})
    result = train(spec, config)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "theta.json"), "w", newline="") as fh:
        json.dump({"spec": spec.to_json(), "theta": result.theta.to_json()}, fh)
        fh.write("\n")
    with open(os.path.join(args.out, "trajectory.csv"), "w", newline="") as fh:
        fh.write(result.trajectory_csv())
    first, last = result.trajectory[0][1], result.trajectory[-1][1]
    print(f"trained {config.iterations} steps: loss {first:.6g} -> {last:.6g}")
    return 0


def cmd_reproduce(args) -> int:
    cfg = recipe_config(args.id, scale=args.scale, seed=args.seed or 0)
    if args.reps is not None or args.lam is not None:
        cfg = validate_config(_apply_overrides(cfg, argparse.Namespace(seed=None, reps=args.reps, lam=args.lam)))
    out = os.path.join(args.out, args.id)
    run_config(cfg, out, threads=args.threads, log=_log(args))
    print(os.path.join(out, "manifest.json"))
    return 0


def cmd_validate(args) -> int:
    cfg = validate_config(_load_json(args.config, "config"))
    if args.print:
        json.dump(cfg, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print("ok")
    return 0


def cmd_show_recipe(args) -> int:
    json.dump(recipe_config(args.id, scale=args.scale, seed=args.seed or 0), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _log(args):
    if args.quiet:
        return lambda *a, **k: None
    return lambda msg: print(msg, file=sys.stderr)


def _threads(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("threads must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed")
    common.add_argument("--scale", choices=("paper", "desk"), default="desk")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=_threads, default=0,
                        help=f"worker threads, 0 = auto (falls back to ${THREADS_ENV}); results do not depend on it")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="ridge regularization")
    common.add_argument("--reps", type=int, default=None, help="Monte-Carlo repetitions")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="ridgeless-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="run the curves in a JSON config")
    p.add_argument("config", help="config file or inline JSON")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", parents=[common], help="closed-form values over an (n, p) grid")
    p.add_argument("--n", type=parse_range, required=True, help="e.g. 1..60")
    p.add_argument("--p", type=parse_range, required=True, help="e.g. 30")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds, out=None)

    p = sub.add_parser("rankcheck", parents=[common], help="Monte-Carlo full-rank check")
    p.add_argument("spec", help="feature map spec file or inline JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--machine-band", type=float, default=MACHINE_BAND)
    p.set_defaults(func=cmd_rankcheck)

    p = sub.add_parser("optimize", parents=[common], help="train a network feature map")
    p.add_argument("spec", help="ntk_param_nn spec file or inline JSON")
    p.add_argument("--target-n", type=int, required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("reproduce", parents=[common], help="run a figure recipe")
    p.add_argument("id", help=", ".join(RECIPES))
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("validate-config", help="check a config against the schema")
    p.add_argument("config")
    p.add_argument("--print", action="store_true", help="print the normalized config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("show-recipe", parents=[common], help="print a recipe's resolved config")
    p.add_argument("id")
    p.set_defaults(func=cmd_show_recipe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "bounds":
        args.out = None if args.out in (None, ".") else args.out
    try:
        return args.func(args)
    except UnknownRecipe as exc:
        print(f"error: unknown recipe id {exc.args[0]!r}; known: {', '.join(RECIPES)}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError, TrainingDiverged) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
