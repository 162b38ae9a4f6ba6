"""Command-line entry point: ``cvar-pomdp <verb> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import CvarPomdpError
from .experiments import run
from .io import load_schema
from .spec import ExperimentSpec

log = logging.getLogger("cvar_pomdp")

SWEEP_KINDS = {"horizon": "sweep-horizon", "alpha": "sweep-alpha", "nsamples": "sweep-nsamples"}
DEMO_KINDS = {"gmm": "gmm-demo", "thomas": "thomas-compare"}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment spec (YAML); command-line flags override its fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--reps", type=int)
    p.add_argument("--parallel", type=int, help="worker processes for independent repetitions")
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--n-b", type=int, dest="n_b")
    p.add_argument("--n-p", type=int, dest="n_p")
    p.add_argument("--horizon", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--table", dest="table_path", help="discrepancy table JSON")
    p.add_argument("--env-config", help="environment YAML overriding the shipped defaults")
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--log-level", default="WARNING")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvar-pomdp", description="CVaR bounds under simplified observation models")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("build-table", help="offline discrepancy table for one environment")
    p.add_argument("environment")
    p.add_argument("--n-delta", type=int)
    p.add_argument("--n-z", type=int)
    _common(p)

    p = sub.add_parser("eval", help="open-loop safe/dangerous bound evaluation")
    p.add_argument("environment")
    _common(p)

    p = sub.add_parser("sweep", help="bounds across a grid of horizons, alphas or sample sizes")
    p.add_argument("environment")
    p.add_argument("--param", choices=sorted(SWEEP_KINDS), required=True)
    _common(p)

    p = sub.add_parser("timing", help="original vs simplified wall-time comparison")
    p.add_argument("environment")
    p.add_argument("--sweep", choices=["horizon", "n_b"], dest="timing_sweep")
    _common(p)

    p = sub.add_parser("demo", help="distribution-level demos")
    p.add_argument("which", choices=sorted(DEMO_KINDS))
    _common(p)

    p = sub.add_parser("validate", help="check an experiment spec, or run Monte-Carlo coverage")
    p.add_argument("--coverage", action="store_true", help="run the coverage experiment instead of only checking")
    _common(p)
    return parser


_FIELDS = ("seed", "out_dir", "reps", "parallel", "alpha", "delta", "n_b", "n_p", "horizon", "k", "table_path", "env_config")


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    doc: dict = {}
    if args.config:
        doc = ExperimentSpec.from_file(args.config).to_dict()
    kind = {
        "build-table": "build-table",
        "eval": "open-loop-eval",
        "timing": "timing",
    }.get(args.verb)
    if args.verb == "sweep":
        kind = SWEEP_KINDS[args.param]
    elif args.verb == "demo":
        kind = DEMO_KINDS[args.which]
    elif args.verb == "validate":
        kind = "coverage-mc" if args.coverage else doc.get("kind", "coverage-mc")
    doc["kind"] = kind
    if getattr(args, "environment", None):
        doc["environment"] = args.environment
    for name in _FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    if args.grid:
        doc["grid"] = [int(g) if float(g).is_integer() and kind != "sweep-alpha" else g for g in args.grid]
    for name in ("n_delta", "n_z", "timing_sweep"):
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    return ExperimentSpec.from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = spec_from_args(args)
        if args.verb == "validate" and not args.coverage:
            spec.validate()
            load_schema(spec.kind)
            print(f"ok: {spec.kind} spec valid (config hash {spec.config_hash()})")
            return 0
        tables = run(spec)
    except CvarPomdpError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    schema = load_schema(spec.kind)
    for name, rows in tables.items():
        print(f"{spec.out_dir}/{schema[name]['file']}: {len(rows)} rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
