"""``byzcsl-bench run|sweep``: run a recipe, optionally overriding fields."""
import argparse
import json
import logging
import sys

from ..data_io import DataFormatError
from .config import ConfigError, load_config, with_value
from .experiment import run_experiment, sweep

# flag -> config field
FLAGS = {
    "task": str, "n": int, "m": int, "d": int, "alpha": float, "beta": float,
    "agg": str, "attack": str, "rounds": int, "reps": int, "seed": int,
    "lambda-mode": str, "a": float, "tau": float, "h": float, "data": str,
    "target": str, "out": str, "noise": str, "jobs": int,
}


def _add_common(p):
    p.add_argument("--config", help="INI recipe with an [experiment] section")
    for flag, typ in FLAGS.items():
        p.add_argument(f"--{flag}", type=typ, default=None)
    p.add_argument("--log1p-target", action="store_true", default=None)
    p.add_argument("--parallel", action="store_true", default=None,
                   help="compute worker gradients on a thread pool")


def build_parser():
    parser = argparse.ArgumentParser(prog="byzcsl-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run one experiment"))
    sp = sub.add_parser("sweep", help="run the recipe once per axis value")
    _add_common(sp)
    sp.add_argument("--axis", required=True, choices=("alpha", "n", "m", "tau"))
    sp.add_argument("--values", required=True, help="comma-separated values")
    return parser


def _overrides(args):
    out = {}
    for flag in list(FLAGS) + ["log1p-target", "parallel"]:
        key = flag.replace("-", "_")
        v = getattr(args, key)
        if v is not None:
            out[key] = v
    return out


def _fail(kind, field, message, code=2):
    json.dump({"error": kind, "field": field, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args)).validate()
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("values", "no sweep values given")
            for v in values:
                with_value(cfg, args.axis, v).validate()
            rows, summary = sweep(cfg, args.axis, values)
        else:
            rows, summary = run_experiment(cfg)
    except ConfigError as exc:
        return _fail("config", exc.field, exc.message)
    except (DataFormatError, OSError) as exc:
        return _fail("data", "data", str(exc))
    if not cfg.out:
        json.dump(summary, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
