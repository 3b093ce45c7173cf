"""Command-line interface.

::

    qtrates presets [--write DIR]
    qtrates validate <config.yaml | preset-name> [--seed N] [--tol name=value ...]
    qtrates run <config.yaml | preset-name> [--out DIR] [--seed N] [--threads N]
                [--tol name=value ...] [--plot]

Exit codes: 0 success, 2 configuration error, 3 gate failure,
4 runtime/numerical error.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .config import load_config, parse_tolerance_override, with_overrides
from .errors import ConfigError, QtrError
from .presets import PRESET_NAMES, list_presets, preset_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_RUNTIME = 4


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer") from exc
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="qtrates", description="Quantum transition rate experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log gate results")
    sub = p.add_subparsers(dest="verb", required=True)

    pr = sub.add_parser("presets", help="list the built-in presets")
    pr.add_argument("--write", metavar="DIR", help="also write each preset as DIR/<name>.yaml")

    for verb in ("run", "validate"):
        s = sub.add_parser(verb, help=f"{verb} a configuration file or preset name")
        s.add_argument("config", help="YAML configuration file, or a preset name")
        s.add_argument("--seed", type=_seed, help="override the configuration seed (u64)")
        s.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                       help="override a gate tolerance (repeatable)")
        if verb == "run":
            s.add_argument("--out", default="out", help="output directory (default: out)")
            s.add_argument("--threads", type=_positive_int, default=1,
                           help="worker threads for independent sweep items")
            s.add_argument("--plot", action="store_true",
                           help="render a PNG next to every CSV (requires matplotlib)")
    return p


def _load(args):
    if os.path.exists(args.config):
        cfg = load_config(args.config)
    elif args.config in PRESET_NAMES:
        cfg = preset_config(args.config)
    else:
        raise ConfigError(f"{args.config!r} is neither a file nor a preset "
                          f"({', '.join(PRESET_NAMES)})")
    tols = [parse_tolerance_override(t) for t in args.tol]
    if args.seed is not None or tols:
        cfg = with_overrides(cfg, args.seed, tols)
    return cfg


def _cmd_presets(args, out):
    for name, desc in list_presets():
        print(f"{name:22s} {desc}", file=out)
    if args.write:
        os.makedirs(args.write, exist_ok=True)
        for name, _ in list_presets():
            with open(os.path.join(args.write, f"{name}.yaml"), "w") as fh:
                fh.write(preset_config(name).to_yaml())
    return EXIT_OK


def _cmd_validate(args, out):
    from .runner import validate

    cfg = _load(args)
    diags = validate(cfg)
    for level, msg in diags:
        print(f"{level}: {msg}", file=out)
    if any(level == "error" for level, _ in diags):
        return EXIT_CONFIG
    if not diags:
        print(f"{cfg.experiment}: ok", file=out)
    return EXIT_OK


def _cmd_run(args, out):
    from .runner import run

    cfg = _load(args)
    manifest = run(cfg, args.out, threads=args.threads, plot=args.plot)
    for f in manifest.files:
        print(f"wrote {os.path.join(args.out, f['name'])}", file=out)
    if not manifest.passed:
        for g in manifest.failed_gates:
            print(f"gate failure: {g['name']} = {g['value']:.3e} (limit {g['relation']} "
                  f"{g['limit']:.3e})", file=sys.stderr)
        return EXIT_GATE
    print(f"{cfg.experiment}: all {len(manifest.gates)} gates passed "
          f"({manifest.wall_clock:.1f} s)", file=out)
    return EXIT_OK


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"presets": _cmd_presets, "validate": _cmd_validate, "run": _cmd_run}
    try:
        return handlers[args.verb](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QtrError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
