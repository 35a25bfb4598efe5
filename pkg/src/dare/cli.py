"""Command-line entry point: ``dare <command> [options]``.

Exit status is 0 when every check passes, 1 when an acceptance check
fails and 2 on usage errors (bad flags, missing or malformed input).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .io import DataParseError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

COMMANDS = ("gen", "fit", "eval") + harness.EXPERIMENTS + ("all",)

# flag name -> parameter key it overrides
FLAG_KEYS = {
    "d": "d", "envs": "envs", "n": "n", "lam": "lam", "data": "data", "model": "model",
    "method": "method", "task": "task", "rho": "rho", "B": "B", "instances": "instances",
    "E_grid": "E_grid", "n_grid": "n_grid", "lambda_grid": "lambda_grid",
    "shrinkage_weight": "shrinkage_weight",
}


def _grid(kind):
    def parse(text):
        try:
            vals = [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
        if not vals:
            raise argparse.ArgumentTypeError("grid is empty")
        return vals
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with per-command sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path)
    common.add_argument("--trials", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--quick", action="store_true", help="reduced sizes for smoke runs")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--d", type=int)
    common.add_argument("--envs", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--lam", type=float)
    common.add_argument("--shrinkage-weight", dest="shrinkage_weight", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--B", type=float)
    common.add_argument("--instances", type=int)
    common.add_argument("--E-grid", dest="E_grid", type=_grid(int))
    common.add_argument("--n-grid", dest="n_grid", type=_grid(int))
    common.add_argument("--lambda-grid", dest="lambda_grid", type=_grid(float))
    common.add_argument("--data", type=str)
    common.add_argument("--model", type=str)
    common.add_argument("--method", choices=sorted(harness.FITTERS))
    common.add_argument("--task", choices=["classify", "regress"])

    parser = argparse.ArgumentParser(prog="dare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run {name}")
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"invalid config {path}: {exc}") from None


def _overrides(args, command: str) -> dict:
    out = {}
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = val
    if args.trials is not None:
        out["instances" if command == "theorem2" else "trials"] = args.trials
    known = harness.DEFAULTS.get(command, {})
    unused = sorted(k for k in out if k not in known)
    if unused:
        raise ValueError(f"{command} does not accept: {', '.join(unused)}")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        glob = cfg.get("global", {})
        seed = args.seed if args.seed is not None else int(glob.get("seed", 0))
        out = args.out if args.out is not None else Path(glob.get("out", "out"))
        threads = args.threads if args.threads is not None else int(glob.get("threads", 1))
        quick = bool(args.quick or glob.get("quick", False))
        names = harness.EXPERIMENTS if args.command == "all" else (args.command,)
        configs = []
        for name in names:
            ov = _overrides(args, name) if args.command != "all" else {}
            params = harness.resolve_params(name, cfg.get(name), ov, quick=quick)
            configs.append(harness.ExperimentConfig(name, params, seed, out, threads, quick))
        out.mkdir(parents=True, exist_ok=True)
        results = {c.command: harness.execute(c) for c in configs}
    except (ValueError, DataParseError, FileNotFoundError) as exc:
        print(f"dare: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    harness.finalize(out, configs, results)
    for name, res in results.items():
        print(f"{name}: {'PASS' if res['pass'] else 'FAIL'}")
    return 0 if all(r["pass"] for r in results.values()) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
