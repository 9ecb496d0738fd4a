"""Command line runner: ``clonelab <subcommand> [--config PATH] [--seed N] [--out DIR] [--quiet]``.

Exit status is 0 when every asserted property holds, 1 when one fails, and
2 when the configuration does not validate.  Reports are JSON with sorted
keys; wall-clock data lives only under ``metadata`` so that two runs with
the same config and seed produce identical ``report`` sections.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import U64_MAX, load_config, selftest_config
from .errors import ConfigError, LabError
from .suites import SUITES, run_suite

SUBCOMMANDS = {
    "clone-r2n": ["clone-r2n"],
    "no-go": ["no-go"],
    "approx": ["approx"],
    "points": ["points"],
    "quantum-1d": ["quantum-1d"],
    "selftest": ["dynamics", "clone-r2n", "no-go", "approx", "points", "quantum-1d"],
}

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clonelab", description="Cloning experiments on model phase spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    helps = {
        "clone-r2n": "exact linear cloning on R^2N and its generator Hamiltonian",
        "no-go": "winding certificates on cylinders and the torus curve experiment",
        "approx": "approximate-cloning search on R^2 and on the cylinder",
        "points": "point transport: coin, swap and random configurations",
        "quantum-1d": "copying a one-dimensional subspace by tensor regrouping",
        "selftest": "every invariant suite at the selftest scale",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, default=None, help="JSON config merged over the shipped defaults")
        p.add_argument("--seed", type=_u64, default=None, help="global seed (overrides the config)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: output.dir)")
        p.add_argument("--quiet", action="store_true", help="only report failures")
    return parser


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default)


def _write(path: Path, payload: dict) -> None:
    path.write_text(dumps(payload) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else (lambda *a: print(*a, flush=True))
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        diag = {"error": "config validation failed", "message": str(exc),
                "problems": getattr(exc, "problems", [str(exc)])}
        print(dumps(diag), file=sys.stderr)
        return EXIT_CONFIG
    run_cfg = selftest_config(cfg) if args.command == "selftest" else cfg
    out = args.out if args.out is not None else Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    results, failures, runtimes = {}, [], {}
    for name in SUBCOMMANDS[args.command]:
        t0 = time.perf_counter()
        try:
            res = run_suite(name, run_cfg)
        except LabError as exc:
            results[name] = {"suite": name, "passed": False, "error": f"{type(exc).__name__}: {exc}"}
            failures.append(f"{name}: {type(exc).__name__}: {exc}")
            runtimes[name] = time.perf_counter() - t0
            print(f"[FAIL] {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        runtimes[name] = res.runtime
        results[name] = res.to_dict()
        if cfg["output"]["csv"]:
            for fname, writer in res.artifacts.items():
                writer(out / fname)
        for c in res.checks:
            line = f"[{'ok' if c.passed else 'FAIL'}] {name}: {c.prop} = {c.value} ({c.bound})"
            if c.passed:
                say(line)
            else:
                print(line, file=sys.stderr)
                failures.append(f"{name}: {c.prop}")
    payload = {
        "experiment": cfg["experiment"],
        "command": args.command,
        "seed": cfg["seed"],
        "config": run_cfg,
        "passed": not failures,
        "violations": failures,
        "suites": results,
        "metadata": {"started": started, "finished": datetime.now(timezone.utc).isoformat(),
                     "runtime_s": runtimes, "version": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
    }
    _write(out / f"{args.command}.json", payload)
    if failures:
        print(f"{args.command}: {len(failures)} violated propert{'y' if len(failures) == 1 else 'ies'}: "
              + "; ".join(failures), file=sys.stderr)
        return EXIT_INVARIANT
    say(f"{args.command}: all properties hold; report in {out / (args.command + '.json')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
