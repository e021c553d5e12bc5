"""``qch-lab`` command line.

    qch-lab run <config-file>
    qch-lab preset <name> [--out DIR] [--set key=value ...]
    qch-lab verify [--out DIR]

The output directory defaults to ``$QCH_LAB_OUT`` (or ``./qch-out``).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import apply_overrides, parse_config
from .core import ConfigurationError
from .presets import PRESETS, run_preset
from .runner import run_config

log = logging.getLogger("qchlab")

VERIFY_PRESETS = ("free-limit", "sampler-suite", "convergence")


def _default_out(sub=""):
    base = os.environ.get("QCH_LAB_OUT", "qch-out")
    return os.path.join(base, sub) if sub else base


def _report(manifest) -> bool:
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']}")
    for w in manifest["warnings"]:
        print(f"warning: {w}")
    for e in manifest["errors"]:
        print(f"error: {e}", file=sys.stderr)
    return manifest["passed"] and not manifest["partial"]


def cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    cfg = apply_overrides(cfg, args.set)
    out = args.out or cfg.out_dir or _default_out()
    _, manifest = run_config(cfg, out)
    ok = _report(manifest)
    print(f"outputs in {out}")
    return 0 if ok else 1


def cmd_preset(args) -> int:
    out = args.out or _default_out(args.name)
    res = run_preset(args.name, out, args.set, workers=args.workers)
    ok = _report(res.manifest)
    print(f"outputs in {out}")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    base = args.out or _default_out("verify")
    failed = []
    for name in VERIFY_PRESETS:
        print(f"== {name}")
        res = run_preset(name, os.path.join(base, name))
        if not _report(res.manifest):
            failed.append(name)
    if failed:
        print(f"verify FAILED: {', '.join(failed)}")
        return 1
    print("verify passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qch-lab",
        description="Quantum-classical hybrid dynamics scenario runner.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (section.key for sections)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--workers", type=int, default=1,
                   help="processes for sweep members")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("verify", help="free-limit, sampler and convergence checks")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
