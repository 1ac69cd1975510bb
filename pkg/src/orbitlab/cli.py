"""Command line front end: ``orbitlab run`` and ``orbitlab validate``.

Exit codes: 0 all declared tolerances passed, 1 a tolerance failed,
2 configuration problems.  Flags override config keys; the default
output directory comes from ``--out``, then the config, then the
``ORBITLAB_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .runner import run


def _apply_overrides(text: str, overrides: list[str]) -> str:
    lines = [l for l in text.splitlines()]
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError([f"override {ov!r} is not key=value"])
        key = ov.split("=", 1)[0].strip()
        lines = [l for l in lines if l.split("=", 1)[0].strip() != key or "=" not in l]
        lines.append(ov)
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="orbitlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    p_val = sub.add_parser("validate", help="validate an experiment config")
    p_val.add_argument("config", type=Path)

    args = parser.parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        try:
            parse_config(text)
        except ConfigError as exc:
            for problem in exc.problems:
                print(f"invalid: {problem}", file=sys.stderr)
            return 2
        print("ok")
        return 0

    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed = {args.seed}")
    try:
        cfg = parse_config(_apply_overrides(text, overrides))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return 2

    report = run(cfg, out_dir=args.out)
    for name, (value, bound, ok) in sorted(report.checks.items()):
        print(f"{name}: value={value:.6g} bound={bound:.6g} {'PASS' if ok else 'FAIL'}")
    for key in sorted(report.metrics):
        print(f"{key} = {report.metrics[key]}")
    print(f"artifacts: {', '.join(report.files)}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
