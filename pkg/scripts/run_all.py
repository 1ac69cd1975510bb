#!/usr/bin/env python3
"""Run every config under scripts/configs and print a summary table.

Usage: python scripts/run_all.py [outdir]

Each experiment writes its artifacts to <outdir>/<config-stem>/ and the
script exits nonzero if any declared tolerance fails.
"""

import sys
import time
from pathlib import Path

from orbitlab.config import parse_config
from orbitlab.runner import run


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
    configs = sorted((Path(__file__).parent / "configs").glob("*.cfg"))
    failures = 0
    for cfg_path in configs:
        cfg = parse_config(cfg_path.read_text(encoding="utf-8"))
        t0 = time.perf_counter()
        report = run(cfg, out_dir=out_root / cfg_path.stem)
        dt = time.perf_counter() - t0
        status = "PASS" if report.passed else "FAIL"
        keys = ", ".join(
            f"{k}={v:.4g}" for k, v in sorted(report.metrics.items())
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        )
        print(f"{status}  {cfg_path.stem:<22} {dt:7.1f}s  {keys}")
        failures += 0 if report.passed else 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
