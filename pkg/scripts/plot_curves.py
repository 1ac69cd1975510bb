#!/usr/bin/env python3
"""Render the CSV curve artifacts of a run directory to PNG.

Usage: python scripts/plot_curves.py <run-dir> [...]

Plots whatever it recognises (survival curves, EVL curves, density
ratios, short-range sums); the pipelines themselves never render --
they emit plot-ready CSV only.
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path: Path):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: [float(r[i]) for r in body] for i, h in enumerate(header) if _numeric(body, i)}
    return cols


def _numeric(body, i):
    try:
        [float(r[i]) for r in body[:3]]
        return True
    except (ValueError, IndexError):
        return False


RECIPES = {
    "survival.csv": ("t", ["survival"], "rescaled time", "survival"),
    "hts.csv": ("t", ["survival"], "rescaled time", "survival"),
    "theta_curve.csv": ("t", ["survival", "oracle"], "rescaled time", "survival"),
    "evl_curve.csv": ("y", ["empirical", "analytic"], "y", "P(M_n <= u_n(y))"),
    "dprime.csv": ("k", ["sum", "iid_baseline"], "k", "pair sum"),
    "density_ratio.csv": ("delta", ["ratio_times_pi"], "radius", "ratio x pi"),
}


def main() -> int:
    made = 0
    for arg in sys.argv[1:]:
        run_dir = Path(arg)
        for name, (x, ys, xlabel, ylabel) in RECIPES.items():
            src = run_dir / name
            if not src.exists():
                continue
            cols = read_csv(src)
            fig, ax = plt.subplots(figsize=(5, 3.2))
            for y in ys:
                if y in cols:
                    ax.plot(cols[x], cols[y], marker="o", ms=2.5, lw=1, label=y)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.legend(frameon=False, fontsize=8)
            fig.tight_layout()
            dest = src.with_suffix(".png")
            fig.savefig(dest, dpi=150)
            plt.close(fig)
            print("wrote", dest)
            made += 1
    if not made:
        print("no recognised curve files found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
