"""Invariant densities, ball measures, and Lebesgue-ratio diagnostics.

Closed forms are used where they exist (Lebesgue for the doubling maps,
the arcsine law for the quadratic map at parameter 2); every other
density is estimated by a long-orbit histogram.  Empirical ball masses
weight the partial cells at the ball boundary by their exact overlap
fraction, which removes the O(bin width / radius) bias of naive cell
counting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import DomainError, MapSystem, PhaseSpace
from .orbits import iter_col_blocks

__all__ = [
    "LowCoverageWarning",
    "ClosedFormDensity",
    "HistogramDensity",
    "density_model",
    "density_at",
    "ball_measure",
    "lebesgue_ratio_curve",
    "build_histogram",
    "save_histogram",
    "load_histogram",
    "invariance_defect",
]

DEFAULT_BINS_1D = 1 << 14
DEFAULT_BINS_2D = 1 << 10


class LowCoverageWarning(UserWarning):
    """The histogram has no mass where a density value was requested."""


@dataclass(frozen=True)
class ClosedFormDensity:
    """An invariant density known in closed form.

    ``lebesgue``: the doubling maps preserve Lebesgue measure.
    ``arcsine``: the quadratic map at a=2 preserves
    ``rho(x) = 1/(pi sqrt(1-x^2))`` on (-1, 1).
    """

    form: str
    space: PhaseSpace

    def __post_init__(self):
        if self.form not in ("lebesgue", "arcsine"):
            raise DomainError(f"unknown closed density form {self.form!r}")


def density_model(system: MapSystem):
    """The closed-form density of a system, if one is implemented."""
    if system.family in ("doubling", "torus-doubling", "perturbed-expanding"):
        # the perturbed map's density is NOT Lebesgue; only the doubling
        # maps get a closed form
        if system.family == "perturbed-expanding":
            raise DomainError("no closed-form density for perturbed-expanding")
        return ClosedFormDensity("lebesgue", system.space)
    if system.family == "quadratic" and system.a == 2.0:
        return ClosedFormDensity("arcsine", system.space)
    raise DomainError(f"no closed-form density for {system.family!r}; build a histogram")


# ---------------------------------------------------------------------------
# histogram model
# ---------------------------------------------------------------------------


def _axis_range(space: PhaseSpace) -> tuple[float, float]:
    return (-1.0, 1.0) if space.kind == "interval" else (0.0, 1.0)


@dataclass
class HistogramDensity:
    """Uniform-bin histogram estimate of an invariant density.

    ``counts`` is ``(bins,)`` in one dimension or ``(bins, bins)`` on the
    torus; merging histograms with identical geometry just adds counts,
    so independently filled shards combine associatively.
    """

    space: PhaseSpace
    bins: int
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.total <= 0 or np.any(self.counts < 0):
            raise DomainError("histogram needs non-negative counts and total > 0")

    @property
    def cell_width(self) -> float:
        lo, hi = _axis_range(self.space)
        return (hi - lo) / self.bins

    def merge(self, other: "HistogramDensity") -> "HistogramDensity":
        if (
            other.space != self.space
            or other.bins != self.bins
            or other.counts.shape != self.counts.shape
        ):
            raise DomainError("cannot merge histograms with different geometry")
        return HistogramDensity(
            self.space, self.bins, self.counts + other.counts, self.total + other.total
        )


def build_histogram(
    system: MapSystem,
    points: int,
    seed: int,
    bins: int | None = None,
    streams: int = 20_000,
    burn_in: int = 1000,
) -> HistogramDensity:
    """Fill a histogram with ``points`` stationary orbit points.

    Points are pooled from ``streams`` parallel orbits (Lebesgue starts,
    ``burn_in`` discarded iterates each), which keeps the fill
    vectorised; the pooled histogram estimates the invariant measure by
    ergodicity.
    """
    space = system.space
    d2 = space.kind == "torus2"
    if bins is None:
        bins = DEFAULT_BINS_2D if d2 else DEFAULT_BINS_1D
    lo, hi = _axis_range(space)
    length = (points + streams - 1) // streams
    counts = np.zeros(bins * bins if d2 else bins, dtype=np.int64)
    total = 0
    scale = bins / (hi - lo)
    for _, pts in iter_col_blocks(system, streams, length, seed, burn_in=burn_in):
        if d2:
            i = ((pts[..., 0] - lo) * scale).astype(np.int64)
            j = ((pts[..., 1] - lo) * scale).astype(np.int64)
            np.clip(i, 0, bins - 1, out=i)
            np.clip(j, 0, bins - 1, out=j)
            flat = (i * bins + j).ravel()
        else:
            flat = ((pts - lo) * scale).astype(np.int64).ravel()
            np.clip(flat, 0, bins - 1, out=flat)
        counts += np.bincount(flat, minlength=counts.size)
        total += flat.size
    counts = counts.reshape((bins, bins)) if d2 else counts
    return HistogramDensity(space, bins, counts, total)


# ---------------------------------------------------------------------------
# density queries
# ---------------------------------------------------------------------------


def density_at(model, zeta) -> float:
    """Density of the invariant measure w.r.t. Lebesgue at ``zeta``.

    Returns ``math.inf`` where a closed form diverges (the arcsine
    density at the interval endpoints).  A histogram cell with zero
    count returns 0.0 under a :class:`LowCoverageWarning`.
    """
    model_space(model).check_point(zeta)
    if isinstance(model, ClosedFormDensity):
        if model.form == "lebesgue":
            return 1.0
        z = float(zeta)
        if abs(z) >= 1.0:
            return math.inf
        return 1.0 / (math.pi * math.sqrt(1.0 - z * z))
    lo, hi = _axis_range(model.space)
    w = model.cell_width
    if model.space.kind == "torus2":
        i = min(int((zeta[0] - lo) / w), model.bins - 1)
        j = min(int((zeta[1] - lo) / w), model.bins - 1)
        c = model.counts[i, j]
        vol = w * w
    else:
        i = min(int((float(zeta) - lo) / w), model.bins - 1)
        c = model.counts[i]
        vol = w
    if c == 0:
        warnings.warn("no histogram mass at the requested point", LowCoverageWarning)
        return 0.0
    return float(c) / (model.total * vol)


def model_space(model) -> PhaseSpace:
    return model.space


def _interval_mass_1d(model: HistogramDensity, a: float, b: float) -> float:
    """Histogram mass of [a, b] with exact end-cell overlap weights."""
    lo, hi = _axis_range(model.space)
    a, b = max(a, lo), min(b, hi)
    if b <= a:
        return 0.0
    w = model.cell_width
    ia = min(int((a - lo) / w), model.bins - 1)
    ib = min(int((b - lo) / w), model.bins - 1)
    if ia == ib:
        frac = (b - a) / w
        return float(model.counts[ia]) * frac / model.total
    mass = float(model.counts[ia]) * ((lo + (ia + 1) * w) - a) / w
    mass += float(model.counts[ib]) * (b - (lo + ib * w)) / w
    if ib > ia + 1:
        mass += float(model.counts[ia + 1 : ib].sum())
    return mass / model.total


def _circle_seg_area(r: float, x: float) -> float:
    # antiderivative of sqrt(r^2 - t^2) evaluated at x, clipped to [-r, r]
    x = min(max(x, -r), r)
    return 0.5 * (x * math.sqrt(max(r * r - x * x, 0.0)) + r * r * math.asin(x / r))


def _disk_cell_overlap(r: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of the origin-centred disk of radius r inside [x0,x1]x[y0,y1]."""
    x0, x1 = max(x0, -r), min(x1, r)
    if x1 <= x0:
        return 0.0
    cuts = {x0, x1}
    for y in (y0, y1):
        if r * r > y * y:
            c = math.sqrt(r * r - y * y)
            for s in (-c, c):
                if x0 < s < x1:
                    cuts.add(s)
    xs = sorted(cuts)
    area = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        mid = 0.5 * (a + b)
        wmid = math.sqrt(max(r * r - mid * mid, 0.0))
        top_is_cap = wmid < y1
        bot_is_cap = -wmid > y0
        if min(y1, wmid) <= max(y0, -wmid):
            continue
        seg = _circle_seg_area(r, b) - _circle_seg_area(r, a)
        if top_is_cap and bot_is_cap:
            area += 2.0 * seg
        elif top_is_cap:
            area += seg - y0 * (b - a)
        elif bot_is_cap:
            area += y1 * (b - a) + seg
        else:
            area += (y1 - y0) * (b - a)
    return area


def _torus_ball_mass(model: HistogramDensity, zeta, delta: float) -> float:
    w = model.cell_width
    n = model.bins
    cx, cy = float(zeta[0]), float(zeta[1])
    i_lo = math.floor((cx - delta) / w)
    i_hi = math.floor((cx + delta) / w)
    j_lo = math.floor((cy - delta) / w)
    j_hi = math.floor((cy + delta) / w)
    mass = 0.0
    cell_area = w * w
    for i in range(i_lo, i_hi + 1):
        for j in range(j_lo, j_hi + 1):
            frac = _disk_cell_overlap(
                delta, i * w - cx, (i + 1) * w - cx, j * w - cy, (j + 1) * w - cy
            ) / cell_area
            if frac <= 0.0:
                continue
            mass += min(frac, 1.0) * float(model.counts[i % n, j % n])
    return mass / model.total


def ball_measure(model, zeta, delta: float) -> float:
    """Invariant measure of the metric ball ``B_delta(zeta)``.

    Exact integrals for closed forms; overlap-weighted cell mass for
    histograms.  ``delta`` must be positive and, on the circle/torus,
    below the injectivity scale 1/2 (a radius large enough to cover the
    whole space is also accepted and returns 1).
    """
    if delta <= 0:
        raise DomainError("ball radius must be positive")
    space = model_space(model)
    space.check_point(zeta)
    if isinstance(model, ClosedFormDensity):
        if model.form == "lebesgue":
            if space.kind == "circle":
                return min(2.0 * delta, 1.0)
            if space.kind == "torus2":
                if delta * delta >= 0.5:
                    return 1.0
                if delta > 0.5:
                    raise DomainError("torus ball radius above injectivity scale")
                return math.pi * delta * delta
        z = float(zeta)
        hi = min(z + delta, 1.0)
        lo = max(z - delta, -1.0)
        return (math.asin(hi) - math.asin(lo)) / math.pi
    if space.kind == "torus2":
        if delta > 0.5 and delta * delta < 0.5:
            raise DomainError("torus ball radius above injectivity scale")
        if delta * delta >= 0.5:
            return 1.0
        return _torus_ball_mass(model, zeta, delta)
    if space.kind == "circle":
        z = float(zeta)
        if delta >= 0.5:
            return 1.0
        a, b = z - delta, z + delta
        if a < 0.0:
            return _interval_mass_1d(model, 0.0, b) + _interval_mass_1d(model, a + 1.0, 1.0)
        if b > 1.0:
            return _interval_mass_1d(model, a, 1.0) + _interval_mass_1d(model, 0.0, b - 1.0)
        return _interval_mass_1d(model, a, b)
    return _interval_mass_1d(model, float(zeta) - delta, float(zeta) + delta)


def lebesgue_ratio_curve(model, zeta, deltas) -> np.ndarray:
    """Ratios ``mu(B_delta(zeta)) / (kappa delta^d)`` over a shrinking grid.

    Where the density exists at ``zeta`` the tail of this sequence
    approaches ``density_at(model, zeta)``; unbounded growth flags a
    centre where the Lebesgue differentiation ratio diverges.
    """
    deltas = np.asarray(list(deltas), dtype=float)
    if np.any(deltas <= 0) or np.any(np.diff(deltas) >= 0):
        raise DomainError("delta grid must be strictly decreasing and positive")
    space = model_space(model)
    return np.array(
        [ball_measure(model, zeta, d) / (space.kappa * d ** space.dim) for d in deltas]
    )


def invariance_defect(model_x: HistogramDensity, model_fx: HistogramDensity, z: float = 3.0):
    """Fraction of bins where two histogram fills differ beyond z-sigma.

    Used to test f-invariance: fill one histogram with orbit points and
    one with their images; per-bin discrepancies are scored against the
    multinomial standard deviation, and the fraction outside the band is
    returned together with the bin count.
    """
    p = model_x.counts.ravel() / model_x.total
    q = model_fx.counts.ravel() / model_fx.total
    var = p * (1 - p) / model_x.total + q * (1 - q) / model_fx.total
    sd = np.sqrt(np.maximum(var, 1e-300))
    outside = np.abs(p - q) > z * sd
    return float(outside.mean()), int(outside.size)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_histogram(path, model: HistogramDensity, meta: dict | None = None) -> None:
    """Write a histogram as CSV: header comments, then nonzero (bin, count)."""
    lines = ["# orbitlab-histogram v1"]
    lines.append(
        "# space=%s bins=%d total=%d" % (model.space.kind, model.bins, model.total)
    )
    for key in sorted(meta or {}):
        lines.append("# %s=%s" % (key, (meta or {})[key]))
    lines.append("bin,count")
    flat = model.counts.ravel()
    for idx in np.nonzero(flat)[0]:
        lines.append("%d,%d" % (idx, flat[idx]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_histogram(path) -> tuple[HistogramDensity, dict]:
    kinds = {"circle": PhaseSpace.circle, "interval": PhaseSpace.interval, "torus2": PhaseSpace.torus2}
    meta: dict = {}
    space = bins = total = None
    counts = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line == "bin,count":
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            idx, cnt = line.split(",")
            if counts is None:
                space = kinds[meta["space"]]()
                bins = int(meta["bins"])
                total = int(meta["total"])
                size = bins * bins if space.kind == "torus2" else bins
                counts = np.zeros(size, dtype=np.int64)
            counts[int(idx)] = int(cnt)
    if counts is None:
        raise DomainError(f"no histogram data in {path}")
    if space.kind == "torus2":
        counts = counts.reshape((bins, bins))
    return HistogramDensity(space, bins, counts, total), meta
