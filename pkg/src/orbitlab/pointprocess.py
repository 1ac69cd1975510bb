"""Exceedance and ball-visit point processes with Kac time rescaling.

Events are extracted with index ``j = 0`` included, following the
counting sums ``N(t) = sum_{j=0..floor(v t)} 1{event at j}``; the
ring-count convention for ``[a, b)`` is indices ``ceil(v a) .. floor(v b)``
inclusive.  The first-hitting helpers in :mod:`orbitlab.hitting` count
from ``j = 1``; cross-module tests account for that offset explicitly.

The Poisson limit is probed three ways: total-variation distance of
window counts against the Poisson law, a KS test of rescaled
inter-arrival gaps against Exp(1), and a product-factorisation defect
for counts on disjoint windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DomainError, MapSystem, dist_array
from .measure import ball_measure
from .observables import LevelSequence, ObservableSpec, apply_g, g_inverse, level
from .orbits import iter_col_blocks, single_orbit_segments

__all__ = [
    "EventProcess",
    "IntervalRing",
    "epp_ensemble",
    "epp_from_start",
    "htpp_ensemble",
    "htpp_from_start",
    "count_on_ring",
    "PoissonCountResult",
    "poisson_count_test",
    "tv_vs_poisson",
    "pooled_gaps",
    "interarrival_test",
    "iid_comparison_processes",
    "IndependenceResult",
    "increment_independence_test",
]


@dataclass(frozen=True)
class EventProcess:
    """Rescaled event times of one run: events at times ``index / v``."""

    v: float
    indices: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.v <= 0 or self.horizon <= 0:
            raise DomainError("rescale factor and horizon must be positive")
        idx = self.indices
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise DomainError("event indices must be strictly increasing and >= 0")
        if idx.size and idx[-1] > self.v * self.horizon:
            raise DomainError("event beyond the declared horizon")

    def times(self) -> np.ndarray:
        return self.indices / self.v


@dataclass(frozen=True)
class IntervalRing:
    """Disjoint sorted half-open intervals ``[a_j, b_j)`` of nonneg reals."""

    intervals: tuple

    def __post_init__(self):
        last = -math.inf
        for a, b in self.intervals:
            if not (0 <= a < b) or a < last:
                raise DomainError("ring intervals must be sorted, disjoint, nonnegative")
            last = b

    @classmethod
    def of(cls, *intervals) -> "IntervalRing":
        return cls(tuple((float(a), float(b)) for a, b in intervals))

    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)


def _extract(system, m, length, seed, predicate, v, horizon, burn_in):
    """Run m orbits and collect per-run event indices where predicate holds."""
    if m == 1:
        # a single long run is cheapest through the segment engine
        idx_chunks = []
        for j0, pts in single_orbit_segments(system, length, seed, burn_in=burn_in):
            hits = predicate(pts[None, ...])[0]
            idx_chunks.append(np.nonzero(hits)[0] + j0)
        idx = np.concatenate(idx_chunks) if idx_chunks else np.empty(0, dtype=np.int64)
        return [EventProcess(v, idx.astype(np.int64), horizon)]
    per_run: list[list[np.ndarray]] = [[] for _ in range(m)]
    for j0, pts in iter_col_blocks(system, m, length, seed, burn_in=burn_in):
        hits = predicate(pts)
        rows, cols = np.nonzero(hits)
        if rows.size:
            order = np.lexsort((cols, rows))
            rows, cols = rows[order], cols[order]
            bounds = np.searchsorted(rows, np.arange(m + 1))
            for r in range(m):
                lo, hi = bounds[r], bounds[r + 1]
                if hi > lo:
                    per_run[r].append(cols[lo:hi] + j0)
    out = []
    for r in range(m):
        idx = np.concatenate(per_run[r]) if per_run[r] else np.empty(0, dtype=np.int64)
        out.append(EventProcess(v, idx.astype(np.int64), horizon))
    return out


def epp_ensemble(
    system: MapSystem,
    spec: ObservableSpec,
    seq: LevelSequence,
    n: int,
    m: int,
    horizon: float,
    seed: int,
    model,
    burn_in: int = 1000,
) -> list[EventProcess]:
    """Exceedance processes of ``m`` runs at level ``u_n(y=...)``.

    The level is ``seq``'s threshold at the calibration point encoded in
    ``n`` and the observable; events are the indices ``j`` with
    ``X_j > u_n`` for ``j <= v * horizon``, where ``v = 1/mu(X_0 > u_n)``
    comes from the model ball measure at radius ``g^{-1}(u_n)``.
    """
    u = level(seq, n, _default_y(spec))
    return epp_at_level(system, spec, u, m, horizon, seed, model, burn_in=burn_in)


def _default_y(spec: ObservableSpec) -> float:
    return {"g1": 0.0, "g2": 1.0, "g3": -1.0}[spec.kind]


def epp_at_level(
    system: MapSystem,
    spec: ObservableSpec,
    u: float,
    m: int,
    horizon: float,
    seed: int,
    model,
    burn_in: int = 1000,
) -> list[EventProcess]:
    """Exceedance processes at an explicit threshold ``u``."""
    radius = float(g_inverse(spec, u))
    mu = ball_measure(model, spec.zeta, radius)
    v = 1.0 / mu
    length = int(math.floor(v * horizon)) + 1
    zeta = np.asarray(spec.zeta) if spec.space.dim == 2 else spec.zeta

    def predicate(pts):
        vals = apply_g(spec, dist_array(spec.space, pts, zeta))
        return vals > u

    return _extract(system, m, length, seed, predicate, v, horizon, burn_in)


def htpp_ensemble(
    system: MapSystem,
    zeta,
    delta: float,
    m: int,
    horizon: float,
    seed: int,
    model,
    burn_in: int = 1000,
) -> list[EventProcess]:
    """Ball-visit processes: events at ``j`` with ``f^j x`` in the ball."""
    mu = ball_measure(model, zeta, delta)
    v = 1.0 / mu
    length = int(math.floor(v * horizon)) + 1
    z = np.asarray(zeta) if np.ndim(zeta) else zeta

    def predicate(pts):
        return dist_array(system.space, pts, z) < delta

    return _extract(system, m, length, seed, predicate, v, horizon, burn_in)


def _from_start(system, x0, length, hit) -> np.ndarray:
    idx = []
    x = x0
    for j in range(length):
        if hit(x):
            idx.append(j)
        x = system.step(x)
    return np.asarray(idx, dtype=np.int64)


def htpp_from_start(system: MapSystem, zeta, delta: float, x0, horizon: float, model) -> EventProcess:
    """Ball-visit process of one explicit start (j = 0 included).

    Rational starts stay in exact arithmetic on the piecewise-affine
    families, so periodic test orbits behave exactly.
    """
    from .dynamics import dist

    v = 1.0 / ball_measure(model, zeta, delta)
    length = int(math.floor(v * horizon)) + 1
    idx = _from_start(system, x0, length, lambda x: dist(system.space, x, zeta) < delta)
    return EventProcess(v, idx, horizon)


def epp_from_start(
    system: MapSystem, spec: ObservableSpec, u: float, x0, horizon: float, model
) -> EventProcess:
    """Exceedance process of one explicit start at threshold ``u``."""
    from .observables import evaluate

    radius = float(g_inverse(spec, u))
    v = 1.0 / ball_measure(model, spec.zeta, radius)
    length = int(math.floor(v * horizon)) + 1
    idx = _from_start(system, x0, length, lambda x: evaluate(spec, x) > u)
    return EventProcess(v, idx, horizon)


def count_on_ring(proc: EventProcess, ring: IntervalRing) -> int:
    """Events with rescaled time in the ring, by the index convention.

    ``[a, b)`` counts indices ``j`` with ``ceil(v a) <= j <= floor(v b)``.
    Additive over the disjoint intervals by construction.
    """
    total = 0
    for a, b in ring.intervals:
        if b > proc.horizon:
            raise DomainError("ring extends beyond the process horizon")
        lo = math.ceil(proc.v * a)
        hi = math.floor(proc.v * b)
        total += int(
            np.searchsorted(proc.indices, hi, side="right")
            - np.searchsorted(proc.indices, lo, side="left")
        )
    return total


def tv_vs_poisson(counts: np.ndarray, lam: float, tail: int = 5) -> float:
    """TV distance between an empirical count histogram and Poisson(lam).

    The comparison is truncated at ``max(counts) + tail`` with the
    residual Poisson mass folded into the last bucket.
    """
    counts = np.asarray(counts, dtype=np.int64)
    kmax = int(counts.max()) + tail
    emp = np.bincount(counts, minlength=kmax + 1).astype(float) / counts.size
    ks = np.arange(kmax + 1, dtype=float)
    logpmf = -lam + ks * math.log(lam) - np.array([math.lgamma(k + 1) for k in ks])
    pmf = np.exp(logpmf)
    pmf[-1] += max(0.0, 1.0 - pmf.sum())
    return 0.5 * float(np.abs(emp - pmf).sum())


@dataclass
class PoissonCountResult:
    tv: float
    window: tuple
    mean_count: float
    counts: np.ndarray


def poisson_count_test(processes, window=(0.0, 2.0)) -> PoissonCountResult:
    """Count events per run on ``[a, b)`` and score the histogram vs Poisson."""
    if len(processes) < 1000:
        raise DomainError("count test needs at least 1e3 runs")
    ring = IntervalRing.of(window)
    counts = np.array([count_on_ring(p, ring) for p in processes], dtype=np.int64)
    lam = window[1] - window[0]
    return PoissonCountResult(tv_vs_poisson(counts, lam), tuple(window), float(counts.mean()), counts)


def pooled_gaps(processes) -> np.ndarray:
    """Rescaled inter-event gaps pooled over runs.

    Only gaps with both endpoints inside a run's window are observable,
    which length-biases the pooled law at short horizons even for a true
    Poisson process; compare against an oracle with the same window
    structure (see :func:`iid_comparison_processes`) unless the horizon
    is much longer than the mean gap.
    """
    gaps = []
    for p in processes:
        t = p.times()
        if t.size >= 2:
            gaps.append(np.diff(t))
    return np.concatenate(gaps) if gaps else np.empty(0)


def interarrival_test(processes) -> tuple[float, int]:
    """KS statistic of pooled rescaled gaps against Exp(1)."""
    from .extremes import EmpiricalDistribution, ks_statistic

    pooled = pooled_gaps(processes)
    if pooled.size < 1000:
        raise DomainError("interarrival test needs at least 1e3 pooled gaps")
    sample = EmpiricalDistribution.from_samples(pooled)
    return ks_statistic(sample, lambda s: 1.0 - np.exp(-s)), int(pooled.size)


def iid_comparison_processes(m: int, horizon: float, v: float, seed: int) -> list[EventProcess]:
    """Unit-rate renewal simulator on the same discrete window structure.

    Arrival times are sums of Exp(1) gaps; each run keeps the events with
    index ``floor(time * v)`` not past the horizon.  This is the i.i.d.
    benchmark the dynamical processes are scored against: it shares the
    index discreteness and the window truncation.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(17,)))
    max_idx = int(math.floor(v * horizon))
    out = []
    for _ in range(m):
        draw = max(8, int(2 * horizon + 6 * math.sqrt(horizon) + 8))
        times = np.cumsum(rng.exponential(1.0, draw))
        while times[-1] < horizon:
            times = np.concatenate([times, times[-1] + np.cumsum(rng.exponential(1.0, draw))])
        idx = np.unique((times[times <= horizon] * v).astype(np.int64))
        idx = idx[idx <= max_idx]
        out.append(EventProcess(v, idx, horizon))
    return out


@dataclass
class IndependenceResult:
    defect: float
    union_defect: float
    p_joint: float
    p1: float
    p2: float


def increment_independence_test(processes, i1, i2) -> IndependenceResult:
    """Factorisation defect of void probabilities on two disjoint windows.

    Returns ``|P(no events in I1 and I2) - P(none in I1) P(none in I2)|``
    together with ``|P(none in I1 u I2) - exp(-(|I1|+|I2|))|``.
    """
    if len(processes) < 1000:
        raise DomainError("independence test needs at least 1e3 runs")
    ring1, ring2 = IntervalRing.of(i1), IntervalRing.of(i2)
    IntervalRing.of(i1, i2)  # validates disjointness/order
    c1 = np.array([count_on_ring(p, ring1) for p in processes])
    c2 = np.array([count_on_ring(p, ring2) for p in processes])
    p1 = float(np.mean(c1 == 0))
    p2 = float(np.mean(c2 == 0))
    pj = float(np.mean((c1 == 0) & (c2 == 0)))
    total_len = ring1.total_length() + ring2.total_length()
    return IndependenceResult(
        abs(pj - p1 * p2), abs(pj - math.exp(-total_len)), pj, p1, p2
    )
