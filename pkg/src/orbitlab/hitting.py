"""First hitting and return times to balls, Kac normalisation, extremal index.

Hitting times count from j = 1 (the first image of the start).  The
event-extraction helpers in :mod:`orbitlab.pointprocess` instead include
index 0, matching the counting convention of the point-process sums;
:func:`first_entry_time` exposes that j >= 0 convention here so the two
modules can be cross-checked without ambiguity.

Return-time sampling draws from the conditioned measure by thinning
long stationary orbits to their visits of the target ball; consecutive
visit gaps are exactly the return times of the visit points.  All
rescaling uses the model ball measure (exact for closed-form densities),
never the empirical visit frequency, so Kac tests are not circular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DomainError, Exceeded, MapSystem, dist, dist_array
from .measure import ball_measure
from .orbits import iter_col_blocks

__all__ = [
    "HitSample",
    "first_hitting_time",
    "first_entry_time",
    "waiting_times",
    "hitting_times",
    "return_gaps",
    "HtsCurve",
    "hts_ecdf",
    "rts_ecdf",
    "KacResult",
    "kac_check",
    "ThetaFit",
    "extremal_index_fit",
    "default_cap",
]


@dataclass
class HitSample:
    """Recorded hitting/return times to one target ball.

    ``times`` holds completed times (each >= 1); ``exceeded`` counts
    searches that ran past ``cap`` without hitting -- they are reported,
    never imputed.  ``conditioning`` is "mu" for hitting times from
    stationary starts and "mu_U" for return times from the ball.
    """

    zeta: object
    delta: float
    normalization: float
    times: np.ndarray
    exceeded: int
    cap: int
    conditioning: str = "mu"

    def __post_init__(self):
        if self.normalization <= 0:
            raise DomainError("ball measure normalisation must be positive")
        if self.times.size and self.times.min() < 1:
            raise DomainError("recorded hitting times must be >= 1")

    def merge(self, other: "HitSample") -> "HitSample":
        if (self.zeta, self.delta, self.cap, self.conditioning) != (
            other.zeta,
            other.delta,
            other.cap,
            other.conditioning,
        ):
            raise DomainError("cannot merge hit samples for different targets")
        return HitSample(
            self.zeta,
            self.delta,
            self.normalization,
            np.concatenate([self.times, other.times]),
            self.exceeded + other.exceeded,
            self.cap,
            self.conditioning,
        )


def default_cap(mu_ball: float) -> int:
    """Default search cap ``ceil(50 / mu(U))``.

    In the exponential regime the survival mass past rescaled time 50 is
    below 1e-21, so truncation bias is negligible at desk scales.
    """
    return int(math.ceil(50.0 / mu_ball))


def first_hitting_time(system: MapSystem, x, zeta, delta: float, cap: int):
    """Smallest ``j in [1, cap]`` with ``dist(f^j x, zeta) < delta``.

    Exact for rational inputs on the piecewise-affine families; returns
    :class:`Exceeded` past the cap.
    """
    if cap < 1:
        raise DomainError("cap must be >= 1")
    system.space.check_point(x)
    for j in range(1, cap + 1):
        x = system.step(x)
        if dist(system.space, x, zeta) < delta:
            return j
    return Exceeded(cap)


def first_entry_time(system: MapSystem, x, zeta, delta: float, cap: int):
    """Smallest ``j in [0, cap]`` with ``dist(f^j x, zeta) < delta``.

    Index 0 counts: this is the convention of the point-process sums.
    """
    if dist(system.space, x, zeta) < delta:
        return 0
    return first_hitting_time(system, x, zeta, delta, cap)


def waiting_times(system: MapSystem, x, zeta, delta: float, k: int, cap: int) -> list:
    """First ``k`` inter-hitting times ``w^1 .. w^k`` of the orbit of ``x``.

    ``w^j`` is the hitting time of the point reached after
    ``w^1 + ... + w^(j-1)`` steps; the ``j``-th hitting time is the
    running sum.  On a cap overrun the list ends with
    ``Exceeded(cap)`` at the index where the search died.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    out = []
    for _ in range(k):
        w = first_hitting_time(system, x, zeta, delta, cap)
        out.append(w)
        if isinstance(w, Exceeded):
            break
        for _ in range(w):
            x = system.step(x)
    return out


# ---------------------------------------------------------------------------
# vectorised collection
# ---------------------------------------------------------------------------


def hitting_times(
    system: MapSystem,
    zeta,
    delta: float,
    m: int,
    cap: int,
    seed: int,
    model=None,
    burn_in: int = 1000,
) -> HitSample:
    """First hitting times of ``m`` stationary starts (vectorised)."""
    z = np.asarray(zeta) if system.space.dim == 2 else zeta
    times = np.zeros(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    mu = ball_measure(model, zeta, delta) if model is not None else None
    for j0, pts in iter_col_blocks(system, m, cap + 1, seed, burn_in=burn_in):
        c = pts.shape[1]
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        d = dist_array(system.space, pts[idx], z)
        hit = d < delta
        if j0 == 0:
            hit[:, 0] = False  # hitting times start at j = 1
        first = np.argmax(hit, axis=1)
        found = hit[np.arange(idx.size), first]
        rows = idx[found]
        times[rows] = j0 + first[found]
        alive[rows] = False
    exceeded = int(alive.sum())
    return HitSample(
        zeta,
        delta,
        mu if mu is not None else float("nan"),
        times[~alive],
        exceeded,
        cap,
        "mu",
    )


def return_gaps(
    system: MapSystem,
    zeta,
    delta: float,
    m: int,
    seed: int,
    cap: int,
    streams: int = 64,
    budget: int | None = None,
    burn_in: int = 1000,
    model=None,
) -> HitSample:
    """First ``m`` return times collected by thinning stationary orbits.

    Runs ``streams`` parallel orbits, records their visits to the ball,
    and takes consecutive-visit gaps in (stream, time) order.  Raises
    with the visit count when the orbit budget yields fewer than ``m``
    gaps.
    """
    if model is None:
        raise DomainError("return sampling needs a density model for the Kac normalisation")
    mu = ball_measure(model, zeta, delta)
    if budget is None:
        budget = int(math.ceil(3.0 * (m / streams + 10.0) / mu))
    z = np.asarray(zeta) if system.space.dim == 2 else zeta
    last = np.full(streams, -1, dtype=np.int64)
    gaps_per_stream: list[list] = [[] for _ in range(streams)]
    for j0, pts in iter_col_blocks(system, streams, budget, seed, burn_in=burn_in):
        d = dist_array(system.space, pts, z)
        rows, cols = np.nonzero(d < delta)
        for r, c in zip(rows.tolist(), cols.tolist()):
            t = j0 + c
            if last[r] >= 0:
                gaps_per_stream[r].append(t - last[r])
            last[r] = t
    gaps = [g for gs in gaps_per_stream for g in gs]
    if len(gaps) < m:
        raise DomainError(
            f"orbit budget produced only {len(gaps)} returns (< {m}); raise the budget"
        )
    gaps = np.asarray(gaps[:m], dtype=np.int64)
    exceeded = int(np.sum(gaps > cap))
    return HitSample(zeta, delta, mu, gaps[gaps <= cap], exceeded, cap, "mu_U")


@dataclass
class HtsCurve:
    """Empirical survival function of Kac-rescaled hitting/return times."""

    t: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    exceeded_fraction: float
    mu_ball: float
    conditioning: str


def _survival_curve(sample: HitSample, t_grid, cap: int) -> HtsCurve:
    t = np.asarray(list(t_grid), dtype=float)
    v = 1.0 / sample.normalization
    if cap < float(np.max(t)) * v:
        raise DomainError("cap too small for the requested rescaled-time grid")
    total = sample.times.size + sample.exceeded
    # exceeded entries ran past cap >= t*v for every grid t, hence survive
    surv = np.array(
        [(np.sum(sample.times >= ti * v) + sample.exceeded) / total for ti in t]
    )
    stderr = np.sqrt(surv * (1 - surv) / total)
    return HtsCurve(
        t, surv, stderr, sample.exceeded / total, sample.normalization, sample.conditioning
    )


def hts_ecdf(
    system: MapSystem,
    zeta,
    delta: float,
    t_grid,
    m: int,
    cap: int | None,
    seed: int,
    model,
    burn_in: int = 1000,
) -> HtsCurve:
    """Survival estimates ``mu(r_U >= t / mu(U))`` on a rescaled grid."""
    mu = ball_measure(model, zeta, delta)
    if cap is None:
        cap = default_cap(mu)
    if cap < float(np.max(np.asarray(list(t_grid), dtype=float))) / mu:
        raise DomainError("cap too small for the requested rescaled-time grid")
    sample = hitting_times(system, zeta, delta, m, cap, seed, model=model, burn_in=burn_in)
    return _survival_curve(sample, t_grid, cap)


def rts_ecdf(
    system: MapSystem,
    zeta,
    delta: float,
    t_grid,
    m: int,
    cap: int | None,
    seed: int,
    model,
    streams: int = 64,
    budget: int | None = None,
    burn_in: int = 1000,
) -> HtsCurve:
    """Conditioned survival ``mu_U(r_U >= t / mu(U))`` via orbit thinning."""
    mu = ball_measure(model, zeta, delta)
    if cap is None:
        cap = default_cap(mu)
    sample = return_gaps(
        system, zeta, delta, m, seed, cap, streams=streams, budget=budget,
        burn_in=burn_in, model=model,
    )
    return _survival_curve(sample, t_grid, cap)


@dataclass
class KacResult:
    product: float
    stderr: float
    exceeded_fraction: float
    flagged: bool


def kac_from_sample(sample: HitSample) -> KacResult:
    """Kac product of a collected return sample (see :func:`kac_check`)."""
    gaps = sample.times.astype(float)
    mu = sample.normalization
    product = float(gaps.mean() * mu)
    stderr = float(gaps.std(ddof=1) / math.sqrt(gaps.size) * mu)
    frac = sample.exceeded / (sample.exceeded + gaps.size)
    return KacResult(product, stderr, frac, frac > 0.01)


def kac_check(
    system: MapSystem,
    zeta,
    delta: float,
    m: int,
    seed: int,
    model,
    cap: int | None = None,
    streams: int = 64,
    budget: int | None = None,
) -> KacResult:
    """Mean return time times ball measure; near 1 by Kac's lemma.

    The product is flagged when more than 1% of searches exceeded the
    cap (their exclusion biases the mean downward).
    """
    if m < 100:
        raise DomainError("kac check needs at least 100 returns")
    mu = ball_measure(model, zeta, delta)
    if mu >= 1.0:
        return KacResult(1.0, 0.0, 0.0, False)  # whole space: every return is 1
    if cap is None:
        cap = default_cap(mu)
    sample = return_gaps(
        system, zeta, delta, m, seed, cap, streams=streams, budget=budget, model=model
    )
    return kac_from_sample(sample)


@dataclass
class ThetaFit:
    theta: float
    flagged: bool
    points_used: int


def extremal_index_fit(t, survival, noise: float = 0.02) -> ThetaFit:
    """Least-squares slope of ``-log survival`` against ``t`` through 0.

    An exponential survival ``e^(-theta t)`` gives back ``theta``; the
    fit is flagged when the curve increases beyond ``noise`` anywhere
    (survival functions are nonincreasing up to estimation error).
    """
    t = np.asarray(list(t), dtype=float)
    s = np.asarray(list(survival), dtype=float)
    keep = (s > 0.0) & (s < 1.0) & (t > 0.0)
    if keep.sum() < 3:
        raise DomainError("need at least 3 interior curve points to fit theta")
    flagged = bool(np.any(np.diff(s) > noise))
    tt, ss = t[keep], s[keep]
    theta = float(np.sum(tt * (-np.log(ss))) / np.sum(tt * tt))
    return ThetaFit(theta, flagged, int(keep.sum()))
