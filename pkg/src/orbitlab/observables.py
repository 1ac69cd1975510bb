"""Distance observables, level sequences, and their hitting-radius duals.

An observable is ``phi(x) = g(dist(x, zeta))`` for a strictly decreasing
``g`` with its maximum at distance 0, so high values of ``phi`` along an
orbit are exactly visits to small balls around ``zeta``.  Three tail
shapes are implemented:

* ``g1``: ``g(s) = -log s`` (exponential tail, Gumbel domain),
* ``g2``: ``g(s) = s^(-1/alpha)`` (power tail, Frechet domain),
* ``g3``: ``g(s) = D - s^(1/alpha)`` (bounded top at ``D``, Weibull domain).

``level(seq, n, y)`` produces thresholds ``u_n(y)`` calibrated so that
``n * mu(phi > u_n) -> tau(y)``, with ``tau`` of the matching classical
type; ``radius_for_level`` inverts them back to ball radii.  For these
concrete ``g`` the calibration is exact at every ``n`` whenever the ball
measure is exactly ``rho * kappa * delta^d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DomainError, PhaseSpace, dist

__all__ = [
    "ObservableSpec",
    "LevelSequence",
    "evaluate",
    "apply_g",
    "g_inverse",
    "level",
    "tau",
    "radius_for_level",
    "radius_asymptotic",
    "block_length_for_radius",
]


@dataclass(frozen=True)
class ObservableSpec:
    """One of the three distance observables centred at ``zeta``."""

    kind: str
    zeta: object
    space: PhaseSpace
    alpha: float | None = None
    top: float | None = None  # finite maximum D, g3 only

    def __post_init__(self):
        if self.kind not in ("g1", "g2", "g3"):
            raise DomainError(f"unknown observable kind {self.kind!r}")
        if self.kind in ("g2", "g3"):
            if self.alpha is None or self.alpha <= 0:
                raise DomainError(f"{self.kind} needs alpha > 0")
        elif self.alpha is not None:
            raise DomainError("alpha is only meaningful for g2/g3")
        if self.kind == "g3":
            if self.top is None:
                raise DomainError("g3 needs a finite maximum value")
        elif self.top is not None:
            raise DomainError("a finite maximum is g3-only")
        self.space.check_point(self.zeta)


def apply_g(spec: ObservableSpec, s):
    """``g(s)`` on scalars or arrays of distances; +inf at 0 for g1/g2."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        if spec.kind == "g1":
            out = -np.log(s)
        elif spec.kind == "g2":
            out = s ** (-1.0 / spec.alpha)
        else:
            out = spec.top - s ** (1.0 / spec.alpha)
    return out if out.ndim else float(out)


def g_inverse(spec: ObservableSpec, u):
    """Exact inverse of ``g`` on its range (radius of the level-u ball)."""
    u = np.asarray(u, dtype=float)
    if spec.kind == "g1":
        out = np.exp(-u)
    elif spec.kind == "g2":
        out = u ** (-spec.alpha)
    else:
        out = (spec.top - u) ** spec.alpha
    return out if out.ndim else float(out)


def evaluate(spec: ObservableSpec, x) -> float:
    """Observable value ``g(dist(x, zeta))``; +inf exactly at the centre."""
    return apply_g(spec, dist(spec.space, x, spec.zeta))


@dataclass(frozen=True)
class LevelSequence:
    """Normalising constants for the threshold sequence ``u_n(y)``.

    ``rho_zeta`` is the invariant density at the centre (frozen at
    construction so every level in a run uses the same constants);
    ``kappa`` and ``dim`` come from the phase-space ball geometry.
    """

    spec: ObservableSpec
    rho_zeta: float
    kappa: float
    dim: int

    def __post_init__(self):
        if not (0 < self.rho_zeta < math.inf):
            raise DomainError("level sequences need a finite positive density at the centre")
        if self.kappa <= 0 or self.dim < 1:
            raise DomainError("invalid ball geometry")

    @classmethod
    def for_model(cls, spec: ObservableSpec, model) -> "LevelSequence":
        from .measure import density_at  # local import to avoid a cycle

        rho = density_at(model, spec.zeta)
        return cls(spec, rho, spec.space.kappa, spec.space.dim)


def _check_y(spec: ObservableSpec, y: float) -> None:
    if spec.kind == "g2" and not y > 0:
        raise DomainError("g2 levels need y > 0")
    if spec.kind == "g3" and not y < 0:
        raise DomainError("g3 levels need y < 0")


def level(seq: LevelSequence, n: int, y: float) -> float:
    """Threshold ``u_n(y)`` calibrated to ``n mu(phi > u_n) -> tau(y)``.

    Closed forms per type, built from the scale ``s_n = (kappa rho n)^(-1/d)``:
    ``g1``: ``g1(s_n) + y/d``;  ``g2``: ``g2(s_n) * y``;
    ``g3``: ``D - (D - g3(s_n)) * (-y)``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    _check_y(seq.spec, y)
    scale = seq.kappa * seq.rho_zeta * n
    d = seq.dim
    if seq.spec.kind == "g1":
        return math.log(scale) / d + y / d
    s_n = scale ** (-1.0 / d)
    if seq.spec.kind == "g2":
        return float(apply_g(seq.spec, s_n)) * y
    top = seq.spec.top
    return top - (top - float(apply_g(seq.spec, s_n))) * (-y)


def tau(spec: ObservableSpec, y: float, dim: int = 1) -> float:
    """Limit ``tau(y)`` of ``n mu(phi > u_n(y))`` for each type.

    ``tau1 = e^-y``; ``tau2 = y^(-alpha d)`` for y > 0;
    ``tau3 = (-y)^(alpha d)`` for y <= 0.
    """
    if spec.kind == "g1":
        return math.exp(-y)
    if spec.kind == "g2":
        if not y > 0:
            raise DomainError("tau for g2 needs y > 0")
        return y ** (-spec.alpha * dim)
    if not y <= 0:
        raise DomainError("tau for g3 needs y <= 0")
    return (-y) ** (spec.alpha * dim)


def radius_for_level(seq: LevelSequence, n: int, y: float) -> float:
    """Exact ball radius ``g^{-1}(u_n(y))`` dual to the threshold."""
    return float(g_inverse(seq.spec, level(seq, n, y)))


def radius_asymptotic(seq: LevelSequence, n: int, y: float) -> float:
    """Asymptotic radius ``(tau(y) / (kappa rho n))^(1/d)``.

    The ratio of :func:`radius_for_level` to this value tends to 1 in
    ``n``; for the concrete g's here the two agree up to rounding.
    """
    _check_y(seq.spec, y)
    t = tau(seq.spec, y, seq.dim)
    return (t / (seq.kappa * seq.rho_zeta * n)) ** (1.0 / seq.dim)


def block_length_for_radius(seq: LevelSequence, delta: float, t: float) -> int:
    """Block length ``floor(t / (kappa rho delta^d))`` matching radius ``delta``.

    At this length, block-maximum statistics at level ``u_l`` correspond
    to hitting statistics of the ``delta``-ball at rescaled time ``t``.
    """
    if delta <= 0 or t <= 0:
        raise DomainError("delta and t must be positive")
    ell = int(t / (seq.kappa * seq.rho_zeta * delta ** seq.dim))
    if ell < 1:
        raise DomainError("radius too large for the requested rescaled time")
    return ell
