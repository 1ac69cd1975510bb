"""Phase spaces, example map families, and expansion-rate diagnostics.

The maps collected here are the work-horses of the statistics modules:
piecewise smooth, cheap to iterate in bulk, and with known invariant
densities where closed forms exist.  Scalar entry points accept
``fractions.Fraction`` inputs and then stay in exact rational arithmetic,
which keeps orbits of dyadic and rational points honest (float iteration
of ``2x mod 1`` erases one mantissa bit per step and collapses to 0).

Conventions
-----------
* circle points live in ``[0, 1)``; the 2-torus is ``[0, 1)^2``; the
  interval is ``[-1, 1]``.
* at a ``mod 1`` seam the one-sided (right) derivative is used; the seam
  is a null set for every measure considered here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "DomainError",
    "Exceeded",
    "PhaseSpace",
    "MapSystem",
    "dist",
    "dist_array",
    "iterate",
    "log_inverse_derivative_average",
    "birkhoff_log_expansion",
    "expansion_time",
    "expansion_times",
]


class DomainError(ValueError):
    """A point or parameter lies outside the domain an operation accepts."""


@dataclass(frozen=True)
class Exceeded:
    """Sentinel for searches that hit their iteration cap without an answer."""

    cap: int


@dataclass(frozen=True)
class PhaseSpace:
    """A phase space with its metric scaling constant.

    ``kappa`` is the constant with ``|B_delta(z)| ~ kappa * delta**dim``
    for small ``delta`` (Lebesgue volume of a metric ball): 2 on the
    circle and on the interval interior, pi on the flat 2-torus where
    small balls are Euclidean disks.
    """

    kind: str
    dim: int
    kappa: float

    def __post_init__(self):
        expected = {"circle": (1, 2.0), "interval": (1, 2.0), "torus2": (2, math.pi)}
        if self.kind not in expected:
            raise DomainError(f"unknown phase space kind {self.kind!r}")
        d, kap = expected[self.kind]
        if self.dim != d or not (self.kappa == kap and self.kappa > 0):
            raise DomainError(f"inconsistent geometry for {self.kind!r}")

    @classmethod
    def circle(cls) -> "PhaseSpace":
        return cls("circle", 1, 2.0)

    @classmethod
    def interval(cls) -> "PhaseSpace":
        return cls("interval", 1, 2.0)

    @classmethod
    def torus2(cls) -> "PhaseSpace":
        return cls("torus2", 2, math.pi)

    def check_point(self, x) -> None:
        if self.kind == "circle":
            # circle points are stored as canonical representatives in [0, 1)
            if not 0 <= x < 1:
                raise DomainError(f"{x!r} is not a canonical circle point")
        elif self.kind == "interval":
            if not -1 <= x <= 1:
                raise DomainError(f"{x!r} outside [-1, 1]")
        elif self.kind == "torus2":
            x = np.asarray(x, dtype=float)
            if x.shape != (2,) or not np.all((0 <= x) & (x < 1)):
                raise DomainError(f"{x!r} is not a canonical torus point")


def _circle_gap(x, y):
    d = abs(x - y)
    return min(d, 1 - d)


def dist(space: PhaseSpace, x, y):
    """Metric distance between two points of ``space``.

    Circle: arc length ``min(|x-y|, 1-|x-y|)``.  Interval: ``|x-y|``.
    Torus: Euclidean norm of the coordinatewise circle gaps.  Exact for
    rational inputs on the circle and interval.
    """
    space.check_point(x)
    space.check_point(y)
    if space.kind == "circle":
        return _circle_gap(x, y)
    if space.kind == "interval":
        return abs(x - y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return math.hypot(_circle_gap(x[0], y[0]), _circle_gap(x[1], y[1]))


def dist_array(space: PhaseSpace, pts: np.ndarray, zeta) -> np.ndarray:
    """Vectorised distance from orbit points to a fixed centre.

    ``pts`` has shape ``(..., )`` for 1-d spaces or ``(..., 2)`` on the
    torus; ``zeta`` may broadcast against the leading axes.
    """
    if space.kind == "torus2":
        g0 = np.abs(pts[..., 0] - np.asarray(zeta)[..., 0])
        g1 = np.abs(pts[..., 1] - np.asarray(zeta)[..., 1])
        np.minimum(g0, 1.0 - g0, out=g0)
        np.minimum(g1, 1.0 - g1, out=g1)
        return np.hypot(g0, g1)
    d = np.abs(pts - zeta)
    if space.kind == "circle":
        np.minimum(d, 1.0 - d, out=d)
    return d


# ---------------------------------------------------------------------------
# map families
# ---------------------------------------------------------------------------

_FAMILIES = (
    "doubling",
    "quadratic",
    "torus-doubling",
    "perturbed-expanding",
    "intermittent",
)

# raw bump profile exp(-1/(1-u^2)) on (-1,1); the derivative peak is used
# to normalise the perturbation so its slope scale is explicit
_BUMP_GRID = np.linspace(-1.0, 1.0, 200_001)[1:-1]


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _bump_deriv(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    q = 1.0 - ui * ui
    out[inside] = np.exp(-1.0 / q) * (-2.0 * ui / (q * q))
    return out


_BUMP_DERIV_PEAK = float(np.max(np.abs(_bump_deriv(_BUMP_GRID))))

# slope scale of the normalised perturbation profile: with amplitude
# eps the map derivative is 2 + eps * s'(x), s' in [-_SLOPE, _SLOPE]
_SLOPE = 2.0

_VALIDATION_GRID = 100_000


@dataclass(frozen=True)
class MapSystem:
    """A named map family on its phase space.

    Families
    --------
    doubling              ``x -> 2x mod 1`` on the circle.
    quadratic             ``x -> 1 - a x^2`` on ``[-1, 1]``, ``0 < a <= 2``.
    torus-doubling        coordinatewise doubling on the 2-torus.
    perturbed-expanding   ``x -> 2x + eps*s(x) mod 1`` with ``s`` a smooth
                          bump supported on ``(center-radius, center+radius)``;
                          the constructor checks ``f' > 0`` and
                          ``min f' >= 1 - contraction_delta`` on a dense grid.
    intermittent          ``x -> x(1 + x^gamma) mod 1`` on the circle,
                          ``0 < gamma < 1`` (indifferent fixed point at 0;
                          slow-mixing control case).
    """

    family: str
    space: PhaseSpace
    a: float | None = None
    gamma: float | None = None
    eps: float | None = None
    bump_center: float | None = None
    bump_radius: float | None = None
    contraction_delta: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise DomainError(f"unknown map family {self.family!r}")

    # -- constructors -------------------------------------------------

    @classmethod
    def doubling(cls) -> "MapSystem":
        return cls("doubling", PhaseSpace.circle())

    @classmethod
    def quadratic(cls, a: float = 2.0) -> "MapSystem":
        if not 0 < a <= 2:
            raise DomainError("quadratic parameter a must satisfy 0 < a <= 2")
        return cls("quadratic", PhaseSpace.interval(), a=float(a))

    @classmethod
    def torus_doubling(cls) -> "MapSystem":
        return cls("torus-doubling", PhaseSpace.torus2())

    @classmethod
    def perturbed_expanding(
        cls,
        eps: float = 0.3,
        bump_center: float = 0.5,
        bump_radius: float = 0.2,
        contraction_delta: float = 0.2,
    ) -> "MapSystem":
        if eps < 0 or not 0 < bump_radius < 0.5 or not 0 < contraction_delta < 1:
            raise DomainError("invalid perturbed-expanding parameters")
        sys_ = cls(
            "perturbed-expanding",
            PhaseSpace.circle(),
            eps=float(eps),
            bump_center=float(bump_center) % 1.0,
            bump_radius=float(bump_radius),
            contraction_delta=float(contraction_delta),
        )
        xs = np.linspace(0.0, 1.0, _VALIDATION_GRID, endpoint=False)
        fp = sys_.deriv_array(xs)
        if fp.min() <= 0:
            raise DomainError("perturbation too strong: map derivative vanishes")
        if fp.min() < 1.0 - contraction_delta:
            raise DomainError(
                "perturbation too strong: min f' = %.4f < 1 - delta = %.4f"
                % (fp.min(), 1.0 - contraction_delta)
            )
        return sys_

    @classmethod
    def intermittent(cls, gamma: float = 0.6) -> "MapSystem":
        if not 0 < gamma < 1:
            raise DomainError("intermittency exponent must satisfy 0 < gamma < 1")
        return cls("intermittent", PhaseSpace.circle(), gamma=float(gamma))

    # -- perturbation profile ------------------------------------------

    def _bump_value(self, x):
        u = (np.asarray(x, dtype=float) - self.bump_center) / self.bump_radius
        amp = _SLOPE * self.bump_radius / _BUMP_DERIV_PEAK
        return amp * _bump(u)

    def _bump_slope(self, x):
        u = (np.asarray(x, dtype=float) - self.bump_center) / self.bump_radius
        amp = _SLOPE / _BUMP_DERIV_PEAK
        return amp * _bump_deriv(u)

    # -- iteration kernels ---------------------------------------------

    def step(self, x):
        """One application of the map to a scalar point.

        Rational inputs stay rational for the piecewise-affine and
        polynomial families (doubling, torus-doubling, quadratic).
        """
        if self.family == "doubling":
            return (2 * x) % 1
        if self.family == "quadratic":
            a = self.a
            if isinstance(x, Rational) and float(a).is_integer():
                a = Fraction(int(a))
            return 1 - a * x * x
        if self.family == "torus-doubling":
            return tuple((2 * c) % 1 for c in x)
        if self.family == "perturbed-expanding":
            return (2.0 * float(x) + self.eps * float(self._bump_value(float(x)))) % 1.0
        # intermittent
        x = float(x)
        return (x + x ** (1.0 + self.gamma)) % 1.0

    def step_array(self, xs: np.ndarray) -> np.ndarray:
        if self.family == "doubling":
            return (2.0 * xs) % 1.0
        if self.family == "quadratic":
            return 1.0 - self.a * xs * xs
        if self.family == "torus-doubling":
            return (2.0 * xs) % 1.0
        if self.family == "perturbed-expanding":
            return (2.0 * xs + self.eps * self._bump_value(xs)) % 1.0
        return (xs + xs ** (1.0 + self.gamma)) % 1.0

    # -- derivatives ----------------------------------------------------

    def log_expansion(self, x) -> float:
        """``log ||Df(x)^{-1}||^{-1}`` at a scalar point.

        Equals ``log |f'(x)|`` in one dimension and ``log 2`` for the
        torus doubling map.  Returns ``-inf`` at the quadratic critical
        point; the mod-1 seam uses the right-hand derivative.
        """
        if self.family in ("doubling", "torus-doubling"):
            return math.log(2.0)
        if self.family == "quadratic":
            ax = 2.0 * self.a * abs(float(x))
            return math.log(ax) if ax > 0 else -math.inf
        if self.family == "perturbed-expanding":
            return math.log(2.0 + self.eps * float(self._bump_slope(float(x))))
        x = float(x)
        return math.log(1.0 + (1.0 + self.gamma) * x ** self.gamma)

    def deriv_array(self, xs: np.ndarray) -> np.ndarray:
        """|f'| on an array of points (1-d families only)."""
        if self.family == "doubling":
            return np.full_like(xs, 2.0)
        if self.family == "quadratic":
            return 2.0 * self.a * np.abs(xs)
        if self.family == "perturbed-expanding":
            return 2.0 + self.eps * self._bump_slope(xs)
        if self.family == "intermittent":
            return 1.0 + (1.0 + self.gamma) * xs ** self.gamma
        raise DomainError("deriv_array is one-dimensional")

    def log_expansion_array(self, xs: np.ndarray) -> np.ndarray:
        if self.family == "torus-doubling":
            return np.full(xs.shape[:-1], math.log(2.0))
        fp = self.deriv_array(xs)
        with np.errstate(divide="ignore"):
            return np.log(fp)


def iterate(system: MapSystem, x, n: int):
    """Apply the map ``n`` times to the point ``x``.

    ``iterate(s, x, 0) == x``; the semigroup law holds exactly in
    rational arithmetic and up to accumulated rounding in floats.
    """
    if n < 0:
        raise DomainError("iteration count must be non-negative")
    system.space.check_point(x)
    for _ in range(n):
        x = system.step(x)
    return x


def log_inverse_derivative_average(system: MapSystem, x, n: int) -> float:
    """Birkhoff average ``(1/n) sum_{i<n} log ||Df(f^i x)^{-1}||^{-1}``.

    The positivity of this average along typical orbits is the
    non-uniform expansivity diagnostic; ``-inf`` is returned when the
    orbit passes through a critical point.
    """
    if n < 1:
        raise DomainError("n must be positive")
    system.space.check_point(x)
    total = 0.0
    for _ in range(n):
        g = system.log_expansion(x)
        if g == -math.inf:
            return -math.inf
        total += g
        x = system.step(x)
    return total / n


def birkhoff_log_expansion(system: MapSystem, x0s: np.ndarray, n: int) -> np.ndarray:
    """Vectorised ``log_inverse_derivative_average`` over many starts."""
    xs = np.array(x0s, dtype=float)
    acc = np.zeros(xs.shape[0] if xs.ndim else 1, dtype=float)
    for _ in range(n):
        acc += system.log_expansion_array(xs)
        xs = system.step_array(xs)
    return acc / n


def expansion_time(system: MapSystem, x, lam: float, n_cap: int):
    """Smallest ``N <= n_cap`` past which all Birkhoff averages stay >= lam/2.

    Returns :class:`Exceeded` when even the average at ``n_cap`` falls
    short, i.e. the point still sits in the slow tail at time ``n_cap``.
    """
    if lam <= 0:
        raise DomainError("lam must be positive")
    res = expansion_times(system, np.asarray([float(x)]), lam, n_cap)
    t = int(res[0])
    return t if t > 0 else Exceeded(n_cap)


def expansion_times(system: MapSystem, x0s: np.ndarray, lam: float, n_cap: int) -> np.ndarray:
    """Vectorised expansion times; 0 encodes the Exceeded sentinel."""
    xs = np.array(x0s, dtype=float)
    m = xs.shape[0]
    half = lam / 2.0
    acc = np.zeros(m)
    # last n at which the running average dips below lam/2 (0 = never)
    last_bad = np.zeros(m, dtype=np.int64)
    for i in range(n_cap):
        acc += system.log_expansion_array(xs)
        below = acc < half * (i + 1)
        last_bad[below] = i + 1
        xs = system.step_array(xs)
    out = last_bad + 1
    out[last_bad == n_cap] = 0
    return out
