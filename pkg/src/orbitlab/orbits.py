"""Orbit generation: exact bit-shift doubling orbits and float ensembles.

Float iteration of ``2x mod 1`` shifts one mantissa bit out per step, so
any double-precision start collapses to 0 within ~53 steps.  Statistics
runs on the doubling maps therefore use the shift representation: the
orbit is a sliding 53-bit window over a pre-drawn i.i.d. fair-bit
sequence.  Every window value is an exact 53-bit dyadic, every update is
exact in IEEE double arithmetic, and the resulting point sequence is a
stationary realisation of the map with Lebesgue marginals.

Nonlinear families (quadratic, perturbed-expanding, intermittent) use
ordinary double-precision iteration; their nonlinearity regenerates
low-order bits, and rounding noise is accepted.

Reproducibility: all randomness flows from ``numpy.random.SeedSequence``
children of a master seed, keyed by fixed stream indices, so results
depend only on the arguments and not on chunk scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import DomainError, MapSystem

__all__ = [
    "WINDOW",
    "child_rng",
    "OrbitGenerator",
    "iter_col_blocks",
    "single_orbit_segments",
    "lebesgue_start",
]

WINDOW = 53
_LSB = 2.0 ** -WINDOW
# ascending dyadic ladder 2^-53 .. 2^-1; np.convolve(bits, kernel, "valid")
# then reconstructs x_j = sum_i b_{j+i} 2^-(i+1) exactly (any summation
# order of distinct powers of two below 1 is exact in double precision)
_KERNEL = 2.0 ** np.arange(-WINDOW, 0, dtype=float)

_BIT_FAMILIES = ("doubling", "torus-doubling")


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and a stream key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _bits_to_points(bits: np.ndarray) -> np.ndarray:
    """Exact window values of a bit row; ``len(bits) - 52`` points."""
    return np.convolve(bits.astype(np.float64), _KERNEL, mode="valid")


def _dyadic_bits(x) -> list[int]:
    """Binary expansion of a dyadic rational in [0,1) with <= 53 bits."""
    fr = Fraction(x).limit_denominator(2 ** WINDOW)
    if fr != Fraction(x) or not 0 <= fr < 1:
        raise DomainError("bit-stream starts must be dyadic rationals in [0, 1)")
    num, den = fr.numerator, fr.denominator
    k = den.bit_length() - 1
    if den != 1 << k:
        raise DomainError("bit-stream starts must be dyadic rationals in [0, 1)")
    return [(num >> (k - 1 - i)) & 1 for i in range(k)]


def lebesgue_start(system: MapSystem, rng: np.random.Generator, m: int) -> np.ndarray:
    """Draw ``m`` Lebesgue-distributed starting points."""
    kind = system.space.kind
    if kind == "circle":
        return rng.random(m)
    if kind == "interval":
        return rng.uniform(-1.0, 1.0, m)
    return rng.random((m, 2))


@dataclass
class OrbitGenerator:
    """Single-orbit cursor with deterministic replay.

    ``mode="bits"`` (doubling families only) runs the exact shift
    representation; with an explicit dyadic ``x0`` the incoming bit tail
    is zero, which reproduces the true orbit of that rational point.
    ``mode="float"`` iterates in doubles from ``x0`` or from a seeded
    Lebesgue draw after ``burn_in`` discarded steps.
    """

    system: MapSystem
    mode: str = "float"
    seed: int = 0
    burn_in: int = 1000
    x0: object = None
    _state: object = field(default=None, repr=False)
    _rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("float", "bits"):
            raise DomainError(f"unknown orbit mode {self.mode!r}")
        if self.mode == "bits" and self.system.family not in _BIT_FAMILIES:
            raise DomainError("bit-stream mode is only valid for the doubling maps")
        self._rng = child_rng(self.seed, 0)
        torus = self.system.space.kind == "torus2"
        if self.mode == "bits":
            if self.x0 is not None:
                if torus:
                    tails = [_dyadic_bits(c) for c in self.x0]
                    self._state = [self._window_from(t) for t in tails]
                else:
                    self._state = [self._window_from(_dyadic_bits(self.x0))]
                self._random_tail = False
            else:
                k = 2 if torus else 1
                self._state = [
                    float(self._rng.integers(0, 1 << WINDOW)) * _LSB for _ in range(k)
                ]
                self._random_tail = True
        else:
            if self.x0 is not None:
                x = tuple(map(float, self.x0)) if torus else float(self.x0)
            else:
                x = lebesgue_start(self.system, self._rng, 1)[0]
                x = tuple(x) if torus else float(x)
            for _ in range(self.burn_in if self.x0 is None else 0):
                x = self.system.step(x)
            self._state = x

    @staticmethod
    def _window_from(tail: list[int]) -> float:
        bits = (tail + [0] * WINDOW)[:WINDOW]
        return float(sum(b << (WINDOW - 1 - i) for i, b in enumerate(bits))) * _LSB

    def _advance_bits(self, x: float) -> float:
        x = 2.0 * x
        if x >= 1.0:
            x -= 1.0
        if self._random_tail:
            x += float(self._rng.integers(0, 2)) * _LSB
        return x

    def take(self, k: int) -> np.ndarray:
        """Return the next ``k`` orbit points, advancing the cursor."""
        torus = self.system.space.kind == "torus2"
        out = np.empty((k, 2) if torus else k, dtype=float)
        if self.mode == "bits":
            for i in range(k):
                out[i] = self._state if torus else self._state[0]
                self._state = [self._advance_bits(c) for c in self._state]
        else:
            x = self._state
            for i in range(k):
                out[i] = x
                x = self.system.step(x)
            self._state = x
        return out


def iter_col_blocks(
    system: MapSystem,
    m: int,
    length: int,
    seed: int,
    mode: str = "auto",
    chunk: int = 2048,
    burn_in: int = 1000,
):
    """Yield ``(j0, pts)`` column blocks of an ``m``-orbit ensemble.

    ``pts`` has shape ``(m, c)`` (or ``(m, c, 2)`` on the torus) and holds
    orbit points ``x_j`` for ``j = j0 .. j0+c-1`` of every orbit.  Starts
    are Lebesgue draws; bit-stream ensembles are stationary by
    construction, float ensembles discard ``burn_in`` iterates first.
    Output depends only on ``(seed, m, length, chunk)``.
    """
    if mode == "auto":
        mode = "bits" if system.family in _BIT_FAMILIES else "float"
    if mode == "bits" and system.family not in _BIT_FAMILIES:
        raise DomainError("bit-stream mode is only valid for the doubling maps")
    torus = system.space.kind == "torus2"

    if mode == "bits":
        rng0 = child_rng(seed, 0)
        if torus:
            x = rng0.integers(0, 1 << WINDOW, (m, 2)).astype(float) * _LSB
        else:
            x = rng0.integers(0, 1 << WINDOW, m).astype(float) * _LSB
        n_chunks = (length + chunk - 1) // chunk
        for ci in range(n_chunks):
            j0 = ci * chunk
            c = min(chunk, length - j0)
            rng = child_rng(seed, 1 + ci)
            if torus:
                fresh = rng.integers(0, 2, (c, m, 2)).astype(float)
                out = np.empty((m, c, 2))
            else:
                fresh = rng.integers(0, 2, (c, m)).astype(float)
                out = np.empty((m, c))
            for k in range(c):
                out[:, k] = x
                x *= 2.0
                x -= np.floor(x)
                x += fresh[k] * _LSB
            yield j0, out
        return

    rng0 = child_rng(seed, 0)
    x = lebesgue_start(system, rng0, m)
    for _ in range(burn_in):
        x = system.step_array(x)
    n_chunks = (length + chunk - 1) // chunk
    for ci in range(n_chunks):
        j0 = ci * chunk
        c = min(chunk, length - j0)
        out = np.empty((m, c, 2) if torus else (m, c))
        for k in range(c):
            out[:, k] = x
            x = system.step_array(x)
        yield j0, out


def single_orbit_segments(
    system: MapSystem,
    length: int,
    seed: int,
    mode: str = "auto",
    segment: int = 1 << 20,
    burn_in: int = 1000,
):
    """Yield ``(j0, pts)`` consecutive segments of one long orbit.

    The bit-stream path reconstructs each segment with one exact
    convolution against the dyadic ladder, carrying the 52-bit window
    overlap between segments; this is the cheap way to run 1e7..1e8
    point orbits of the doubling maps.
    """
    if mode == "auto":
        mode = "bits" if system.family in _BIT_FAMILIES else "float"
    torus = system.space.kind == "torus2"

    if mode == "bits":
        carry = None
        done = 0
        si = 0
        while done < length:
            c = min(segment, length - done)
            rng = child_rng(seed, si)
            if torus:
                fresh = rng.integers(0, 2, (c if carry is not None else c + WINDOW - 1, 2), dtype=np.uint8)
                rows = fresh if carry is None else np.concatenate([carry, fresh])
                pts = np.stack(
                    [_bits_to_points(rows[:, 0]), _bits_to_points(rows[:, 1])], axis=-1
                )
                carry = rows[-(WINDOW - 1):]
            else:
                fresh = rng.integers(0, 2, c if carry is not None else c + WINDOW - 1, dtype=np.uint8)
                rows = fresh if carry is None else np.concatenate([carry, fresh])
                pts = _bits_to_points(rows)
                carry = rows[-(WINDOW - 1):]
            yield done, pts
            done += c
            si += 1
        return

    gen = OrbitGenerator(system, mode="float", seed=seed, burn_in=burn_in)
    done = 0
    while done < length:
        c = min(segment, length - done)
        yield done, gen.take(c)
        done += c
