"""Output models and their per-time likelihood vectors.

An observation at time ``t`` is turned into a non-negative vector ``g_t``
indexed by state: the probability of the observed event, or the density at
the observed point.  Joint likelihoods are never formed; downstream code
multiplies the per-time vectors along the state trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from icthmc.errors import InputError

PMF_ATOL = 1e-12
DENSITY_ATOL = 1e-9
_SQRT2 = math.sqrt(2.0)


# -- observation payloads ---------------------------------------------------


@dataclass(frozen=True)
class CategoricalEvent:
    symbols: frozenset

    def __post_init__(self):
        object.__setattr__(self, "symbols", frozenset(str(s) for s in self.symbols))
        if not self.symbols:
            raise InputError("event must contain at least one symbol")


@dataclass(frozen=True)
class IntervalEvent:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if math.isnan(a) or math.isnan(b):
            raise InputError("interval endpoints must be numbers")
        if a > b:
            raise InputError(f"interval [{a}, {b}] has a > b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def width(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class Point:
    value: Union[str, float]


Payload = Union[CategoricalEvent, IntervalEvent, Point]


def is_event(payload: Payload) -> bool:
    return isinstance(payload, (CategoricalEvent, IntervalEvent))


@dataclass(frozen=True)
class Observation:
    time: float
    payload: Payload

    def __post_init__(self):
        t = float(self.time)
        if not (t >= 0 and math.isfinite(t)):
            raise InputError(f"observation time must be finite and non-negative, got {self.time}")
        object.__setattr__(self, "time", t)


class ObservationSequence:
    """Observations at strictly increasing times, either all events or all points."""

    def __init__(self, observations: Sequence[Observation]):
        obs = tuple(observations)
        if not obs:
            raise InputError("observation sequence must not be empty")
        for prev, nxt in zip(obs, obs[1:]):
            if not nxt.time > prev.time:
                raise InputError(
                    f"observation times must be strictly increasing ({prev.time} then {nxt.time})"
                )
        kinds = {is_event(o.payload) for o in obs}
        if len(kinds) > 1:
            raise InputError("observation sequence mixes events and point observations")
        self.observations = obs
        self.kind = "event" if kinds.pop() else "density"

    @property
    def times(self) -> list[float]:
        return [o.time for o in self.observations]

    def __iter__(self):
        return iter(self.observations)

    def __len__(self):
        return len(self.observations)


# -- output models ------------------------------------------------------------


class OutputModel:
    size: int

    def likelihood(self, payload: Payload) -> np.ndarray:
        raise NotImplementedError


class Categorical(OutputModel):
    """Finite alphabet with one probability mass function per state."""

    def __init__(self, alphabet: Sequence[str], pmfs):
        self.alphabet = tuple(str(a) for a in alphabet)
        if not self.alphabet or len(set(self.alphabet)) != len(self.alphabet):
            raise InputError("alphabet must be non-empty with distinct symbols")
        p = np.atleast_2d(np.asarray(pmfs, dtype=float))
        if p.shape[1] != len(self.alphabet):
            raise InputError(f"pmfs have {p.shape[1]} columns, alphabet has {len(self.alphabet)}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InputError("categorical pmfs must be finite and non-negative")
        sums = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PMF_ATOL)
        if bad.size:
            raise InputError(f"categorical pmf for state {int(bad[0])} sums to {sums[bad[0]]!r}")
        self.pmfs = p
        self.pmfs.setflags(write=False)
        self.size = p.shape[0]

    def _column(self, symbol) -> int:
        try:
            return self.alphabet.index(str(symbol))
        except ValueError:
            raise InputError(f"symbol {symbol!r} is not in the alphabet") from None

    def likelihood(self, payload):
        if isinstance(payload, Point):
            payload = CategoricalEvent({payload.value})
        if not isinstance(payload, CategoricalEvent):
            raise InputError("categorical output model needs a symbol set or a symbol")
        cols = [self._column(s) for s in payload.symbols]
        return self.pmfs[:, cols].sum(axis=1)


def _normal_mass(lo: float, hi: float) -> float:
    """Standard normal probability of ``[lo, hi]``, accurate in both tails."""
    if lo >= 0:
        return 0.5 * (math.erfc(lo / _SQRT2) - math.erfc(hi / _SQRT2))
    if hi <= 0:
        return 0.5 * (math.erfc(-hi / _SQRT2) - math.erfc(-lo / _SQRT2))
    return 1.0 - 0.5 * (math.erfc(-lo / _SQRT2) + math.erfc(hi / _SQRT2))


class GaussianDensity(OutputModel):
    def __init__(self, means, stds):
        self.means = np.asarray(means, dtype=float)
        self.stds = np.asarray(stds, dtype=float)
        if self.means.ndim != 1 or self.means.shape != self.stds.shape or self.means.size == 0:
            raise InputError("gaussian means and stds must be equal-length vectors")
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.stds))):
            raise InputError("gaussian parameters must be finite")
        if np.any(self.stds <= 0):
            raise InputError("gaussian standard deviations must be positive")
        self.size = self.means.size

    def likelihood(self, payload):
        if isinstance(payload, Point):
            y = float(payload.value)
            z = (y - self.means) / self.stds
            return np.exp(-0.5 * z * z) / (self.stds * math.sqrt(2.0 * math.pi))
        if isinstance(payload, IntervalEvent):
            return np.array([
                _normal_mass((payload.a - m) / s, (payload.b - m) / s)
                for m, s in zip(self.means, self.stds)
            ])
        raise InputError("gaussian output model needs an interval or a real point")


class TabulatedDensity(OutputModel):
    """Densities tabulated on a shared grid.

    With ``interpolation="step"`` (default) each state has one value per grid
    cell and the density is constant on the left-closed cell ``[g_i, g_{i+1})``.
    With ``interpolation="linear"`` each state has one value per grid node and
    the density is linear between nodes.  Outside the grid the density is zero.
    """

    def __init__(self, grid, densities, interpolation: str = "step"):
        g = np.asarray(grid, dtype=float)
        d = np.atleast_2d(np.asarray(densities, dtype=float))
        if interpolation not in ("step", "linear"):
            raise InputError(f"unknown interpolation {interpolation!r}")
        if g.ndim != 1 or g.size < 2 or not np.all(np.isfinite(g)):
            raise InputError("tabulated grid needs at least two finite points")
        if np.any(np.diff(g) <= 0):
            raise InputError("tabulated grid must be strictly increasing")
        expected = g.size - 1 if interpolation == "step" else g.size
        if d.shape[1] != expected:
            raise InputError(
                f"{interpolation} densities need {expected} values per state, got {d.shape[1]}"
            )
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InputError("tabulated densities must be finite and non-negative")
        self.grid = g
        self.densities = d
        self.interpolation = interpolation
        self.size = d.shape[0]
        totals = np.array([self._integral(k, g[0], g[-1]) for k in range(self.size)])
        bad = np.flatnonzero(np.abs(totals - 1.0) > DENSITY_ATOL)
        if bad.size:
            raise InputError(
                f"tabulated density for state {int(bad[0])} integrates to {totals[bad[0]]!r}"
            )

    def _integral(self, k: int, a: float, b: float) -> float:
        g = self.grid
        a, b = max(a, g[0]), min(b, g[-1])
        if a >= b:
            return 0.0
        total = 0.0
        for i in range(g.size - 1):
            lo, hi = max(a, g[i]), min(b, g[i + 1])
            if lo >= hi:
                continue
            if self.interpolation == "step":
                total += self.densities[k, i] * (hi - lo)
            else:
                total += 0.5 * (self._linear(k, i, lo) + self._linear(k, i, hi)) * (hi - lo)
        return total

    def _linear(self, k: int, i: int, y: float) -> float:
        g, d = self.grid, self.densities[k]
        w = (y - g[i]) / (g[i + 1] - g[i])
        return (1.0 - w) * d[i] + w * d[i + 1]

    def _value(self, k: int, y: float) -> float:
        g = self.grid
        if self.interpolation == "step":
            if y < g[0] or y >= g[-1]:
                return 0.0
            # boundaries resolve to the right cell
            i = int(np.searchsorted(g, y, side="right")) - 1
            return float(self.densities[k, i])
        if y < g[0] or y > g[-1]:
            return 0.0
        i = min(int(np.searchsorted(g, y, side="right")) - 1, g.size - 2)
        return self._linear(k, i, y)

    def likelihood(self, payload):
        if isinstance(payload, Point):
            y = float(payload.value)
            return np.array([self._value(k, y) for k in range(self.size)])
        if isinstance(payload, IntervalEvent):
            return np.array([self._integral(k, payload.a, payload.b) for k in range(self.size)])
        raise InputError("tabulated output model needs an interval or a real point")


def likelihood_vector(model: OutputModel, obs: Observation | Payload) -> np.ndarray:
    """Non-negative per-state likelihood of one observation."""
    payload = obs.payload if isinstance(obs, Observation) else obs
    return np.asarray(model.likelihood(payload), dtype=float)


def event_shrink_sequence(model: OutputModel, point_obs: Observation, i: int) -> Observation:
    """Interval event of half-width ``2**-i`` centred on a point observation."""
    if isinstance(model, Categorical):
        raise InputError("shrinking events are only defined for density output models")
    if not isinstance(point_obs.payload, Point):
        raise InputError("shrinking events need a point observation")
    if i < 1:
        raise InputError("shrink index must be a positive integer")
    y = float(point_obs.payload.value)
    h = 2.0 ** (-i)
    return Observation(point_obs.time, IntervalEvent(y - h, y + h))
