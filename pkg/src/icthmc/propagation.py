"""Lower expectations of functions of the state at a single time point.

Conditional lower expectations are obtained by iterating
``f_k = f_{k-1} + delta * lower_rate_apply(qset, f_{k-1})``; the number of
steps is doubled until two consecutive runs agree to within half the
tolerance.  Unconditional lower expectations then minimise over the
vertices of the initial credal set.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from icthmc import _kernels
from icthmc.errors import ConvergenceError, InputError
from icthmc.ratesets import GeneratorRows, IntervalRows, RateMatrixSet, as_state_function

PMF_ATOL = 1e-12


class CredalSet:
    """Convex hull of finitely many probability mass functions."""

    def __init__(self, vertices: Sequence[Sequence[float]]):
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.size == 0 or v.shape[0] == 0:
            raise InputError("credal set needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise InputError("credal set vertices must be finite")
        if np.any(v < 0):
            raise InputError("credal set vertices must be non-negative")
        sums = v.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PMF_ATOL)
        if bad.size:
            raise InputError(f"credal set vertex {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        self.vertices = v
        self.vertices.setflags(write=False)

    @classmethod
    def vacuous(cls, size: int) -> "CredalSet":
        return cls(np.eye(size))

    @classmethod
    def singleton(cls, pmf) -> "CredalSet":
        return cls([pmf])

    @property
    def size(self) -> int:
        return self.vertices.shape[1]

    def __repr__(self):
        return f"CredalSet({self.vertices.tolist()!r})"


def _default_max_refinements() -> int:
    raw = os.environ.get("ICTHMC_MAX_REFINEMENTS")
    if raw is None:
        return 40
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"ICTHMC_MAX_REFINEMENTS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InputError("ICTHMC_MAX_REFINEMENTS must be positive")
    return value


@dataclass(frozen=True)
class PropagationConfig:
    tolerance: float = 1e-6
    max_refinements: int = field(default_factory=_default_max_refinements)
    initial_steps_factor: float = 2.0

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise InputError("tolerance must be a positive finite number")
        if self.max_refinements < 1:
            raise InputError("max_refinements must be positive")
        if not self.initial_steps_factor > 0:
            raise InputError("initial_steps_factor must be positive")


@dataclass(frozen=True)
class Propagation:
    """Result of one conditional propagation."""

    values: np.ndarray
    steps: int
    gap: float


def minimum_steps(qset: RateMatrixSet, horizon: float, factor: float = 2.0) -> int:
    """Smallest step count keeping ``delta * norm_bound <= 1/2`` (at least one)."""
    norm = qset.norm_bound()
    return max(1, math.ceil(max(factor, 2.0) * horizon * norm))


def euler_lower(qset: RateMatrixSet, f, horizon: float, steps: int) -> np.ndarray:
    """``[I + delta * lower_Q]^steps f`` with ``delta = horizon / steps``."""
    f = as_state_function(f, qset.size)
    if horizon == 0 or steps == 0:
        return f.copy()
    delta = horizon / steps
    if qset.is_precise:
        # linear operator: the same iterate via repeated squaring
        q = qset.precise_matrix()
        step = np.eye(qset.size) + delta * q
        return np.linalg.matrix_power(step, steps) @ f
    if isinstance(qset, IntervalRows):
        return _kernels.euler_intervals(qset.lower, qset.upper, f, delta, steps)
    if isinstance(qset, GeneratorRows):
        off, counts = qset.kernel_arrays()
        return _kernels.euler_generators(off, counts, f, delta, steps)
    # generic fallback for other RateMatrixSet implementations
    cur = f.copy()
    for _ in range(steps):
        cur = cur + delta * qset.lower_apply(cur)
    return cur


def propagate(
    qset: RateMatrixSet,
    f,
    horizon: float,
    cfg: PropagationConfig | None = None,
    steps: int | None = None,
) -> Propagation:
    """Conditional lower expectation with step bookkeeping.

    With ``steps`` given, runs exactly that many Euler steps (no adaptation,
    ``gap`` is reported as NaN).  Otherwise doubles the step count, starting
    from :func:`minimum_steps`, until two runs agree to ``tolerance / 2``.
    """
    cfg = cfg or PropagationConfig()
    f = as_state_function(f, qset.size)
    if horizon < 0 or not math.isfinite(horizon):
        raise InputError(f"horizon must be finite and non-negative, got {horizon}")
    if horizon == 0 or qset.norm_bound() == 0 or np.ptp(f) == 0:
        return Propagation(f.copy(), 0, 0.0)
    if steps is not None:
        return Propagation(euler_lower(qset, f, horizon, steps), steps, float("nan"))

    n = minimum_steps(qset, horizon, cfg.initial_steps_factor)
    prev = euler_lower(qset, f, horizon, n)
    gap = float("inf")
    for _ in range(cfg.max_refinements):
        n *= 2
        cur = euler_lower(qset, f, horizon, n)
        gap = float(np.max(np.abs(cur - prev)))
        if gap <= cfg.tolerance / 2:
            return Propagation(cur, n, gap)
        prev = cur
    raise ConvergenceError(
        f"no convergence after {cfg.max_refinements} refinements (last gap {gap:.3g})",
        gap=gap,
        steps=n,
    )


def conditional_lower_expectation(qset, f, horizon, cfg=None) -> np.ndarray:
    """Per-state lower expectation of ``f`` a time ``horizon`` ahead."""
    return propagate(qset, f, horizon, cfg).values


def conditional_upper_expectation(qset, f, horizon, cfg=None) -> np.ndarray:
    f = as_state_function(f, qset.size)
    return -propagate(qset, -f, horizon, cfg).values


def credal_lower_expectation(mset: CredalSet, h) -> float:
    h = as_state_function(h, mset.size)
    return float(np.min(mset.vertices @ h))


def credal_upper_expectation(mset: CredalSet, h) -> float:
    h = as_state_function(h, mset.size)
    return float(np.max(mset.vertices @ h))


def unconditional_lower_expectation(qset, mset, f, t, cfg=None) -> float:
    if mset.size != qset.size:
        raise InputError("credal set and rate set disagree on the number of states")
    return credal_lower_expectation(mset, conditional_lower_expectation(qset, f, t, cfg))


def unconditional_upper_expectation(qset, mset, f, t, cfg=None) -> float:
    f = as_state_function(f, qset.size)
    return -unconditional_lower_expectation(qset, mset, -f, t, cfg)
