"""Updated lower and upper expectations via the generalised Bayes rule.

The updated lower expectation of ``f(X_s)`` given observations with
likelihood vectors ``g_t`` (``t`` in ``u``) is the largest root of

    G(mu) = lower E[ prod_t g_t(X_t) * (f(X_s) - mu) ],

which is found by bisection.  ``G`` is evaluated with a backward recursion
over the merged time points that keeps, per time point, a lower (``g_plus``)
and an upper (``g_minus``) conditional expectation of the remaining product.

Within one solve the Euler step count used for each time gap is fixed after
the two regime probes, so every evaluation of ``G`` uses the same
discretised model and is exactly non-increasing and concave in ``mu`` up to
round-off.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from icthmc.errors import InputError, UndefinedUpdateError
from icthmc.outputs import ObservationSequence, OutputModel, likelihood_vector
from icthmc.propagation import (
    CredalSet,
    PropagationConfig,
    credal_lower_expectation,
    credal_upper_expectation,
    propagate,
)
from icthmc.ratesets import RateMatrixSet, StateSpace, as_state_function

# |G(mu)| at or below this (times max(1, max|f|)) counts as zero
ZERO_GUARD = 1e-12
TIME_ATOL = 1e-12


class GbrRegime(str, enum.Enum):
    ALL_POSITIVE = "AllPositive"
    SOME_POSITIVE = "SomePositive"
    ALL_ZERO = "AllZero"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class UpdatedExpectation:
    lower: float
    upper: float
    regime: GbrRegime
    iterations: int
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "regime": self.regime.value,
            "iterations": self.iterations,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class Model:
    """Everything needed to describe an imprecise hidden chain."""

    states: StateSpace
    rates: RateMatrixSet
    initial: CredalSet
    output: OutputModel

    def __post_init__(self):
        n = self.states.size
        for name, part in (("rate set", self.rates), ("initial credal set", self.initial),
                           ("output model", self.output)):
            if part.size != n:
                raise InputError(f"{name} has {part.size} states, state space has {n}")


@dataclass(frozen=True)
class Query:
    observations: ObservationSequence
    target_time: float
    f: np.ndarray
    tolerance: float = 1e-6

    def __post_init__(self):
        if not (self.target_time >= 0 and math.isfinite(self.target_time)):
            raise InputError("target time must be finite and non-negative")
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise InputError("tolerance must be positive")
        object.__setattr__(self, "f", as_state_function(self.f))


class StepPlan:
    """Euler step counts per time gap, adapted during probing and then frozen."""

    def __init__(self):
        self._steps: dict[float, int] = {}
        self.frozen = False

    def lookup(self, horizon: float) -> int | None:
        return self._steps.get(horizon)

    def record(self, horizon: float, steps: int) -> None:
        if steps > 0:
            self._steps[horizon] = max(steps, self._steps.get(horizon, 0))

    def freeze(self) -> None:
        self.frozen = True

    def __repr__(self):
        return f"StepPlan({self._steps!r}, frozen={self.frozen})"


def _cond_lower(qset, h, horizon, cfg, plan: StepPlan | None) -> np.ndarray:
    if horizon == 0:
        return h
    if plan is None:
        return propagate(qset, h, horizon, cfg).values
    n = plan.lookup(horizon)
    if plan.frozen and n is not None:
        return propagate(qset, h, horizon, cfg, steps=n).values
    res = propagate(qset, h, horizon, cfg)
    plan.record(horizon, res.steps)
    return res.values


def _cond_upper(qset, h, horizon, cfg, plan) -> np.ndarray:
    return -_cond_lower(qset, -h, horizon, cfg, plan)


def _check_times(times: Sequence[float]) -> list[float]:
    out = [float(t) for t in times]
    for t in out:
        if not (t >= 0 and math.isfinite(t)):
            raise InputError(f"time points must be finite and non-negative, got {t}")
    for a, b in zip(out, out[1:]):
        if not b > a:
            raise InputError("time points must be strictly increasing")
    return out


def merge_target(u, g, s, f, mu):
    """Fold the target factor ``f - mu`` at time ``s`` into the factor list.

    Returns new lists ``(u', g')``; the inputs are not modified.
    """
    u = list(u)
    g = [np.asarray(v, dtype=float) for v in g]
    if len(u) != len(g):
        raise InputError("time points and factors are not aligned")
    target = np.asarray(f, dtype=float) - mu
    for i, t in enumerate(u):
        if abs(t - s) <= TIME_ATOL * max(1.0, abs(s)):
            g[i] = target * g[i]
            return u, g
    pos = int(np.searchsorted(u, s))
    u.insert(pos, float(s))
    g.insert(pos, target)
    return u, g


def backward_product_transform(qset: RateMatrixSet, u, g, cfg=None, plan=None):
    """Return ``(g_plus, g_minus)`` at the first time point of ``u``.

    ``g_plus`` is the conditional lower expectation of the product of all
    factors given the state at ``u[0]``; ``g_minus`` the conditional upper one.
    """
    u = _check_times(u)
    if len(u) == 0 or len(u) != len(g):
        raise InputError("need one factor per time point and at least one time point")
    cfg = cfg or PropagationConfig()
    factors = [as_state_function(v, qset.size) for v in g]
    g_plus = g_minus = factors[-1]
    for i in range(len(u) - 2, -1, -1):
        horizon = u[i + 1] - u[i]
        lo = _cond_lower(qset, g_plus, horizon, cfg, plan)
        hi = _cond_upper(qset, g_minus, horizon, cfg, plan)
        gi = factors[i]
        nonneg = gi >= 0
        g_plus, g_minus = (
            np.where(nonneg, gi * lo, gi * hi),
            np.where(nonneg, gi * hi, gi * lo),
        )
    return g_plus, g_minus


def evaluate_G(qset, mset: CredalSet, u, g, cfg=None, plan=None) -> tuple[float, float]:
    """Lower and upper expectation of the product of the factors ``g`` at times ``u``."""
    cfg = cfg or PropagationConfig()
    g_plus, g_minus = backward_product_transform(qset, u, g, cfg, plan)
    t0 = float(u[0])
    lower = credal_lower_expectation(mset, _cond_lower(qset, g_plus, t0, cfg, plan))
    upper = credal_upper_expectation(mset, _cond_upper(qset, g_minus, t0, cfg, plan))
    return lower, upper


class GbrProblem:
    """One updating problem: fixed model, observations and target function.

    The likelihood factors are rescaled to have maximum one, which leaves the
    roots of ``G`` unchanged; :meth:`G` reports values of the rescaled
    problem and :meth:`G_raw` undoes the scaling.
    """

    def __init__(self, qset, mset, u, g_list, s, f, cfg=None):
        self.qset = qset
        self.mset = mset
        if mset.size != qset.size:
            raise InputError("credal set and rate set disagree on the number of states")
        self.u = _check_times(u)
        if len(self.u) != len(g_list):
            raise InputError("time points and likelihood factors are not aligned")
        factors = [as_state_function(v, qset.size) for v in g_list]
        if any(np.any(v < 0) for v in factors):
            raise InputError("likelihood factors must be non-negative")
        maxima = [float(np.max(v)) if v.size else 0.0 for v in factors]
        self.scale = math.prod(maxima)
        self.has_zero_factor = any(m == 0 for m in maxima)
        self.g = [v / m if m > 0 else v for v, m in zip(factors, maxima)]
        self.s = float(s)
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise InputError("target time must be finite and non-negative")
        self.f = as_state_function(f, qset.size)
        self.cfg = cfg or PropagationConfig()
        self.plan = StepPlan()
        self.guard = ZERO_GUARD * max(1.0, float(np.max(np.abs(self.f))))

    def G(self, mu: float, f=None) -> tuple[float, float]:
        """``(lower, upper)`` expectation of ``prod g * (f - mu)`` (rescaled)."""
        target = self.f if f is None else f
        u2, g2 = merge_target(self.u, self.g, self.s, target, mu)
        return evaluate_G(self.qset, self.mset, u2, g2, self.cfg, self.plan)

    def G_raw(self, mu: float) -> tuple[float, float]:
        lo, hi = self.G(mu)
        return self.scale * lo, self.scale * hi

    def product_bounds(self) -> tuple[float, float]:
        """Lower and upper expectation of the bare likelihood product (rescaled)."""
        if not self.u:
            return 1.0, 1.0
        return evaluate_G(self.qset, self.mset, self.u, self.g, self.cfg, self.plan)

    def classify(self, f=None) -> GbrRegime:
        """Sign probes just outside ``[min f, max f]``; freezes the step plan.

        The probes are also run for ``-f`` so that the plan, and hence the
        discretised model, is the same whichever sign of ``f`` a solve starts from.
        """
        target = self.f if f is None else f
        lo_probe = self.G(float(np.min(target)) - 1.0, target)[0]
        hi_probe = self.G(float(np.max(target)) + 1.0, target)[0]
        self.G(float(np.min(-target)) - 1.0, -target)
        self.G(float(np.max(-target)) + 1.0, -target)
        self.plan.freeze()
        if self.has_zero_factor or hi_probe >= -self.guard:
            return GbrRegime.ALL_ZERO
        if lo_probe > self.guard:
            return GbrRegime.ALL_POSITIVE
        return GbrRegime.SOME_POSITIVE

    def max_root(self, eps: float, f=None) -> tuple[float, int]:
        """Bisection for the largest root of ``G`` on ``[min f, max f]``."""
        target = self.f if f is None else f
        mu_minus, mu_plus = float(np.min(target)), float(np.max(target))
        if self.G(mu_plus, target)[0] >= -self.guard:
            return mu_plus, 0
        iterations = 0
        while mu_plus - mu_minus >= eps:
            mu = 0.5 * (mu_minus + mu_plus)
            iterations += 1
            if self.G(mu, target)[0] >= -self.guard:
                mu_minus = mu
            else:
                mu_plus = mu
        return mu_minus, iterations


def iteration_bound(f, eps: float) -> int:
    """Upper bound on the bisection iterations of one run."""
    f = np.asarray(f, dtype=float)
    return math.ceil(math.log2((float(np.ptp(f)) + 2.0) / eps)) + 2


def solve_gbr(qset, mset, u, g_list, s, f, eps, cfg=None) -> UpdatedExpectation:
    """Updated lower and upper expectation of ``f(X_s)`` given likelihood factors."""
    if not (eps > 0 and math.isfinite(eps)):
        raise InputError("bisection tolerance must be positive")
    problem = GbrProblem(qset, mset, u, g_list, s, f, cfg)
    regime = problem.classify()
    if regime is GbrRegime.ALL_ZERO:
        raise UndefinedUpdateError(
            "update undefined: upper probability of observation is zero", regime
        )
    lower, it_lower = problem.max_root(eps)
    neg, it_upper = problem.max_root(eps, -problem.f)
    return UpdatedExpectation(
        lower=lower,
        upper=-neg,
        regime=regime,
        iterations=max(it_lower, it_upper),
        tolerance=eps,
    )


def likelihood_factors(model: Model, observations: ObservationSequence):
    """Times and per-time likelihood vectors of an observation sequence."""
    times = observations.times
    factors = [likelihood_vector(model.output, o) for o in observations]
    return times, factors


def updated_lower_expectation(model: Model, query: Query, cfg=None) -> UpdatedExpectation:
    """Update ``model`` with the query's observations and bound ``E[f(X_s)]``.

    The propagation tolerance defaults to the query tolerance.
    """
    cfg = cfg or PropagationConfig(tolerance=query.tolerance)
    times, factors = likelihood_factors(model, query.observations)
    f = as_state_function(query.f, model.states.size)
    return solve_gbr(
        model.rates, model.initial, times, factors, query.target_time, f, query.tolerance, cfg
    )


def gbr_problem(model: Model, query: Query, cfg=None) -> GbrProblem:
    cfg = cfg or PropagationConfig(tolerance=query.tolerance)
    times, factors = likelihood_factors(model, query.observations)
    return GbrProblem(model.rates, model.initial, times, factors, query.target_time, query.f, cfg)


def gbr_curve(problem: GbrProblem, samples: int) -> list[tuple[float, float]]:
    """``(mu, lower G(mu))`` on ``samples`` evenly spaced points over ``[min f - 1, max f + 1]``."""
    if samples < 2:
        raise InputError("need at least two samples")
    problem.classify()
    lo, hi = float(np.min(problem.f)) - 1.0, float(np.max(problem.f)) + 1.0
    return [(float(mu), problem.G_raw(float(mu))[0]) for mu in np.linspace(lo, hi, samples)]
