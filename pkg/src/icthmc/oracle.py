"""Reference computations used to cross-check the solver.

Nothing here uses the lower transition rate operator or the generalised
Bayes rule machinery of :mod:`icthmc.inference`:

* :func:`matrix_exponential_apply` computes ``exp(Qt) f`` by uniformisation.
* :func:`precise_updated_expectation` applies Bayes' rule to one concrete
  process whose rate matrix is piecewise constant on a time grid.
* :func:`brute_force_updated_lower` minimises that quantity over a finite
  family of such processes, either by plain enumeration or by an exact
  Dinkelbach search over state-feedback policies.  Every value it returns is
  the updated expectation of an actual member of the imprecise model, so it
  can only overestimate the true lower envelope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from icthmc.errors import GuardExceededError, InputError
from icthmc.propagation import CredalSet
from icthmc.ratesets import RateMatrixSet, as_state_function

TRUNCATION = 1e-12
MAX_PROCESSES = 10**5
TIME_ATOL = 1e-12


def matrix_exponential_apply(Q, f, t: float) -> np.ndarray:
    """``exp(Q t) f`` by uniformisation, truncated once the Poisson tail is below 1e-12."""
    q = np.asarray(Q, dtype=float)
    f = as_state_function(f, q.shape[0])
    if t < 0:
        raise InputError("time must be non-negative")
    rate = float(np.max(np.abs(np.diag(q)))) if q.size else 0.0
    if t == 0 or rate == 0:
        return f.copy()
    lt = rate * t
    if lt == 0:
        # rate * t underflowed
        return f.copy()
    p = np.eye(q.shape[0]) + q / rate
    norm = max(float(np.max(np.abs(f))), 1e-300)
    log_lt = math.log(lt)
    term = f.copy()
    out = np.zeros_like(f)
    k = 0
    while True:
        out += math.exp(-lt + k * log_lt - math.lgamma(k + 1)) * term
        # tail bound: (lt)^(k+1) / (k+1)! * ||f||
        log_tail = (k + 1) * log_lt - math.lgamma(k + 2) + math.log(norm)
        if k + 1 > lt and log_tail < math.log(TRUNCATION):
            break
        term = p @ term
        k += 1
    return out


def matrix_exponential(Q, t: float) -> np.ndarray:
    q = np.asarray(Q, dtype=float)
    n = q.shape[0]
    return np.column_stack([matrix_exponential_apply(q, e, t) for e in np.eye(n)])


def precise_expectation(Q, pmf, f, t: float) -> float:
    """Expectation of ``f(X_t)`` for a homogeneous chain started from ``pmf``."""
    return float(np.asarray(pmf, dtype=float) @ matrix_exponential_apply(Q, f, t))


def nested_product_expectation(Q, pmf, u, g) -> float:
    """``E[prod_i g_i(X_{u_i})]`` for a homogeneous chain, by nested conditioning."""
    u = [float(t) for t in u]
    h = np.asarray(g[-1], dtype=float)
    for i in range(len(u) - 2, -1, -1):
        h = np.asarray(g[i], dtype=float) * matrix_exponential_apply(Q, h, u[i + 1] - u[i])
    return precise_expectation(Q, pmf, h, u[0])


# -- grid processes -------------------------------------------------------------


def grid_boundaries(u, s: float, m: int) -> np.ndarray:
    """Uniform ``m``-interval grid over ``[0, T]`` merged with the observation and target times."""
    if m < 1:
        raise InputError("grid must have at least one interval")
    times = [float(t) for t in u] + [float(s)]
    horizon = max(times)
    pts = sorted(set(np.linspace(0.0, horizon, m + 1).tolist()) | set(times) | {0.0})
    out = [pts[0]]
    for p in pts[1:]:
        if p - out[-1] > TIME_ATOL * max(1.0, horizon):
            out.append(p)
        else:
            # keep the exact observation time when two points coincide
            if p in times:
                out[-1] = p
    return np.array(out)


@dataclass(frozen=True)
class GridProcess:
    """A precise process whose rate matrix is constant between grid boundaries.

    ``choices[k, b, x]`` indexes into ``matrices`` the rate matrix used on
    interval ``k`` when the chain starts that interval in state ``x``; after
    the target time the index ``b`` is ``branch[X_s]``, before it ``b = 0``.
    A process with identical choices for every ``b`` and ``x`` is an ordinary
    time-inhomogeneous Markov chain.
    """

    boundaries: np.ndarray
    initial: np.ndarray
    matrices: tuple
    choices: np.ndarray
    branch: np.ndarray

    def __post_init__(self):
        k = len(self.boundaries) - 1
        n = len(self.initial)
        if self.choices.shape != (max(k, 0), 2, n):
            raise InputError("choice array does not match the grid")
        if np.any(self.choices < 0) or np.any(self.choices >= len(self.matrices)):
            raise InputError("choice indexes a matrix outside the candidate list")


class _Grid:
    """Factors and transition matrices on a fixed grid (shared by the searches)."""

    def __init__(self, matrices, u, g, s, f, m=1, bounds=None):
        self.matrices = tuple(np.asarray(q, dtype=float) for q in matrices)
        self.n = self.matrices[0].shape[0]
        self.u = [float(t) for t in u]
        self.s = float(s)
        self.f = as_state_function(f, self.n)
        if bounds is None:
            bounds = grid_boundaries(self.u, self.s, m)
        self.bounds = np.asarray(bounds, dtype=float)
        self.weights = [np.ones(self.n) for _ in self.bounds]
        self.s_index = self._locate(self.s)
        for t, gt in zip(self.u, g):
            gt = as_state_function(gt, self.n)
            if np.any(gt < 0):
                raise InputError("likelihood factors must be non-negative")
            self.weights[self._locate(t)] = self.weights[self._locate(t)] * gt
        self._cache = {}

    def _locate(self, t):
        i = int(np.argmin(np.abs(self.bounds - t)))
        if abs(self.bounds[i] - t) > TIME_ATOL * max(1.0, t):
            raise InputError(f"time {t} is not a grid boundary")
        return i

    @property
    def intervals(self) -> int:
        return len(self.bounds) - 1

    def transition(self, j: int, k: int) -> np.ndarray:
        dt = float(self.bounds[k + 1] - self.bounds[k])
        key = (j, dt)
        if key not in self._cache:
            self._cache[key] = matrix_exponential(self.matrices[j], dt)
        return self._cache[key]

    def step(self, k, choice, v):
        """Expected ``v`` at the end of interval ``k`` given the state at its start."""
        out = np.empty(self.n)
        for x in range(self.n):
            out[x] = self.transition(int(choice[x]), k)[x] @ v
        return out

    def candidates(self, k, v) -> np.ndarray:
        """Rows: per candidate matrix, expected ``v`` given the start state."""
        return np.array([self.transition(j, k) @ v for j in range(len(self.matrices))])

    def evaluate(self, proc: GridProcess) -> tuple[float, float]:
        """Numerator and denominator of Bayes' rule for one process."""
        K, si = self.intervals, self.s_index
        cont = []
        for b in (0, 1):
            v = self.weights[K].copy() if K > si else np.ones(self.n)
            for k in range(K - 1, si - 1, -1):
                v = self.step(k, proc.choices[k, b], v)
                if k > si:
                    v = self.weights[k] * v
            cont.append(v)
        c = np.where(proc.branch == 0, cont[0], cont[1])
        den = self.weights[si] * c
        num = self.f * den
        for k in range(si - 1, -1, -1):
            den = self.weights[k] * self.step(k, proc.choices[k, 0], den)
            num = self.weights[k] * self.step(k, proc.choices[k, 0], num)
        return float(proc.initial @ num), float(proc.initial @ den)


def precise_updated_expectation(process: GridProcess, u, g, s, f) -> float | None:
    """Bayes' rule for one grid process; ``None`` when the observation has probability zero."""
    grid = _Grid(process.matrices, u, g, s, f, bounds=process.boundaries)
    num, den = grid.evaluate(process)
    if den <= 0:
        return None
    return num / den


def _dp(grid: _Grid, initial: np.ndarray, mu: float):
    """Minimum of ``E[prod g * (f(X_s) - mu)]`` over state-feedback grid processes."""
    K, si, n = grid.intervals, grid.s_index, grid.n
    choices = np.zeros((K, 2, n), dtype=np.int64)
    conts = []
    for b, pick in ((0, np.argmin), (1, np.argmax)):
        v = grid.weights[K].copy() if K > si else np.ones(n)
        for k in range(K - 1, si - 1, -1):
            cand = grid.candidates(k, v)
            idx = pick(cand, axis=0)
            choices[k, b] = idx
            v = cand[idx, np.arange(n)]
            if k > si:
                v = grid.weights[k] * v
        conts.append(v)
    diff = grid.f - mu
    branch = np.where(diff >= 0, 0, 1)
    w = grid.weights[si] * diff * np.where(branch == 0, conts[0], conts[1])
    for k in range(si - 1, -1, -1):
        cand = grid.candidates(k, w)
        idx = np.argmin(cand, axis=0)
        choices[k, 0] = choices[k, 1] = idx
        w = grid.weights[k] * cand[idx, np.arange(n)]
    values = initial @ w
    best = int(np.argmin(values))
    proc = GridProcess(grid.bounds, initial[best], grid.matrices, choices, branch)
    return float(values[best]), proc


@dataclass(frozen=True)
class OracleResult:
    value: float | None
    process: GridProcess | None
    evaluated: int


def _normalised(g):
    out = []
    for gt in g:
        gt = np.asarray(gt, dtype=float)
        top = float(np.max(gt)) if gt.size else 0.0
        out.append(gt / top if top > 0 else gt)
    return out


def search_grid(qset: RateMatrixSet, mset: CredalSet, u, g, s, f, m: int,
                method: str = "dp") -> OracleResult:
    """Smallest updated expectation over grid processes built from the set's corners."""
    if qset.size != mset.size:
        raise InputError("credal set and rate set disagree on the number of states")
    n_mats = qset.count_matrices()
    f = as_state_function(f, qset.size)
    if method == "enumerate":
        bounds = grid_boundaries(u, s, m)
        count = len(mset.vertices) * n_mats ** (len(bounds) - 1)
        if count > MAX_PROCESSES:
            raise GuardExceededError(f"{count} grid processes exceed the limit of {MAX_PROCESSES}")
        grid = _Grid(list(qset.matrices()), u, _normalised(g), s, f, m)
        return _enumerate(grid, mset)
    if method != "dp":
        raise InputError(f"unknown oracle method {method!r}")
    bounds = grid_boundaries(u, s, m)
    work = n_mats * max(1, len(bounds) - 1)
    if work > MAX_PROCESSES:
        raise GuardExceededError(f"{work} matrix exponentials exceed the limit of {MAX_PROCESSES}")
    grid = _Grid(list(qset.matrices()), u, _normalised(g), s, f, m)
    return _dinkelbach(grid, mset)


def _enumerate(grid: _Grid, mset: CredalSet) -> OracleResult:
    K, n = grid.intervals, grid.n
    best, best_proc, count = None, None, 0
    for p in mset.vertices:
        for combo in itertools.product(range(len(grid.matrices)), repeat=K):
            choices = np.empty((K, 2, n), dtype=np.int64)
            choices[:] = np.asarray(combo, dtype=np.int64)[:, None, None]
            proc = GridProcess(grid.bounds, p, grid.matrices, choices, np.zeros(n, dtype=np.int64))
            num, den = grid.evaluate(proc)
            count += 1
            if den > 0 and (best is None or num / den < best):
                best, best_proc = num / den, proc
    return OracleResult(best, best_proc, count)


def _dinkelbach(grid: _Grid, mset: CredalSet, max_iter: int = 200) -> OracleResult:
    initial = np.asarray(mset.vertices)
    guard = 1e-12 * max(1.0, float(np.max(np.abs(grid.f))))
    value, proc = _dp(grid, initial, float(np.max(grid.f)) + 1.0)
    if value >= -guard:
        # no process in the family gives the observation positive probability
        return OracleResult(None, None, 1)
    num, den = grid.evaluate(proc)
    ratio, best = num / den, proc
    for it in range(2, max_iter + 2):
        value, proc = _dp(grid, initial, ratio)
        if value >= -guard:
            return OracleResult(ratio, best, it)
        num, den = grid.evaluate(proc)
        if den <= 0 or num / den >= ratio:
            return OracleResult(ratio, best, it)
        ratio, best = num / den, proc
    return OracleResult(ratio, best, max_iter + 1)


def brute_force_updated_lower(qset, mset, u, g, s, f, m: int, method: str = "dp") -> float | None:
    """Lower envelope of updated expectations over grid processes (``None`` if undefined)."""
    return search_grid(qset, mset, u, g, s, f, m, method).value
