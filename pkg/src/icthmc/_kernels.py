"""Compiled inner loops for the explicit Euler scheme ``f <- f + delta * lower(f)``."""

import numpy as np
from numba import njit


@njit(cache=True)
def euler_generators(off, counts, f, delta, steps):
    n = f.shape[0]
    cur = f.copy()
    nxt = np.empty(n)
    for _ in range(steps):
        for x in range(n):
            fx = cur[x]
            best = np.inf
            for k in range(counts[x]):
                acc = 0.0
                for y in range(n):
                    acc += off[x, k, y] * (cur[y] - fx)
                if acc < best:
                    best = acc
            nxt[x] = fx + delta * best
        cur, nxt = nxt, cur
    return cur


@njit(cache=True)
def euler_intervals(lower, upper, f, delta, steps):
    n = f.shape[0]
    cur = f.copy()
    nxt = np.empty(n)
    for _ in range(steps):
        for x in range(n):
            fx = cur[x]
            acc = 0.0
            for y in range(n):
                if y != x:
                    d = cur[y] - fx
                    if d >= 0.0:
                        acc += lower[x, y] * d
                    else:
                        acc += upper[x, y] * d
            nxt[x] = fx + delta * acc
        cur, nxt = nxt, cur
    return cur
