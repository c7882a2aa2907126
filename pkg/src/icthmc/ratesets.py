"""Rate matrices, sets of rate matrices and the lower transition rate operator.

Two set representations are supported, both with separately specified rows:

* :class:`GeneratorRows` -- per state a finite list of candidate rows; the set
  is the convex hull of every matrix assembled by picking one row per state.
* :class:`IntervalRows` -- per off-diagonal entry an interval ``[l, u]``; the
  diagonal follows from the zero row-sum constraint.

State functions are plain one-dimensional float arrays indexed by state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from icthmc.errors import InputError

# supplied diagonal may disagree with the off-diagonal row sum by this much (relative)
DIAGONAL_RTOL = 1e-9


@dataclass(frozen=True)
class StateSpace:
    labels: tuple

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        if not labels:
            raise InputError("state space must contain at least one state")
        if len(set(labels)) != len(labels):
            raise InputError("state labels must be unique")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise InputError(f"unknown state {label!r}") from None

    def __len__(self):
        return len(self.labels)


def as_state_function(values, size: int | None = None) -> np.ndarray:
    """Return ``values`` as a finite float vector, checking its length."""
    f = np.asarray(values, dtype=float)
    if f.ndim != 1:
        raise InputError(f"state function must be one-dimensional, got shape {f.shape}")
    if size is not None and f.shape[0] != size:
        raise InputError(f"state function has length {f.shape[0]}, expected {size}")
    if not np.all(np.isfinite(f)):
        raise InputError("state function entries must be finite")
    return f


def _normalise_row(row, x: int, size: int, label=None) -> np.ndarray:
    """Validate one rate-matrix row for state ``x`` and recompute its diagonal."""
    name = label if label is not None else x
    r = np.asarray(row, dtype=float)
    if r.shape != (size,):
        raise InputError(f"row for state {name} has length {r.size}, expected {size}")
    if not np.all(np.isfinite(r)):
        raise InputError(f"row for state {name} has non-finite entries")
    off = np.delete(r, x)
    if np.any(off < 0):
        raise InputError(f"row for state {name} has negative off-diagonal entries")
    out = r.copy()
    out[x] = -off.sum()
    scale = max(1.0, float(np.max(np.abs(r))))
    if abs(r[x] - out[x]) > DIAGONAL_RTOL * scale:
        raise InputError(
            f"row for state {name} does not sum to zero (sum = {r.sum():.6g})"
        )
    return out


class RateMatrix:
    """A single rate matrix; the diagonal is recomputed from the off-diagonals."""

    def __init__(self, entries, labels: Sequence | None = None):
        q = np.asarray(entries, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise InputError(f"rate matrix must be square and non-empty, got shape {q.shape}")
        n = q.shape[0]
        rows = [
            _normalise_row(q[x], x, n, None if labels is None else labels[x])
            for x in range(n)
        ]
        self.entries = np.array(rows)
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def apply(self, f) -> np.ndarray:
        f = as_state_function(f, self.size)
        # off-diagonal difference form: exact on constants
        return np.array(
            [self.entries[x] @ (f - f[x]) for x in range(self.size)]
        )

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)


class RateMatrixSet:
    """Common interface of the two set representations."""

    size: int

    def lower_apply(self, f: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def upper_apply(self, f: np.ndarray) -> np.ndarray:
        return -self.lower_apply(-f)

    def norm_bound(self) -> float:
        raise NotImplementedError

    @property
    def is_precise(self) -> bool:
        raise NotImplementedError

    def corner_rows(self, x: int) -> np.ndarray:
        """Candidate rows for state ``x`` whose convex hull is the set's row ``x``."""
        raise NotImplementedError

    def count_matrices(self) -> int:
        return math.prod(len(self.corner_rows(x)) for x in range(self.size))

    def matrices(self) -> Iterator[np.ndarray]:
        """Enumerate every matrix assembled from corner rows."""
        per_state = [self.corner_rows(x) for x in range(self.size)]
        for choice in itertools.product(*per_state):
            yield np.array(choice)

    def precise_matrix(self) -> np.ndarray:
        if not self.is_precise:
            raise InputError("rate matrix set is not a singleton")
        return np.array([self.corner_rows(x)[0] for x in range(self.size)])


class GeneratorRows(RateMatrixSet):
    """Convex hull of all matrices assembled from per-state candidate rows."""

    def __init__(self, rows: Sequence[Sequence[Sequence[float]]], labels: Sequence | None = None):
        if len(rows) == 0:
            raise InputError("generator set needs rows for at least one state")
        n = len(rows)
        self.size = n
        normalised = []
        for x, candidates in enumerate(rows):
            name = labels[x] if labels is not None else x
            if len(candidates) == 0:
                raise InputError(f"state {name} has no candidate rows")
            normalised.append(
                np.array([_normalise_row(r, x, n, name) for r in candidates])
            )
        self.rows = tuple(normalised)
        for r in self.rows:
            r.setflags(write=False)

    @classmethod
    def singleton(cls, matrix) -> "GeneratorRows":
        q = RateMatrix(matrix).entries
        return cls([[q[x]] for x in range(q.shape[0])])

    @classmethod
    def from_matrices(cls, matrices) -> "GeneratorRows":
        """Separately-specified-rows closure of a finite list of rate matrices."""
        qs = [RateMatrix(m).entries for m in matrices]
        n = qs[0].shape[0]
        return cls([[q[x] for q in qs] for x in range(n)])

    def lower_apply(self, f):
        f = as_state_function(f, self.size)
        out = np.empty(self.size)
        for x, cand in enumerate(self.rows):
            # diagonal term multiplies f[x] - f[x] = 0
            out[x] = np.min(cand @ (f - f[x]))
        return out

    def norm_bound(self):
        return 2.0 * max(float(np.max(-cand[:, x])) for x, cand in enumerate(self.rows))

    @property
    def is_precise(self):
        return all(len(c) == 1 or np.all(c == c[0]) for c in self.rows)

    def corner_rows(self, x):
        return self.rows[x]

    def kernel_arrays(self):
        """Padded off-diagonal candidate rows and per-state counts."""
        kmax = max(len(c) for c in self.rows)
        off = np.zeros((self.size, kmax, self.size))
        counts = np.empty(self.size, dtype=np.int64)
        for x, cand in enumerate(self.rows):
            off[x, : len(cand)] = cand
            off[x, : len(cand), x] = 0.0
            counts[x] = len(cand)
        return off, counts


class IntervalRows(RateMatrixSet):
    """All rate matrices whose off-diagonal entries lie in given boxes."""

    def __init__(self, lower, upper, labels: Sequence | None = None):
        lo = np.array(lower, dtype=float)
        hi = np.array(upper, dtype=float)
        if lo.ndim != 2 or lo.shape[0] != lo.shape[1] or lo.shape[0] == 0:
            raise InputError(f"interval bounds must be square matrices, got shape {lo.shape}")
        if hi.shape != lo.shape:
            raise InputError("lower and upper bound matrices differ in shape")
        n = lo.shape[0]
        self.size = n
        # diagonals are implied by the row sums and never stored
        np.fill_diagonal(lo, 0.0)
        np.fill_diagonal(hi, 0.0)
        for x in range(n):
            for y in range(n):
                if x == y:
                    continue
                pair = f"({labels[x]}, {labels[y]})" if labels is not None else f"({x}, {y})"
                l, u = lo[x, y], hi[x, y]
                if not (np.isfinite(l) and np.isfinite(u)):
                    raise InputError(f"bounds for {pair} must be finite")
                if l < 0:
                    raise InputError(f"lower bound for {pair} is negative")
                if l > u:
                    raise InputError(f"empty interval for {pair}: {l} > {u}")
        self.lower = lo
        self.upper = hi
        self.lower.setflags(write=False)
        self.upper.setflags(write=False)

    def lower_apply(self, f):
        f = as_state_function(f, self.size)
        diff = f[None, :] - f[:, None]
        # ties take the lower bound; their coefficient is zero anyway
        rates = np.where(diff >= 0, self.lower, self.upper)
        return np.sum(rates * diff, axis=1)

    def norm_bound(self):
        return 2.0 * float(np.max(self.upper.sum(axis=1)))

    @property
    def is_precise(self):
        return bool(np.all(self.lower == self.upper))

    def corner_rows(self, x):
        others = [y for y in range(self.size) if y != x]
        rows = []
        for pick in itertools.product((0, 1), repeat=len(others)):
            row = np.zeros(self.size)
            for y, p in zip(others, pick):
                row[y] = self.upper[x, y] if p else self.lower[x, y]
            row[x] = -row.sum()
            rows.append(row)
        # duplicate corners arise from degenerate intervals
        return np.unique(np.array(rows), axis=0)

    def count_matrices(self):
        degenerate = self.lower == self.upper
        return 2 ** int(np.sum(~degenerate))


def lower_rate_apply(qset: RateMatrixSet, f) -> np.ndarray:
    """Lower transition rate operator: per-state infimum of ``Q f`` over the set."""
    return qset.lower_apply(as_state_function(f, qset.size))


def upper_rate_apply(qset: RateMatrixSet, f) -> np.ndarray:
    f = as_state_function(f, qset.size)
    return -qset.lower_apply(-f)


def norm_bound(qset: RateMatrixSet) -> float:
    """Twice the largest exit rate any member of the set can have."""
    return qset.norm_bound()
