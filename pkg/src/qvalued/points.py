"""Unordered value tuples, the matching metric, and sampled multi-valued data.

An AqPoint is an unordered Q-tuple of vectors in R^m.  The distance between
two such tuples is the smallest root-sum-of-squares over all pairings of
their branches, computed with an exact assignment solver.  The space is a
metric space, not a vector space: branch arithmetic only makes sense after
fixing a pairing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BranchAmbiguityError, OracleLimitError
from .geometry import unit_ball_volume

__all__ = [
    "AqPoint",
    "metric_g",
    "brute_force_metric",
    "optimal_assignment",
    "order_branches",
    "translate_add",
    "SampledQFunction",
    "numeric_derivative",
    "lebesgue_point_profile",
]

_PERM_CACHE = {}
_BRUTE_FORCE_LIMIT = 8


def _permutation_table(q):
    """All permutations of range(q) as an array of shape (q!, q)."""
    if q not in _PERM_CACHE:
        _PERM_CACHE[q] = np.array(list(itertools.permutations(range(q))), dtype=int)
    return _PERM_CACHE[q]


def _canonical(branches):
    """Rows sorted lexicographically, first coordinate most significant."""
    key = np.lexsort(branches.T[::-1])
    return branches[key]


class AqPoint:
    """Unordered tuple of Q vectors in R^m, stored in canonical row order."""

    __slots__ = ("branches",)

    def __init__(self, branches):
        arr = np.asarray(branches, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("branches must form a (Q, m) array with Q, m >= 1")
        arr = _canonical(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "branches", arr)

    @property
    def q(self):
        return self.branches.shape[0]

    @property
    def m(self):
        return self.branches.shape[1]

    @classmethod
    def zero(cls, q, m=1):
        return cls(np.zeros((q, m)))

    def norm(self):
        """Distance to the Q-fold zero tuple; no matching needed."""
        return float(np.linalg.norm(self.branches))

    def average(self):
        return self.branches.mean(axis=0)

    def symmetric_part(self):
        """The tuple with its branch average subtracted from every branch."""
        return AqPoint(self.branches - self.average())

    def translate(self, v):
        return AqPoint(self.branches + np.asarray(v, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, AqPoint):
            return NotImplemented
        return self.branches.shape == other.branches.shape and bool(
            np.array_equal(self.branches, other.branches)
        )

    def __hash__(self):
        return hash((self.branches.shape, self.branches.tobytes()))

    def __repr__(self):
        rows = ", ".join(str(list(row)) for row in self.branches)
        return "AqPoint([%s])" % rows


def _branch_arrays(s, t):
    a = s.branches if isinstance(s, AqPoint) else np.atleast_2d(np.asarray(s, float))
    b = t.branches if isinstance(t, AqPoint) else np.atleast_2d(np.asarray(t, float))
    if a.shape != b.shape:
        raise ValueError("tuples must share Q and m")
    return a, b


def _cost_matrix(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def metric_g(s, t):
    """Matching distance: min over pairings of the root-sum-of-squares."""
    a, b = _branch_arrays(s, t)
    if a.shape[0] == 1:
        return float(np.linalg.norm(a[0] - b[0]))
    cost = _cost_matrix(a, b)
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(cost[rows, cols].sum(), 0.0))


def brute_force_metric(s, t):
    """Same distance by exhausting all Q! pairings; oracle for metric_g."""
    a, b = _branch_arrays(s, t)
    q = a.shape[0]
    if q > _BRUTE_FORCE_LIMIT:
        raise OracleLimitError("oracle limit: Q = %d exceeds %d" % (q, _BRUTE_FORCE_LIMIT))
    perms = _permutation_table(q)
    cost = _cost_matrix(a, b)
    totals = cost[np.arange(q), perms].sum(axis=1)
    return math.sqrt(max(totals.min(), 0.0))


def optimal_assignment(s, t, tol=1e-12):
    """Optimal pairing (as an index array sigma with b[sigma[i]] matched to
    a[i]) together with the distance.

    Among pairings whose cost ties the optimum within `tol` relative, the
    lexicographically smallest index array is returned, which keeps
    downstream branch tracking deterministic.
    """
    a, b = _branch_arrays(s, t)
    q = a.shape[0]
    cost = _cost_matrix(a, b)
    rows, cols = linear_sum_assignment(cost)
    best = cost[rows, cols].sum()
    slack = tol * (1.0 + best)
    sigma = np.empty(q, dtype=int)
    rows_left = list(range(q))
    cols_left = list(range(q))
    budget = best
    for i in list(rows_left):
        # Greedily pin the smallest column that still admits an optimal
        # completion on the remaining minor.
        chosen = None
        for j in sorted(cols_left):
            rl = [r for r in rows_left if r != i]
            cl = [c for c in cols_left if c != j]
            if rl:
                sub = cost[np.ix_(rl, cl)]
                rr, cc = linear_sum_assignment(sub)
                rest = sub[rr, cc].sum()
            else:
                rest = 0.0
            if cost[i, j] + rest <= budget + slack:
                chosen = j
                budget -= cost[i, j]
                break
        if chosen is None:  # numerical safety net; fall back to solver's pick
            chosen = cols[rows.tolist().index(i)]
            budget -= cost[i, chosen]
        sigma[i] = chosen
        rows_left.remove(i)
        cols_left.remove(chosen)
    total = cost[np.arange(q), sigma].sum()
    return sigma, math.sqrt(max(total, 0.0))


def order_branches(u):
    """Scalar sampled data with branches sorted descending at every node.

    Only SampledQFunction carries a meaningful branch order (AqPoint storage
    is canonical), so that is the only input accepted.  Each node's tuple is
    unchanged as a value; the selections u_1 >= ... >= u_Q become honest
    single-valued functions.
    """
    if not isinstance(u, SampledQFunction):
        raise TypeError("order_branches requires sampled data")
    if u.m != 1:
        raise ValueError("order_branches requires m = 1")
    ordered = np.sort(u.values[:, :, 0], axis=1)[:, ::-1]
    return SampledQFunction(u.grid, ordered[:, :, None], source=u.source)


def translate_add(p, f_value):
    """Add a single vector to every branch; models u + single-valued f."""
    return p.translate(f_value)


@dataclass(frozen=True)
class SampledQFunction:
    """Multi-valued samples on a quadrature grid.

    values has shape (S, Q, m): per grid node, Q branch vectors.  Branch
    order per node carries no meaning.
    """

    grid: object
    values: np.ndarray
    source: object = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 2:
            vals = vals[:, :, None]
        if vals.ndim != 3:
            raise ValueError("values must have shape (S, Q, m)")
        if vals.shape[0] != self.grid.size:
            raise ValueError("sample count disagrees with grid size")
        object.__setattr__(self, "values", vals)

    @property
    def q(self):
        return self.values.shape[1]

    @property
    def m(self):
        return self.values.shape[2]

    @property
    def n(self):
        return self.grid.dim

    @property
    def size(self):
        return self.grid.size

    def point(self, index):
        return AqPoint(self.values[index])

    def nearest_index(self, x):
        d2 = np.sum((self.grid.points - np.asarray(x, float)) ** 2, axis=1)
        return int(np.argmin(d2))

    def value_at(self, x):
        """Tuple at the nearest grid node."""
        return self.point(self.nearest_index(x))

    def restrict(self, center, radius):
        sub, idx = self.grid.restrict(center, radius)
        return SampledQFunction(sub, self.values[idx], source=self.source)

    def q_mass(self, q_exp=2.0):
        """Weighted integral of |u|^q over the grid."""
        mags = np.sqrt(np.einsum("sqm,sqm->s", self.values, self.values))
        return float(np.sum(self.grid.weights * mags ** q_exp))

    @classmethod
    def from_function(cls, grid, fn, q, m):
        """Sample a callable x -> (Q, m) array on grid points.

        Callables that accept the whole (S, n) point block at once and
        return (S, Q, m) are used as-is; anything else is invoked per node.
        """
        try:
            block = np.asarray(fn(grid.points), dtype=float)
            if block.shape == (grid.size, q, m):
                return cls(grid, block.copy())
        except Exception:
            pass
        vals = np.empty((grid.size, q, m))
        for i, x in enumerate(grid.points):
            vals[i] = np.asarray(fn(x), dtype=float).reshape(q, m)
        return cls(grid, vals)


def _evaluate(u, x):
    """Tuple value from either a sampled or an analytically backed source."""
    if hasattr(u, "eval_point"):
        return u.eval_point(x)
    if isinstance(u, SampledQFunction):
        if u.source is not None and hasattr(u.source, "eval_point"):
            return u.source.eval_point(x)
        return u.value_at(x)
    raise TypeError("cannot evaluate %r at a point" % type(u))


def numeric_derivative(u, x0, h, gap_tol=None):
    """Branchwise Jacobians at x0 by central differences with branch tracking.

    Pre: branches at x0 separable; otherwise the pairing of neighbor values
    to center branches is meaningless and a BranchAmbiguityError is raised.
    Returns an array of shape (Q, m, n), row i the Jacobian of the branch
    matched to center branch i (branches in the center tuple's canonical
    order).
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.shape[0]
    center = _evaluate(u, x0)
    q, m = center.q, center.m
    scale = max(center.norm(), 1.0)
    if gap_tol is None:
        gap_tol = 1e-6 * scale
    if q > 1:
        gaps = _cost_matrix(center.branches, center.branches)
        np.fill_diagonal(gaps, np.inf)
        if math.sqrt(gaps.min()) <= gap_tol:
            raise BranchAmbiguityError(
                "branch point: derivative matching ambiguous"
            )
    jac = np.empty((q, m, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        plus = _evaluate(u, x0 + step)
        minus = _evaluate(u, x0 - step)
        sp, _ = optimal_assignment(center, plus)
        sm, _ = optimal_assignment(center, minus)
        jac[:, :, j] = (plus.branches[sp] - minus.branches[sm]) / (2.0 * h)
    return jac


def lebesgue_point_profile(u, x0, ladder, q_exp=2.0, value=None):
    """Averaged q-th power distance to the value at x0 per ladder radius.

    Returns (radii_used, averages, truncated) where truncated flags ladder
    rungs dropped for falling below the grid resolution.
    """
    if not isinstance(u, SampledQFunction):
        raise TypeError("profile requires sampled data")
    x0 = np.asarray(x0, dtype=float).ravel()
    if value is None:
        value = u.value_at(x0)
    h = u.grid.resolution
    omega = unit_ball_volume(u.n)
    d2 = np.sum((u.grid.points - x0) ** 2, axis=1)
    radii, averages = [], []
    truncated = False
    for rho in np.asarray(ladder, dtype=float):
        if rho <= 2.0 * h:
            truncated = True
            continue
        mask = d2 <= rho * rho
        if not np.any(mask):
            truncated = True
            continue
        dists = np.array(
            [metric_g(AqPoint(v), value) for v in u.values[mask]]
        )
        mass = float(np.sum(u.grid.weights[mask] * dists ** q_exp))
        radii.append(rho)
        averages.append(mass / (omega * rho ** u.n))
    return np.asarray(radii), np.asarray(averages), truncated
