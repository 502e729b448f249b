"""Dominance relations, nondominated sets, pessimistic fronts, hypervolume.

All objectives are maximized.  ``u <= v`` componentwise reads "u is weakly
dominated by v".  Strict dominance additionally requires the vectors to
differ, so exact duplicates never dominate each other and are all retained
by ``nondominated_set``.

Nondominated filtering uses sorted sweeps for m = 2 and m = 3 and a
divide-and-conquer recursion for m > 3; hypervolume is exact for m <= 3
and Monte-Carlo beyond.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class ParetoFront:
    """A mutually nondominated point set, optionally with source designs.

    Construction rejects strictly dominated members; exact duplicates are
    allowed (they do not dominate each other).
    """

    points: np.ndarray  # (n, m)
    designs: Optional[np.ndarray] = None  # (n, D) or None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.designs is not None:
            des = np.atleast_2d(np.asarray(self.designs, dtype=float))
            if des.shape[0] != pts.shape[0]:
                raise DomainError(
                    f"designs ({des.shape[0]}) and points ({pts.shape[0]}) must correspond"
                )
            object.__setattr__(self, "designs", des)
        if len(nondominated_set(pts)) != pts.shape[0]:
            raise DomainError("Pareto front members must be mutually nondominated")

    def __len__(self) -> int:
        return self.points.shape[0]


def weakly_dominated(u, v) -> bool:
    """True iff u_j <= v_j for every objective j."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return bool(np.all(u <= v))


def eps_dominated(u, v, eps) -> bool:
    """True iff u <= v + eps componentwise; eps must be nonnegative."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise DomainError(f"epsilon must be nonnegative, got {eps}")
    return weakly_dominated(u, np.asarray(v, dtype=float) + eps)


# --------------------------------------------------------------------------
# nondominated sets
# --------------------------------------------------------------------------


def _nondominated_2d(pts: np.ndarray, idx: np.ndarray) -> list:
    """Sweep for m=2: group by first coordinate descending.

    Within a group only the points attaining the group's max second
    coordinate can survive, and they do iff that max beats every point
    with strictly larger first coordinate.
    """
    order = idx[np.argsort(-pts[idx, 0], kind="stable")]
    keep = []
    best2 = -np.inf
    k = 0
    n = len(order)
    while k < n:
        x1 = pts[order[k], 0]
        group = [order[k]]
        k += 1
        while k < n and pts[order[k], 0] == x1:
            group.append(order[k])
            k += 1
        M = max(pts[g, 1] for g in group)
        if M > best2:
            keep.extend(g for g in group if pts[g, 1] == M)
            best2 = M
    return keep


class _Staircase2D:
    """Maximal (a, b) pairs: a ascending, b strictly descending."""

    def __init__(self):
        self.a = []
        self.b = []

    def dominates(self, a, b) -> bool:
        """Is (a, b) weakly below some stored pair?"""
        i = bisect.bisect_left(self.a, a)
        return i < len(self.a) and self.b[i] >= b

    def insert(self, a, b):
        if self.dominates(a, b):
            return
        i = bisect.bisect_left(self.a, a)
        j = i
        while j > 0 and self.b[j - 1] <= b:
            j -= 1
        self.a[j:i] = [a]
        self.b[j:i] = [b]


def _nondominated_3d(pts: np.ndarray, idx: np.ndarray) -> list:
    """Plane sweep for m=3 descending in the first coordinate.

    The archive holds the 2D staircase of (x2, x3) projections of points
    with strictly larger x1; same-x1 groups are filtered against the
    archive and against each other (2D strict dominance) separately.
    """
    order = idx[np.argsort(-pts[idx, 0], kind="stable")]
    stair = _Staircase2D()
    keep = []
    k = 0
    n = len(order)
    while k < n:
        x1 = pts[order[k], 0]
        group = [order[k]]
        k += 1
        while k < n and pts[order[k], 0] == x1:
            group.append(order[k])
            k += 1
        group = np.asarray(group)
        vs_archive = [g for g in group if not stair.dominates(pts[g, 1], pts[g, 2])]
        in_group = set(nondominated_set(pts[group][:, 1:]))
        survivors = [g for gi, g in enumerate(group) if gi in in_group]
        keep.extend(g for g in vs_archive if g in set(survivors))
        for g in group:
            stair.insert(pts[g, 1], pts[g, 2])
    return keep


def _strictly_dominated_any(B: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Boolean mask over rows of B: strictly dominated by some row of T."""
    le = np.all(B[:, None, :] <= T[None, :, :], axis=-1)
    lt = np.any(B[:, None, :] < T[None, :, :], axis=-1)
    return np.any(le & lt, axis=1)


def _nondominated_recursive(pts: np.ndarray, order: np.ndarray) -> list:
    """Divide and conquer over a lexicographically descending ordering."""
    if len(order) <= 16:
        P = pts[order]
        mask = ~_strictly_dominated_any(P, P)
        return [order[i] for i in range(len(order)) if mask[i]]
    half = len(order) // 2
    top = _nondominated_recursive(pts, order[:half])
    bottom = _nondominated_recursive(pts, order[half:])
    if top and bottom:
        mask = ~_strictly_dominated_any(pts[bottom], pts[top])
        bottom = [b for bi, b in enumerate(bottom) if mask[bi]]
    return top + bottom


def nondominated_set(points) -> list:
    """Indices of points not strictly dominated by any other point.

    Exact duplicates are all retained.  Raises DomainError on empty input.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise DomainError("nondominated_set of an empty collection is undefined")
    if not np.all(np.isfinite(pts)):
        raise DomainError("objective vectors must be finite")
    n, m = pts.shape
    idx = np.arange(n)
    if m == 1:
        M = pts[:, 0].max()
        return [int(i) for i in idx[pts[:, 0] == M]]
    if m == 2:
        keep = _nondominated_2d(pts, idx)
    elif m == 3:
        keep = _nondominated_3d(pts, idx)
    else:
        order = np.lexsort(tuple(-pts[:, d] for d in range(m - 1, -1, -1)))
        keep = _nondominated_recursive(pts, idx[order])
    return sorted(int(i) for i in keep)


def pessimistic_pareto(min_corners) -> set:
    """Node ids whose min-corners are maximal among all min-corners.

    ``min_corners`` is a list of (node_id, vector) pairs.  Exact-tie
    groups collapse to the lowest node id, so the result is never empty
    and a node never excludes itself via an identical twin.
    """
    items = list(min_corners)
    if not items:
        raise DomainError("pessimistic front of an empty collection is undefined")
    reps: dict = {}
    for node_id, vec in items:
        key = tuple(np.asarray(vec, dtype=float).tolist())
        if key not in reps or node_id < reps[key]:
            reps[key] = node_id
    corners = list(reps.keys())
    keep = nondominated_set(np.asarray(corners))
    return {reps[corners[i]] for i in keep}


# --------------------------------------------------------------------------
# hypervolume
# --------------------------------------------------------------------------


def _hv_2d(pts: np.ndarray, ref) -> float:
    order = np.argsort(-pts[:, 0])
    pts = pts[order]
    total = 0.0
    for i in range(len(pts)):
        right = pts[i + 1, 0] if i + 1 < len(pts) else ref[0]
        total += (pts[i, 0] - max(right, ref[0])) * (pts[i, 1] - ref[1])
    return total


def _hv_3d(pts: np.ndarray, ref) -> float:
    order = np.argsort(-pts[:, 2])
    pts = pts[order]
    levels = np.unique(pts[:, 2])[::-1]
    total = 0.0
    placed: list = []
    k = 0
    for li, z in enumerate(levels):
        while k < len(pts) and pts[k, 2] == z:
            placed.append(pts[k, :2])
            k += 1
        z_next = levels[li + 1] if li + 1 < len(levels) else ref[2]
        arr = np.asarray(placed)
        arr = arr[nondominated_set(arr)]
        total += _hv_2d(arr, ref[:2]) * (z - z_next)
    return total


def hypervolume_mc(front, ref, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte-Carlo estimate of the dominated volume above ``ref``."""
    pts = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref, dtype=float)
    hi = pts.max(axis=0)
    box = np.prod(hi - ref)
    if box <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    samples = rng.uniform(ref, hi, size=(n_samples, pts.shape[1]))
    covered = np.zeros(n_samples, dtype=bool)
    for p in pts:
        covered |= np.all(samples <= p, axis=1)
    return float(box * covered.mean())


def hypervolume(front, ref, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Volume dominated by the front and above the reference point.

    Exact sweeps for m <= 3; Monte-Carlo (``n_samples``, ``seed``) for
    m > 3.  Points below the reference are dropped with a warning; an
    empty effective front yields 0 with a warning.
    """
    pts = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref, dtype=float)
    above = np.all(pts >= ref, axis=1)
    if not np.all(above):
        warnings.warn(
            f"dropping {int((~above).sum())} point(s) below the reference point",
            stacklevel=2,
        )
        pts = pts[above]
    if pts.shape[0] == 0:
        warnings.warn("empty effective front: hypervolume is 0", stacklevel=2)
        return 0.0
    pts = np.unique(pts, axis=0)
    pts = pts[nondominated_set(pts)]
    m = pts.shape[1]
    if m == 1:
        return float(pts[:, 0].max() - ref[0])
    if m == 2:
        return float(_hv_2d(pts, ref))
    if m == 3:
        return float(_hv_3d(pts, ref))
    return hypervolume_mc(pts, ref, n_samples=n_samples, seed=seed)


# --------------------------------------------------------------------------
# epsilon-front membership
# --------------------------------------------------------------------------


def eps_pareto_front_membership(y, true_front, eps) -> bool:
    """Is y inside the slab between the true front and the front shifted
    down by 2*eps?

    True iff some front point weakly dominates y, and no front point
    weakly dominates y + 2*eps.
    """
    y = np.asarray(y, dtype=float)
    front = np.atleast_2d(np.asarray(true_front, dtype=float))
    eps = np.asarray(eps, dtype=float)
    below = np.any(np.all(y <= front, axis=1))
    deep = np.any(np.all(y + 2.0 * eps <= front, axis=1))
    return bool(below and not deep)
