"""Per-node objective-space uncertainty rectangles.

Each tree node carries a cumulative hyper-rectangle R that can only
shrink: every belief refresh intersects it with the fresh confidence
rectangle Q built from the node's own posterior statistics and (below the
root) its parent's, each widened by the depth-dependent term V_h.

Intersections can empty a coordinate when the underlying high-probability
events fail; instead of crashing, the offending coordinate collapses to
the midpoint of the gap and a degeneracy flag is raised so callers can
count bad events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gp import Prediction
from .partition import Node


@dataclass(frozen=True)
class HyperRect:
    """Axis-aligned box [L, U] in objective space; L <= U componentwise."""

    L: np.ndarray
    U: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float))
        object.__setattr__(self, "U", np.asarray(self.U, dtype=float))


def intersect(prev: HyperRect, q: HyperRect) -> HyperRect:
    """Componentwise intersection, collapsing empty coordinates.

    Where max(L) exceeds min(U) the two boxes do not overlap in that
    coordinate; both corners collapse to the midpoint of the gap and the
    result carries ``degenerate=True``.
    """
    lo = np.maximum(prev.L, q.L)
    hi = np.minimum(prev.U, q.U)
    bad = lo > hi
    if np.any(bad):
        mid = 0.5 * (lo + hi)
        lo = np.where(bad, mid, lo)
        hi = np.where(bad, mid, hi)
        return HyperRect(lo, hi, degenerate=True)
    return HyperRect(lo, hi, degenerate=prev.degenerate or q.degenerate)


def diameter(r: HyperRect) -> float:
    """Euclidean diagonal length ||U - L||_2 (the uncertainty omega)."""
    return float(np.linalg.norm(r.U - r.L))


@dataclass
class NodeBelief:
    """Mutable engine-side record tying a node to its uncertainty state.

    ``mu``/``sigma`` are the node-center posterior statistics computed at
    evaluation count ``stamp``; they are refreshed only when the global
    evaluation count has moved on, since the posterior depends on data
    only through it.
    """

    node: Node
    R: HyperRect
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    stamp: int = -1


def node_indices(
    nb: NodeBelief,
    parent_pred: Optional[Prediction],
    beta: float,
    V_h: float,
    V_hminus1: float,
) -> HyperRect:
    """Fresh confidence rectangle Q for one node.

    The inner bounds take the tighter of the node's own confidence
    interval and the parent's interval inflated by V_{h-1}; the root has
    no parent term.  The outer rectangle widens both corners by V_h.
    Coordinates where the two sources disagree outright (possible only
    outside the high-probability event) collapse to their midpoint and
    are flagged.
    """
    rb = math.sqrt(beta)
    b_lo = nb.mu - rb * nb.sigma
    b_hi = nb.mu + rb * nb.sigma
    if parent_pred is not None:
        p_lo = parent_pred.mean - rb * parent_pred.std - V_hminus1
        p_hi = parent_pred.mean + rb * parent_pred.std + V_hminus1
        b_lo = np.maximum(b_lo, p_lo)
        b_hi = np.minimum(b_hi, p_hi)
    degenerate = False
    bad = b_lo > b_hi
    if np.any(bad):
        mid = 0.5 * (b_lo + b_hi)
        b_lo = np.where(bad, mid, b_lo)
        b_hi = np.where(bad, mid, b_hi)
        degenerate = True
    return HyperRect(b_lo - V_h, b_hi + V_h, degenerate=degenerate)
