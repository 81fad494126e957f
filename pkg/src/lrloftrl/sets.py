"""Strategy sets living in the nonnegative orthant.

Each set exposes a linear maximization oracle and a local proximal oracle for
its lifting ``{(lam, y) : lam in [0, 1], y in lam X}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import treeplex as tp


class TreeplexSet:
    """A treeplex (simplexes, sequence-form polytopes, products thereof)."""

    def __init__(self, node: tp.Node):
        self.node = node
        self.lifted_node = tp.lifted(node)
        self.dim = node.dim

    def __repr__(self):
        return f"TreeplexSet({tp.to_json(self.node)})"

    def lmo(self, u) -> np.ndarray:
        return tp.lmo(self.node, u)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return tp.residual(self.node, x) <= tol

    def project(self, z) -> np.ndarray:
        return tp.project(self.node, z)

    def lifted_prox(self, g, w) -> np.ndarray:
        """argmin over the lifted set of ``g.z + 1/2 sum (z/w - 1)^2``."""
        w = np.asarray(w, dtype=float)
        _, z = tp.prox_argmin(self.lifted_node, -np.asarray(g, dtype=float) + 1.0 / w, w, 1.0)
        return z

    def lifted_contains(self, z, tol: float = 1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        if z[0] < -tol or z[0] > 1 + tol:
            return False
        return tp.residual(self.node, z[1:], float(z[0])) <= tol


class IntervalSet:
    """A one-dimensional interval ``[lo, hi]`` with ``0 <= lo < hi``."""

    dim = 1

    def __init__(self, lo: float, hi: float):
        if not (0 <= lo < hi):
            raise ValueError(f"interval must satisfy 0 <= lo < hi, got [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    def __repr__(self):
        return f"IntervalSet({self.lo}, {self.hi})"

    def lmo(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (1,):
            raise ValueError("expected a vector of length 1")
        return np.array([self.hi if u[0] > 0 else self.lo])

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = float(np.asarray(x).ravel()[0])
        return self.lo - tol <= x <= self.hi + tol

    def project(self, z) -> np.ndarray:
        return np.clip(np.asarray(z, dtype=float), self.lo, self.hi)

    def lifted_prox(self, g, w) -> np.ndarray:
        # The lifted set is the triangle (0,0), (1,lo), (1,hi); the strictly
        # convex quadratic is minimized in its interior or on one of its edges.
        g = np.asarray(g, dtype=float)
        w = np.asarray(w, dtype=float)
        a = 1.0 / w - g                    # linear reward coefficients
        h = 1.0 / (w * w)                  # diagonal curvature

        def q(z):
            return float(-a @ z + 0.5 * h @ (z * z))

        cands = []
        free = a / h
        if 0 <= free[0] <= 1 and self.lo * free[0] <= free[1] <= self.hi * free[0]:
            cands.append(free)
        for slope in (self.lo, self.hi):
            # edge y = slope * lam, lam in [0, 1]
            lam = (a[0] + a[1] * slope) / (h[0] + h[1] * slope * slope)
            lam = min(max(lam, 0.0), 1.0)
            cands.append(np.array([lam, slope * lam]))
        cands.append(np.array([1.0, min(max(free[1], self.lo), self.hi)]))
        return min(cands, key=q)

    def lifted_contains(self, z, tol: float = 1e-9) -> bool:
        lam, y = float(z[0]), float(z[1])
        return -tol <= lam <= 1 + tol and self.lo * lam - tol <= y <= self.hi * lam + tol


def lifted_lmo(strategy_set, c) -> np.ndarray:
    """Maximizer of ``<c, z>`` over the lifted set; the origin wins ties."""
    c = np.asarray(c, dtype=float)
    v = strategy_set.lmo(c[1:])
    if c[0] + float(c[1:] @ v) > 0:
        return np.concatenate(([1.0], v))
    return np.zeros(len(c))


def lifted_max(strategy_set, c) -> float:
    """``max(0, max_x c[0] + <c[1:], x>)``: the support function of the lifted set."""
    c = np.asarray(c, dtype=float)
    v = strategy_set.lmo(c[1:])
    return max(0.0, c[0] + float(c[1:] @ v))


def l1_bound(strategy_set) -> float:
    """Largest l1 norm over the set, ``<lmo(1), 1>`` (the set is nonnegative)."""
    ones = np.ones(strategy_set.dim)
    return float(ones @ strategy_set.lmo(ones))


@dataclass
class StrategySetDescriptor:
    """A player's strategy set together with the shift into the nonnegative orthant.

    Learners operate on ``x_shifted = x + shift``.  Gradients are unaffected
    by the shift, so only points need translating.
    """
    set: object
    shift: np.ndarray = None
    l1: float = field(init=False)

    def __post_init__(self):
        d = self.set.dim
        self.shift = np.zeros(d) if self.shift is None else np.asarray(self.shift, dtype=float)
        if self.shift.shape != (d,):
            raise ValueError("shift has the wrong dimension")
        for r in range(d):
            e = np.zeros(d)
            e[r] = 1.0
            if self.set.lmo(e)[r] <= 1e-12:
                raise ValueError(f"coordinate {r} is identically zero over the set")
        self.l1 = l1_bound(self.set)

    @property
    def dimension(self) -> int:
        return self.set.dim

    def lmo(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dimension,):
            raise ValueError(f"expected a vector of length {self.dimension}")
        if not np.all(np.isfinite(u)):
            raise ValueError("utility vector must be finite")
        return self.set.lmo(u)

    def to_game(self, x_shifted) -> np.ndarray:
        return np.asarray(x_shifted, dtype=float) - self.shift

    def from_game(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.shift

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Membership of a point given in game (unshifted) coordinates."""
        return self.set.contains(self.from_game(x), tol)


def interval_descriptor(lo: float, hi: float) -> StrategySetDescriptor:
    """An interval of quantities, shifted so that it starts at the origin."""
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"bad interval [{lo}, {hi}]")
    return StrategySetDescriptor(IntervalSet(0.0, hi - lo), shift=np.array([-lo]))


def simplex_descriptor(k: int) -> StrategySetDescriptor:
    return StrategySetDescriptor(TreeplexSet(tp.simplex(k)))
