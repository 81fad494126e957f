"""Strictly monotone piecewise-linear (SMPL) functions in standard form.

A function is stored as

    f(x) = zeta + slope * x + sum_s alphas[s] * max(0, x - betas[s])

on a closed domain ``[lo, hi]`` (either end may be infinite), with the
breakpoints strictly increasing and strictly inside the domain.  A *quasi*
representation describes a function of the form ``max(0, g(x))``; the stored
coefficients already encode the clamp, so the outer ``max`` is a no-op up to
rounding.

Coefficients are kept as tuples of Python floats: the representations built
by the treeplex recursion are small, and scalar arithmetic on them is much
cheaper than numpy calls on tiny arrays.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from itertools import accumulate

import numpy as np

# Breakpoints closer than this (relative to max(1, |beta|)) are merged.
MERGE_TOL = 1e-12
# Cumulative slopes at or below this are treated as non-strict.
SLOPE_TOL = 1e-14


class Smpl:
    """A standard representation.  Treat instances as immutable."""

    __slots__ = ("zeta", "slope", "alphas", "betas", "lo", "hi", "quasi", "_cs", "_vals")

    def __init__(self, zeta: float, slope: float, alphas=(), betas=(),
                 lo: float = -math.inf, hi: float = math.inf, quasi: bool = False):
        self.zeta = zeta
        self.slope = slope
        self.alphas = alphas
        self.betas = betas
        self.lo = lo
        self.hi = hi
        self.quasi = quasi
        self._cs = None
        self._vals = None

    @property
    def size(self) -> int:
        return len(self.betas)

    @property
    def cumulative_slopes(self) -> tuple:
        """Slope on each piece, left to right (length ``size + 1``)."""
        if self._cs is None:
            self._cs = tuple(accumulate(self.alphas, initial=self.slope))
        return self._cs

    @property
    def is_strict(self) -> bool:
        return all(c > SLOPE_TOL for c in self.cumulative_slopes)

    def __call__(self, x):
        return smpl_eval(self, x)

    def __repr__(self) -> str:
        pieces = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in zip(self.alphas, self.betas))
        q = ", quasi" if self.quasi else ""
        return (f"Smpl(zeta={self.zeta:.6g}, slope={self.slope:.6g}, [{pieces}], "
                f"domain=[{self.lo:.6g}, {self.hi:.6g}]{q})")


def _tol(x: float) -> float:
    return MERGE_TOL * max(1.0, abs(x))


def make(zeta, slope, alphas=(), betas=(), lo=-math.inf, hi=math.inf, quasi=False) -> Smpl:
    """Build a canonical representation.

    Breakpoints are sorted, near-duplicates merged, those at or left of ``lo``
    folded into the affine part and those at or right of ``hi`` dropped.
    """
    zeta = float(zeta)
    slope = float(slope)
    lo = float(lo)
    hi = float(hi)
    if lo > hi:
        raise ValueError(f"empty domain [{lo}, {hi}]")
    if len(alphas) != len(betas):
        raise ValueError("alphas and betas must have the same length")
    if not len(betas):
        return Smpl(zeta, slope, (), (), lo, hi, bool(quasi))
    pairs = sorted(zip(map(float, betas), map(float, alphas)))
    left = lo + _tol(lo) if math.isfinite(lo) else -math.inf
    right = hi - _tol(hi) if math.isfinite(hi) else math.inf
    bs, as_ = [], []
    for b, a in pairs:
        if b <= left:
            # fold into the affine part
            zeta -= a * b
            slope += a
        elif b >= right:
            break
        elif bs and b - bs[-1] <= _tol(b):
            as_[-1] += a
        else:
            bs.append(b)
            as_.append(a)
    if bs:
        cutoff = 1e-15 * max(abs(slope) + sum(abs(a) for a in as_), 1e-300)
        keep = [j for j, a in enumerate(as_) if abs(a) > cutoff]
        if len(keep) < len(bs):
            bs = [bs[j] for j in keep]
            as_ = [as_[j] for j in keep]
    return Smpl(zeta, slope, tuple(as_), tuple(bs), lo, hi, bool(quasi))


def constant(c: float, lo=-math.inf, hi=math.inf) -> Smpl:
    return make(c, 0.0, lo=lo, hi=hi)


def identity(lo=-math.inf, hi=math.inf) -> Smpl:
    return make(0.0, 1.0, lo=lo, hi=hi)


def _check_domain(rep: Smpl, x: np.ndarray) -> None:
    lo_tol = _tol(rep.lo) if math.isfinite(rep.lo) else 0.0
    hi_tol = _tol(rep.hi) if math.isfinite(rep.hi) else 0.0
    if np.any(x < rep.lo - lo_tol) or np.any(x > rep.hi + hi_tol):
        raise ValueError(f"argument outside domain [{rep.lo}, {rep.hi}]")


def smpl_eval(rep: Smpl, x):
    """Evaluate ``rep`` at a scalar or array ``x``."""
    arr = np.asarray(x, dtype=float)
    _check_domain(rep, arr)
    if arr.ndim == 0:
        return value(rep, float(arr))
    val = rep.zeta + rep.slope * arr
    if rep.betas:
        val = val + np.maximum(0.0, arr[..., None] - np.array(rep.betas)) @ np.array(rep.alphas)
    if rep.quasi:
        val = np.maximum(0.0, val)
    return val


def value(rep: Smpl, x: float) -> float:
    """Scalar evaluation without the domain check (internal hot path)."""
    v = rep.zeta + rep.slope * x
    for a, b in zip(rep.alphas, rep.betas):
        if x <= b:
            break
        v += a * (x - b)
    return max(0.0, v) if rep.quasi else v


def smpl_affine(rep: Smpl, zeta: float, alpha: float) -> Smpl:
    """Representation of ``x -> zeta + alpha * rep(x)``."""
    if alpha < 0:
        raise ValueError("scaling factor must be nonnegative")
    quasi = rep.quasi and zeta >= 0
    return Smpl(zeta + alpha * rep.zeta, alpha * rep.slope, tuple(alpha * a for a in rep.alphas),
                rep.betas, rep.lo, rep.hi, quasi)


def smpl_scale_argument(rep: Smpl, a: float) -> Smpl:
    """Representation of ``x -> rep(a * x)`` for ``a > 0``."""
    if not a > 0:
        raise ValueError("argument scale must be positive")
    return Smpl(rep.zeta, a * rep.slope, tuple(a * al for al in rep.alphas),
                tuple(b / a for b in rep.betas), rep.lo / a, rep.hi / a, rep.quasi)


def smpl_sum(reps) -> Smpl:
    """Representation of the pointwise sum; breakpoints are merged."""
    reps = list(reps)
    if not reps:
        raise ValueError("cannot sum an empty list of representations")
    lo, hi = reps[0].lo, reps[0].hi
    for r in reps[1:]:
        if r.lo != lo or r.hi != hi:
            raise ValueError("representations must share a common domain")
    if len(reps) == 1:
        return reps[0]
    zeta = sum(r.zeta for r in reps)
    slope = sum(r.slope for r in reps)
    alphas = [a for r in reps for a in r.alphas]
    betas = [b for r in reps for b in r.betas]
    return make(zeta, slope, alphas, betas, lo, hi, quasi=all(r.quasi for r in reps))


def _breakpoint_values(rep: Smpl) -> tuple:
    # f(beta_j) = f(beta_{j-1}) + (slope on piece j) * (beta_j - beta_{j-1})
    if rep._vals is None:
        b = rep.betas
        if not b:
            rep._vals = ()
        else:
            cs = rep.cumulative_slopes
            vals = [rep.zeta + rep.slope * b[0]]
            for j in range(1, len(b)):
                vals.append(vals[-1] + cs[j] * (b[j] - b[j - 1]))
            rep._vals = tuple(vals)
    return rep._vals


def _value_at(rep: Smpl, x: float) -> float:
    """Unclamped value, with infinite arguments mapped through the end slopes."""
    if math.isinf(x):
        c = rep.cumulative_slopes[0 if x < 0 else -1]
        if c == 0:
            if x > 0:
                return rep.zeta - sum(a * b for a, b in zip(rep.alphas, rep.betas))
            return rep.zeta
        return math.copysign(math.inf, c * x)
    v = rep.zeta + rep.slope * x
    for a, b in zip(rep.alphas, rep.betas):
        if x <= b:
            break
        v += a * (x - b)
    return v


def smpl_solve(rep: Smpl, y: float) -> float:
    """Exact ``x`` with ``rep(x) = y`` for a strictly increasing ``rep``.

    Scans the pieces for the one containing ``y``; no iterative search.
    """
    cs = rep.cumulative_slopes
    if min(cs) <= SLOPE_TOL:
        raise ValueError("cannot solve on a representation with a non-strict piece")
    vals = _breakpoint_values(rep)
    j = bisect_right(vals, y)
    if j == 0:
        x = (y - rep.zeta) / rep.slope
    else:
        x = rep.betas[j - 1] + (y - vals[j - 1]) / cs[j]
    tol = 1e-9 * max(1.0, abs(x))
    if x < rep.lo - tol or x > rep.hi + tol:
        raise ValueError(f"value {y} is outside the range of the representation")
    return min(max(x, rep.lo), rep.hi)


def _restrict_left(rep: Smpl, lo: float) -> Smpl:
    return make(rep.zeta, rep.slope, rep.alphas, rep.betas, lo, rep.hi)


def _positive_start(rep: Smpl) -> float:
    """Infimum of the region where a quasi representation is positive."""
    cs = rep.cumulative_slopes
    starts = (rep.lo,) + rep.betas
    ends = rep.betas + (rep.hi,)
    for s, e, c in zip(starts, ends, cs):
        if c <= SLOPE_TOL:
            continue
        if math.isinf(s):
            # first piece unbounded to the left with positive slope
            anchor = e if math.isfinite(e) else 0.0
            return anchor - _value_at(rep, anchor) / c
        v = _value_at(rep, s)
        if v >= 0:
            return s
        if _value_at(rep, e) > 0:
            return s - v / c
    raise ValueError("quasi representation is never positive")


def smpl_invert(rep: Smpl) -> Smpl:
    """Representation of the inverse function.

    For a quasi representation the inverse is the restricted one, taken on
    the positive part of the range and continuously extended to its left end.
    """
    quasi = rep.quasi
    if quasi:
        rep = _restrict_left(rep, _positive_start(rep))
    cs = rep.cumulative_slopes
    if min(cs) <= SLOPE_TOL:
        raise ValueError("cannot invert a representation with a non-strict piece")
    inv = [1.0 / c for c in cs]
    lo = _value_at(rep, rep.lo)
    hi = _value_at(rep, rep.hi)
    if quasi:
        lo = max(lo, 0.0)
    new_alphas = [inv[j + 1] - inv[j] for j in range(len(inv) - 1)]
    # first piece: y = zeta + slope * x
    return make(-rep.zeta / rep.slope, inv[0], new_alphas, _breakpoint_values(rep), lo, hi)


def smpl_threshold(rep: Smpl, beta: float) -> Smpl:
    """Quasi representation of ``x -> max(0, rep(x) - beta)``.

    The result has at most ``size + 1`` breakpoints: the clamp introduces one
    at the root unless the root already sits on (or right of) a breakpoint.
    """
    if rep.quasi:
        raise ValueError("threshold expects a non-quasi representation")
    if math.isfinite(rep.lo) and _value_at(rep, rep.lo) >= beta:
        return make(rep.zeta - beta, rep.slope, rep.alphas, rep.betas, rep.lo, rep.hi, quasi=True)
    if math.isfinite(rep.hi) and _value_at(rep, rep.hi) <= beta:
        return make(0.0, 0.0, lo=rep.lo, hi=rep.hi, quasi=True)
    r = smpl_solve(rep, beta)
    cs = rep.cumulative_slopes
    # breakpoints strictly right of the root keep their kinks
    j = bisect_right(rep.betas, r + _tol(r))
    alphas = (cs[j],) + rep.alphas[j:]
    betas = (r,) + rep.betas[j:]
    return make(0.0, 0.0, alphas, betas, rep.lo, rep.hi, quasi=True)


def smpl_fixed_point(f: Smpl) -> Smpl:
    """Map ``y`` to the unique ``x >= 0`` solving ``x = max(0, y - f(x))``.

    ``f`` must be nondecreasing on ``[0, inf)``.  Computed as the clamped
    inverse of ``x -> x + f(max(x, 0))`` extended to the whole real line.
    """
    if f.quasi:
        raise ValueError("fixed point expects a non-quasi representation")
    if f.lo != 0.0:
        raise ValueError("fixed point expects a representation on [0, inf)")
    if min(f.cumulative_slopes) < 0:
        raise ValueError("fixed point expects a nondecreasing representation")
    # f(max(x,0)) = f(0) + slope*[x]^+ + sum alpha_s [x - beta_s]^+   (beta_s > 0)
    h = make(f.zeta, 1.0, (f.slope,) + f.alphas, (0.0,) + f.betas, -math.inf, f.hi)
    return smpl_threshold(smpl_invert(h), 0.0)
