"""Solvers for the lifted log-regularized OFTRL step.

Each step maximizes ``eta <c, z> + sum log z`` over the lifted set, i.e.
minimizes the self-concordant function

    f(z) = -eta <c, z> - sum_r log z[r].

``prox_newton`` runs damped/full proximal Newton steps where each Newton
model is minimized exactly by the set's lifted proximal oracle.
``fw_newton`` runs the same outer loop but only needs a linear maximization
oracle: each model is minimized by away-step Frank-Wolfe.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .sets import lifted_lmo, lifted_max

log = logging.getLogger(__name__)

SIGMA = 0.2           # switch between damped and full steps
CLAMP = 1e-300        # floor for coordinates of intermediate iterates


class ConvergenceError(RuntimeError):
    """Raised when a solver exceeds its iteration cap."""

    def __init__(self, message, decrement=None, iterations=None):
        super().__init__(message)
        self.decrement = decrement
        self.iterations = iterations


@dataclass(frozen=True)
class LiftedPoint:
    """A point ``(lam, y)`` of the lifted set, stored as one vector."""
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or len(z) < 2:
            raise ValueError("a lifted point needs at least two coordinates")
        object.__setattr__(self, "z", z)

    @property
    def lam(self) -> float:
        return float(self.z[0])

    @property
    def y(self) -> np.ndarray:
        return self.z[1:]

    @property
    def x(self) -> np.ndarray:
        return self.z[1:] / self.z[0]

    def is_positive(self) -> bool:
        return bool(np.all(self.z > 0))


def local_norm(center, v) -> float:
    """``sqrt(sum (v / center)^2)``."""
    return float(np.linalg.norm(np.asarray(v, dtype=float) / np.asarray(center, dtype=float)))


def dual_norm(center, v) -> float:
    """``sqrt(sum (v * center)^2)``."""
    return float(np.linalg.norm(np.asarray(v, dtype=float) * np.asarray(center, dtype=float)))


class OftrlObjective:
    """``f(z) = -eta <c, z> - sum log z`` over the lifted version of ``strategy_set``."""

    def __init__(self, eta: float, c, strategy_set):
        c = np.asarray(c, dtype=float)
        if not eta > 0:
            raise ValueError("learning rate must be positive")
        if c.shape != (strategy_set.dim + 1,) or not np.all(np.isfinite(c)):
            raise ValueError("accumulated utility must be a finite vector of length d+1")
        self.eta = float(eta)
        self.c = c
        self.set = strategy_set

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            return math.inf
        return float(-self.eta * (self.c @ z) - np.sum(np.log(z)))

    def grad(self, z) -> np.ndarray:
        return -self.eta * self.c - 1.0 / np.asarray(z, dtype=float)

    def gap(self, z) -> float:
        """Frank-Wolfe gap ``max_s <-grad f(z), s - z>``, an upper bound on ``f(z) - f*``."""
        g = self.grad(z)
        return lifted_max(self.set, -g) + float(g @ z)

    def model(self, z, s) -> float:
        """Second-order model of ``f`` at ``z`` evaluated at ``s`` (without ``f(z)``)."""
        d = np.asarray(s, dtype=float) - z
        return float(self.grad(z) @ d + 0.5 * np.sum((d / z) ** 2))


def newton_subproblem(z, objective: OftrlObjective) -> np.ndarray:
    """Minimizer over the lifted set of the Newton model of ``f`` at ``z``.

    The model ``<grad f(z), s - z> + 1/2 sum ((s - z)/z)^2`` equals, up to a
    constant, ``<grad f(z), s> + 1/2 sum (s/z - 1)^2``: one proximal call.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Newton center must be strictly positive")
    return objective.set.lifted_prox(objective.grad(z), z)


def theoretical_iterations(gap: float, eps: float) -> int:
    """Iteration bound of damped/full proximal Newton given ``f(z0) - f* <= gap``."""
    return math.floor(max(gap, 0.0) / 0.017) + math.floor(1.5 * math.log(math.log(0.28 / eps))) + 2


@dataclass
class SolveResult:
    point: LiftedPoint
    iterations: int
    decrement: float
    decrements: list = field(default_factory=list)
    values: list = field(default_factory=list)
    damped: list = field(default_factory=list)
    active: dict = None            # Frank-Wolfe decomposition (vertex key -> weight)
    inner_iterations: int = 0


def _clamp(z: np.ndarray) -> np.ndarray:
    if np.any(z < CLAMP):
        log.warning("clamping %d lifted coordinates to %g", int(np.sum(z < CLAMP)), CLAMP)
        z = np.maximum(z, CLAMP)
    return z


def _check_start(objective, z0, eps):
    z0 = np.asarray(z0.z if isinstance(z0, LiftedPoint) else z0, dtype=float)
    if z0.shape != (objective.set.dim + 1,):
        raise ValueError("starting point has the wrong dimension")
    if np.any(z0 <= 0):
        raise ValueError("starting point must be strictly positive")
    if not 0 < eps < SIGMA:
        raise ValueError(f"tolerance must lie in (0, {SIGMA})")
    return z0


def _newton_loop(objective, z, eps, direction, max_iter):
    if max_iter is None:
        max_iter = 10 * max(theoretical_iterations(objective.gap(z), eps), 1)
    res = SolveResult(LiftedPoint(z), 0, math.inf)
    res.values.append(objective.value(z))
    for k in range(max_iter + 1):
        s = direction(z)
        d = s - z
        lam = local_norm(z, d)
        res.decrements.append(lam)
        res.decrement = lam
        if lam <= eps:
            res.point = LiftedPoint(z)
            res.iterations = k
            return res
        if k == max_iter:
            break
        if lam > SIGMA:
            alpha = 1.0 / (1.0 + lam)
            res.damped.append(True)
        else:
            alpha = 1.0
            res.damped.append(False)
        z = _clamp(z + alpha * d)
        res.values.append(objective.value(z))
    raise ConvergenceError(f"proximal Newton did not reach decrement {eps:g} in {max_iter} steps "
                           f"(last decrement {lam:.3g})", decrement=lam, iterations=max_iter)


def prox_newton(objective: OftrlObjective, z0, eps: float, max_iter: int = None) -> SolveResult:
    """Damped/full proximal Newton from ``z0`` until the Newton decrement is ``<= eps``.

    The default cap is ten times the theoretical bound, with ``f(z0) - f*``
    upper-bounded by the Frank-Wolfe gap at ``z0``.
    """
    z = _check_start(objective, z0, eps)
    return _newton_loop(objective, z, eps, lambda c: newton_subproblem(c, objective), max_iter)


# ---------------------------------------------------------------------------
# Frank-Wolfe Newton


def _key(v: np.ndarray) -> bytes:
    return v.tobytes()


def cold_start_decomposition(strategy_set) -> dict:
    """``(1, x0)`` with ``x0 = mean_r lmo(e_r)``, as a convex combination of lifted vertices."""
    d = strategy_set.dim
    active = {}
    for r in range(d):
        e = np.zeros(d)
        e[r] = 1.0
        v = np.concatenate(([1.0], strategy_set.lmo(e)))
        k = _key(v)
        active[k] = active.get(k, 0.0) + 1.0 / d
    return active


def _point(active: dict, dim: int) -> np.ndarray:
    z = np.zeros(dim)
    for k, a in active.items():
        z += a * np.frombuffer(k)
    return z


def fw_model_minimize(objective, z, active, tol, max_inner):
    """Away-step Frank-Wolfe on the Newton model at ``z``, started from ``active``.

    Returns the approximate minimizer, its decomposition, the iteration count
    and the recorded gaps.  Stops once the Frank-Wolfe gap is ``<= tol``.
    """
    g0 = objective.grad(z)
    h = 1.0 / (z * z)
    active = dict(active)
    s = _point(active, len(z))
    gaps = []
    for it in range(max_inner):
        grad = g0 + h * (s - z)
        fw = lifted_lmo(objective.set, -grad)
        gap = float(grad @ (s - fw))
        gaps.append(gap)
        if gap <= tol:
            return s, active, it, gaps
        # away vertex: worst active vertex for the model
        keys = list(active)
        verts = np.array([np.frombuffer(k) for k in keys])
        scores = verts @ grad
        j = int(np.argmax(scores))
        away, a_away = verts[j], active[keys[j]]
        away_gap = float(grad @ (away - s))
        if gap >= away_gap or a_away >= 1.0:
            direction, gmax, mode = fw - s, 1.0, "fw"
        else:
            direction, gmax, mode = s - away, a_away / (1.0 - a_away), "away"
        curv = float(h @ (direction * direction))
        slope = float(grad @ direction)
        gamma = gmax if curv <= 0 else min(gmax, -slope / curv)
        gamma = max(gamma, 0.0)
        if mode == "fw":
            for k in active:
                active[k] *= 1.0 - gamma
            kf = _key(fw)
            active[kf] = active.get(kf, 0.0) + gamma
        else:
            for k in active:
                active[k] *= 1.0 + gamma
            active[keys[j]] -= gamma
            if gamma >= gmax:
                del active[keys[j]]
        active = {k: a for k, a in active.items() if a > 0.0}
        s = s + gamma * direction
    raise ConvergenceError(f"Frank-Wolfe inner loop exceeded {max_inner} steps (gap {gaps[-1]:.3g})",
                           decrement=gaps[-1], iterations=max_inner)


def fw_newton(objective: OftrlObjective, eps: float, active: dict = None,
              max_iter: int = None, max_inner: int = None) -> SolveResult:
    """Proximal Newton with Frank-Wolfe inner solves; needs only the set's LMO.

    ``active`` is a convex decomposition ``{vertex bytes: weight}`` of the
    starting point (the previous result's ``active`` for a warm start); by
    default the cold-start point.  Each Newton model is minimized until its
    Frank-Wolfe gap is at most ``eps^2 / 4``.
    """
    if active is None:
        active = cold_start_decomposition(objective.set)
    dim = objective.set.dim + 1
    z = _check_start(objective, _point(active, dim), eps)
    if max_inner is None:
        max_inner = int(min(16.0 / eps ** 2, 1e6))
    state = {"active": active, "inner": 0}

    def direction(c):
        s, dec, it, _ = fw_model_minimize(objective, c, state["active"], eps * eps / 4, max_inner)
        state["inner"] += it
        state["last"] = dec
        return s

    # the outer loop moves z toward s; keep the decomposition in sync
    if max_iter is None:
        max_iter = 10 * max(theoretical_iterations(objective.gap(z), eps), 1)
    res = SolveResult(LiftedPoint(z), 0, math.inf)
    res.values.append(objective.value(z))
    for k in range(max_iter + 1):
        s = direction(z)
        d = s - z
        lam = local_norm(z, d)
        res.decrements.append(lam)
        res.decrement = lam
        if lam <= eps:
            res.point = LiftedPoint(z)
            res.iterations = k
            res.active = state["active"]
            res.inner_iterations = state["inner"]
            return res
        if k == max_iter:
            break
        alpha = 1.0 / (1.0 + lam) if lam > SIGMA else 1.0
        res.damped.append(lam > SIGMA)
        mixed = {key: (1.0 - alpha) * a for key, a in state["active"].items()}
        for key, a in state["last"].items():
            mixed[key] = mixed.get(key, 0.0) + alpha * a
        state["active"] = {key: a for key, a in mixed.items() if a > 0.0}
        z = _clamp(z + alpha * d)
        res.values.append(objective.value(z))
    raise ConvergenceError(f"Frank-Wolfe Newton did not reach decrement {eps:g} in {max_iter} steps "
                           f"(last decrement {lam:.3g})", decrement=lam, iterations=max_iter)


def cold_start(strategy_set) -> LiftedPoint:
    """``(1, x0)`` with ``x0 = (1/d) sum_r lmo(e_r)``, strictly positive by assumption."""
    d = strategy_set.dim
    x0 = np.zeros(d)
    for r in range(d):
        e = np.zeros(d)
        e[r] = 1.0
        x0 += strategy_set.lmo(e)
    x0 /= d
    if np.any(x0 <= 0):
        raise ValueError("cold start has a zero coordinate: some coordinate is identically zero")
    return LiftedPoint(np.concatenate(([1.0], x0)))
