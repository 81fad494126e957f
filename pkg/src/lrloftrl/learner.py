"""The per-player LRL-OFTRL learner.

Each round the learner solves

    (lam, y) = argmax_{(lam, y) in lifted set}  eta <U + u_prev, (lam, y)> + log lam + sum log y

warm-started at the previous iterate, and plays ``x = y / lam``.  Observed
utilities ``u`` are lifted to ``(-<u, x>, u)``.  If the observed utilities vary
more than self-play can explain, the learner permanently switches to
projected online gradient ascent.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .games import recommended_learning_rate
from .sets import StrategySetDescriptor
from .solver import LiftedPoint, OftrlObjective, cold_start, fw_newton, prox_newton

log = logging.getLogger(__name__)

SOLVERS = ("prox_newton", "fw_newton")
MAX_DEFAULT_EPS = 0.1


class ProtocolError(RuntimeError):
    """Learner methods called out of order."""


def lift_utility(u, x) -> np.ndarray:
    """``(-<u, x>, u)``, orthogonal to ``(1, x)``."""
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != x.shape:
        raise ValueError("utility and strategy dimensions differ")
    return np.concatenate(([-float(u @ x)], u))


def adversarial_threshold(t: int, n: int, B: float, L: float, eta: float, l1: float, d: int) -> float:
    """Largest utility variation ``sum ||u(tau+1) - u(tau)||_inf^2`` consistent with self-play."""
    c = n * n * L * L
    return 6144.0 * c * eta * B * l1 ** 3 + 1024.0 * c * (d + 1) * l1 ** 2 * math.log(t)


class LrlOftrl:
    """One player's learner.

    Parameters
    ----------
    descriptor : the player's strategy set (points handed out in game coordinates).
    eta : learning rate, or ``None`` for the recommended rate.
    T : horizon; the solver tolerance defaults to ``min(1/T, 0.1)``.
    n, B, L : game constants used by the recommended rate and the adversarial check.
    l1, d : set constants for the same purposes; default to the player's own set.
    """

    def __init__(self, descriptor: StrategySetDescriptor, T: int, n: int, B: float, L: float,
                 eta: float = None, solver: str = "prox_newton", eps: float = None,
                 l1: float = None, d: int = None, guard: bool = True):
        if T < 1:
            raise ValueError("horizon must be at least 1")
        if solver not in SOLVERS:
            raise ValueError(f"unknown solver {solver!r}")
        self.descriptor = descriptor
        self.set = descriptor.set
        self.dim = descriptor.dimension
        self.T = int(T)
        self.n, self.B, self.L = n, float(B), float(L)
        self.l1 = descriptor.l1 if l1 is None else float(l1)
        self.d = self.dim if d is None else int(d)
        self.eta = recommended_learning_rate(n, B, L, self.l1) if eta is None else float(eta)
        if not self.eta > 0:
            raise ValueError("learning rate must be positive")
        # 1/T, capped so short horizons stay below the damped/full step switch
        self.eps = min(1.0 / self.T, MAX_DEFAULT_EPS) if eps is None else float(eps)
        self.solver = solver
        self.guard = guard

        self.U = np.zeros(self.dim + 1)
        self.u_prev = np.zeros(self.dim + 1)
        self.point = cold_start(self.set)
        self._active = None
        self.t = 1
        self.deviation = 0.0
        self._last_u = None
        self.adversarial = False
        self.switch_round = None
        self._fb_x = None
        self._fb_tau = 0
        self._current = None          # (x_shifted, LiftedPoint) for this round
        self.solver_iterations = []

    # -- protocol --------------------------------------------------------

    def next_strategy(self):
        """Strategy for the current round, in game coordinates, and its lifted point."""
        if self._current is None:
            if self.adversarial:
                x = self._fb_x
                self._current = (x, LiftedPoint(np.concatenate(([1.0], x))))
            else:
                self._current = self._oftrl_step()
        x, z = self._current
        return self.descriptor.to_game(x), z

    def _oftrl_step(self):
        obj = OftrlObjective(self.eta, self.U + self.u_prev, self.set)
        if self.solver == "prox_newton":
            res = prox_newton(obj, self.point, self.eps)
        else:
            res = fw_newton(obj, self.eps, active=self._active)
            self._active = res.active
        self.solver_iterations.append(res.iterations)
        self.point = res.point
        return res.point.x, res.point

    def observe_utility(self, u) -> None:
        """Feed back this round's utility gradient."""
        if self._current is None:
            raise ProtocolError("observe_utility called before next_strategy in this round")
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,) or not np.all(np.isfinite(u)):
            raise ValueError(f"utility must be a finite vector of length {self.dim}")
        x, _ = self._current
        if self.adversarial:
            self._fallback_update(u)
        else:
            lifted = lift_utility(u, x)
            self.U = self.U + lifted
            self.u_prev = lifted
        if self._last_u is not None:
            self.deviation += float(np.max(np.abs(u - self._last_u))) ** 2
        self._last_u = u
        if self.guard and not self.adversarial and self.t >= 2 and self.adversarial_check(self.t):
            self._switch(x)
        self._current = None
        self.t += 1

    # -- adversarial guard -----------------------------------------------

    def adversarial_check(self, t: int) -> bool:
        """True iff the utility variation up to round ``t`` exceeds the self-play budget."""
        if t < 2:
            raise ValueError("the check needs t >= 2")
        return self.deviation > adversarial_threshold(t, self.n, self.B, self.L, self.eta,
                                                      self.l1, self.d)

    def _switch(self, x):
        log.info("adversarial utilities detected at round %d; switching to gradient ascent", self.t)
        self.adversarial = True
        self.switch_round = self.t
        self._fb_x = np.array(x, dtype=float)
        self._fb_tau = 0

    def _fallback_update(self, u):
        self._fb_tau += 1
        self._fb_x = fallback_step(self.set, self._fb_x, u, self._fb_tau, self.l1, self.B)

    def recommended_learning_rate(self) -> float:
        return recommended_learning_rate(self.n, self.B, self.L, self.l1)


def fallback_step(strategy_set, x, u, tau: int, l1: float, B: float) -> np.ndarray:
    """Projected gradient ascent step with rate ``l1 / (B sqrt(tau))``."""
    step = l1 / (B * math.sqrt(tau))
    return strategy_set.project(np.asarray(x, dtype=float) + step * np.asarray(u, dtype=float))
