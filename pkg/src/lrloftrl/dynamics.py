"""Self-play driver and the regret, path-length and stability measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .games import GameInstance
from .learner import LrlOftrl, lift_utility
from .sets import lifted_max
from .solver import local_norm


def power_of_two_checkpoints(T: int) -> list:
    """``1, 2, 4, ...`` up to ``T``, plus ``T`` itself."""
    cps = [1 << k for k in range(T.bit_length()) if (1 << k) <= T]
    if cps[-1] != T:
        cps.append(T)
    return cps


@dataclass
class Checkpoint:
    t: int
    external_regret: np.ndarray
    lifted_regret: np.ndarray
    path_length: float
    stability_max: np.ndarray


@dataclass
class RunTrace:
    """Strategies ``xs[i]`` (T x d_i, game coordinates), gradients ``us[i]`` and lifted iterates ``zs[i]``."""
    game: GameInstance
    xs: list
    us: list
    zs: list
    config: dict
    checkpoints: list = field(default_factory=list)
    learners: list = field(default_factory=list)
    error: Exception = None

    @property
    def T(self) -> int:
        return len(self.xs[0])

    @property
    def n(self) -> int:
        return len(self.xs)


class RunError(RuntimeError):
    """A learner failed mid-run; ``trace`` holds the rounds completed so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def make_learners(game: GameInstance, T: int, eta=None, solver="prox_newton", eps=None,
                  guard=True) -> list:
    """One learner per player sharing the game constants; ``eta=None`` means recommended."""
    d = max(game.dims)
    return [LrlOftrl(s, T, game.n, game.B, game.L, eta=eta, solver=solver, eps=eps,
                     l1=game.l1, d=d, guard=guard) for s in game.sets]


def run_self_play(game: GameInstance, learners: list, T: int, checkpoints=None) -> RunTrace:
    """Synchronous rounds: every learner commits, one gradient call, feedback to each."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if len(learners) != game.n:
        raise ValueError("need exactly one learner per player")
    xs = [np.empty((T, s.dimension)) for s in game.sets]
    us = [np.empty((T, s.dimension)) for s in game.sets]
    zs = [np.empty((T, s.dimension + 1)) for s in game.sets]
    config = {"T": T, "eta": [l.eta for l in learners], "eps": [l.eps for l in learners],
              "solver": learners[0].solver}
    trace = RunTrace(game, xs, us, zs, config, learners=learners)
    for t in range(T):
        try:
            profile = []
            for i, lr in enumerate(learners):
                x, z = lr.next_strategy()
                xs[i][t] = x
                zs[i][t] = z.z
                profile.append(x)
            grads = game.gradient(profile)
            for i, lr in enumerate(learners):
                us[i][t] = grads[i]
                lr.observe_utility(grads[i])
        except Exception as exc:
            partial = RunTrace(game, [a[:t] for a in xs], [a[:t] for a in us], [a[:t] for a in zs],
                               config, learners=learners, error=exc)
            raise RunError(f"round {t + 1}: {exc}", partial) from exc
    cps = power_of_two_checkpoints(T) if checkpoints is None else sorted(set(checkpoints))
    trace.checkpoints = compute_checkpoints(trace, cps)
    return trace


# ---------------------------------------------------------------------------
# measurements


def _cumulative(trace: RunTrace, i: int):
    desc = trace.game.sets[i]
    xs = desc.from_game(trace.xs[i])                 # shifted coordinates
    us = trace.us[i]
    U = np.cumsum(us, axis=0)
    gain = np.cumsum(np.sum(us * xs, axis=1))
    return desc, U, gain


def external_regret(trace: RunTrace, player: int, t: int) -> float:
    """``max_x sum_{tau<=t} <x, u> - sum_{tau<=t} <x_tau, u_tau>`` via one LMO call."""
    if not 1 <= t <= trace.T:
        raise ValueError("checkpoint outside the trace")
    desc = trace.game.sets[player]
    xs = desc.from_game(trace.xs[player][:t])
    U = trace.us[player][:t].sum(axis=0)
    best = float(U @ desc.set.lmo(U))
    return best - float(np.sum(trace.us[player][:t] * xs))


def lifted_regret(trace: RunTrace, player: int, t: int) -> float:
    """Regret of the lifted iterates against the lifted utilities, via the lifted LMO."""
    if not 1 <= t <= trace.T:
        raise ValueError("checkpoint outside the trace")
    desc = trace.game.sets[player]
    xs = desc.from_game(trace.xs[player][:t])
    us = trace.us[player][:t]
    zs = trace.zs[player][:t]
    lifted = np.concatenate((-np.sum(us * xs, axis=1)[:, None], us), axis=1)
    return lifted_max(desc.set, lifted.sum(axis=0)) - float(np.sum(lifted * zs))


def path_lengths(trace: RunTrace) -> np.ndarray:
    """Cumulative ``sum_i ||x_i(tau+1) - x_i(tau)||_1^2``; entry ``t-1`` covers ``tau < t``."""
    total = np.zeros(trace.T)
    for x in trace.xs:
        steps = np.sum(np.abs(np.diff(x, axis=0)), axis=1) ** 2
        total[1:] += np.cumsum(steps)
    return total


def path_length(trace: RunTrace, t: int) -> float:
    if not 1 <= t <= trace.T:
        raise ValueError("checkpoint outside the trace")
    return float(path_lengths(trace)[t - 1])


def stability_steps(trace: RunTrace, player: int) -> np.ndarray:
    """Local-norm distances ``||z(t+1) - z(t)||_{z(t)}`` between consecutive lifted iterates."""
    z = trace.zs[player]
    if len(z) < 2:
        return np.zeros(0)
    return np.linalg.norm(np.diff(z, axis=0) / z[:-1], axis=1)


def stability_report(trace: RunTrace) -> dict:
    """Per player: largest step, its bound ``22 eta B |X_i|_1 + 3 eps`` and whether it holds."""
    out = []
    for i, lr in enumerate(trace.learners):
        steps = stability_steps(trace, i)
        mx = float(steps.max()) if len(steps) else 0.0
        bound = 22.0 * lr.eta * trace.game.B * trace.game.sets[i].l1 + 3.0 * lr.eps
        out.append({"max": mx, "bound": bound, "ok": mx <= bound})
    return out


def compute_checkpoints(trace: RunTrace, checkpoints) -> list:
    paths = path_lengths(trace)
    steps = [stability_steps(trace, i) for i in range(trace.n)]
    running = [np.maximum.accumulate(s) if len(s) else s for s in steps]
    out = []
    for t in checkpoints:
        if not 1 <= t <= trace.T:
            raise ValueError(f"checkpoint {t} outside 1..{trace.T}")
        ext = np.array([external_regret(trace, i, t) for i in range(trace.n)])
        lif = np.array([lifted_regret(trace, i, t) for i in range(trace.n)])
        stab = np.array([float(r[t - 2]) if t >= 2 else 0.0 for r in running])
        out.append(Checkpoint(t, ext, lif, float(paths[t - 1]), stab))
    return out


# ---------------------------------------------------------------------------
# theoretical bounds


def regret_bound(game: GameInstance, T: int, eps: float) -> float:
    """``12 B |X|_1 + 256 (d+1) max{n L |X|_1^2, 2 B |X|_1} log T`` plus solver slack.

    The slack ``4 T eps`` is in units where ``B |X|_1 = 1``, hence the factor
    ``B |X|_1`` here.
    """
    l1, d, B = game.l1, max(game.dims), game.B
    core = 12 * B * l1 + 256 * (d + 1) * max(game.n * game.L * l1 ** 2, 2 * B * l1) * math.log(T)
    return core + 4 * T * eps * B * l1


def path_length_bound(game: GameInstance, T: int, eta: float) -> float:
    """``6144 n eta B |X|_1^3 + 1024 n (d+1) |X|_1^2 log T``."""
    l1, d = game.l1, max(game.dims)
    return 6144 * game.n * eta * game.B * l1 ** 3 + 1024 * game.n * (d + 1) * l1 ** 2 * math.log(T)


def identity_holds(lifted: float, external: float, rtol: float = 1e-6) -> bool:
    """``lifted == max(0, external)`` to relative tolerance (absolute below magnitude one)."""
    target = max(0.0, external)
    return abs(lifted - target) <= rtol * max(1.0, abs(target))


def log_slope(ts, values) -> float:
    """Least-squares slope of ``values`` against ``log t``."""
    x = np.log(np.asarray(ts, dtype=float))
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])
