"""Acceptance criteria, one test each.

Every test records a one-line verdict (printed in the session summary) and
then asserts it.  Tolerances are the pinned ones: 1e-6 relative for the
regret identity, exact constants for the regret/path/stability bounds, 1e-5 /
1e-4 for the treeplex oracle, 1e-12 for the piecewise-linear algebra, 2 eps
for proximal Newton.
"""
import math
import pathlib
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from lrloftrl import treeplex as tp
from lrloftrl.dynamics import (identity_holds, lifted_regret, make_learners, path_length_bound,
                               regret_bound, run_self_play, stability_report)
from lrloftrl.games import build_cournot, build_kuhn, matching_pennies
from lrloftrl.learner import LrlOftrl
from lrloftrl.sets import IntervalSet, StrategySetDescriptor, TreeplexSet, simplex_descriptor
from lrloftrl.solver import OftrlObjective, cold_start, local_norm, prox_newton, theoretical_iterations

from oracles import batched_pg_prox, grid_lifted_interval, grid_lifted_simplex2

T_RUN = 4096
TESTS = pathlib.Path(__file__).parent


def verdict(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, ACCEPTANCE[number]


@pytest.fixture(scope="module")
def runs():
    """Self-play with the recommended rate and eps = 1/T on the four acceptance games."""
    out = {}
    for game in (matching_pennies(), build_kuhn(2), build_kuhn(3), build_cournot(2, 1, 2)):
        learners = make_learners(game, T_RUN)
        start = time.perf_counter()
        trace = run_self_play(game, learners, T_RUN)
        out[game.name] = (trace, time.perf_counter() - start)
    return out


def test_criterion_1_regret_identity(runs):
    bad, worst, slow = [], 0.0, []
    for name, (tr, secs) in runs.items():
        if secs >= 120:
            slow.append(f"{name} {secs:.0f}s")
        for cp in tr.checkpoints:
            for i in range(tr.n):
                lif, ext = cp.lifted_regret[i], cp.external_regret[i]
                target = max(0.0, ext)
                worst = max(worst, abs(lif - target) / max(1.0, abs(target)))
                if not identity_holds(lif, ext):
                    bad.append(f"{name} t={cp.t} p{i}")
    times = ", ".join(f"{n} {s:.0f}s" for n, (_, s) in runs.items())
    verdict(1, not bad and not slow,
            f"lifted = max(0, external) at all checkpoints; worst rel. error {worst:.1e} (tol 1e-6); "
            f"runtimes {times}" + (f"; violations {bad[:5]}" if bad else "") + (f"; too slow {slow}" if slow else ""))


def test_criterion_2_regret_bound(runs):
    rows, ok = [], True
    for name, (tr, _) in runs.items():
        eps = tr.learners[0].eps
        bound = regret_bound(tr.game, T_RUN, eps)
        final = tr.checkpoints[-1]
        reg = final.external_regret.max()
        ok &= bool(np.all(final.external_regret <= bound))
        rows.append(f"{name} {reg:.4g} <= {bound:.4g}")
    verdict(2, ok, "max player regret at T vs bound: " + "; ".join(rows))


def test_criterion_3_log_growth():
    game = build_kuhn(2)
    T = 2 ** 14
    tr = run_self_play(game, make_learners(game, T, eta=0.5), T, checkpoints=[2 ** k for k in range(7, 15)])
    ok, rows = True, []
    for i in range(game.n):
        reg = {k: lifted_regret(tr, i, 2 ** k) for k in range(7, 15)}
        inc = {k: reg[k] - reg[k - 1] for k in range(8, 15)}
        c = float(np.median([inc[8], inc[9], inc[10]]))
        worst = max(inc[k] for k in range(10, 15))
        ok &= c > 0 and worst <= 2 * c
        rows.append(f"p{i} median {c:.3g}, max increment k=10..14 {worst:.3g} (limit {2 * c:.3g})")
    verdict(3, ok, "Kuhn-2p eta=0.5 T=2^14: " + "; ".join(rows))


def test_criterion_4_path_length(runs):
    ok, rows = True, []
    for name, (tr, _) in runs.items():
        eta = tr.learners[0].eta
        ratios = [cp.path_length / path_length_bound(tr.game, cp.t, eta) for cp in tr.checkpoints if cp.t >= 2]
        ok &= max(ratios) <= 1
        rows.append(f"{name} {max(ratios):.2e}")
    verdict(4, ok, "max path length / bound over checkpoints: " + "; ".join(rows))


def test_criterion_5_stability(runs):
    ok, rows = True, []
    for name, (tr, _) in runs.items():
        for i, rep in enumerate(stability_report(tr)):
            ok &= rep["ok"]
        worst = max(stability_report(tr), key=lambda r: r["max"] / r["bound"])
        rows.append(f"{name} {worst['max']:.3g} <= {worst['bound']:.3g}")
    verdict(5, ok, "largest rescaled local-norm step vs 22 eta B |X|_1 + 3 eps: " + "; ".join(rows))


def test_criterion_6_treeplex_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    problems, ours = [], []
    for _ in range(200):
        node = tp.random_treeplex(rng)
        d = node.dim
        g, w = rng.uniform(-2, 2, d), rng.uniform(0.2, 2, d)
        t, x = tp.prox_argmin(node, g, w)
        ours.append((tp.prox_objective(g, w, x), x))
        V = np.vstack([np.zeros(d), tp.vertices(node)])
        problems.append((V, g, w))
    refs = batched_pg_prox(problems)
    val_err = max(abs(a[0] - b[0]) for a, b in zip(ours, refs))
    arg_err = max(np.abs(a[1] - b[1]).max() for a, b in zip(ours, refs))
    secs = time.perf_counter() - start
    verdict(6, val_err <= 1e-5 and arg_err <= 1e-4 and secs < 300,
            f"200 random treeplexes (d <= 6): objective error {val_err:.1e} (tol 1e-5), "
            f"argument error {arg_err:.1e} (tol 1e-4), {secs:.1f}s")


def test_criterion_7_smpl_suite():
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(TESTS / "test_smpl.py")], capture_output=True, text=True, check=False)
    secs = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    verdict(7, proc.returncode == 0 and secs < 30, f"piecewise-linear property suite: {summary} ({secs:.1f}s, limit 30s)")


def test_criterion_8_proximal_newton():
    eps = 1e-6
    rng = np.random.default_rng(8)
    simplex, interval = TreeplexSet(tp.simplex(2)), IntervalSet(1.0, 2.0)
    worst_dist, worst_ratio, fails = 0.0, 0.0, 0
    for k in range(100):
        eta = rng.uniform(0.1, 2.0)
        if k % 2 == 0:
            s, c = simplex, rng.uniform(-3, 3, 3)
            ref, fstar = grid_lifted_simplex2(eta, c)
        else:
            s, c = interval, rng.uniform(-3, 3, 2)
            ref, fstar = grid_lifted_interval(eta, c, 1.0, 2.0)
        obj = OftrlObjective(eta, c, s)
        z0 = cold_start(s).z
        res = prox_newton(obj, z0, eps)
        dist = local_norm(ref, res.point.z - ref)
        K = theoretical_iterations(obj.value(z0) - fstar, eps)
        worst_dist = max(worst_dist, dist)
        worst_ratio = max(worst_ratio, res.iterations / K)
        fails += dist > 2 * eps or res.iterations > K
    verdict(8, fails == 0,
            f"50 objectives on the 2-simplex and 50 on [1,2], eps=1e-6: worst local-norm distance "
            f"{worst_dist:.1e} (tol {2 * eps:.0e}), worst iterations/K {worst_ratio:.2f}")


def _adversary_regret(second_phase, T=10_000, seed=9):
    n, B, L = 2, 1.0, 0.1
    desc = simplex_descriptor(2)
    lr = LrlOftrl(desc, T, n, B, L)
    rng = np.random.default_rng(seed)
    sign = np.array([1.0, -1.0])
    us, xs = np.empty((T, 2)), np.empty((T, 2))
    for t in range(T):
        if lr.adversarial and second_phase == "random":
            u = B * rng.choice([-1.0, 1.0], size=2)
        else:
            u = B * (-1) ** t * sign
        xs[t], _ = lr.next_strategy()
        us[t] = u
        lr.observe_utility(u)
    regret = float(us.sum(axis=0).max() - np.sum(us * xs))
    return lr, regret, 10 * B * desc.l1 * math.sqrt(T)


def test_criterion_9_adversarial_robustness():
    rows, ok = [], True
    for phase in ("alternating", "random"):
        lr, regret, bound = _adversary_regret(phase)
        ok &= lr.adversarial and regret <= bound
        rows.append(f"{phase} after switch: switched at t={lr.switch_round}, regret {regret:.1f} <= {bound:.0f}")
    verdict(9, ok, "T=1e4, n=2 B=1 L=0.1 on the 2-simplex: " + "; ".join(rows))
