"""
Self-play in Kuhn poker
=======================

Both players of two-player Kuhn poker run the learner with learning rate
0.5 and play against each other.  External regret is recorded at powers of
two; it should grow roughly like ``log T``, so each doubling of the horizon
adds a bounded amount.
"""
import numpy as np

from lrloftrl import build_kuhn, make_learners, run_self_play
from lrloftrl.dynamics import log_slope, stability_report

game = build_kuhn(2)
print(f"{game.name}: sequences per player {game.dims}, |X|_1 = {game.l1:g}, B = {game.B:g}, L = {game.L:.3g}")

T = 2048
trace = run_self_play(game, make_learners(game, T, eta=0.5), T)

print("\n     t   regret p0   regret p1   path length")
for cp in trace.checkpoints:
    r = cp.external_regret
    print(f"{cp.t:6d}  {r[0]:10.4f}  {r[1]:10.4f}  {cp.path_length:12.6f}")

ts = [cp.t for cp in trace.checkpoints]
for i in range(game.n):
    regs = [cp.external_regret[i] for cp in trace.checkpoints]
    print(f"player {i}: regret per unit log t = {log_slope(ts, regs):.3f}")

# The lifted regret equals max(0, external regret) at every checkpoint.
gap = max(abs(cp.lifted_regret - np.maximum(0, cp.external_regret)).max() for cp in trace.checkpoints)
print("largest lifted/external mismatch:", gap)

# Consecutive lifted iterates are close in their own local norm.
for i, rep in enumerate(stability_report(trace)):
    print(f"player {i}: largest step {rep['max']:.4f}")

# The average strategies approach equilibrium: the first player's value is -1/18.
avg = [x.mean(axis=0) for x in trace.xs]
print("value of the average profile:", game.utilities(avg)[0], "vs", -1 / 18)
