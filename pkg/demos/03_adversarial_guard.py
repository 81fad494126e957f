"""
Facing an adversary
===================

Against other copies of itself the learner sees utilities that change
slowly.  Its guard tracks how much they actually change; once the total
exceeds what self-play permits, it stops trusting its optimism and
switches for good to projected online gradient ascent, whose regret grows
like ``sqrt(T)`` against anyone.
"""
import math

import numpy as np

from lrloftrl import LrlOftrl
from lrloftrl.learner import adversarial_threshold
from lrloftrl.sets import simplex_descriptor

T, n, B, L = 10_000, 2, 1.0, 0.1
lr = LrlOftrl(simplex_descriptor(2), T, n, B, L)
print(f"learning rate {lr.eta:.5f}, tolerance {lr.eps:g}")

# Flip the sign of the utility every round: the worst case for optimism.
us, xs = np.empty((T, 2)), np.empty((T, 2))
for t in range(T):
    xs[t], _ = lr.next_strategy()
    us[t] = B * (-1) ** t * np.array([1.0, -1.0])
    lr.observe_utility(us[t])

t0 = lr.switch_round
print(f"switched at round {t0}: variation {4 * (t0 - 1):.0f} > "
      f"budget {adversarial_threshold(t0, n, B, L, lr.eta, 1.0, 2):.1f}")

regret = us.sum(axis=0).max() - np.sum(us * xs)
print(f"regret after {T} rounds: {regret:.1f}  (10 B |X|_1 sqrt(T) = {10 * B * math.sqrt(T):.0f})")
