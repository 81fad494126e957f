"""
Exact proximal steps over a treeplex
====================================

A treeplex is built from simplexes by Cartesian products and branching.
Sequence-form strategy polytopes are treeplexes, and so is the lifted set
``{(lam, y) : lam in [0, 1], y in lam X}`` the learner works over.

The proximal step ``min -g.x + 1/2 sum (x/w)^2`` over ``[0, 1] Q`` is solved
exactly: the derivative of its value in the scale ``t`` is a strictly
increasing piecewise-linear function, built bottom-up, whose root gives the
optimal scale.
"""
import numpy as np

from lrloftrl import smpl
from lrloftrl import treeplex as tp

# A decision with two actions; the first leads to a second decision with three.
Q = tp.branch(tp.simplex(3), None)
print("dimension:", Q.dim)
print("vertices:\n", tp.vertices(Q))

g = np.array([0.4, -0.2, 1.0, 0.3, -0.5])
w = np.array([1.0, 0.8, 0.5, 1.2, 0.9])

# The derivative of the value function in t, as breakpoints and slopes.
lam = tp.lambda_derivative(Q, g, w)
print("breakpoints:", np.round(lam.betas, 4))
print("slopes:", np.round(lam.cumulative_slopes, 4))
for t in (0.0, 0.5, 1.0):
    print(f"lambda({t}) = {smpl.smpl_eval(lam, t):+.4f}")

# The root of the derivative inside [0, 1] is the optimal scale.
t, x = tp.prox_argmin(Q, g, w)
print("optimal scale:", round(t, 6))
print("minimizer:", np.round(x, 6))
print("objective:", tp.prox_objective(g, w, x))
print("constraint residual:", tp.residual(Q, x, t))

# Any other point of [0, 1] Q does worse.
rng = np.random.default_rng(0)
V = tp.vertices(Q)
others = [rng.uniform() * rng.dirichlet(np.ones(len(V))) @ V for _ in range(1000)]
print("best random point:", min(tp.prox_objective(g, w, p) for p in others))
