"""Treeplex sets and their exact local proximal oracle.

A treeplex is built from simplexes by Cartesian products and branching.
Coordinates are laid out depth first: a branching node owns its ``k``
branching coordinates followed by the blocks of its children in order, and a
product concatenates the blocks of its children.

The proximal oracle minimizes ``-g.x + 1/2 sum (x/w)^2`` over ``[0, t_max] Q``.
It works through the derivative ``lambda_Q(t)`` of the value function

    V_Q(t) = min_{x in tQ} -g.x + 1/2 sum (x/w)^2,

which is piecewise linear and increasing in ``t`` and is assembled bottom-up
with the algebra in :mod:`lrloftrl.smpl`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import smpl
from .smpl import Smpl


@dataclass(frozen=True)
class Branch:
    """Branching over ``k`` actions; ``children[j]`` is ``None`` for a leaf action."""
    children: tuple

    def __post_init__(self):
        if len(self.children) == 0:
            raise ValueError("a branching node needs at least one action")

    @property
    def k(self) -> int:
        return len(self.children)

    @property
    def dim(self) -> int:
        return self.k + sum(c.dim for c in self.children if c is not None)


@dataclass(frozen=True)
class Product:
    children: tuple

    def __post_init__(self):
        if len(self.children) == 0:
            raise ValueError("a product node needs at least one factor")

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.children)


Node = Union[Branch, Product]


def simplex(k: int) -> Branch:
    """The simplex on ``k`` coordinates, as a branching over empty sets."""
    if k < 1:
        raise ValueError("simplex dimension must be positive")
    return Branch((None,) * k)


def branch(*children: Optional[Node]) -> Branch:
    return Branch(tuple(children))


def product(*children: Node) -> Node:
    if len(children) == 1:
        return children[0]
    return Product(tuple(children))


def lifted(node: Node) -> Branch:
    """``{(1, x) : x in Q}``; scaled by ``[0, 1]`` this is the lifted set."""
    return Branch((node,))


def _child_slices(node: Node):
    if isinstance(node, Branch):
        off = node.k
        for c in node.children:
            if c is None:
                yield None
            else:
                yield slice(off, off + c.dim)
                off += c.dim
    else:
        off = 0
        for c in node.children:
            yield slice(off, off + c.dim)
            off += c.dim


# ---------------------------------------------------------------------------
# derivative of the value function


@dataclass
class _Plan:
    node: Node
    rep: Smpl                     # lambda_Q(t) on [0, inf)
    children: list                # child plans (None for empty actions)
    slices: list
    gs: Optional[list] = None     # branching: x_bullet[k] as a function of the multiplier


def _check_center(w: np.ndarray) -> None:
    if np.any(~(w > 0)):
        raise ValueError("center w must be strictly positive")


def _plan(node: Node, g: np.ndarray, w: np.ndarray) -> _Plan:
    slices = list(_child_slices(node))
    if isinstance(node, Product):
        plans = [_plan(c, g[s], w[s]) for c, s in zip(node.children, slices)]
        return _Plan(node, smpl.smpl_sum([p.rep for p in plans]), plans, slices)

    plans = []
    gs = []
    for j, (c, s) in enumerate(zip(node.children, slices)):
        w2 = w[j] * w[j]
        if c is None:
            plans.append(None)
            f = smpl.constant(-w2 * g[j], lo=0.0)
        else:
            p = _plan(c, g[s], w[s])
            plans.append(p)
            f = smpl.smpl_affine(p.rep, -w2 * g[j], w2)
        # x_bullet[j] = [ (x + f)^{-1}(w^2 * lam) ]^+
        gs.append(smpl.smpl_scale_argument(smpl.smpl_fixed_point(f), w2))
    total = smpl.smpl_sum(gs)
    rep = smpl.smpl_invert(total)
    return _Plan(node, rep, plans, slices, gs)


def lambda_derivative(node: Node, g, w) -> Smpl:
    """Standard representation of ``t -> d/dt V_Q(t; g, w)`` on ``[0, inf)``."""
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_shapes(node, g, w)
    _check_center(w)
    return _plan(node, g, w).rep


def _check_shapes(node: Node, g: np.ndarray, w: np.ndarray) -> None:
    if g.shape != (node.dim,) or w.shape != (node.dim,):
        raise ValueError(f"expected vectors of length {node.dim}")


def _fill(plan: _Plan, t: float, out: np.ndarray, off: int) -> None:
    if t <= 0.0:
        return
    if isinstance(plan.node, Product):
        for p, s in zip(plan.children, plan.slices):
            _fill(p, t, out, off + s.start)
        return
    lam = smpl.value(plan.rep, t)
    for j, (gk, p, s) in enumerate(zip(plan.gs, plan.children, plan.slices)):
        xj = smpl.value(gk, lam)
        out[off + j] = xj
        if p is not None:
            _fill(p, xj, out, off + s.start)


def _reconstruct(plan: _Plan, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("scale t must be nonnegative")
    out = np.zeros(plan.node.dim)
    _fill(plan, t, out, 0)
    return out


def reconstruct(node: Node, g, w, t: float) -> np.ndarray:
    """Unique minimizer of ``-g.x + 1/2 sum (x/w)^2`` over ``tQ``."""
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_shapes(node, g, w)
    _check_center(w)
    return _reconstruct(_plan(node, g, w), float(t))


def prox_objective(g, w, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(-np.dot(g, x) + 0.5 * np.sum((x / w) ** 2))


def prox_argmin(node: Node, g, w, t_max: float = 1.0):
    """Minimize ``-g.x + 1/2 sum (x/w)^2`` over ``[0, t_max] Q``.

    Returns ``(t_star, x_star)``.  The optimal scale is read off the
    piecewise-linear derivative: zero if it is nonnegative at 0, ``t_max`` if
    it is nonpositive there, otherwise its exact root.
    """
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_shapes(node, g, w)
    _check_center(w)
    plan = _plan(node, g, w)
    lam = plan.rep
    if lam(0.0) >= 0:
        t = 0.0
    elif lam(t_max) <= 0:
        t = float(t_max)
    else:
        t = smpl.smpl_solve(lam, 0.0)
    return t, _reconstruct(plan, t)


def project(node: Node, z) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``Q``."""
    z = np.asarray(z, dtype=float)
    return reconstruct(node, z, np.ones(node.dim), 1.0)


# ---------------------------------------------------------------------------
# linear maximization and membership


def _best(node: Node, u: np.ndarray, out: np.ndarray, off: int) -> float:
    slices = list(_child_slices(node))
    if isinstance(node, Product):
        return sum(_best(c, u[s], out, off + s.start) for c, s in zip(node.children, slices))
    values = []
    for j, (c, s) in enumerate(zip(node.children, slices)):
        v = u[j]
        if c is not None:
            scratch = np.zeros(c.dim)
            v += _best(c, u[s], scratch, 0)
            values.append((v, scratch))
        else:
            values.append((v, None))
    # ties go to the lowest action index
    j_best = max(range(len(values)), key=lambda j: (values[j][0], -j))
    out[off + j_best] = 1.0
    scratch = values[j_best][1]
    if scratch is not None:
        s = slices[j_best]
        out[off + s.start: off + s.stop] = scratch
    return values[j_best][0]


def lmo(node: Node, u) -> np.ndarray:
    """A maximizing vertex of ``<x, u>`` over ``Q`` (best response)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (node.dim,):
        raise ValueError(f"expected a vector of length {node.dim}")
    out = np.zeros(node.dim)
    _best(node, u, out, 0)
    return out


def residual(node: Node, x, scale: float = 1.0) -> float:
    """Largest violation of the treeplex constraints of ``scale * Q``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (node.dim,):
        raise ValueError(f"expected a vector of length {node.dim}")
    return _residual(node, x, scale)


def _residual(node: Node, x: np.ndarray, scale: float) -> float:
    slices = list(_child_slices(node))
    if isinstance(node, Product):
        return max(_residual(c, x[s], scale) for c, s in zip(node.children, slices))
    top = x[:node.k]
    worst = max(abs(float(top.sum()) - scale), float(max(0.0, -top.min())))
    for j, (c, s) in enumerate(zip(node.children, slices)):
        if c is not None:
            worst = max(worst, _residual(c, x[s], float(top[j])))
    return worst


def vertices(node: Node) -> np.ndarray:
    """All pure strategies of ``Q`` as rows (exponential; for small sets only)."""
    return np.array(_vertices(node))


def _vertices(node: Node):
    slices = list(_child_slices(node))
    if isinstance(node, Product):
        blocks = [_vertices(c) for c in node.children]
        out = [np.zeros(0)]
        for b in blocks:
            out = [np.concatenate((o, v)) for o in out for v in b]
        return out
    out = []
    for j, (c, s) in enumerate(zip(node.children, slices)):
        child_vs = _vertices(c) if c is not None else [None]
        for cv in child_vs:
            v = np.zeros(node.dim)
            v[j] = 1.0
            if cv is not None:
                v[s] = cv
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# JSON form: {"simplex": K} | {"product": [...]} | {"branch": {"k": K, "children": [...]}}


def from_json(obj) -> Node:
    if not isinstance(obj, dict) or len(obj.keys() - {"range"}) != 1:
        raise ValueError(f"malformed treeplex node: {obj!r}")
    if "simplex" in obj:
        return simplex(int(obj["simplex"]))
    if "product" in obj:
        kids = obj["product"]
        if not isinstance(kids, list) or not kids:
            raise ValueError("product needs a nonempty list of children")
        return Product(tuple(from_json(c) for c in kids))
    if "branch" in obj:
        spec = obj["branch"]
        k = int(spec["k"])
        kids = spec.get("children", [None] * k)
        if len(kids) != k:
            raise ValueError(f"branch with k={k} has {len(kids)} children")
        return Branch(tuple(None if c is None else from_json(c) for c in kids))
    raise ValueError(f"unknown treeplex node type: {obj!r}")


def to_json(node: Node):
    if isinstance(node, Product):
        return {"product": [to_json(c) for c in node.children]}
    if all(c is None for c in node.children):
        return {"simplex": node.k}
    return {"branch": {"k": node.k,
                       "children": [None if c is None else to_json(c) for c in node.children]}}


def structural_errors(obj, start: int = 0, path: str = "$") -> list:
    """Check a JSON treeplex, including optional ``"range": [start, stop]`` fields.

    Declared ranges must match the depth-first layout, so overlapping or gapped
    coordinate blocks are reported.
    """
    errors: list = []
    try:
        node = from_json(obj)
    except (ValueError, KeyError, TypeError) as exc:
        return [f"{path}: {exc}"]
    _ranges(obj, node, start, path, errors)
    return errors


def _ranges(obj, node, start, path, errors):
    stop = start + node.dim
    if "range" in obj:
        r = obj["range"]
        if list(r) != [start, stop]:
            errors.append(f"{path}: declared range {list(r)} but layout gives [{start}, {stop}]")
    if isinstance(node, Product):
        off = start
        for i, (c, cobj) in enumerate(zip(node.children, obj["product"])):
            _ranges(cobj, c, off, f"{path}.product[{i}]", errors)
            off += c.dim
    elif "branch" in obj:
        off = start + node.k
        for i, (c, cobj) in enumerate(zip(node.children, obj["branch"].get("children", []))):
            if c is not None:
                _ranges(cobj, c, off, f"{path}.branch.children[{i}]", errors)
                off += c.dim


def random_treeplex(rng: np.random.Generator, max_dim: int = 6) -> Node:
    """A random treeplex with dimension at most ``max_dim``."""
    while True:
        node = _random_node(rng, max_dim, depth=0)
        if node.dim <= max_dim:
            return node


def _random_node(rng, budget, depth):
    kind = rng.random()
    if depth >= 2 or budget <= 2 or kind < 0.35:
        return simplex(int(rng.integers(1, max(2, min(budget, 4)) + 1)))
    if kind < 0.6:
        n = int(rng.integers(2, 4))
        return Product(tuple(_random_node(rng, budget // n, depth + 1) for _ in range(n)))
    k = int(rng.integers(1, 4))
    kids = []
    rest = budget - k
    for _ in range(k):
        if rest >= 1 and rng.random() < 0.5:
            c = _random_node(rng, rest, depth + 1)
            rest -= c.dim
            kids.append(c)
        else:
            kids.append(None)
    return Branch(tuple(kids))
