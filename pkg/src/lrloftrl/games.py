"""Convex games and concrete builders.

A :class:`GameInstance` holds one strategy-set descriptor per player and a
gradient oracle mapping a joint profile (in game coordinates) to the list of
per-player utility gradients.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import treeplex as tp
from .sets import StrategySetDescriptor, TreeplexSet, interval_descriptor, simplex_descriptor

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class GameInstance:
    name: str
    sets: tuple
    grad_fn: Callable
    B: float
    L: float
    utility_fn: Optional[Callable] = None
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.sets)

    @property
    def l1(self) -> float:
        """``max_i ||X_i||_1``."""
        return max(s.l1 for s in self.sets)

    @property
    def dims(self) -> list:
        return [s.dimension for s in self.sets]

    def check_profile(self, profile) -> list:
        if len(profile) != self.n:
            raise ValueError(f"expected {self.n} strategies, got {len(profile)}")
        xs = []
        for i, (s, x) in enumerate(zip(self.sets, profile)):
            x = np.asarray(x, dtype=float)
            if x.shape != (s.dimension,):
                raise ValueError(f"player {i}: expected length {s.dimension}, got {x.shape}")
            if not s.contains(x, FEAS_TOL):
                raise ValueError(f"player {i}: strategy is not in the strategy set")
            xs.append(x)
        return xs

    def gradient(self, profile) -> list:
        """Per-player gradients ``grad_{x_i} u_i(x)``."""
        return self.grad_fn(self.check_profile(profile))

    def utilities(self, profile) -> np.ndarray:
        if self.utility_fn is None:
            raise NotImplementedError(f"{self.name} has no utility function")
        return np.asarray(self.utility_fn(self.check_profile(profile)), dtype=float)


def recommended_learning_rate(n: int, B: float, L: float, l1: float) -> float:
    """``min{1/(256 B |X|_1), 1/(128 n L |X|_1^2)}``."""
    if min(n, B, L, l1) <= 0:
        raise ValueError("n, B, L and the l1 bound must all be positive")
    return min(1.0 / (256.0 * B * l1), 1.0 / (128.0 * n * L * l1 * l1))


# ---------------------------------------------------------------------------
# normal-form games


def build_normal_form(payoffs, name: str = "normal_form", treeplexes=None) -> GameInstance:
    """Multilinear game with payoff entries in ``[-1, 1]``.

    ``payoffs[i]`` is player ``i``'s payoff tensor with one axis per player.
    By default each axis indexes pure actions and the strategy sets are
    simplexes (the mixed extension), with ``B = L = 1``.  If ``treeplexes``
    is given, axis ``j`` indexes the coordinates of player ``j``'s treeplex
    (e.g. sequence-form payoff tensors); then ``B = prod_{j != i} |X_j|_1``
    and ``L = max prod_{k != i, j} |X_k|_1`` bound the gradients.
    """
    tensors = [np.asarray(p, dtype=float) for p in payoffs]
    n = len(tensors)
    if n < 1:
        raise ValueError("need at least one player")
    shape = tensors[0].shape
    if len(shape) != n or any(t.shape != shape for t in tensors):
        raise ValueError("payoff tensors must all have one axis per player and equal shapes")
    if any(np.any(np.abs(t) > 1) for t in tensors):
        raise ValueError("payoffs must lie in [-1, 1]")
    if treeplexes is None:
        sets = tuple(simplex_descriptor(k) for k in shape)
        B = L = 1.0
    else:
        if len(treeplexes) != n:
            raise ValueError("need one treeplex per player")
        sets = tuple(StrategySetDescriptor(TreeplexSet(node)) for node in treeplexes)
        if tuple(s.dimension for s in sets) != shape:
            raise ValueError("treeplex dimensions do not match the payoff tensor shape")
        l1 = [s.l1 for s in sets]
        B = max(math.prod(l1[:i] + l1[i + 1:]) for i in range(n))
        L = max((math.prod(l1[k] for k in range(n) if k not in (i, j))
                 for i in range(n) for j in range(n) if i != j), default=0.0)
        L = max(L, 1e-12)

    def grad(xs):
        out = []
        for i, T in enumerate(tensors):
            g = T
            # contract opponents from the last axis down so axis numbers stay valid
            for j in reversed(range(n)):
                if j != i:
                    g = np.tensordot(g, xs[j], axes=([j], [0]))
            out.append(np.asarray(g, dtype=float).reshape(shape[i]))
        return out

    def util(xs):
        vals = []
        for T in tensors:
            v = T
            for j in reversed(range(n)):
                v = np.tensordot(v, xs[j], axes=([j], [0]))
            vals.append(float(v))
        return vals

    return GameInstance(name, sets, grad, B=B, L=L, utility_fn=util,
                        info={"payoffs": tensors})


def matching_pennies() -> GameInstance:
    A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return build_normal_form([A, -A], name="matching_pennies")


# ---------------------------------------------------------------------------
# extensive-form games in sequence form


@dataclass
class _Infoset:
    key: tuple
    n_actions: int
    parent: Optional[tuple]            # (infoset key, action) or None


class SequenceFormBuilder:
    """Collects infosets and terminal nodes, then lays out the treeplexes.

    Each player's sequences are ordered by the depth-first treeplex layout so
    that the strategy vector is directly a point of the treeplex.
    """

    def __init__(self, n_players: int):
        self.n = n_players
        self.infosets = [dict() for _ in range(n_players)]
        self.leaves = []                  # (chance prob, payoffs, last (key, action) per player)

    def infoset(self, player, key, n_actions, parent):
        sets = self.infosets[player]
        if key in sets:
            I = sets[key]
            if I.n_actions != n_actions or I.parent != parent:
                raise ValueError(f"inconsistent infoset {key} (perfect recall violated)")
        else:
            sets[key] = _Infoset(key, n_actions, parent)
        return key

    def leaf(self, prob, payoffs, last):
        self.leaves.append((prob, tuple(payoffs), tuple(last)))

    def build(self):
        nodes, seq_maps = [], []
        for p in range(self.n):
            children = {}
            for I in self.infosets[p].values():
                children.setdefault(I.parent, []).append(I)
            seq_map = {}
            counter = [0]

            def make(parent):
                kids = children.get(parent, [])
                if not kids:
                    return None
                return tp.product(*[make_infoset(I) for I in kids])

            def make_infoset(I):
                subs = [make((I.key, a)) for a in range(I.n_actions)]
                return tp.Branch(tuple(subs))

            root = make(None)
            if root is None:
                raise ValueError(f"player {p} never acts")
            # assign indices following the layout
            self._index(root, children, None, seq_map, counter)
            nodes.append(root)
            seq_maps.append(seq_map)
        return nodes, seq_maps

    def _index(self, node, children, parent, seq_map, counter):
        kids = children.get(parent, [])
        if isinstance(node, tp.Product):
            for I, c in zip(kids, node.children):
                self._index_infoset(I, c, children, seq_map, counter)
        else:
            self._index_infoset(kids[0], node, children, seq_map, counter)

    def _index_infoset(self, I, node, children, seq_map, counter):
        base = counter[0]
        for a in range(I.n_actions):
            seq_map[(I.key, a)] = base + a
        counter[0] += I.n_actions
        for a, c in enumerate(node.children):
            if c is not None:
                self._index(c, children, (I.key, a), seq_map, counter)


def build_extensive_form(builder: SequenceFormBuilder, name: str) -> GameInstance:
    """Multilinear sequence-form game from a populated :class:`SequenceFormBuilder`."""
    nodes, seq_maps = builder.build()
    n = builder.n
    sets = tuple(StrategySetDescriptor(TreeplexSet(node)) for node in nodes)
    dims = [node.dim for node in nodes]
    Z = len(builder.leaves)
    chance = np.array([lf[0] for lf in builder.leaves])
    pay = np.array([lf[1] for lf in builder.leaves]).T            # (n, Z)
    # sequence index per player and leaf; the empty sequence maps to slot d_i (value 1)
    seq = np.empty((n, Z), dtype=int)
    for z, (_, _, last) in enumerate(builder.leaves):
        for p in range(n):
            seq[p, z] = dims[p] if last[p] is None else seq_maps[p][last[p]]
    weight = chance * pay                                          # (n, Z)

    def reach(xs):
        return np.stack([np.append(xs[p], 1.0)[seq[p]] for p in range(n)])

    def grad(xs):
        R = reach(xs)
        out = []
        for i in range(n):
            others = np.prod(np.delete(R, i, axis=0), axis=0) if n > 1 else np.ones(Z)
            g = np.bincount(seq[i], weights=weight[i] * others, minlength=dims[i] + 1)
            out.append(g[:dims[i]])
        return out

    def util(xs):
        return list((weight * np.prod(reach(xs), axis=0)).sum(axis=1))

    # Bounds valid for all profiles: every opponent reach factor is at most one.
    absw = np.abs(weight)
    B = 0.0
    for i in range(n):
        B = max(B, float(np.bincount(seq[i], weights=absw[i], minlength=dims[i] + 1)[:dims[i]].max()))
    L = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            mask = (seq[i] < dims[i]) & (seq[j] < dims[j])
            if not mask.any():
                continue
            pair = seq[i][mask] * (dims[j] + 1) + seq[j][mask]
            L = max(L, float(np.bincount(pair, weights=absw[i][mask]).max()))
    L = max(L, 1e-12)
    return GameInstance(name, sets, grad, B=B, L=L, utility_fn=util,
                        info={"seq_maps": seq_maps, "nodes": nodes, "leaves": Z})


def kuhn_builder(players: int = 2) -> SequenceFormBuilder:
    """Kuhn poker with ``players + 1`` cards, ante 1 and a single bet of 1.

    Players act in turn, checking or betting; after the first bet every other
    player, in order, folds or calls.  The highest card among the players who
    did not fold wins the pot.  Payoffs are net chip gains.
    """
    if players not in (2, 3):
        raise ValueError("Kuhn poker is defined here for 2 or 3 players")
    n = players
    deck = range(n + 1)
    deals = list(itertools.permutations(deck, n))
    p_deal = 1.0 / len(deals)
    b = SequenceFormBuilder(n)

    def walk(cards, history, last, bettor, responders):
        # history: tuple of (player, action) pairs; public, so it keys infosets
        if bettor is None:
            acted = len(history)
            if acted == n:
                return showdown(cards, history, last, folded=set(), contrib=[1] * n)
            p = acted
            key = (p, cards[p], tuple(a for _, a in history))
            parent = last[p]
            b.infoset(p, key, 2, parent)
            for a, label in enumerate(("check", "bet")):
                new_last = list(last)
                new_last[p] = (key, a)
                h = history + ((p, label),)
                if label == "bet":
                    order = [(p + k) % n for k in range(1, n)]
                    walk(cards, h, new_last, p, order)
                else:
                    walk(cards, h, new_last, None, None)
            return
        if not responders:
            contrib = [1] * n
            folded = set()
            contrib[bettor] += 1
            for q, label in history:
                if label == "call":
                    contrib[q] += 1
                elif label == "fold":
                    folded.add(q)
            return showdown(cards, history, last, folded, contrib)
        p = responders[0]
        key = (p, cards[p], tuple(a for _, a in history))
        b.infoset(p, key, 2, last[p])
        for a, label in enumerate(("fold", "call")):
            new_last = list(last)
            new_last[p] = (key, a)
            walk(cards, history + ((p, label),), new_last, bettor, responders[1:])

    def showdown(cards, history, last, folded, contrib):
        alive = [p for p in range(n) if p not in folded]
        winner = max(alive, key=lambda p: cards[p])
        pot = sum(contrib)
        payoffs = [-c for c in contrib]
        payoffs[winner] += pot
        b.leaf(p_deal, payoffs, last)

    for cards in deals:
        walk(cards, (), [None] * n, None, None)
    return b


def build_kuhn(players: int = 2) -> GameInstance:
    """Kuhn poker in sequence form; utilities are natural chip gains.

    With two players payoffs lie in ``[-2, 2]``; with three in ``[-2, 4]``.
    ``B`` and ``L`` are upper bounds computed from the terminal payoffs with
    every opponent reach probability bounded by one.
    """
    if players not in (2, 3):
        raise ValueError("Kuhn poker is defined here for 2 or 3 players")
    return build_extensive_form(kuhn_builder(players), name=f"kuhn{players}")


# ---------------------------------------------------------------------------
# Cournot competition


def build_cournot(a: float, b: float, n: int, costs=None, intervals=None) -> GameInstance:
    """Linear Cournot competition with linear production costs.

    Firm ``i`` earns ``s_i (a - b sum_j s_j) - costs[i] s_i``.  The gradient
    of firm ``i`` is ``a - b sum_j s_j - b s_i - costs[i]``; it moves by at
    most ``2b`` per unit of total quantity change, so ``L = 2b``.  ``B`` is the
    exact maximum of ``|gradient|`` over the box of quantities (equal to ``a``
    for zero costs and small enough boxes).
    """
    if not (a > 0):
        raise ValueError("price intercept a must be positive")
    if not (b > 0):
        raise ValueError("price slope b must be positive")
    n = int(n)
    if n < 1:
        raise ValueError("need at least one firm")
    costs = np.zeros(n) if costs is None else np.asarray(costs, dtype=float)
    if costs.shape != (n,):
        raise ValueError("need one cost coefficient per firm")
    if intervals is None:
        intervals = [(0.0, 1.0)] * n
    intervals = [tuple(map(float, iv)) for iv in intervals]
    if len(intervals) != n:
        raise ValueError("need one quantity interval per firm")
    for lo, hi in intervals:
        if lo < 0 or hi <= lo:
            raise ValueError(f"bad quantity interval [{lo}, {hi}]")
    sets = tuple(interval_descriptor(lo, hi) for lo, hi in intervals)

    def grad(xs):
        s = np.array([x[0] for x in xs])
        total = s.sum()
        return [np.array([a - b * total - b * s[i] - costs[i]]) for i in range(n)]

    def util(xs):
        s = np.array([x[0] for x in xs])
        price = a - b * s.sum()
        return list(s * price - costs * s)

    lows = np.array([lo for lo, _ in intervals])
    highs = np.array([hi for _, hi in intervals])
    B = 0.0
    for i in range(n):
        # gradient is affine and decreasing in every quantity: extremes at the box corners
        g_max = a - b * lows.sum() - b * lows[i] - costs[i]
        g_min = a - b * highs.sum() - b * highs[i] - costs[i]
        B = max(B, abs(g_max), abs(g_min))
    return GameInstance("cournot", sets, grad, B=B, L=2.0 * b, utility_fn=util,
                        info={"a": a, "b": b, "costs": costs})


# ---------------------------------------------------------------------------
# JSON specifications


def build_from_spec(spec: dict) -> GameInstance:
    """Build a game from ``{"type": "normal_form"|"kuhn"|"cournot", ...}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("game spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "normal_form":
        if spec.get("preset") == "matching_pennies":
            return matching_pennies()
        if "payoffs" not in spec:
            raise ValueError("normal_form game needs 'payoffs'")
        trees = spec.get("treeplexes")
        if trees is not None:
            trees = [tp.from_json(t) for t in trees]
        return build_normal_form(spec["payoffs"], name=spec.get("name", "normal_form"),
                                 treeplexes=trees)
    if kind == "kuhn":
        return build_kuhn(int(spec.get("players", 2)))
    if kind == "cournot":
        return build_cournot(spec.get("a", 2.0), spec.get("b", 1.0), spec.get("n", 2),
                             spec.get("costs"), spec.get("intervals"))
    raise ValueError(f"unknown game type {kind!r}")
