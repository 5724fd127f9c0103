"""Tree-indexed percolation models built from line laws.

A fission model gives every vertex a bit drawn from the line law's
conditional next-bit probability given the bits on its ancestor path, with
disjoint subtrees conditionally independent given their common ancestors.
Every downward path then carries the line law. The multiplex model instead
copies a single line sample level by level.

Convention used throughout: ``P(o <-> v)`` is the probability that all
``|v| + 1`` vertices of the root path of ``v`` (root included) are open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import line, shearer
from .errors import ConditioningError, DomainError, ResourceError
from .line import LineLaw
from .trees import RootedTree, confluent

MODEL_KINDS = ("canonical", "cutup", "minimal", "multiplex", "iid")
FISSION_KINDS = ("canonical", "cutup", "minimal", "iid")
UNBOUNDED = math.inf

# 2**20 configurations is the largest joint law we enumerate
BRUTE_FORCE_CAP = 20


@dataclass(frozen=True, eq=False)
class PercolationModel:
    tree: RootedTree
    law: LineLaw
    kind: str
    k: int
    s: float = 0

    @property
    def p(self) -> float:
        return self.law.p

    @property
    def is_fission(self) -> bool:
        return self.kind in FISSION_KINDS

    def describe(self) -> dict:
        d = {"model": self.kind, "k": self.k, "p": self.p,
             "s": "unbounded" if self.s == UNBOUNDED else self.s,
             "tree": self.tree.spec.to_text(), "depth": self.tree.depth}
        if self.law.N is not None:
            d["N"] = self.law.N
        return d

    def allones(self, n: int) -> np.ndarray:
        """``a[j] = P(first j path vertices open)``, ``j = 0..n``; cached."""
        cache = self.__dict__.setdefault("_allones", np.ones(1))
        if len(cache) <= n:
            cache = line.allones_series(self.law, max(n, 2 * len(cache)))
            self.__dict__["_allones"] = cache
        return cache[:n + 1]


@dataclass(frozen=True)
class PercolationSample:
    bits: np.ndarray
    seed: int
    tree: RootedTree

    def rows(self):
        """(vertex_id, level, bit) triples in breadth-first order."""
        levels = self.tree.levels
        for v in range(len(self.bits)):
            yield v, int(levels[v]), int(self.bits[v])


def make_model(kind: str, tree: RootedTree, k: int = 0, p: float | None = None,
               N: int | None = None) -> PercolationModel:
    if kind not in MODEL_KINDS:
        raise DomainError(f"unknown model kind {kind!r}")
    if kind == "canonical":
        law = line.make_law("shearer_factor", k=k, p=p)
    elif kind == "multiplex":
        law = line.make_law("shearer_factor", k=k, p=p)
        return PercolationModel(tree, law, kind, k, UNBOUNDED)
    elif kind == "cutup":
        law = line.make_law("cutup", k=k, N=N)
    elif kind == "minimal":
        law = line.make_law("minimal", k=k, p=p)
    else:
        law = line.make_law("iid", p=p)
        k = 0
    return PercolationModel(tree, law, kind, k, 0)


# -- sampling ------------------------------------------------------------------
def step_beliefs(law: LineLaw, n: int, belief: np.ndarray, u: np.ndarray):
    """Draw position-``n`` bits for rows of filtered beliefs.

    ``belief`` has one row per vertex (distribution of the hidden state given
    the ancestor bits). Returns the bits and the updated, renormalized rows.
    """
    T0, T1 = law.matrices(n)
    one = belief @ T1
    p1 = one.sum(axis=1)
    bits = u < p1
    nxt = np.where(bits[:, None], one, belief @ T0)
    tot = nxt.sum(axis=1, keepdims=True)
    np.divide(nxt, tot, out=nxt, where=tot > 0)
    return bits, nxt


def fission_sample(model: PercolationModel, seed: int) -> PercolationSample:
    """One configuration on the whole truncated tree, breadth first."""
    tree, law = model.tree, model.law
    if tree.n_vertices > (1 << 24):
        raise ResourceError(f"{tree.n_vertices} vertices is too many to sample in full")
    rng = line.stream_rng(seed, 0)
    if model.kind == "multiplex":
        z = line.apply_rule(
            law, (rng.random(tree.depth + 1 + law.k) < law.xi).astype(np.int8), tree.depth + 1)
        return PercolationSample(np.repeat(z, tree.level_sizes).astype(np.int8), seed, tree)
    out = []
    belief = law.initial[None, :].copy()
    positions = np.zeros(1, dtype=np.int64)
    for lev in range(tree.depth + 1):
        bits, belief = step_beliefs(law, lev, belief, rng.random(len(positions)))
        out.append(bits.astype(np.int8))
        if lev < tree.depth:
            rows, positions = tree.child_positions(lev, positions)
            belief = belief[rows]
    return PercolationSample(np.concatenate(out), seed, tree)


# -- exact oracles -------------------------------------------------------------
def exact_path_prob(model: PercolationModel, bits: Sequence[int]) -> float:
    """Probability of a configuration on the root-down path of length ``len(bits)``."""
    if len(bits) > model.tree.depth + 1:
        raise DomainError("configuration longer than the tree")
    return line.pattern_prob(model.law, list(bits))


def reach_prob(model: PercolationModel, v: int) -> float:
    """``P(o <-> v)``."""
    return float(model.allones(model.tree.level(v) + 1)[-1])


def exact_kernel(model: PercolationModel, v: int, w: int) -> float:
    """``P(o<->v, o<->w) / (P(o<->v) P(o<->w))`` for fission models."""
    if not model.is_fission:
        raise DomainError("exact_kernel needs a fission model; use multiplex_kernel",
                          threshold="fission kind")
    if reach_prob(model, v) <= 0 or reach_prob(model, w) <= 0:
        raise ConditioningError(f"P(o<->v) = 0 for v in ({v}, {w}); the kernel is undefined")
    u, _ = confluent(model.tree, v, w)
    return float(1.0 / model.allones(model.tree.level(u) + 1)[-1])


def kernel_from_levels(model: PercolationModel, lu, lv=None, lw=None):
    """Kernel as a function of levels (vectorizes over numpy arrays)."""
    lu = np.asarray(lu)
    if model.is_fission:
        a = model.allones(int(np.max(lu)) + 1)
        return 1.0 / a[lu + 1]
    lv, lw = np.asarray(lv), np.asarray(lw)
    a = model.allones(int(max(np.max(lv), np.max(lw))) + 1)
    return a[np.maximum(lv, lw) + 1] / (a[lv + 1] * a[lw + 1])


def multiplex_kernel(model: PercolationModel, v: int, w: int) -> float:
    """Kernel of the level-copy model: both paths open iff the deeper one is."""
    tree = model.tree
    lv, lw = tree.level(v), tree.level(w)
    a = model.allones(max(lv, lw) + 1)
    if a[lv + 1] <= 0 or a[lw + 1] <= 0:
        raise ConditioningError(f"P(o<->v) = 0 for v in ({v}, {w}); the kernel is undefined")
    return float(a[max(lv, lw) + 1] / (a[lv + 1] * a[lw + 1]))


def exact_reach(model: PercolationModel, depth: int | None = None) -> float:
    """``P(root connects to level depth)`` exactly.

    Fission models: conditional on an all-open ancestor path of length ``j``
    a vertex is open with probability ``a[j+1]/a[j]`` and its child subtrees
    are then independent, which gives a bottom-up product recursion.
    """
    tree = model.tree
    n = tree.depth if depth is None else depth
    if n > tree.depth:
        raise DomainError("depth beyond the tree")
    a = model.allones(n + 1)
    if model.kind == "multiplex":
        return float(a[n + 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(a[:-1] > 0, a[1:] / np.where(a[:-1] > 0, a[:-1], 1), 0.0)
    if tree.is_level_uniform:
        R = c[n]
        for j in range(n - 1, -1, -1):
            R = c[j] * (1.0 - (1.0 - R) ** tree.child_counts(j))
        return float(R)
    R = np.full(tree.level_sizes[n], c[n])
    for j in range(n - 1, -1, -1):
        miss = np.ones(tree.level_sizes[j])
        np.multiply.at(miss, tree.parent_positions(j + 1), 1.0 - R)
        # leaves above level n never reach it
        has_kids = np.asarray(tree.child_counts(j)) > 0
        R = np.where(has_kids, c[j] * (1.0 - miss), 0.0)
    return float(R[0])


# -- brute force over all configurations ---------------------------------------
def brute_force_distribution(model: PercolationModel) -> np.ndarray:
    """Joint law over all ``2**V`` configurations; bit ``v`` of the index is ``Z_v``.

    Built from the product of conditional factors, each vertex's factor being
    the line law's next-bit probability given its ancestors' bits.
    """
    tree, law = model.tree, model.law
    V = tree.n_vertices
    if V > BRUTE_FORCE_CAP:
        raise ResourceError(f"{V} vertices exceeds the brute-force cap {BRUTE_FORCE_CAP}")
    idx = np.arange(1 << V, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(V)[None, :]) & 1).astype(np.int8)
    if model.kind == "multiplex":
        prob = np.zeros(1 << V)
        ok = np.ones(1 << V, dtype=bool)
        for lev in range(tree.depth + 1):
            vs = list(tree.level_vertices(lev))
            ok &= np.all(bits[:, vs] == bits[:, [vs[0]]], axis=1)
        firsts = [tree.level_offsets[lev] for lev in range(tree.depth + 1)]
        table = _history_table(law, tree.depth + 1, full=True)
        code = (bits[:, firsts].astype(np.int64) << np.arange(len(firsts))).sum(axis=1)
        prob[ok] = table[code[ok]]
        return prob
    prob = np.ones(1 << V)
    cond = [_history_table(law, j) for j in range(tree.depth + 1)]
    for v in range(V):
        path = tree.path_from_root(v)
        j = len(path) - 1
        code = (bits[:, path[:-1]].astype(np.int64) << np.arange(j)).sum(axis=1) if j else 0
        c = cond[j][code]
        prob *= np.where(bits[:, v] == 1, c, 1.0 - c)
    return prob


def _history_table(law: LineLaw, j: int, full: bool = False) -> np.ndarray:
    """Next-bit probability after each of the ``2**j`` histories (0 if impossible).

    With ``full`` returns instead the probability of each length-``j`` word.
    """
    out = np.zeros(1 << j)
    for code in range(1 << j):
        hist = [(code >> i) & 1 for i in range(j)]
        if full:
            out[code] = line.prefix_prob(law, hist)
            continue
        if line.prefix_prob(law, hist) <= 0:
            continue
        out[code] = line.next_bit_prob(law, hist)
    return out


def open_reach_indicators(tree: RootedTree, bits: np.ndarray, depth: int) -> np.ndarray:
    """Per configuration row and vertex: open path from the vertex down to ``depth``."""
    reach = np.zeros_like(bits, dtype=bool)
    for lev in range(depth, -1, -1):
        for v in tree.level_vertices(lev):
            if lev == depth:
                reach[:, v] = bits[:, v] == 1
            else:
                kids = list(tree.children(v))
                below = reach[:, kids].any(axis=1) if kids else False
                reach[:, v] = (bits[:, v] == 1) & below
    return reach


def _config_bits(V: int) -> np.ndarray:
    idx = np.arange(1 << V, dtype=np.int64)
    return ((idx[:, None] >> np.arange(V)[None, :]) & 1).astype(np.int8)


def brute_force_reach(model: PercolationModel, depth: int | None = None) -> float:
    tree = model.tree
    n = tree.depth if depth is None else depth
    prob = brute_force_distribution(model)
    bits = _config_bits(tree.n_vertices)
    return float(prob[open_reach_indicators(tree, bits, n)[:, 0]].sum())


def brute_force_kernel(model: PercolationModel, v: int, w: int,
                       prob: np.ndarray | None = None) -> float:
    """Kernel from the full joint law (both root paths all open)."""
    tree = model.tree
    if prob is None:
        prob = brute_force_distribution(model)
    bits = _config_bits(tree.n_vertices)
    pv, pw = tree.path_from_root(v), tree.path_from_root(w)
    ov = bits[:, pv].all(axis=1)
    ow = bits[:, pw].all(axis=1)
    if prob[ov].sum() <= 0 or prob[ow].sum() <= 0:
        raise ConditioningError(f"P(o<->v) = 0 for v in ({v}, {w}); the kernel is undefined")
    return float(prob[ov & ow].sum() / (prob[ov].sum() * prob[ow].sum()))


def shearer_minimum_check(model: PercolationModel, n: int) -> float:
    """``P(o <-> level-n vertex) - xi**(n+1)`` for canonical models (nonnegative)."""
    if model.kind != "canonical":
        raise DomainError("only defined for the canonical model")
    return float(model.allones(n + 1)[-1] - shearer.xi(model.k, model.p).xi ** (n + 1))
