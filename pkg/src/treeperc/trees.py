"""Rooted trees, flows, cutsets and k-fuzz graphs.

Trees are finite truncations of a locally finite rooted tree. Vertices are
dense integers in breadth-first order, so vertex ``v`` lives at position
``v - level_offsets[level]`` inside its level. Families whose child count is
constant on each level (d-ary, periodic, single ray) are stored implicitly,
which keeps deep truncations (2**40 vertices and more) cheap as long as
nothing asks for per-vertex arrays.
"""

from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstructionError, DomainError, ResourceError

#: refuse to materialize per-vertex arrays beyond this many vertices
MATERIALIZE_CAP = 1 << 25

TREE_KINDS = ("d_ary", "periodic", "single_ray", "explicit")


@dataclass(frozen=True)
class TreeSpec:
    """Generator of tree truncations.

    ``d_ary`` uses ``d``; ``periodic`` gives every vertex at a depth divisible
    by ``m`` two children and all others one; ``explicit`` lists child counts
    per vertex in breadth-first order.
    """

    kind: str
    d: int | None = None
    m: int | None = None
    children: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in TREE_KINDS:
            raise ConstructionError(f"unknown tree kind {self.kind!r}")
        if self.kind == "d_ary" and (self.d is None or self.d < 1):
            raise DomainError("d_ary requires d >= 1", threshold="d >= 1")
        if self.kind == "periodic" and (self.m is None or self.m < 1):
            raise DomainError("periodic requires m >= 1", threshold="m >= 1")
        if self.kind == "explicit":
            if self.children is None:
                raise ConstructionError("explicit tree needs children counts")
            counts = tuple(int(c) for c in self.children)
            if any(c < 0 for c in counts):
                raise ConstructionError("negative child count")
            if len(counts) != 1 + sum(counts):
                raise ConstructionError(
                    f"{len(counts)} vertices listed but child counts imply "
                    f"{1 + sum(counts)}"
                )
            object.__setattr__(self, "children", counts)

    @classmethod
    def d_ary(cls, d: int) -> "TreeSpec":
        return cls("d_ary", d=d)

    @classmethod
    def periodic(cls, m: int) -> "TreeSpec":
        return cls("periodic", m=m)

    @classmethod
    def single_ray(cls) -> "TreeSpec":
        return cls("single_ray")

    @classmethod
    def explicit(cls, children: Sequence[int]) -> "TreeSpec":
        return cls("explicit", children=tuple(children))

    def to_text(self) -> str:
        if self.kind == "d_ary":
            return f"d_ary:{self.d}"
        if self.kind == "periodic":
            return f"periodic:{self.m}"
        if self.kind == "single_ray":
            return "single_ray"
        return "explicit:" + ",".join(str(c) for c in self.children)

    @classmethod
    def from_text(cls, text: str) -> "TreeSpec":
        """Parse ``d_ary:2``, ``periodic:3``, ``single_ray`` or ``explicit:2,0,0``.

        ``kind=d_ary,d=2`` style fragments are accepted too.
        """
        text = text.strip()
        if "=" in text:
            fields = dict(part.split("=", 1) for part in text.split(";"))
            kind = fields.pop("kind")
            if kind == "explicit":
                return cls.explicit([int(c) for c in fields["children"].split(",")])
            return cls(kind, **{k: int(v) for k, v in fields.items()})
        kind, _, arg = text.partition(":")
        try:
            if kind == "d_ary":
                return cls.d_ary(int(arg))
            if kind == "periodic":
                return cls.periodic(int(arg))
            if kind == "single_ray":
                return cls.single_ray()
            if kind == "explicit":
                return cls.explicit([int(c) for c in arg.split(",") if c])
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise ConstructionError(f"cannot parse tree spec {text!r}") from exc
        raise ConstructionError(f"cannot parse tree spec {text!r}")

    def level_child_count(self, level: int) -> int:
        """Child count shared by every vertex on ``level`` (implicit kinds only)."""
        if self.kind == "d_ary":
            return self.d
        if self.kind == "periodic":
            return 2 if level % self.m == 0 else 1
        if self.kind == "single_ray":
            return 1
        raise ConstructionError("explicit trees have no per-level child count")


class RootedTree:
    """Finite truncation of a rooted tree with breadth-first vertex indices."""

    def __init__(self, spec: TreeSpec, counts: list, level_sizes: list[int]):
        # counts[j] is an int (uniform level) or an int array over level j
        self.spec = spec
        self._counts = counts
        self.level_sizes = tuple(level_sizes)
        self.depth = len(level_sizes) - 1
        offsets = [0]
        for size in level_sizes:
            offsets.append(offsets[-1] + size)
        self.level_offsets = tuple(offsets)
        self._starts = [
            None if isinstance(c, int) else np.concatenate(([0], np.cumsum(c)[:-1]))
            for c in counts
        ]
        self._parents = None
        self._children = None

    # -- sizes and positions -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.level_offsets[-1]

    @property
    def root(self) -> int:
        return 0

    @property
    def is_level_uniform(self) -> bool:
        return all(isinstance(c, int) for c in self._counts)

    def _check(self, v: int) -> None:
        if not 0 <= v < self.n_vertices:
            raise DomainError(f"vertex {v} out of range [0, {self.n_vertices})")

    def level(self, v: int) -> int:
        self._check(v)
        return bisect.bisect_right(self.level_offsets, v) - 1

    def position(self, v: int) -> tuple[int, int]:
        lev = self.level(v)
        return lev, v - self.level_offsets[lev]

    def vertex(self, level: int, pos: int) -> int:
        return self.level_offsets[level] + pos

    def level_vertices(self, n: int) -> range:
        return range(self.level_offsets[n], self.level_offsets[n + 1])

    def child_counts(self, level: int):
        """Child counts of the vertices on ``level``: an int when uniform."""
        if level >= self.depth:
            return 0
        return self._counts[level]

    # -- navigation ------------------------------------------------------------
    def parent(self, v: int) -> int | None:
        lev, pos = self.position(v)
        if lev == 0:
            return None
        c = self._counts[lev - 1]
        if isinstance(c, int):
            ppos = pos // c
        else:
            ppos = int(np.searchsorted(self._starts[lev - 1], pos, side="right")) - 1
            while c[ppos] == 0:
                ppos -= 1
        return self.vertex(lev - 1, ppos)

    def children(self, v: int) -> range:
        lev, pos = self.position(v)
        if lev >= self.depth:
            return range(0)
        c = self._counts[lev]
        if isinstance(c, int):
            start, n = pos * c, c
        else:
            start, n = int(self._starts[lev][pos]), int(c[pos])
        base = self.level_offsets[lev + 1] + start
        return range(base, base + n)

    def child_positions(self, level: int, positions: np.ndarray):
        """Vectorized children: (parent row index, child position) arrays."""
        positions = np.asarray(positions, dtype=np.int64)
        c = self._counts[level]
        if isinstance(c, int):
            rows = np.repeat(np.arange(len(positions)), c)
            kids = (positions[:, None] * c + np.arange(c)[None, :]).ravel()
            return rows, kids
        counts = c[positions]
        rows = np.repeat(np.arange(len(positions)), counts)
        first = np.repeat(self._starts[level][positions], counts)
        within = np.arange(len(rows)) - np.repeat(np.cumsum(counts) - counts, counts)
        return rows, first + within

    def parent_positions(self, level: int) -> np.ndarray:
        """Position (within ``level - 1``) of the parent of each vertex on ``level``."""
        if level == 0:
            return np.zeros(0, dtype=np.int64)
        size = self.level_sizes[level]
        if size > MATERIALIZE_CAP:
            raise ResourceError(f"level {level} has {size} vertices")
        c = self._counts[level - 1]
        if isinstance(c, int):
            return np.arange(size, dtype=np.int64) // c
        return np.repeat(np.arange(len(c), dtype=np.int64), c)

    def path_from_root(self, v: int) -> list[int]:
        path = [v]
        while (u := self.parent(path[-1])) is not None:
            path.append(u)
        return path[::-1]

    def is_ancestor(self, a: int, v: int) -> bool:
        """True when ``a`` lies on the geodesic from the root to ``v`` (inclusive)."""
        la, lv = self.level(a), self.level(v)
        while lv > la:
            v = self.parent(v)
            lv -= 1
        return v == a

    # -- materialized views ----------------------------------------------------
    def _require_small(self):
        if self.n_vertices > MATERIALIZE_CAP:
            raise ResourceError(
                f"tree has {self.n_vertices} vertices, above cap {MATERIALIZE_CAP}"
            )

    @property
    def parents(self) -> np.ndarray:
        """Parent index per vertex; the root maps to -1."""
        if self._parents is None:
            self._require_small()
            out = np.full(self.n_vertices, -1, dtype=np.int64)
            for lev in range(1, self.depth + 1):
                out[self.level_offsets[lev]:self.level_offsets[lev + 1]] = (
                    self.parent_positions(lev) + self.level_offsets[lev - 1]
                )
            self._parents = out
        return self._parents

    @property
    def levels(self) -> np.ndarray:
        self._require_small()
        return np.repeat(np.arange(self.depth + 1), self.level_sizes)

    @property
    def children_lists(self) -> list[list[int]]:
        if self._children is None:
            self._require_small()
            self._children = [list(self.children(v)) for v in range(self.n_vertices)]
        return self._children

    def __repr__(self):
        return f"RootedTree({self.spec.to_text()}, depth={self.depth}, n={self.n_vertices})"


def build_tree(spec: TreeSpec, depth: int) -> RootedTree:
    """Deterministic truncation of the tree described by ``spec`` at ``depth``."""
    if depth < 0:
        raise DomainError("depth must be nonnegative", threshold="depth >= 0")
    if spec.kind != "explicit":
        counts, sizes = [], [1]
        for lev in range(depth):
            c = spec.level_child_count(lev)
            counts.append(c)
            sizes.append(sizes[-1] * c)
        return RootedTree(spec, counts, sizes)

    all_counts = np.asarray(spec.children, dtype=np.int64)
    counts, sizes = [], [1]
    start = 0
    for _ in range(depth):
        level_counts = all_counts[start:start + sizes[-1]]
        nxt = int(level_counts.sum())
        if nxt == 0:
            break
        counts.append(level_counts)
        start += sizes[-1]
        sizes.append(nxt)
    return RootedTree(spec, counts, sizes)


def confluent(tree: RootedTree, v: int, w: int) -> tuple[int, list[int]]:
    """Deepest common ancestor of ``v`` and ``w`` plus the geodesic root..confluent."""
    tree._check(v)
    tree._check(w)
    lv, lw = tree.level(v), tree.level(w)
    while lv > lw:
        v, lv = tree.parent(v), lv - 1
    while lw > lv:
        w, lw = tree.parent(w), lw - 1
    while v != w:
        v, w = tree.parent(v), tree.parent(w)
    return v, tree.path_from_root(v)


def branching_number(spec: TreeSpec) -> float:
    if spec.kind == "d_ary":
        return float(spec.d)
    if spec.kind == "periodic":
        return 2.0 ** (1.0 / spec.m)
    if spec.kind == "single_ray":
        return 1.0
    raise DomainError("branching number is only available for infinite families",
                      threshold="closed-form family")


# -- cutsets and flows ---------------------------------------------------------
@dataclass(frozen=True)
class Cutset:
    """Vertex cutset; ``level`` set means "all vertices on that level"."""

    vertices: frozenset = field(default_factory=frozenset)
    level: int | None = None

    @classmethod
    def at_level(cls, n: int) -> "Cutset":
        return cls(level=n)

    @classmethod
    def of(cls, vertices: Iterable[int]) -> "Cutset":
        return cls(vertices=frozenset(int(v) for v in vertices))

    def validate(self, tree: RootedTree) -> None:
        if self.level is not None:
            if not 0 <= self.level <= tree.depth:
                raise ConstructionError(f"level {self.level} outside the truncation")
            return
        if not self.vertices:
            raise ConstructionError("empty cutset")
        for v in self.vertices:
            tree._check(v)
        for v in self.vertices:
            for a in tree.path_from_root(v)[:-1]:
                if a in self.vertices:
                    raise ConstructionError(f"cutset contains {a}, an ancestor of {v}")
        # every root-to-deepest-level path must hit the set
        queue = deque([tree.root])
        while queue:
            u = queue.popleft()
            if u in self.vertices:
                continue
            if tree.level(u) == tree.depth:
                raise ConstructionError(f"vertex {u} reachable from the root avoiding the cutset")
            queue.extend(tree.children(u))


def cutset_sum(tree: RootedTree, lam: float, cutset: Cutset) -> float:
    """Sum of ``lam ** -level`` over the cutset."""
    cutset.validate(tree)
    if cutset.level is not None:
        return tree.level_sizes[cutset.level] * lam ** (-cutset.level)
    return math.fsum(lam ** (-tree.level(v)) for v in cutset.vertices)


@dataclass
class FlowAssignment:
    """Flow values stored per level.

    On level-uniform trees every vertex of a level carries the same value and
    each level array has length one.
    """

    lam: float
    levels: list
    uniform: bool
    tree: RootedTree

    def value(self, v: int) -> float:
        lev, pos = self.tree.position(v)
        return float(self.levels[lev][0 if self.uniform else pos])

    def level_values(self, n: int) -> np.ndarray:
        """Per-vertex values on level ``n`` (broadcast when uniform)."""
        vals = self.levels[n]
        if self.uniform:
            return np.full(self.tree.level_sizes[n], vals[0])
        return vals

    @property
    def root_value(self) -> float:
        return float(self.levels[0][0])


def lambda_flow(tree: RootedTree, lam: float) -> FlowAssignment:
    """Maximal flow with capacities ``lam ** -level``.

    Bottom-up: leaves take their capacity, inner vertices the minimum of
    their capacity and the children's total. A top-down pass then rescales
    children proportionally so that conservation holds exactly.
    """
    if lam < 1:
        raise DomainError(f"lambda = {lam} < 1", threshold="lambda >= 1")
    depth = tree.depth
    if tree.is_level_uniform:
        up = [0.0] * (depth + 1)
        up[depth] = lam ** (-depth)
        for lev in range(depth - 1, -1, -1):
            up[lev] = min(lam ** (-lev), tree.child_counts(lev) * up[lev + 1])
        vals = [up[0]]
        for lev in range(1, depth + 1):
            vals.append(vals[-1] / tree.child_counts(lev - 1))
        return FlowAssignment(lam, [np.array([x]) for x in vals], True, tree)

    up = [None] * (depth + 1)
    up[depth] = np.full(tree.level_sizes[depth], lam ** (-depth))
    for lev in range(depth - 1, -1, -1):
        size = tree.level_sizes[lev]
        agg = np.bincount(tree.parent_positions(lev + 1), weights=up[lev + 1],
                          minlength=size)
        has_kids = np.asarray(tree.child_counts(lev)) > 0
        cap = lam ** (-lev)
        up[lev] = np.where(has_kids, np.minimum(cap, agg), cap)
    vals = [up[0]]
    for lev in range(1, depth + 1):
        parent = tree.parent_positions(lev)
        agg = np.bincount(parent, weights=up[lev], minlength=tree.level_sizes[lev - 1])
        scale = np.divide(vals[-1], agg, out=np.zeros_like(agg), where=agg > 0)
        vals.append(up[lev] * scale[parent])
    return FlowAssignment(lam, vals, False, tree)


# -- finite graphs -------------------------------------------------------------
@dataclass(frozen=True)
class FiniteGraph:
    vertices: tuple
    edges: frozenset

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ConstructionError("duplicate vertex")
        clean = set()
        for e in self.edges:
            a, b = tuple(e) if len(e) == 2 else (None, None)
            if a is None or a == b:
                raise ConstructionError(f"bad edge {e!r}")
            if a not in vs or b not in vs:
                raise ConstructionError(f"edge {e!r} leaves the vertex set")
            clean.add(frozenset((a, b)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, vertices: Iterable, edges: Iterable) -> "FiniteGraph":
        return cls(tuple(vertices), frozenset(frozenset(e) for e in edges))

    def __len__(self):
        return len(self.vertices)

    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    def neighbour_masks(self) -> list[int]:
        """Open-neighbourhood bitmask per vertex (bit i = ``vertices[i]``)."""
        idx = self.index()
        masks = [0] * len(self.vertices)
        for e in self.edges:
            a, b = tuple(e)
            masks[idx[a]] |= 1 << idx[b]
            masks[idx[b]] |= 1 << idx[a]
        return masks

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def induced(self, subset: Iterable) -> "FiniteGraph":
        wanted = set(subset)
        keep = [v for v in self.vertices if v in wanted]
        ks = set(keep)
        return FiniteGraph(tuple(keep), frozenset(e for e in self.edges if e <= ks))

    def is_independent(self, subset: Iterable) -> bool:
        s = set(subset)
        return not any(e <= s for e in self.edges)


def path_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(range(n), [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(range(n), [(i, j) for i in range(n) for j in range(i + 1, n)])


def k_fuzz(graph: FiniteGraph, k: int) -> FiniteGraph:
    """Join all distinct pairs at graph distance at most ``k``."""
    if k < 0:
        raise DomainError("k must be nonnegative", threshold="k >= 0")
    if k == 1:
        return graph
    adj = graph.adjacency()
    edges = set()
    for s in graph.vertices:
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if dist[u] == k:
                continue
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        edges.update(frozenset((s, w)) for w, d in dist.items() if 0 < d)
    return FiniteGraph(graph.vertices, frozenset(edges))


def kfuzz_path(n: int, k: int) -> FiniteGraph:
    """The k-fuzz of a path on ``n`` vertices, built directly."""
    return FiniteGraph.from_edges(
        range(n), [(i, j) for i in range(n) for j in range(i + 1, min(n, i + k + 1))]
    )
