"""Monte Carlo exploration of percolation configurations.

Replicas are processed in fixed-size blocks. Block ``b`` draws all of its
randomness from the stream ``(seed, b)`` in a fixed order, so results depend
only on (model, depth, replicas, seed, block size) and never on how blocks are
spread over worker processes.

Exploration is level-synchronous: one array row per explored vertex holding
the replica id, the vertex position on its level, and the filtered hidden
state of the line law given the ancestor bits. Rows whose vertex is closed
are expanded according to ``policy``:

* ``"none"``: not expanded; only the root cluster is explored.
* ``"full"``: all children expanded; every cluster of the truncation is seen.
* ``"chain"``: on each level one closed row per replica, chosen uniformly,
  expands one uniformly chosen child. Open rows always expand all children,
  so every explored cluster is explored completely and has its exact law;
  only the other clusters are skipped. This keeps the work per replica
  linear in depth when clusters are bounded.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import line
from .errors import DomainError, ResourceError
from .fission import PercolationModel, step_beliefs

BLOCK_SIZE = 4096
MAX_ROWS = 20_000_000
POLICIES = ("none", "full", "chain")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class ReachEstimate:
    depth: int
    replicas: int
    estimate: float
    half_width: float
    ci_lo: float
    ci_hi: float
    seed: int


@dataclass
class DiameterStats:
    depth: int
    replicas: int
    seed: int
    policy: str
    per_replica: np.ndarray = field(repr=False)

    @property
    def max(self) -> int:
        return int(self.per_replica.max()) if len(self.per_replica) else 0

    @property
    def histogram(self) -> np.ndarray:
        """``histogram[d]`` = number of replicas whose largest diameter is ``d``."""
        return np.bincount(self.per_replica, minlength=self.max + 1)

    def violations(self, bound: int) -> int:
        return int(np.count_nonzero(self.per_replica > bound))


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise DomainError("need at least one replica", threshold="replicas >= 1")
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _law_is_degenerate(model: PercolationModel) -> bool:
    law = model.law
    vals = [law.p]
    if law.kind == "minimal":
        vals = [law.driver_p]
    elif law.kind == "shearer_factor":
        vals = [law.xi]
    elif law.beta is not None:
        vals = list(law.beta)
    return all(v in (0.0, 1.0) for v in vals)


# -- one block -------------------------------------------------------------------
def run_block(model: PercolationModel, depth: int, block: int, size: int, seed: int,
              mode: str, policy: str) -> np.ndarray:
    """Per-replica result for one block.

    ``mode="reach"``: deepest level reached by the root cluster (-1 if the root
    is closed). ``mode="diameter"``: largest diameter over explored clusters.
    """
    tree, law = model.tree, model.law
    rng = line.stream_rng(seed, block)
    multiplex = model.kind == "multiplex"
    if multiplex:
        nd = depth + 1 + law.k
        drivers = (rng.random((size, nd)) < law.xi).astype(np.int8)
        level_bits = line.apply_rule(law, drivers, depth + 1).astype(bool)

    rep = np.arange(size, dtype=np.int64)
    pos = np.zeros(size, dtype=np.int64)
    belief = None if multiplex else np.repeat(law.initial[None, :], size, axis=0)
    deepest = np.full(size, -1, dtype=np.int64)
    # per-level records for the bottom-up diameter pass
    records = []
    parent_row = np.full(size, -1, dtype=np.int64)

    for lev in range(depth + 1):
        m = len(rep)
        if m > MAX_ROWS:
            raise ResourceError(
                f"{m} explored vertices at level {lev} exceeds {MAX_ROWS}; "
                "use fewer replicas per block or a shallower depth")
        if multiplex:
            bits = level_bits[rep, lev]
        else:
            bits, belief = step_beliefs(law, lev, belief, rng.random(m))
        if mode == "reach":
            deepest[rep[bits]] = lev
        else:
            records.append((rep, parent_row, bits))
        if lev == depth or m == 0:
            break
        if policy == "none" or mode == "reach":
            keep = bits
        else:
            keep = np.ones(m, dtype=bool)
        src = np.flatnonzero(keep)
        rows, kids = tree.child_positions(lev, pos[src])
        rows = src[rows]
        if policy == "chain" and mode != "reach":
            # per replica one closed row continues, through one child; both
            # choices are uniform and independent of the configuration below
            closed = np.flatnonzero(~bits)
            if len(closed):
                order = np.lexsort((rng.random(len(closed)), rep[closed]))
                closed = closed[order]
                firsts = np.r_[True, rep[closed[1:]] != rep[closed[:-1]]]
                chosen_row = np.zeros(m, dtype=bool)
                chosen_row[closed[firsts]] = True
                counts = np.bincount(rows, minlength=m)
                start = np.concatenate(([0], np.cumsum(counts)[:-1]))
                pick = chosen_row & (counts > 0)
                draw = (rng.random(m) * counts).astype(np.int64)
                mask = bits[rows].copy()
                mask[start[pick] + np.minimum(draw[pick], counts[pick] - 1)] = True
                rows, kids = rows[mask], kids[mask]
        rep = rep[rows]
        pos = kids
        parent_row = rows
        if belief is not None:
            belief = belief[rows]

    if mode == "reach":
        return deepest
    return _max_diameters(records, size)


def _max_diameters(records, size: int) -> np.ndarray:
    """Largest open-cluster diameter per replica from the level records."""
    best = np.zeros(size, dtype=np.int64)
    height = None  # height of the open subtree below each row of the current level
    for lev in range(len(records) - 1, -1, -1):
        rep, parent_row, bits = records[lev]
        m = len(rep)
        top1 = np.zeros(m, dtype=np.int64)
        top2 = np.zeros(m, dtype=np.int64)
        if height is not None and lev + 1 < len(records):
            _, child_parent, child_bits = records[lev + 1]
            live = child_bits & bits[child_parent]
            par = child_parent[live]
            val = height[live] + 1
            if len(par):
                order = np.lexsort((-val, par))
                par, val = par[order], val[order]
                starts = np.flatnonzero(np.r_[True, par[1:] != par[:-1]])
                top1[par[starts]] = val[starts]
                second = starts + 1
                ok = second < len(par)
                ok[ok] = par[second[ok]] == par[starts[ok]]
                top2[par[starts[ok]]] = val[second[ok]]
        through = np.where(bits, top1 + top2, 0)
        if m:
            np.maximum.at(best, rep[bits], through[bits])
        height = np.where(bits, top1, 0)
    return best


# -- drivers -----------------------------------------------------------------------
def _run(model, depth, replicas, seed, mode, policy, workers, block_size):
    if replicas <= 0:
        raise DomainError("replicas must be positive", threshold="replicas >= 1")
    if depth > model.tree.depth or depth < 0:
        raise DomainError(f"depth {depth} outside the tree (depth {model.tree.depth})")
    if policy not in POLICIES:
        raise DomainError(f"unknown exploration policy {policy!r}")
    nblocks = -(-replicas // block_size)
    sizes = [min(block_size, replicas - b * block_size) for b in range(nblocks)]
    args = [(model, depth, b, sizes[b], seed, mode, policy) for b in range(nblocks)]
    if workers <= 1 or nblocks == 1:
        parts = [run_block(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block_star, args))
    return np.concatenate(parts)


def _run_block_star(a):
    return run_block(*a)


def reach_depths(model: PercolationModel, depth: int, replicas: int, seed: int,
                 workers: int = 1, block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Deepest level reached by the root cluster, per replica."""
    return _run(model, depth, replicas, seed, "reach", "none", workers, block_size)


def reach_curve(model: PercolationModel, depth: int, replicas: int, seed: int,
                workers: int = 1, block_size: int = BLOCK_SIZE) -> list[ReachEstimate]:
    """Estimates of ``P(o <-> level n)`` for ``n = 0..depth`` from one run."""
    deep = reach_depths(model, depth, replicas, seed, workers, block_size)
    degenerate = _law_is_degenerate(model)
    out = []
    for n in range(depth + 1):
        hits = int(np.count_nonzero(deep >= n))
        est = hits / replicas
        if degenerate:
            lo = hi = est
        else:
            lo, hi = wilson_interval(hits, replicas)
        out.append(ReachEstimate(n, replicas, est, (hi - lo) / 2, lo, hi, seed))
    return out


def simulate_reach(model: PercolationModel, depth: int, replicas: int, seed: int,
                   workers: int = 1, block_size: int = BLOCK_SIZE) -> ReachEstimate:
    return reach_curve(model, depth, replicas, seed, workers, block_size)[-1]


FULL_EXPLORATION_CAP = 1 << 16


def cluster_diameter_stats(model: PercolationModel, depth: int, replicas: int, seed: int,
                           policy: str | None = None, workers: int = 1,
                           block_size: int = BLOCK_SIZE) -> DiameterStats:
    """Largest open-cluster diameter per replica.

    ``policy`` defaults to ``"full"`` when the truncation at ``depth`` has at
    most ``FULL_EXPLORATION_CAP`` vertices and to ``"chain"`` otherwise.
    """
    if policy is None:
        policy = "full" if model.tree.level_offsets[depth + 1] <= FULL_EXPLORATION_CAP else "chain"
    if policy == "full" and block_size * model.tree.level_sizes[depth] > MAX_ROWS:
        block_size = max(1, MAX_ROWS // model.tree.level_sizes[depth])
    per = _run(model, depth, replicas, seed, "diameter", policy, workers, block_size)
    return DiameterStats(depth, replicas, seed, policy, per)
