"""Exact computations with Shearer's signed measure.

All functions use ``q = 1 - p``. The critical function of a graph is the
alternating independent-set sum ``sum_T (-q)**|T|``; it is evaluated with
the vertex-deletion recursion and memoized on vertex bitmasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ConditioningError, DomainError, ResourceError
from .trees import FiniteGraph

#: default vertex-count cap for subset-indexed computations
GRAPH_CAP = 24

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


def _masks(G: FiniteGraph, cap: int):
    if len(G) > cap:
        raise ResourceError(f"graph has {len(G)} vertices, above cap {cap}")
    return G.neighbour_masks()


def _critical_from_masks(nbrs: list[int], full: int, q: float) -> float:
    memo = {0: 1.0}

    def xi_of(mask):
        val = memo.get(mask)
        if val is not None:
            return val
        low = mask & -mask
        i = low.bit_length() - 1
        # split on the lowest vertex: sets avoiding it, sets containing it
        val = xi_of(mask ^ low) - q * xi_of(mask & ~(low | nbrs[i]))
        memo[mask] = val
        return val

    return xi_of(full)


def critical_function(G: FiniteGraph, p: float, cap: int = GRAPH_CAP) -> float:
    """Critical function of ``G`` at ``p``; negative values are allowed."""
    nbrs = _masks(G, cap)
    return _critical_from_masks(nbrs, (1 << len(G)) - 1, 1.0 - p)


def critical_function_table(G: FiniteGraph, p: float, cap: int = GRAPH_CAP) -> np.ndarray:
    """Critical function of every induced subgraph, indexed by vertex bitmask."""
    nbrs = _masks(G, cap)
    q = 1.0 - p
    n = len(G)
    table = np.empty(1 << n)
    table[0] = 1.0
    for b in range(n):
        lo = np.arange(1 << b)
        # masks with highest vertex b: drop b, or take b and drop its neighbours
        table[(1 << b):(1 << (b + 1))] = table[lo] - q * table[lo & ~nbrs[b]]
    return table


def independence_polynomial(G: FiniteGraph, cap: int = GRAPH_CAP) -> tuple[int, ...]:
    """Counts of independent sets by size, via the same deletion recursion."""
    nbrs = _masks(G, cap)

    @lru_cache(maxsize=None)
    def poly(mask):
        if mask == 0:
            return (1,)
        low = mask & -mask
        i = low.bit_length() - 1
        a = poly(mask ^ low)
        b = (0,) + poly(mask & ~(low | nbrs[i]))
        size = max(len(a), len(b))
        a = a + (0,) * (size - len(a))
        b = b + (0,) * (size - len(b))
        return tuple(x + y for x, y in zip(a, b))

    return poly((1 << len(G)) - 1)


def _poly_value(coeffs, q):
    # sum_j c_j (-q)^j by Horner
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * (-q) + c
    return acc


def shearer_event_prob(G: FiniteGraph, p: float, B: Iterable) -> float:
    """Signed mass of {zeros exactly on B, ones elsewhere}.

    Inclusion-exclusion over independent supersets of ``B`` collapses to
    ``q**|B|`` times the critical function of ``G`` minus the closed
    neighbourhood of ``B``.
    """
    B = set(B)
    if not B <= set(G.vertices):
        raise DomainError("B is not a subset of the vertex set")
    if not G.is_independent(B):
        return 0.0
    adj = G.adjacency()
    blocked = set(B)
    for b in B:
        blocked |= adj[b]
    rest = G.induced(v for v in G.vertices if v not in blocked)
    return (1.0 - p) ** len(B) * critical_function(rest, p)


def shearer_distribution(G: FiniteGraph, p: float) -> np.ndarray:
    """Signed masses of all 2**n configurations; bit i of the index is 1 when vertex i is open."""
    n = len(G)
    if n > 16:
        raise ResourceError("full distribution limited to 16 vertices")
    table = critical_function_table(G, p)
    nbrs = G.neighbour_masks()
    full = (1 << n) - 1
    q = 1.0 - p
    out = np.zeros(1 << n)
    for cfg in range(1 << n):
        zeros = full & ~cfg
        closed, m, ok = zeros, zeros, True
        while m:
            low = m & -m
            i = low.bit_length() - 1
            if nbrs[i] & zeros:
                ok = False
                break
            closed |= nbrs[i]
            m ^= low
        if ok:
            out[cfg] = q ** bin(zeros).count("1") * table[full & ~closed]
    return out


def _first_nonpositive_q(coeffs, step=1e-3):
    q = 0.0
    while q < 1.0:
        nxt = min(1.0, q + step)
        if _poly_value(coeffs, nxt) <= 0:
            return q, nxt
        q = nxt
    return None


def p_shearer_graph(G: FiniteGraph, cap: int = GRAPH_CAP, tol: float = BISECT_TOL) -> float:
    """Largest ``p`` with a nonpositive critical function.

    The critical function is positive for q below the first sign change and
    the relevant root is that first one, so a coarse scan in ``q`` brackets it
    before bisecting.
    """
    if not G.edges:
        # the critical function is p**n, positive for every p > 0
        return 0.0
    # with an edge present the first root sits at q <= 1/2 (K2 is an induced
    # subgraph), well away from the cancellation near q = 1
    coeffs = independence_polynomial(G, cap)
    bracket = _first_nonpositive_q(coeffs)
    if bracket is None:
        return 0.0
    lo, hi = bracket  # value(lo) > 0 >= value(hi)
    for _ in range(BISECT_MAXITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _poly_value(coeffs, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 1.0 - hi


def shearer_conditional(G: FiniteGraph, p: float, W_big: Iterable, W: Iterable) -> float:
    """Shearer probability that ``W_big`` is all open given ``W`` all open."""
    W_big, W = set(W_big), set(W)
    if not W <= W_big <= set(G.vertices):
        raise DomainError("need W subset of W_big subset of V")
    denom = critical_function(G.induced(W), p)
    if denom <= 0:
        raise ConditioningError(f"critical function of G[W] is {denom} <= 0")
    return critical_function(G.induced(W_big), p) / denom


# -- the k-fuzz of a line ------------------------------------------------------
@dataclass
class CriticalSeries:
    k: int
    p: float
    b: np.ndarray
    beta: np.ndarray
    log_b: np.ndarray
    first_nonpositive_index: int | None

    @property
    def q(self) -> float:
        return 1.0 - self.p


def b_sequence(k: int, p: float, N: int) -> CriticalSeries:
    """Critical functions ``b_n`` of the k-fuzz of paths with n = 1..N vertices.

    ``b_n = 1 - n q`` up to ``n = k + 1``, then ``b_n = b_{n-1} - q b_{n-1-k}``.
    While everything stays positive the ratios ``beta_n`` are iterated
    directly (``beta_n = 1 - q / prod_{i=1..k} beta_{n-i}``) so long series do
    not underflow; ``log_b`` is their cumulative log. Past the first
    nonpositive term the linear recursion takes over.
    """
    if N < 1:
        raise DomainError("N must be at least 1", threshold="N >= 1")
    q = 1.0 - p
    beta = np.full(N, np.nan)
    first_bad = None
    prev = 1.0
    for n in range(1, N + 1):
        if n <= k + 1:
            bn = 1.0 - n * q
            val = bn / prev
            prev = bn
        else:
            val = 1.0 - q / math.prod(beta[n - 1 - k:n - 1])
        if val <= 0:
            first_bad = n
            break
        beta[n - 1] = val
    good = N if first_bad is None else first_bad - 1
    b = np.zeros(N)
    log_b = np.full(N, -np.inf)
    if good:
        log_b[:good] = np.cumsum(np.log(beta[:good]))
        b[:good] = np.exp(log_b[:good])
        head = min(good, k + 1)
        b[:head] = 1.0 - q * np.arange(1, head + 1)
    if first_bad is not None:
        ext = [1.0] + b[:good].tolist()
        for n in range(first_bad, N + 1):
            ext.append(1.0 - n * q if n <= k + 1 else ext[n - 1] - q * ext[n - 1 - k])
        b[good:] = ext[good + 1:]
        with np.errstate(divide="ignore"):
            log_b[good:] = np.where(b[good:] > 0, np.log(np.abs(b[good:])), -np.inf)
    return CriticalSeries(k, p, b, beta, log_b, first_bad)


def p_shearer_kfuzz(k: int) -> float:
    """Closed-form threshold ``1 - k**k / (k+1)**(k+1)`` (0**0 = 1)."""
    if k < 0:
        raise DomainError("k must be nonnegative", threshold="k >= 0")
    return 1.0 - k ** k / (k + 1) ** (k + 1)


def _line_thresholds(k: int, Ns, tol: float = 0.0) -> np.ndarray:
    """Bisection for ``p_sh(L_N)``, vectorized over the targets ``Ns``.

    ``p`` is feasible for ``N`` when ``b_1..b_(N-1) > 0`` and ``b_N >= 0``.
    """
    Ns = np.asarray(Ns, dtype=np.int64)
    if Ns.size and Ns.min() < 1:
        raise DomainError("N must be at least 1", threshold="N >= 1")
    out = np.where(Ns <= k + 1, 1.0 - 1.0 / np.maximum(Ns, 1), 0.0)
    todo = Ns > k + 1
    if not todo.any():
        return out
    targets = Ns[todo]
    n_max = int(targets.max())
    lo = np.zeros(len(targets))
    hi = np.ones(len(targets))
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        live = (hi - lo > tol) & (mid > lo) & (mid < hi)
        if not live.any():
            break
        q = 1.0 - mid
        hist = [np.ones_like(q)]
        first_bad = np.full(len(q), n_max + 1)
        for n in range(1, n_max + 1):
            b = 1.0 - n * q if n <= k + 1 else hist[n - 1] - q * hist[n - 1 - k]
            hist.append(b)
            first_bad = np.where((first_bad > n_max) & (b <= 0), n, first_bad)
        b_at = np.array(hist)[targets, np.arange(len(targets))]
        ok = (first_bad > targets) | ((first_bad == targets) & (b_at == 0.0))
        hi = np.where(live & ok, mid, hi)
        lo = np.where(live & ~ok, mid, lo)
    out[todo] = hi
    return out


def p_shearer_line(k: int, N: int, tol: float = 0.0) -> float:
    """Smallest ``p`` keeping ``b_1..b_N`` nonnegative, to full precision by default."""
    return float(_line_thresholds(k, [N], tol)[0])


def p_shearer_line_table(k: int, n_max: int, tol: float = 0.0) -> np.ndarray:
    """``p_sh(L_N)`` for ``N = 1..n_max`` in one vectorized bisection."""
    return _line_thresholds(k, np.arange(1, n_max + 1), tol)


def curve_hk(k: int, z: float) -> float:
    return z ** k * (1.0 - z)


def curve_gk(k: int, y: float) -> float:
    if y < 1:
        raise DomainError("g_k is defined on [1, inf]", threshold="y >= 1")
    if math.isinf(y):
        return 1.0
    return 1.0 - (y - 1.0) / y ** (k + 1)


@dataclass(frozen=True)
class XiValue:
    k: int
    p: float
    xi: float


def xi(k: int, p: float, tol: float = 0.0) -> XiValue:
    """Root of ``z**k (1 - z) = 1 - p`` on ``[k/(k+1), 1]``.

    Bisects to full double precision by default (a few more steps than a
    1e-12 tolerance), since laws built on ``xi`` are compared at 1e-12.
    """
    q = 1.0 - p
    if k == 0:
        return XiValue(0, p, p)
    lo, hi = k / (k + 1), 1.0
    top = curve_hk(k, lo)
    if q > top * (1 + 1e-12) + 1e-15:
        raise DomainError(
            f"p = {p} is below p_sh(Z_(k)) = {p_shearer_kfuzz(k)}",
            threshold=f"p >= p_sh(Z_({k})) = {p_shearer_kfuzz(k)!r}",
        )
    for _ in range(BISECT_MAXITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if curve_hk(k, mid) > q:
            lo = mid
        else:
            hi = mid
    return XiValue(k, p, 0.5 * (lo + hi) if hi - lo > 0 else lo)


def curve_fk(k: int, xi_val: float, g: int) -> float:
    """Lower bound on the Shearer conditional when ``g`` neighbours sit on both sides."""
    if not 0 <= g <= k or int(g) != g:
        raise DomainError(f"g = {g} outside {{0..{k}}}", threshold=f"0 <= g <= {k}")
    if k == 0:
        return xi_val
    return ((g + 1) * xi_val - g) / (g * xi_val - (g - 1))


def minoration_fk(k: int, p: float, B: Iterable[int]) -> float:
    """``f_k(g_B)`` with ``d_B = min |n|`` and ``g_B = max(0, k + 1 - d_B)``."""
    B = list(B)
    if 0 in B:
        raise DomainError("B must not contain 0")
    if not B:
        raise DomainError("B must be nonempty")
    d_B = min(abs(n) for n in B)
    g_B = max(0, k + 1 - d_B)
    return curve_fk(k, xi(k, p).xi, g_B)


def majoration_witness(k: int, p: float, eps: float, N: int) -> float:
    """Smallest ``C`` with ``b_n <= C ((1+eps) xi)**n`` for all ``n <= N``."""
    s = b_sequence(k, p, N)
    if s.first_nonpositive_index is not None:
        raise DomainError("b_n turns nonpositive; p below p_sh(L_N)")
    x = xi(k, p).xi
    n = np.arange(1, N + 1)
    return float(np.exp(np.max(s.log_b - n * math.log((1 + eps) * x))))
