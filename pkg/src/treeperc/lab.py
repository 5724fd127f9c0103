"""Critical values, moment bounds, kernel and minimality audits, phase-diagram data.

Every bound here is an exact computation from the line law. For fission
models the root-path probabilities ``a[j] = P(first j path vertices open)``
determine everything: ``P(o <-> v) = a[|v|+1]`` and
``kappa(v, w) = 1 / a[|v ^ w| + 1]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import shearer
from .errors import DomainError
from .fission import PercolationModel, kernel_from_levels
from .line import LineLaw, pattern_prob
from .trees import (FlowAssignment, RootedTree, branching_number, confluent, kfuzz_path,
                    lambda_flow)

AUDIT_TOL = 1e-9


# -- critical values ---------------------------------------------------------------
@dataclass(frozen=True)
class CriticalValuePair:
    k: int
    br: float
    p_min: float
    p_max: float
    regime: str

    def row(self) -> tuple:
        return (self.k, self.br, self.p_min, self.p_max, self.regime)


def critical_values(k: int, br: float) -> CriticalValuePair:
    """``p_min = br**-(k+1)``; ``p_max`` follows ``g_k`` up to ``(k+1)/k``, then ``p_sh``."""
    if k < 0:
        raise DomainError("k must be nonnegative", threshold="k >= 0")
    if not br >= 1:
        raise DomainError(f"branching number {br} < 1", threshold="br >= 1")
    p_min = br ** (-(k + 1))
    corner = math.inf if k == 0 else (k + 1) / k
    if br >= corner:
        return CriticalValuePair(k, br, p_min, shearer.p_shearer_kfuzz(k), "shearer")
    return CriticalValuePair(k, br, p_min, shearer.curve_gk(k, br), "g_k")


def figure_data(ks=(0, 1, 2, 3), br_grid=None) -> list[tuple]:
    """Rows ``(k, br, p_min, p_max, regime)`` plus the corner point of each k >= 1."""
    if br_grid is None:
        br_grid = np.round(np.arange(100, 251) / 100.0, 2)
    rows = []
    for k in ks:
        for br in br_grid:
            rows.append(critical_values(k, float(br)).row())
        if k >= 1:
            rows.append((k, (k + 1) / k, ((k + 1) / k) ** (-(k + 1)),
                         shearer.p_shearer_kfuzz(k), "corner"))
    return rows


# -- first and second moment -----------------------------------------------------------
def first_moment_bound(model: PercolationModel, n: int) -> float:
    """``sum over level n of P(o <-> v) = |level n| * a[n+1]``."""
    if n > model.tree.depth or n < 0:
        raise DomainError(f"level {n} outside the tree")
    return float(model.tree.level_sizes[n] * model.allones(n + 1)[-1])


def class_first_moment_bound(model: PercolationModel, n: int) -> float:
    """Bound valid for every k-independent field: ``|level n| * p**ceil((n+1)/(k+1))``."""
    return float(model.tree.level_sizes[n] * model.p ** math.ceil((n + 1) / (model.k + 1)))


def _confluent_masses(tree: RootedTree, flow: FlowAssignment, n: int) -> np.ndarray:
    """``S[j]`` = sum over level-``j`` vertices of (normalized level-n flow below)^2."""
    if flow.uniform:
        # mu is uniform on level n, so each level-j vertex carries 1/|level j|
        return np.array([1.0 / tree.level_sizes[j] for j in range(n + 1)] + [0.0])
    mu = flow.level_values(n).astype(float)
    total = mu.sum()
    if total <= 0:
        raise DomainError(f"the flow vanishes on level {n}")
    mu = mu / total
    S = np.zeros(n + 2)
    S[n] = np.dot(mu, mu)
    for j in range(n, 0, -1):
        mu = np.bincount(tree.parent_positions(j), weights=mu, minlength=tree.level_sizes[j - 1])
        S[j - 1] = np.dot(mu, mu)
    return S


def energy(model: PercolationModel, n: int, flow: FlowAssignment) -> float:
    """``E(mu) = sum mu(v) mu(w) kappa(v, w)`` over level ``n``, grouped by confluent level."""
    tree = model.tree
    S = _confluent_masses(tree, flow, n)
    pair_mass = S[:-1] - S[1:]
    a = model.allones(n + 1)
    if model.is_fission:
        if a[n + 1] <= 0:
            return math.inf
        K = 1.0 / a[1:n + 2]
        return float(np.dot(pair_mass, K))
    # level-copy model: every pair on level n has the same kernel
    if a[n + 1] <= 0:
        return math.inf
    return float(1.0 / a[n + 1])


def second_moment_bound(model: PercolationModel, n: int, flow: FlowAssignment | None = None,
                        lam: float | None = None) -> float:
    """``1 / E(mu)`` with ``mu`` the normalized flow on level ``n`` (0 if no vertex can connect)."""
    if n > model.tree.depth or n < 0:
        raise DomainError(f"level {n} outside the tree")
    if flow is None:
        flow = lambda_flow(model.tree, lam if lam is not None else default_lambda(model.tree))
    E = energy(model, n, flow)
    return 0.0 if math.isinf(E) else 1.0 / E


def default_lambda(tree: RootedTree) -> float:
    try:
        br = branching_number(tree.spec)
    except DomainError:
        br = 1.0
    return max(1.0, br * (1 - 1e-3))


def kernel_rate(model: PercolationModel) -> float | None:
    """``alpha`` with ``kappa(v, w) <= C alpha**|v ^ w|`` from the law's driver structure."""
    law = model.law
    if law.kind == "shearer_factor":
        return 1.0 / law.xi if law.xi > 0 else math.inf
    if law.kind == "minimal":
        return 1.0 / law.driver_p if law.driver_p > 0 else math.inf
    if law.kind == "iid":
        return 1.0 / law.p if law.p > 0 else math.inf
    return None


@dataclass
class BoundsReport:
    model: dict
    levels: list
    first_moment: list
    class_bound: list
    second_moment: list
    lam: float
    alpha: float | None = None
    C: float | None = None
    br: float | None = None
    certificate: bool = False
    exact_reach: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def bounds_report(model: PercolationModel, levels, lam: float | None = None,
                  with_exact_reach: bool = False) -> BoundsReport:
    from .fission import exact_reach

    tree = model.tree
    levels = list(levels)
    lam = default_lambda(tree) if lam is None else lam
    flow = lambda_flow(tree, lam)
    rep = BoundsReport(
        model.describe(), levels,
        [first_moment_bound(model, n) for n in levels],
        [class_first_moment_bound(model, n) for n in levels],
        [second_moment_bound(model, n, flow) for n in levels],
        lam,
    )
    try:
        rep.br = branching_number(tree.spec)
    except DomainError:
        rep.br = None
    alpha = kernel_rate(model) if model.is_fission else None
    if alpha is not None and math.isfinite(alpha):
        D = max(levels) if levels else 0
        a = model.allones(D + 1)
        j = np.arange(D + 1)
        rep.alpha = alpha
        rep.C = float(np.max(alpha ** (-j) / a[1:D + 2]))
        rep.certificate = rep.br is not None and alpha < rep.br
    if with_exact_reach:
        rep.exact_reach = [exact_reach(model, n) for n in levels]
    return rep


def all_open_path_check(model: PercolationModel, depth: int) -> tuple[float, float]:
    """``(a[depth+1], xi**(depth+1))`` for laws built on ``xi``; the first dominates."""
    k, p = model.k, model.p
    x = shearer.xi(k, p).xi
    return float(model.allones(depth + 1)[-1]), x ** (depth + 1)


# -- kernel audit ----------------------------------------------------------------------
@dataclass
class KernelReport:
    model: dict
    depth: int
    seed: int
    pairs: list
    n_pairs: int
    failures: int
    worst_margin_t: float | None
    quasi_independence: str
    M: float | None
    worst_margin_qi: float | None
    minimal_check: str = "not applicable"

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def stratified_pairs(tree: RootedTree, depth: int, budget: int | None, rng) -> list[tuple[int, int]]:
    """Vertex pairs covering every (confluent level, |v|, |w|) combination up to ``depth``.

    For each confluent level ``j`` and offsets ``dv, dw >= 0`` a confluent
    vertex with enough children is drawn and both descents are random.
    """
    pairs = []
    for j in range(depth + 1):
        for dv in range(depth - j + 1):
            for dw in range(depth - j + 1):
                pr = _draw_pair(tree, j, dv, dw, rng)
                if pr is not None:
                    pairs.append(pr)
    if budget is not None and len(pairs) > budget:
        keep = np.sort(rng.choice(len(pairs), size=budget, replace=False))
        pairs = [pairs[i] for i in keep]
    return pairs


def _descend(tree, v, steps, rng):
    for _ in range(steps):
        kids = tree.children(v)
        if len(kids) == 0:
            return None
        v = kids[int(rng.integers(len(kids)))]
    return v


def _draw_pair(tree, j, dv, dw, rng):
    size = tree.level_sizes[j]
    for _ in range(8):
        u = tree.vertex(j, int(rng.integers(size)))
        kids = tree.children(u)
        if dv == 0 or dw == 0:
            v = u if dv == 0 else _descend(tree, u, dv, rng)
            w = u if dw == 0 else _descend(tree, u, dw, rng)
        else:
            if len(kids) < 2:
                continue
            a, b = rng.choice(len(kids), size=2, replace=False)
            v = _descend(tree, kids[int(a)], dv - 1, rng)
            w = _descend(tree, kids[int(b)], dw - 1, rng)
        if v is not None and w is not None:
            return v, w
    return None


def kernel_bound_audit(model: PercolationModel, depth: int, budget: int | None = None,
                       seed: int = 0, quasi_independence: str | bool = "auto") -> KernelReport:
    """Check exact kernels against the path-extension bound and the quasi-independence majorant.

    The path-extension bound is ``1 / P(o <-> t | t <-> w)`` with ``t`` the
    vertex ``(k v s) + 1`` below the confluent ``u`` on the way to ``w``. When
    ``w`` is no further than that below ``u``, ``t = w`` and the conditioning
    event is empty, so the bound is ``1 / P(o <-> w)``.
    """
    if not model.is_fission:
        raise DomainError("kernel audits need a fission model", threshold="fission kind")
    tree, law, k = model.tree, model.law, model.k
    ks = int(max(k, model.s))
    if depth > tree.depth:
        raise DomainError("audit depth beyond the tree")

    qi_status, M, xi = _qi_setup(model, quasi_independence)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    pairs = stratified_pairs(tree, depth, budget, rng)
    a = model.allones(depth + 1)
    ext_cache = {}

    def segment(lt, lw):
        # P(Z_lt .. Z_lw all ones)
        key = (lt, lw)
        if key not in ext_cache:
            ext_cache[key] = pattern_prob(law, [None] * lt + [1] * (lw - lt + 1))
        return ext_cache[key]

    rows, failures = [], 0
    worst_t = worst_qi = None
    for v, w in pairs:
        u, _ = confluent(tree, v, w)
        lu, lv, lw = tree.level(u), tree.level(v), tree.level(w)
        if a[lv + 1] <= 0 or a[lw + 1] <= 0:
            rows.append(dict(v=v, w=w, u_level=lu, v_level=lv, w_level=lw,
                             kappa=None, note="P(o<->v) = 0, kernel undefined"))
            continue
        kappa = float(kernel_from_levels(model, lu))
        if lw - lu > ks + 1:
            lt = lu + ks + 1
            bound_t = segment(lt, lw) / a[lw + 1]
        else:
            lt = lw
            bound_t = 1.0 / a[lw + 1]
        ok_t = kappa <= bound_t + AUDIT_TOL * max(1.0, bound_t)
        margin_t = bound_t / kappa - 1.0
        worst_t = margin_t if worst_t is None else min(worst_t, margin_t)
        row = dict(v=v, w=w, u_level=lu, v_level=lv, w_level=lw, t_level=lt,
                   kappa=kappa, bound_t=bound_t, pass_t=bool(ok_t))
        ok = ok_t
        if qi_status == "checked":
            bound_qi = M / a[lu + 1]
            ok_qi = kappa <= bound_qi + AUDIT_TOL * max(1.0, bound_qi)
            m_qi = bound_qi / kappa - 1.0
            worst_qi = m_qi if worst_qi is None else min(worst_qi, m_qi)
            row.update(bound_qi=bound_qi, pass_qi=bool(ok_qi))
            ok = ok and ok_qi
        if law.kind == "minimal":
            bound_u = 1.0 / a[lu + 1]
            ok_u = kappa <= bound_u + AUDIT_TOL * max(1.0, bound_u)
            row.update(bound_u=bound_u, pass_u=bool(ok_u))
            ok = ok and ok_u
        failures += not ok
        rows.append(row)
    rep = KernelReport(model.describe(), depth, seed, rows, len(rows), failures,
                       worst_t, qi_status, M, worst_qi)
    if law.kind == "minimal":
        rep.minimal_check = "kappa <= 1/P(o<->u) checked"
    return rep


def _qi_setup(model: PercolationModel, request):
    k, p = model.k, model.p
    if request is False:
        return "not requested", None, None
    psh = shearer.p_shearer_kfuzz(k)
    if p <= psh + 1e-12:
        if request is True:
            raise DomainError(
                f"quasi-independence majorant needs p > p_sh(Z_({k})) = {psh!r}; "
                f"at p = {p} the factor (k+1)xi - k vanishes or is negative",
                threshold=f"p > p_sh(Z_({k})) = {psh!r}")
        return "inapplicable", None, None
    x = shearer.xi(k, p).xi
    ks = max(k, model.s)
    M = x ** (k - ks) / ((k + 1) * x - k)
    return "checked", float(M), x


# -- minimality audit --------------------------------------------------------------------
@dataclass
class MinimalityReport:
    law: str
    n: int
    k: int
    p: float
    n_sets: int
    n_pairs: int
    failures: int
    conditional_failures: int
    worst_gap: float
    worst_conditional_gap: float
    max_abs_deviation: float

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.conditional_failures == 0

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def subset_allones(law: LineLaw, n: int) -> np.ndarray:
    """``P(Z_i = 1 for all i in W)`` for every ``W`` subset of ``[n]`` (bitmask index)."""
    out = np.empty(1 << n)
    for mask in range(1 << n):
        out[mask] = pattern_prob(law, [1 if (mask >> i) & 1 else None for i in range(n)])
    return out


def minimality_audit(law: LineLaw, n: int, k: int | None = None, conditional: bool = True,
                     tol: float = 1e-12) -> MinimalityReport:
    """Exhaustive check of ``P(Z_W = 1) >= Xi_{G[W]}(p)`` and its conditional form.

    ``G`` is the k-fuzz of ``n`` consecutive positions. The conditional form
    compares ``P(Z_Wbig = 1) / P(Z_W = 1)`` with ``Xi_Wbig / Xi_W`` for all
    ``W`` inside ``Wbig`` with ``Xi_W > 0``.
    """
    if n > 12:
        raise DomainError("minimality audits are exhaustive; use n <= 12", threshold="n <= 12")
    k = law.k if k is None else k
    p = law.p
    psh = shearer.p_shearer_line(k, n) if k > 0 else 0.0
    if p < psh - 1e-12:
        raise DomainError(f"p = {p} below p_sh(L_{n}) = {psh!r}", threshold=f"p >= {psh!r}")
    G = kfuzz_path(n, k)
    xi_tab = shearer.critical_function_table(G, p)
    prob = subset_allones(law, n)
    gap = prob - xi_tab
    failures = int(np.count_nonzero(gap < -tol))
    cond_fail, n_pairs, worst_c = 0, 0, math.inf
    if conditional:
        masks = np.arange(1 << n)
        for W in range(1 << n):
            if xi_tab[W] <= 0 or prob[W] <= 0:
                continue
            supers = masks[(masks & W) == W]
            lhs = prob[supers] / prob[W]
            rhs = xi_tab[supers] / xi_tab[W]
            d = lhs - rhs
            n_pairs += len(supers)
            cond_fail += int(np.count_nonzero(d < -tol * max(1.0, 1.0 / xi_tab[W])))
            worst_c = min(worst_c, float(d.min()))
    return MinimalityReport(law.kind, n, k, p, 1 << n, n_pairs, failures, cond_fail,
                            float(gap.min()), worst_c, float(np.abs(gap).max()))
