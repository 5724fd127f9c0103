"""Laws of {0,1}-processes on an initial segment of the nonnegative integers.

Every law is a deterministic rule applied to independent Bernoulli drivers,
so it is a hidden-state chain: the state is whatever part of the driver
sequence still matters for the future. Each law exposes, per position ``n``,
two sub-stochastic matrices ``T0[n]`` and ``T1[n]`` with
``T_z[n][s, s'] = P(state' = s', Z_n = z | state = s)``. Exact conditionals,
prefix probabilities and partially observed patterns are then forward passes.

Hidden states by kind:

* ``iid``: a single state.
* ``shearer_factor`` / ``shearer_truncated`` / ``cutup``: number of trailing
  driver ones, capped at ``k`` (the zero-one switch only asks whether the
  previous ``k`` drivers were all ones).
* ``minimal``: the window of the next ``k`` drivers as a bitmask.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import shearer
from .errors import ConditioningError, DomainError

LAW_KINDS = ("shearer_factor", "shearer_truncated", "cutup", "minimal", "iid")

# slack when comparing a parameter against a threshold computed by bisection
_THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class BitString:
    bits: tuple[int, ...] = ()

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))


@dataclass(eq=False)
class LineLaw:
    kind: str
    k: int = 0
    p: float = 1.0
    N: int | None = None
    xi: float | None = None
    beta: np.ndarray | None = field(default=None, repr=False)
    driver_p: float | None = None

    # -- driver description ----------------------------------------------------
    @property
    def length(self) -> int | None:
        """Maximal index range; ``None`` for laws on the whole half line."""
        return self.N if self.kind == "shearer_truncated" else None

    @property
    def n_states(self) -> int:
        if self.kind == "iid":
            return 1
        if self.kind == "minimal":
            return 1 << self.k
        return self.k + 1

    def _check_position(self, n: int) -> None:
        if self.length is not None and n >= self.length:
            raise DomainError(f"position {n} beyond the law's range of {self.length}")

    @cached_property
    def initial(self) -> np.ndarray:
        """Distribution of the hidden state before position 0."""
        k = self.k
        if self.kind == "iid":
            return np.ones(1)
        if self.kind == "shearer_factor":
            # trailing-ones count of the k drivers at indices -k..-1
            x = self.xi
            init = np.array([x ** j * (1 - x) for j in range(k)] + [x ** k])
            return init
        if self.kind in ("shearer_truncated", "cutup"):
            init = np.zeros(k + 1)
            init[0] = 1.0
            return init
        # minimal: window of k iid drivers
        ph = self.driver_p
        ones = np.array([bin(s).count("1") for s in range(1 << k)])
        return ph ** ones * (1 - ph) ** (k - ones)

    def _runlength_matrices(self, x: float, need: int, reset: bool):
        k = self.k
        T0 = np.zeros((k + 1, k + 1))
        T1 = np.zeros((k + 1, k + 1))
        for r in range(k + 1):
            src = 0 if reset else r
            up = min(src + 1, k)
            T1[r, up] += x
            if src >= need:
                T0[r, 0] += 1 - x
            else:
                T1[r, 0] += 1 - x
        return T0, T1

    def matrices(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(T0, T1)`` for position ``n``."""
        self._check_position(n)
        cache = self.__dict__.setdefault("_mcache", {})
        key = n
        if self.kind in ("iid", "shearer_factor", "minimal"):
            key = 0
        elif self.kind == "cutup":
            key = n % self.N
        if key in cache:
            return cache[key]
        k = self.k
        if self.kind == "iid":
            out = (np.array([[1 - self.p]]), np.array([[self.p]]))
        elif self.kind == "shearer_factor":
            out = self._runlength_matrices(self.xi, k, False)
        elif self.kind == "shearer_truncated":
            out = self._runlength_matrices(self.beta[n], min(k, n), False)
        elif self.kind == "cutup":
            j = n % self.N
            out = self._runlength_matrices(self.beta[j], min(k, j), j == 0)
        else:
            S = 1 << k
            ph = self.driver_p
            T0 = np.zeros((S, S))
            T1 = np.zeros((S, S))
            full = S - 1
            for s in range(S):
                for x, px in ((1, ph), (0, 1 - ph)):
                    nxt = ((s >> 1) | (x << (k - 1))) if k else 0
                    z = int(s == full and x == 1)
                    (T1 if z else T0)[s, nxt] += px
            out = (T0, T1)
        cache[key] = out
        return out

    def __repr__(self):
        extra = f", N={self.N}" if self.N is not None else ""
        return f"LineLaw({self.kind}, k={self.k}, p={self.p!r}{extra})"


def make_law(kind: str, *, k: int = 0, p: float | None = None, N: int | None = None) -> LineLaw:
    """Validated law; thresholds raise :class:`DomainError` naming the bound."""
    if kind not in LAW_KINDS:
        raise DomainError(f"unknown law kind {kind!r}")
    if k < 0:
        raise DomainError("k must be nonnegative", threshold="k >= 0")
    if kind == "cutup":
        if N is None or N < 1:
            raise DomainError("cutup needs N >= 1", threshold="N >= 1")
        p = shearer.p_shearer_line(k, N)
        return LineLaw("cutup", k=k, p=p, N=N, beta=_truncated_betas(k, p, N))
    if p is None or not 0.0 <= p <= 1.0:
        raise DomainError(f"p = {p} is not a probability", threshold="0 <= p <= 1")
    if kind == "iid":
        return LineLaw("iid", k=0, p=p)
    if kind == "minimal":
        return LineLaw("minimal", k=k, p=p, driver_p=p ** (1.0 / (k + 1)))
    if kind == "shearer_factor":
        psh = shearer.p_shearer_kfuzz(k)
        if p < psh - _THRESHOLD_SLACK:
            raise DomainError(
                f"shearer_factor needs p >= p_sh(Z_(k)) = {psh!r}, got {p}",
                threshold=f"p >= p_sh(Z_({k})) = {psh!r}",
            )
        x = shearer.xi(k, max(p, psh)).xi
        return LineLaw("shearer_factor", k=k, p=p, xi=x)
    # shearer_truncated
    if N is None or N < 1:
        raise DomainError("shearer_truncated needs N >= 1", threshold="N >= 1")
    psh = shearer.p_shearer_line(k, N)
    if p < psh - 1e-9:
        raise DomainError(
            f"shearer_truncated needs p >= p_sh(L_N) = {psh!r}, got {p}",
            threshold=f"p >= p_sh(L_{N}) = {psh!r}",
        )
    return LineLaw("shearer_truncated", k=k, p=p, N=N, beta=_truncated_betas(k, max(p, psh), N))


def _truncated_betas(k: int, p: float, N: int) -> np.ndarray:
    """Driver parameters ``beta_1..beta_N`` (0-indexed), clamped into [0, 1]."""
    q = 1.0 - p
    b = [1.0]
    for n in range(1, N + 1):
        b.append(1.0 - n * q if n <= k + 1 else b[n - 1] - q * b[n - 1 - k])
    b = np.array(b)
    # roundoff at the threshold can leave the last term at -1e-13
    b[np.abs(b) < 1e-10] = 0.0
    if np.any(b < 0):
        raise DomainError(f"p = {p} below p_sh(L_{N})")
    beta = np.zeros(N)
    for n in range(1, N + 1):
        beta[n - 1] = b[n] / b[n - 1] if b[n - 1] > 0 else 0.0
    return np.clip(beta, 0.0, 1.0)


# -- exact forward computations -------------------------------------------------
def pattern_prob(law: LineLaw, pattern: Sequence[int | None]) -> float:
    """Probability that position ``i`` shows ``pattern[i]``; ``None`` is unobserved."""
    belief = law.initial.copy()
    for n, z in enumerate(pattern):
        T0, T1 = law.matrices(n)
        if z is None:
            belief = belief @ (T0 + T1)
        else:
            belief = belief @ (T1 if z else T0)
    return float(belief.sum())


def prefix_prob(law: LineLaw, bits: Sequence[int]) -> float:
    return pattern_prob(law, list(bits))


def allones_prob(law: LineLaw, n: int) -> float:
    """P(Z_0 = ... = Z_{n-1} = 1)."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    return pattern_prob(law, [1] * n)


def allones_series(law: LineLaw, n: int) -> np.ndarray:
    """``a[j] = P(Z_0..Z_{j-1} all 1)`` for ``j = 0..n`` in one forward pass."""
    out = np.empty(n + 1)
    out[0] = 1.0
    belief = law.initial.copy()
    for j in range(n):
        belief = belief @ law.matrices(j)[1]
        out[j + 1] = belief.sum()
    return out


def next_bit_prob(law: LineLaw, history: Sequence[int]) -> float:
    """Exact ``P(Z_n = 1 | Z_0..Z_{n-1} = history)``."""
    belief = law.initial.copy()
    for n, z in enumerate(history):
        T0, T1 = law.matrices(n)
        belief = belief @ (T1 if z else T0)
        total = belief.sum()
        if total <= 0:
            raise ConditioningError(f"history {tuple(history)} has probability zero")
        belief /= total
    T0, T1 = law.matrices(len(history))
    return float((belief @ T1).sum())


def prefix_distribution(law: LineLaw, n: int) -> np.ndarray:
    """Exact law of ``(Z_0..Z_{n-1})``; bit i of the index is ``Z_i``."""
    out = np.zeros(1 << n)
    for idx in range(1 << n):
        out[idx] = prefix_prob(law, [(idx >> i) & 1 for i in range(n)])
    return out


def driver_distribution(law: LineLaw, n: int) -> np.ndarray:
    """Law of ``(Z_0..Z_{n-1})`` by summing over every driver word.

    This applies the sampling rule literally and shares nothing with the
    hidden-state matrices, so it serves as an independent check on them.
    """
    kind, k = law.kind, law.k
    if kind == "iid":
        drivers, probs = n, [law.p] * n
    elif kind == "shearer_factor":
        drivers, probs = n + k, [law.xi] * (n + k)
    elif kind == "minimal":
        drivers, probs = n + k, [law.driver_p] * (n + k)
    elif kind == "shearer_truncated":
        drivers, probs = n, list(law.beta[:n])
    else:
        drivers, probs = n, [law.beta[i % law.N] for i in range(n)]
    out = np.zeros(1 << n)
    for word in itertools.product((0, 1), repeat=drivers):
        w = 1.0
        for x, px in zip(word, probs):
            w *= px if x else 1 - px
        if w == 0.0:
            continue
        z = apply_rule(law, np.array(word, dtype=np.int8), n)
        out[int(np.dot(z, 1 << np.arange(n)))] += w
    return out


def apply_rule(law: LineLaw, drivers: np.ndarray, n: int) -> np.ndarray:
    """Map driver rows (last axis) to the first ``n`` process values."""
    d = np.asarray(drivers, dtype=np.int8)
    k = law.k
    if law.kind == "iid":
        return d[..., :n].copy()
    if law.kind == "shearer_factor":
        # d[..., j] is the driver at index j - k
        z = np.ones(d.shape[:-1] + (n,), dtype=np.int8)
        for i in range(n):
            window = d[..., i:i + k].all(axis=-1) if k else True
            z[..., i] = 1 - (1 - d[..., i + k]) * window
        return z
    if law.kind == "minimal":
        z = np.ones(d.shape[:-1] + (n,), dtype=np.int8)
        for i in range(n):
            z[..., i] = d[..., i:i + k + 1].all(axis=-1)
        return z
    z = np.ones(d.shape[:-1] + (n,), dtype=np.int8)
    block = law.N
    for i in range(n):
        j = i % block if law.kind == "cutup" else i
        start = i - min(k, j)
        window = d[..., start:i].all(axis=-1) if i > start else True
        z[..., i] = 1 - (1 - d[..., i]) * window
    return z


def _n_drivers(law: LineLaw, n: int) -> int:
    return n + law.k if law.kind in ("shearer_factor", "minimal") else n


def _driver_probs(law: LineLaw, n_drivers: int) -> np.ndarray:
    if law.kind == "iid":
        return np.full(n_drivers, law.p)
    if law.kind == "shearer_factor":
        return np.full(n_drivers, law.xi)
    if law.kind == "minimal":
        return np.full(n_drivers, law.driver_p)
    if law.kind == "shearer_truncated":
        return law.beta[:n_drivers]
    return law.beta[np.arange(n_drivers) % law.N]


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator keyed by ``(seed, stream)``; draws within a stream are sequential."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_prefix(law: LineLaw, n: int, seed: int, stream: int = 0) -> BitString:
    """Exact sample of ``(Z_0..Z_{n-1})`` from the driver construction.

    Driver ``i`` always consumes the ``i``-th uniform of the stream, so
    prefixes of different lengths drawn with the same seed agree.
    """
    return BitString(tuple(int(b) for b in sample_prefixes(law, n, 1, seed, stream)[0]))


def sample_prefixes(law: LineLaw, n: int, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """``count`` independent prefixes as an int8 array of shape (count, n)."""
    law._check_position(n - 1) if n else None
    m = _n_drivers(law, n)
    rng = stream_rng(seed, stream)
    u = rng.random((count, m))
    drivers = (u < _driver_probs(law, m)[None, :]).astype(np.int8)
    return apply_rule(law, drivers, n)
