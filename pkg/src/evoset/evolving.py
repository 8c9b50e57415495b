"""The evolving-set process.

One step maps S to {y : Q(S, y) >= U pi(y)} for U uniform on (0, 1).  Every
quantity here is computed from the per-state thresholds t_y = Q(S, y)/pi(y):
the map u -> S~ is a step function of u whose jumps sit at those thresholds,
so step probabilities, the root gauge psi(S) and the whole set-space kernel
are exact finite sums over that partition of (0, 1].
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .chain import ChainKernel, StateSet, mask_to_indicator
from .errors import EmptyStart, TooLarge

SNAP_TOL = 1e-14
SET_KERNEL_MAX = 20
ENUMERATE_MAX = 24
MODES = ("plain", "doob-exact", "doob-weighted")


def _snap_sorted(T: np.ndarray) -> np.ndarray:
    """Snap rows of thresholds sorted in decreasing order.

    Values within SNAP_TOL of 1 (of 0) become 1 (0); a value within SNAP_TOL
    of its (already snapped) predecessor takes the predecessor's value, so
    near-ties enter and leave together.
    """
    T = np.clip(T, 0.0, 1.0)
    T[T >= 1.0 - SNAP_TOL] = 1.0
    T[T <= SNAP_TOL] = 0.0
    for k in range(1, T.shape[1]):
        close = T[:, k - 1] - T[:, k] <= SNAP_TOL
        T[close, k] = T[close, k - 1]
    return T


def thresholds(chain: ChainKernel, S: StateSet) -> np.ndarray:
    """Snapped vector y -> Q(S, y)/pi(y), so that y is in S~ iff t_y >= u."""
    if S.is_empty():
        return np.zeros(chain.n)
    if S.is_full():
        return np.ones(chain.n)
    t = chain.flows_into(S.indicator()) / chain.pi
    order = np.argsort(-t, kind="stable")
    out = np.empty_like(t)
    out[order] = _snap_sorted(t[order][None, :])[0]
    return out


def evolve_step(chain: ChainKernel, S: StateSet, u: float) -> StateSet:
    """One evolving-set step driven by the uniform value ``u`` in (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in the open interval (0, 1)")
    if S.is_empty() or S.is_full():
        return S
    return StateSet.from_indicator(chain, thresholds(chain, S) >= u)


def breakpoints(chain: ChainKernel, S: StateSet) -> list[float]:
    """Sorted distinct positive thresholds; u -> S~ is constant between them."""
    t = thresholds(chain, S)
    return sorted(set(t[t > 0].tolist()))


@dataclass(frozen=True)
class StepPartition:
    """Partition of (0, 1] into intervals (lower[k], upper[k]] mapping to targets[k]."""

    lower: np.ndarray
    upper: np.ndarray
    targets: list[StateSet]

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    def locate(self, u) -> np.ndarray:
        return np.searchsorted(self.upper, u, side="left")


def step_partition(chain: ChainKernel, S: StateSet) -> StepPartition:
    """Exact law of one step from S as intervals of u with positive length."""
    if S.is_empty() or S.is_full():
        return StepPartition(np.array([0.0]), np.array([1.0]), [S])
    t = thresholds(chain, S)
    levels = np.unique(t[t > 0])[::-1]  # decreasing
    lower, upper, targets = [], [], []
    prev = 1.0
    ind = np.zeros(chain.n, dtype=bool)
    mass = 0.0
    if levels.size == 0 or levels[0] < 1.0:
        # u above every threshold empties the set
        top = levels[0] if levels.size else 0.0
        lower.append(top)
        upper.append(1.0)
        targets.append(chain.empty)
        prev = top
    for k, b in enumerate(levels):
        newly = t == b
        ind |= newly
        mass += float(chain.pi[newly].sum())
        nxt = levels[k + 1] if k + 1 < levels.size else 0.0
        if b > nxt:
            lower.append(nxt)
            upper.append(b)
            targets.append(StateSet.from_indicator(chain, ind))
    order = np.argsort(upper)
    return StepPartition(np.asarray(lower)[order], np.asarray(upper)[order],
                         [targets[i] for i in order])


def psi(chain: ChainKernel, S: StateSet) -> float:
    """Root gauge 1 - E_S sqrt(pi(S~)/pi(S)), integrated exactly over u."""
    if S.is_empty():
        raise ValueError("psi of the empty set")
    part = step_partition(chain, S)
    masses = np.array([A.measure for A in part.targets])
    return float(1.0 - np.dot(part.lengths, np.sqrt(masses / S.measure)))


def _flows_both(chain: ChainKernel, S: StateSet):
    ind = S.indicator()
    return ind, chain.flows_into(ind), chain.flows_into(~ind)


def varphi(chain: ChainKernel, S: StateSet) -> float:
    """(1 / 2 pi(S)) sum_y min(Q(S, y), Q(S^c, y))."""
    _, qs, qc = _flows_both(chain, S)
    return float(np.minimum(qs, qc).sum() / (2.0 * S.measure))


def theta(chain: ChainKernel, S: StateSet) -> float:
    """(1 / pi(S)) sum_{y in S} sqrt(pi(y) Q(S^c, y))."""
    ind, _, qc = _flows_both(chain, S)
    return float(np.sqrt(chain.pi[ind] * qc[ind]).sum() / S.measure)


# --------------------------------------------------------------------------
# batched gauges over many sets at once (rows of a boolean membership matrix)

GAUGES = ("phi", "psi", "theta", "varphi")


def gauge_values(chain: ChainKernel, M: np.ndarray, gauge: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (pi(S), gauge(S)) for every row S of the membership matrix ``M``."""
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    M = np.asarray(M, dtype=bool)
    Mf = M.astype(float)
    pi = chain.pi
    meas = Mf @ pi
    qs = np.asarray(Mf @ chain.Q)
    if gauge == "psi":
        T = qs / pi
        order = np.argsort(-T, axis=1, kind="stable")
        Ts = _snap_sorted(np.take_along_axis(T, order, axis=1))
        cum = np.cumsum(pi[order], axis=1)
        hi = np.concatenate([np.ones((len(M), 1)), Ts], axis=1)
        lo = np.concatenate([Ts, np.zeros((len(M), 1))], axis=1)
        cum = np.concatenate([np.zeros((len(M), 1)), cum], axis=1)
        ratio = np.sqrt(np.maximum(cum, 0.0) / meas[:, None])
        return meas, 1.0 - ((hi - lo) * ratio).sum(axis=1)
    if gauge == "phi":
        return meas, np.where(M, 0.0, qs).sum(axis=1) / meas
    qc = np.asarray((~M).astype(float) @ chain.Q)
    if gauge == "varphi":
        return meas, np.minimum(qs, qc).sum(axis=1) / (2.0 * meas)
    return meas, np.where(M, np.sqrt(pi * qc), 0.0).sum(axis=1) / meas


def subset_chunks(n: int, chunk: int = 1 << 15, start: int = 0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (mask indices, membership matrix) over all subsets of n states."""
    bits = np.arange(n, dtype=np.int64)
    total = 1 << n
    for lo in range(start, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        yield idx, ((idx[:, None] >> bits) & 1).astype(bool)


def subset_measures(pi: np.ndarray) -> np.ndarray:
    """pi(A) for every bit mask A, by doubling."""
    meas = np.zeros(1)
    for p in pi:
        meas = np.concatenate([meas, meas + p])
    return meas


# --------------------------------------------------------------------------
# exact set-space kernel


@dataclass(frozen=True)
class SetChainKernel:
    """Exact evolving-set kernel K on all 2^n subsets and its Doob transform.

    ``K_hat`` row 0 (the empty set) is left zero: the transform is undefined
    there.
    """

    n: int
    K: sp.csr_matrix
    K_hat: sp.csr_matrix
    measures: np.ndarray
    undefined_doob_rows: tuple[int, ...] = (0,)

    @property
    def subset_count(self) -> int:
        return 1 << self.n

    def row(self, mask: int) -> dict[int, float]:
        lo, hi = self.K.indptr[mask], self.K.indptr[mask + 1]
        return dict(zip(self.K.indices[lo:hi].tolist(), self.K.data[lo:hi].tolist()))

    def doob_row(self, mask: int) -> dict[int, float]:
        if mask in self.undefined_doob_rows:
            raise ValueError("Doob transform undefined at the empty set")
        lo, hi = self.K_hat.indptr[mask], self.K_hat.indptr[mask + 1]
        return dict(zip(self.K_hat.indices[lo:hi].tolist(), self.K_hat.data[lo:hi].tolist()))

    def distribution(self, start_mask: int, steps: int, doob: bool = False) -> np.ndarray:
        """Row ``start_mask`` of K^steps (or K_hat^steps)."""
        mat = self.K_hat if doob else self.K
        d = np.zeros(self.subset_count)
        d[start_mask] = 1.0
        KT = mat.T.tocsr()
        for _ in range(steps):
            d = KT @ d
        return d


def set_kernel(chain: ChainKernel) -> SetChainKernel:
    """Enumerate the exact evolving-set kernel (n <= 20)."""
    n = chain.n
    if n > SET_KERNEL_MAX:
        raise TooLarge(f"set kernel needs 2^{n} subsets; ceiling is n={SET_KERNEL_MAX}")
    pi = chain.pi
    Qd = chain.Q.toarray()
    rows, cols, vals = [], [], []
    one_bits = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    for idx, M in subset_chunks(n):
        T = (M.astype(float) @ Qd) / pi
        T[idx == 0] = 0.0
        T[idx == (1 << n) - 1] = 1.0
        order = np.argsort(-T, axis=1, kind="stable")
        Ts = _snap_sorted(np.take_along_axis(T, order, axis=1))
        cm = np.bitwise_or.accumulate(one_bits[order], axis=1)
        masks = np.concatenate([np.zeros((len(idx), 1), dtype=np.int64), cm], axis=1)
        hi = np.concatenate([np.ones((len(idx), 1)), Ts], axis=1)
        lo = np.concatenate([Ts, np.zeros((len(idx), 1))], axis=1)
        length = hi - lo
        keep = length > 0
        r = np.broadcast_to(idx[:, None], keep.shape)[keep]
        rows.append(r)
        cols.append(masks[keep])
        vals.append(length[keep])
    size = 1 << n
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    K.sum_duplicates()
    measures = subset_measures(pi)
    inv = np.zeros(size)
    inv[1:] = 1.0 / measures[1:]
    K_hat = sp.csr_matrix(sp.diags(inv) @ K @ sp.diags(measures))
    K_hat.eliminate_zeros()
    return SetChainKernel(n, K, K_hat, measures)


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass
class EvolvingTrace:
    sets: list[StateSet]
    u_draws: list[float]
    weights: list[float]
    mode: str

    def z_values(self) -> list[float]:
        """Z_k = sqrt(pi(S_k^#)) / pi(S_k); infinite once S_k is empty."""
        out = []
        for S in self.sets:
            out.append(np.sqrt(S.sharp().measure) / S.measure if S.measure > 0 else np.inf)
        return out

    @property
    def final(self) -> StateSet:
        return self.sets[-1]


def _open_uniform(rng: np.random.Generator, size=None):
    u = rng.random(size)
    if size is None:
        while u == 0.0:
            u = rng.random()
        return float(u)
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def sample_trace(chain: ChainKernel, S0: StateSet, steps: int, seed: int,
                 mode: str = "plain") -> EvolvingTrace:
    """Simulate ``steps`` transitions from S0.

    plain and doob-weighted follow K with fresh uniforms (the latter is the
    same path, read with weights pi(S_k)/pi(S0)); doob-exact follows the
    Doob kernel by choosing an interval of the step partition with
    probability length * pi(A)/pi(S) and a uniform inside it, so every
    recorded u reproduces its step under :func:`evolve_step`.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if S0.is_empty():
        raise EmptyStart("the evolving-set process needs a nonempty start")
    rng = np.random.default_rng(seed)
    sets, us, weights = [S0], [], [1.0]
    S = S0
    for _ in range(steps):
        if mode == "doob-exact":
            part = step_partition(chain, S)
            masses = np.array([A.measure for A in part.targets])
            probs = part.lengths * masses / S.measure
            k = int(rng.choice(len(probs), p=probs / probs.sum()))
            v = rng.random()
            u = float(part.upper[k] - (part.upper[k] - part.lower[k]) * v)
            S = part.targets[k]
        else:
            u = _open_uniform(rng)
            S = evolve_step(chain, S, u)
        sets.append(S)
        us.append(u)
        weights.append(S.measure / S0.measure)
    return EvolvingTrace(sets, us, weights, mode)


def simulate_population(chain: ChainKernel, S0: StateSet, steps: int, samples: int,
                        seed: int) -> Counter:
    """Run ``samples`` independent plain processes; return final-set counts.

    Copies sharing a set are advanced together through one step partition.
    """
    rng = np.random.default_rng(seed)
    pop = Counter({S0.mask: samples})
    cache: dict[int, StepPartition] = {}
    for _ in range(steps):
        nxt: Counter = Counter()
        for mask in sorted(pop):
            count = pop[mask]
            part = cache.get(mask)
            if part is None:
                part = cache[mask] = step_partition(chain, StateSet.from_mask(chain, mask))
            hits = np.bincount(part.locate(_open_uniform(rng, count)), minlength=len(part.targets))
            for k, c in enumerate(hits):
                if c:
                    nxt[part.targets[k].mask] += int(c)
        pop = nxt
    return pop


@dataclass(frozen=True)
class TransitionEstimate:
    value: float
    stderr: float
    samples: int


def estimate_transition(chain: ChainKernel, x: int, y: int, n: int, samples: int,
                        seed: int) -> TransitionEstimate:
    """Monte Carlo p^n(x, y) = (pi(y)/pi(x)) P_{x}(y in S_n)."""
    if samples < 1:
        raise ValueError("samples must be positive")
    start = StateSet.from_members(chain, [x])
    pop = simulate_population(chain, start, n, samples, seed)
    hits = sum(c for mask, c in pop.items() if (mask >> y) & 1)
    frac = hits / samples
    scale = chain.pi[y] / chain.pi[x]
    return TransitionEstimate(float(scale * frac),
                              float(scale * np.sqrt(frac * (1 - frac) / samples)), samples)


def membership(n: int, masks: Sequence[int]) -> np.ndarray:
    return np.array([mask_to_indicator(m, n) for m in masks], dtype=bool).reshape(len(masks), n)
