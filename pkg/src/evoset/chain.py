"""Finite Markov chains: validation, stationarity, reversal, lazification, flows.

A :class:`ChainKernel` is immutable after construction.  Transition rows are
held in a CSR matrix; the stationary weights, the laziness ``gamma`` and the
reversibility flag are computed (or checked) once at build time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .errors import BadStationary, NotStochastic, Reducible

INPUT_TOL = 1e-9
BUILD_TOL = 1e-12
RENORM_TOL = 1e-14
DIRECT_SOLVE_MAX = 2000
POWER_RESIDUAL = 1e-13
POWER_MAX_ITER = 200_000


class ChainKernel:
    """Irreducible transition kernel with its stationary distribution.

    Use :func:`build_chain` rather than calling the constructor directly.
    """

    __slots__ = ("n", "P", "pi", "gamma", "reversible", "__dict__")

    def __init__(self, P: sp.csr_matrix, pi: np.ndarray, gamma: float, reversible: bool):
        self.n = P.shape[0]
        self.P = P
        self.pi = pi
        self.gamma = gamma
        self.reversible = reversible
        P.data.setflags(write=False)
        pi.setflags(write=False)

    def __repr__(self):
        return (f"ChainKernel(n={self.n}, nnz={self.P.nnz}, gamma={self.gamma:.6g}, "
                f"reversible={self.reversible})")

    @property
    def pi_min(self) -> float:
        return float(self.pi.min())

    def row(self, x: int) -> list[tuple[int, float]]:
        lo, hi = self.P.indptr[x], self.P.indptr[x + 1]
        return [(int(y), float(p)) for y, p in zip(self.P.indices[lo:hi], self.P.data[lo:hi])]

    @cached_property
    def Q(self) -> sp.csr_matrix:
        """Edge flows Q(x, y) = pi(x) p(x, y)."""
        return sp.csr_matrix(sp.diags(self.pi) @ self.P)

    @cached_property
    def Q_in(self) -> sp.csr_matrix:
        """Transpose of Q: row y lists the flows entering y."""
        return self.Q.T.tocsr()

    @cached_property
    def dense(self) -> np.ndarray:
        return self.P.toarray()

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Undirected support-graph neighbours (self excluded)."""
        S = (self.P + self.P.T).tocsr()
        out = []
        for x in range(self.n):
            nb = S.indices[S.indptr[x]:S.indptr[x + 1]]
            out.append(nb[nb != x])
        return out

    def flows_into(self, indicator: np.ndarray) -> np.ndarray:
        """Vector y -> Q(S, y) for the set with the given 0/1 indicator."""
        return self.Q_in @ indicator.astype(float)

    def state_set(self, members: Iterable[int]) -> "StateSet":
        return StateSet.from_members(self, members)

    @property
    def empty(self) -> "StateSet":
        return StateSet(0, self.n, 0.0)

    @property
    def full(self) -> "StateSet":
        return StateSet((1 << self.n) - 1, self.n, 1.0)


@dataclass(frozen=True)
class StateSet:
    """Subset of states as an integer bit mask with cached stationary mass.

    Equality and hashing use the membership only.
    """

    mask: int
    n: int
    measure: float = field(compare=False)

    @classmethod
    def from_members(cls, chain: ChainKernel, members: Iterable[int]) -> "StateSet":
        mask = 0
        for x in members:
            x = int(x)
            if not 0 <= x < chain.n:
                raise ValueError(f"state {x} out of range")
            mask |= 1 << x
        return cls.from_mask(chain, mask)

    @classmethod
    def from_mask(cls, chain: ChainKernel, mask: int) -> "StateSet":
        ind = mask_to_indicator(mask, chain.n)
        return cls(mask, chain.n, float(chain.pi[ind].sum()))

    @classmethod
    def from_indicator(cls, chain: ChainKernel, ind: np.ndarray) -> "StateSet":
        ind = np.asarray(ind, dtype=bool)
        return cls(indicator_to_mask(ind), chain.n, float(chain.pi[ind].sum()))

    def members(self) -> list[int]:
        return np.flatnonzero(self.indicator()).tolist()

    def indicator(self) -> np.ndarray:
        return mask_to_indicator(self.mask, self.n)

    def __contains__(self, x: int) -> bool:
        return bool((self.mask >> x) & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def is_empty(self) -> bool:
        return self.mask == 0

    def is_full(self) -> bool:
        return self.mask == (1 << self.n) - 1

    def complement(self) -> "StateSet":
        return StateSet(((1 << self.n) - 1) ^ self.mask, self.n, 1.0 - self.measure)

    def sharp(self) -> "StateSet":
        """The set itself when its mass is at most 1/2, else its complement."""
        return self if self.measure <= 0.5 else self.complement()

    def encode(self) -> str:
        """Hex bit encoding for n <= 64, else comma-joined ids."""
        if self.n <= 64:
            return format(self.mask, "x")
        return ",".join(map(str, self.members()))


def mask_to_indicator(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8 or 1, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def indicator_to_mask(ind: np.ndarray) -> int:
    packed = np.packbits(np.asarray(ind, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _as_csr(rows) -> sp.csr_matrix:
    if sp.issparse(rows):
        return sp.csr_matrix(rows, dtype=float)
    if isinstance(rows, np.ndarray):
        return sp.csr_matrix(rows.astype(float))
    n = len(rows)
    if n and all(not isinstance(r, dict) and len(r) == n
                 and all(np.isscalar(v) for v in r) for r in rows):
        return sp.csr_matrix(np.asarray(rows, dtype=float))
    # sparse per-state lists of (target, probability), or dicts
    r, c, v = [], [], []
    for x, row in enumerate(rows):
        items = row.items() if isinstance(row, dict) else row
        for y, p in items:
            r.append(x)
            c.append(int(y))
            v.append(float(p))
    return sp.csr_matrix((v, (r, c)), shape=(n, n))


def _stationary(P: sp.csr_matrix) -> np.ndarray:
    n = P.shape[0]
    if n <= DIRECT_SOLVE_MAX:
        A = P.T.toarray() - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = scipy.linalg.solve(A, b)
        # one step of iterative refinement
        r = b - A @ pi
        pi = pi + scipy.linalg.solve(A, r)
        return pi
    lazy = (0.5 * (P + sp.identity(n, format="csr"))).T.tocsr()
    pi = np.full(n, 1.0 / n)
    PT = P.T.tocsr()
    for it in range(POWER_MAX_ITER):
        pi = lazy @ pi
        pi /= pi.sum()
        if it % 50 == 0 and np.abs(PT @ pi - pi).max() < POWER_RESIDUAL:
            return pi
    # power iteration stalled on a slowly mixing chain; sparse direct fallback
    A = (PT - sp.identity(n, format="csr")).tolil()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return spsolve(A.tocsr(), b)


def build_chain(rows, pi: Sequence[float] | None = None) -> ChainKernel:
    """Validate a stochastic matrix and attach its stationary distribution.

    ``rows`` may be a dense array, a scipy sparse matrix, or per-state lists
    of ``(target, probability)`` pairs.  Rows must sum to one within 1e-9;
    they are renormalised exactly.  If ``pi`` is omitted it is solved for.

    Raises NotStochastic, Reducible or BadStationary.
    """
    P = _as_csr(rows)
    P.sum_duplicates()
    P.eliminate_zeros()
    n, m = P.shape
    if n != m or n == 0:
        raise NotStochastic(f"kernel must be square and nonempty, got {P.shape}")
    if P.data.size and P.data.min() < 0:
        raise NotStochastic("negative transition probability")
    sums = np.asarray(P.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > INPUT_TOL)
    if bad.size:
        raise NotStochastic(f"row {bad[0]} sums to {float(sums[bad[0]])!r}")
    # rows already stochastic to rounding are kept bit-for-bit so files round-trip
    scale = np.where(np.abs(sums - 1.0) > RENORM_TOL, 1.0 / sums, 1.0)
    P = sp.csr_matrix(sp.diags(scale) @ P)
    P.sort_indices()

    ncomp, _ = connected_components(P, directed=True, connection="strong")
    if ncomp > 1:
        raise Reducible(f"support graph has {ncomp} strongly connected components")

    if pi is None:
        pi_arr = _stationary(P)
        if pi_arr.min() <= 0:
            raise BadStationary("stationary solve produced nonpositive weights")
        pi_arr = pi_arr / pi_arr.sum()
    else:
        pi_arr = np.asarray(pi, dtype=float).copy()
        if pi_arr.shape != (n,):
            raise BadStationary(f"pi has shape {pi_arr.shape}, expected ({n},)")
        if pi_arr.min() <= 0:
            raise BadStationary("pi must be strictly positive")
        if abs(pi_arr.sum() - 1.0) > INPUT_TOL:
            raise BadStationary(f"pi sums to {float(pi_arr.sum())!r}")
        if abs(pi_arr.sum() - 1.0) > RENORM_TOL:
            pi_arr /= pi_arr.sum()
    resid = np.abs(P.T @ pi_arr - pi_arr).max()
    if resid > (INPUT_TOL if pi is not None else BUILD_TOL):
        raise BadStationary(f"pi P differs from pi by {resid:.3e}")

    diag = P.diagonal()
    gamma = float(diag.min())
    Q = sp.diags(pi_arr) @ P
    asym = abs(Q - Q.T)
    reversible = bool(asym.nnz == 0 or asym.max() <= BUILD_TOL)
    return ChainKernel(P, pi_arr, gamma, reversible)


def time_reversal(chain: ChainKernel) -> ChainKernel:
    """Kernel with reversed(z, y) = pi(y) p(y, z) / pi(z); same pi."""
    pi = chain.pi
    R = sp.diags(1.0 / pi) @ chain.P.T @ sp.diags(pi)
    return build_chain(sp.csr_matrix(R), pi=pi)


def lazify(chain: ChainKernel, beta: float = 0.5) -> ChainKernel:
    """Kernel (1 - beta) P + beta I."""
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    if beta == 0:
        return chain
    L = (1 - beta) * chain.P + beta * sp.identity(chain.n, format="csr")
    return build_chain(sp.csr_matrix(L), pi=chain.pi)


def _as_set(chain: ChainKernel, target) -> StateSet:
    if isinstance(target, StateSet):
        return target
    if isinstance(target, (int, np.integer)):
        return StateSet.from_members(chain, [int(target)])
    return StateSet.from_members(chain, target)


def q_flow(chain: ChainKernel, S, A) -> float:
    """Q(S, A) = sum over s in S, a in A of pi(s) p(s, a)."""
    S = _as_set(chain, S)
    A = _as_set(chain, A)
    flows = chain.flows_into(S.indicator())
    return float(flows[A.indicator()].sum())


def conductance(chain: ChainKernel, S: StateSet) -> float:
    """Phi_S = Q(S, S^c) / pi(S)."""
    if S.is_empty():
        raise ValueError("conductance of the empty set")
    flows = chain.flows_into(S.indicator())
    return float(flows[~S.indicator()].sum()) / S.measure
