"""Ground-truth mixing quantities by exact matrix powering.

tau and tau_V are taken literally as minima: the scan stops at the first n
satisfying the criterion and never assumes the deviation is monotone.  The
continuous-time kernel e^{t(P - I)} is always built by uniformization, a
Poisson mixture of powers of P, which keeps every entry nonnegative.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import stats

from .chain import ChainKernel
from .errors import NotMixed, NotReversible, TooLarge

DENSE_MAX = 4096
RENORM_EVERY = 100


def distribution_at(chain: ChainKernel, x: int, n: int) -> np.ndarray:
    """mu_n = p^n(x, .) by repeated vector-matrix products."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    mu = np.zeros(chain.n)
    mu[x] = 1.0
    PT = chain.P.T.tocsr()
    for k in range(1, n + 1):
        mu = PT @ mu
        if k % RENORM_EVERY == 0:
            mu /= mu.sum()
    return mu


def chi_square(mu: np.ndarray, pi: np.ndarray) -> float:
    """sum_y pi(y) (mu(y)/pi(y) - 1)^2, cross-checked against sum mu^2/pi - 1."""
    mu = np.asarray(mu, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise ValueError("pi must be strictly positive")
    direct = float(np.sum(pi * (mu / pi - 1.0) ** 2))
    expanded = float(np.sum(mu * mu / pi) - 1.0)
    if abs(direct - expanded) > 1e-12 + 1e-9 * direct:
        warnings.warn(f"chi-square forms disagree: {direct!r} vs {expanded!r}", RuntimeWarning)
    return direct


def total_variation(mu: np.ndarray, nu: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(mu) - np.asarray(nu)).sum())


def matrix_powers(chain: ChainKernel, n_max: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (n, (P^n)^T) for n = 0..n_max as dense arrays (column x is p^n(x, .))."""
    if chain.n > DENSE_MAX:
        raise TooLarge(f"dense powering limited to {DENSE_MAX} states")
    PT = chain.P.T.tocsr()
    Mt = np.eye(chain.n)
    yield 0, Mt
    for k in range(1, n_max + 1):
        Mt = PT @ Mt
        if k % RENORM_EVERY == 0:
            Mt /= Mt.sum(axis=0, keepdims=True)
        yield k, Mt


def uniform_deviation(Mt: np.ndarray, pi: np.ndarray) -> float:
    """max_{x,y} |p(x, y)/pi(y) - 1| for a transposed kernel."""
    return float(np.abs(Mt / pi[:, None] - 1.0).max())


def tv_deviation(Mt: np.ndarray, pi: np.ndarray) -> float:
    """max_x ||p(x, .) - pi||."""
    return float(0.5 * np.abs(Mt - pi[:, None]).sum(axis=0).max())


def chi_square_columns(Mt: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """chi^2(p(x, .), pi) for every starting state x."""
    return (pi[:, None] * (Mt / pi[:, None] - 1.0) ** 2).sum(axis=0)


def _first_time(chain, epsilon, n_max, measure) -> int:
    for n, Mt in matrix_powers(chain, n_max):
        if measure(Mt, chain.pi) <= epsilon:
            return n
    raise NotMixed(n_max)


def tau_uniform(chain: ChainKernel, epsilon: float, n_max: int = 100_000) -> int:
    """min{n : |p^n(x, y)/pi(y) - 1| <= eps for all x, y}."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return _first_time(chain, epsilon, n_max, uniform_deviation)


def tau_tv(chain: ChainKernel, epsilon: float, n_max: int = 100_000) -> int:
    """min{n : ||p^n(x, .) - pi|| <= eps for all x}."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return _first_time(chain, epsilon, n_max, tv_deviation)


def first_chi_square_times(chain: ChainKernel, epsilon: float, n_max: int = 100_000) -> np.ndarray:
    """Per starting state x, the first n with chi^2(p^n(x, .), pi) <= eps."""
    out = np.full(chain.n, -1)
    for n, Mt in matrix_powers(chain, n_max):
        hit = (chi_square_columns(Mt, chain.pi) <= epsilon) & (out < 0)
        out[hit] = n
        if np.all(out >= 0):
            return out
    raise NotMixed(n_max)


def spectral_gap(chain: ChainKernel) -> float:
    """1 - lambda_2 of D^1/2 P D^-1/2 (reversible chains only)."""
    if not chain.reversible:
        raise NotReversible("spectral gap is defined here for reversible chains only")
    if chain.n > DENSE_MAX:
        raise TooLarge(f"dense eigensolve limited to {DENSE_MAX} states")
    s = np.sqrt(chain.pi)
    A = s[:, None] * chain.dense / s[None, :]
    A = 0.5 * (A + A.T)
    eig = np.linalg.eigvalsh(A)
    return float(1.0 - eig[-2]) if chain.n > 1 else 1.0


# --------------------------------------------------------------------------
# continuous time


def poisson_weights(t: float, tail_tol: float = 1e-12) -> np.ndarray:
    """Poisson(t) pmf on 0..J with the mass beyond J below tail_tol."""
    if t < 0 or tail_tol <= 0:
        raise ValueError("need t >= 0 and tail_tol > 0")
    if t == 0:
        return np.ones(1)
    J = int(stats.poisson.isf(tail_tol, t)) + 1
    return stats.poisson.pmf(np.arange(J + 1), t)


def continuous_distribution(chain: ChainKernel, x: int, t: float,
                            tail_tol: float = 1e-12) -> np.ndarray:
    """h_t(x, .) = sum_j e^-t t^j / j! p^j(x, .), truncated and renormalised."""
    w = poisson_weights(t, tail_tol)
    mu = np.zeros(chain.n)
    mu[x] = 1.0
    PT = chain.P.T.tocsr()
    out = w[0] * mu
    for j in range(1, w.size):
        mu = PT @ mu
        out += w[j] * mu
    return out / out.sum()


def continuous_kernel(chain: ChainKernel, t: float, tail_tol: float = 1e-12) -> np.ndarray:
    """Dense h_t = e^{t(P - I)} by uniformization (rows renormalised)."""
    w = poisson_weights(t, tail_tol)
    P = chain.dense
    M = np.eye(chain.n)
    out = w[0] * M
    for j in range(1, w.size):
        M = M @ P
        out += w[j] * M
    return out / out.sum(axis=1, keepdims=True)


def _row_deviation(H: np.ndarray, pi: np.ndarray) -> float:
    return float(np.abs(H / pi[None, :] - 1.0).max())


def tau_uniform_continuous(chain: ChainKernel, epsilon: float, t_max: float = 1e4,
                           resolution: float = 0.01, tail_tol: float = 1e-12) -> float:
    """First grid time (step ``resolution``) meeting the uniform criterion,
    refined by bisection on the preceding grid cell to resolution/100.

    Grid kernels are advanced with the semigroup identity h_{t+s} = h_t h_s.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    pi = chain.pi
    step = continuous_kernel(chain, resolution, tail_tol)
    H_prev = np.eye(chain.n)
    if _row_deviation(H_prev, pi) <= epsilon:
        return 0.0
    k = 0
    while (k + 1) * resolution <= t_max + 1e-12:
        H = H_prev @ step
        k += 1
        if _row_deviation(H, pi) <= epsilon:
            lo, hi = 0.0, resolution
            while hi - lo > resolution / 100:
                mid = 0.5 * (lo + hi)
                Hm = H_prev @ continuous_kernel(chain, mid, tail_tol)
                if _row_deviation(Hm, pi) <= epsilon:
                    hi = mid
                else:
                    lo = mid
            return (k - 1) * resolution + hi
        H_prev = H
    raise NotMixed(t_max)


# --------------------------------------------------------------------------
# reports


@dataclass
class MixingReport:
    tau: dict[float, int]
    tau_tv: dict[float, int]
    chi_curve: list[tuple[int, float]]
    spectral_gap: float | None
    n_max: int
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": {repr(e): v for e, v in self.tau.items()},
            "tau_tv": {repr(e): v for e, v in self.tau_tv.items()},
            "gap": self.spectral_gap,
            "chi_curve": [{"n": n, "value": v} for n, v in self.chi_curve],
            "params": dict(self.params, n_max=self.n_max),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def mixing_report(chain: ChainKernel, epsilons: Sequence[float], n_max: int = 100_000,
                  chi_points: int | None = None) -> MixingReport:
    """tau and tau_V for several epsilons in one powering pass.

    The chi-square curve records max_x chi^2(p^n(x, .), pi) at every step
    scanned (or the first ``chi_points`` steps).  Epsilons not reached by
    ``n_max`` raise NotMixed.
    """
    eps = sorted(set(float(e) for e in epsilons), reverse=True)
    tau: dict[float, int] = {}
    tv: dict[float, int] = {}
    curve = []
    pi = chain.pi
    for n, Mt in matrix_powers(chain, n_max):
        if chi_points is None or n < chi_points:
            curve.append((n, float(chi_square_columns(Mt, pi).max())))
        du, dv = uniform_deviation(Mt, pi), tv_deviation(Mt, pi)
        for e in eps:
            if e not in tau and du <= e:
                tau[e] = n
            if e not in tv and dv <= e:
                tv[e] = n
        if len(tau) == len(eps) and len(tv) == len(eps) and (chi_points is None or n >= chi_points - 1):
            break
    else:
        raise NotMixed(n_max)
    gap = spectral_gap(chain) if chain.reversible else None
    return MixingReport(dict(sorted(tau.items())), dict(sorted(tv.items())), curve, gap, n_max,
                        {"epsilons": eps, "states": chain.n})
