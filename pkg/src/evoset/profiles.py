"""Isoperimetric profiles r -> inf{gauge(S) : pi(S) <= r} as exact staircases.

Profiles are lower envelopes over all subsets (``enumerate``), over a
caller-supplied family (``family``, an upper estimate of the true profile),
or over greedily grown connected sets (``monte-carlo``, also an upper
estimate).  Analytic profiles used by the infinite-measure bound live here
too, so both kinds expose the same ``value``/``log_integral`` surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chain import ChainKernel, StateSet
from .errors import BelowFloor, EmptyFamily, TooLarge, UnboundedIntegral, ZeroConductance, ZeroGauge
from .evolving import ENUMERATE_MAX, GAUGES, gauge_values, subset_chunks

HALF = 0.5
MEASURE_TOL = 1e-12
PROVENANCES = ("exact", "family", "monte-carlo", "analytic")


@dataclass(frozen=True)
class StepFunctionProfile:
    """Nonincreasing staircase: ``values[i]`` on [r[i], r[i+1]).

    The last value holds on [r[-1], max(r[-1], 1/2)); ``tail`` applies beyond.
    """

    gauge: str
    r: np.ndarray
    values: np.ndarray
    tail: float
    floor: float
    provenance: str = "exact"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        if r.size == 0 or r.shape != v.shape:
            raise ValueError("profile needs matching nonempty breakpoint and value arrays")
        if np.any(np.diff(r) <= 0):
            raise ValueError("profile breakpoints must be strictly increasing")
        if np.any(v <= 0) or self.tail <= 0:
            raise ZeroGauge("profile values must be positive")
        if np.any(np.diff(v) > 1e-15) or self.tail > v[-1] + 1e-15:
            raise ValueError("profile values must be nonincreasing")
        if self.floor > r[0]:
            raise ValueError("floor lies above the first breakpoint")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.r.tolist(), self.values.tolist()))

    @property
    def minimum(self) -> float:
        """Value at r = 1/2 and beyond (Phi_*, psi_*, h2+)."""
        return float(self.tail)

    def _edges(self):
        """Segments (start, end, value) covering [floor, inf)."""
        starts = np.concatenate([[self.floor], self.r[1:]])
        cut = max(self.r[-1], HALF)
        ends = np.concatenate([self.r[1:], [cut]])
        segs = [(a, b, v) for a, b, v in zip(starts, ends, self.values) if b > a]
        segs.append((cut, math.inf, self.tail))
        return segs

    def value(self, r: float) -> float:
        if r < self.floor:
            raise BelowFloor(f"r={float(r)!r} lies below the profile floor {float(self.floor)!r}")
        for a, b, v in self._edges():
            if a <= r < b:
                return float(v)
        return float(self.tail)

    def log_integral(self, lo: float, hi: float, power: int) -> float:
        """Integral of du / (u g(u)^power) over [lo, hi] with lo >= floor."""
        total = 0.0
        for a, b, v in self._edges():
            a, b = max(a, lo), min(b, hi)
            if b > a:
                total += math.log(b / a) / v ** power
        return total


def profile_query(profile, r: float) -> float:
    """Evaluate a profile at measure r (constant beyond the last step)."""
    return profile.value(r)


@dataclass(frozen=True)
class AnalyticProfile:
    """Closed-form gauge: constant a, power law a u^-b, or log law c log(1/u).

    ``cap`` freezes the value for u > cap (the usual constant-tail rule).
    """

    kind: str
    params: dict = field(default_factory=dict)
    floor: float = 0.0
    cap: float | None = None
    gauge: str = "phi"
    provenance: str = "analytic"

    def __post_init__(self):
        p = self.params
        if self.kind == "constant":
            if p.get("a", 0) <= 0:
                raise ZeroGauge("constant profile needs a > 0")
        elif self.kind == "powerlaw":
            if p.get("a", 0) <= 0 or p.get("b", 0) < 0:
                raise ValueError("power law needs a > 0 and b >= 0")
        elif self.kind == "loglaw":
            if p.get("c", 0) <= 0:
                raise ValueError("log law needs c > 0")
        else:
            raise ValueError(f"unknown analytic profile {self.kind!r}")

    def _raw(self, u: float) -> float:
        p = self.params
        if self.kind == "constant":
            return p["a"]
        if self.kind == "powerlaw":
            return p["a"] * u ** (-p["b"])
        return p["c"] * math.log(1.0 / u)

    def value(self, r: float) -> float:
        if r < self.floor or r <= 0:
            raise BelowFloor(f"r={float(r)!r} lies below the profile floor {float(self.floor)!r}")
        if self.cap is not None and r > self.cap:
            r = self.cap
        return self._raw(r)

    def _primitive_integral(self, lo: float, hi: float, power: int) -> float:
        p = self.params
        if self.kind == "constant":
            return math.log(hi / lo) / p["a"] ** power
        if self.kind == "powerlaw":
            e = power * p["b"]
            if e == 0:
                return math.log(hi / lo) / p["a"] ** power
            return (hi ** e - lo ** e) / (p["a"] ** power * e)
        if hi >= 1.0:
            raise UnboundedIntegral("log-law gauge vanishes at u = 1; integral diverges")
        w_lo, w_hi = math.log(1 / lo), math.log(1 / hi)
        c = p["c"]
        if power == 1:
            return math.log(w_lo / w_hi) / c
        return (1 / w_hi - 1 / w_lo) / c ** 2

    def log_integral(self, lo: float, hi: float, power: int) -> float:
        if self.cap is None or hi <= self.cap:
            return self._primitive_integral(lo, hi, power)
        total = self._primitive_integral(lo, self.cap, power) if lo < self.cap else 0.0
        a = max(lo, self.cap)
        return total + math.log(hi / a) / self._raw(self.cap) ** power

    def spec(self) -> str:
        items = dict(self.params)
        if self.cap is not None:
            items["cap"] = self.cap
        if self.floor:
            items["floor"] = self.floor
        return self.kind + ":" + ",".join(f"{k}={v!r}" for k, v in items.items())


def parse_analytic(text: str) -> AnalyticProfile:
    """Parse ``"powerlaw:a=0.3,b=0.5"``-style profile descriptors."""
    kind, _, rest = text.partition(":")
    kind = {"power-law": "powerlaw", "log-law": "loglaw", "const": "constant"}.get(kind, kind)
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        params[key.strip()] = float(val)
    cap = params.pop("cap", None)
    floor = params.pop("floor", 0.0)
    return AnalyticProfile(kind, params, floor=floor, cap=cap)


# --------------------------------------------------------------------------
# envelopes


def _staircase(meas: np.ndarray, vals: np.ndarray):
    """Lower envelope (running minimum over increasing measure), compressed."""
    keep = meas <= HALF + MEASURE_TOL
    meas, vals = meas[keep], vals[keep]
    if meas.size == 0:
        return meas, vals
    order = np.lexsort((vals, meas))
    meas, vals = meas[order], vals[order]
    # measures equal up to rounding share the smallest key
    new_group = np.concatenate([[True], np.diff(meas) > MEASURE_TOL * np.maximum(1.0, meas[1:])])
    gid = np.cumsum(new_group) - 1
    keys = meas[new_group]
    gmin = np.full(keys.size, np.inf)
    np.minimum.at(gmin, gid, vals)
    run = np.minimum.accumulate(gmin)
    drop = np.concatenate([[True], run[1:] < run[:-1]])
    return keys[drop], run[drop]


def _merge(parts):
    if not parts:
        return np.empty(0), np.empty(0)
    return _staircase(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def _finish(chain: ChainKernel, gauge: str, r, v, provenance: str) -> StepFunctionProfile:
    if r.size == 0:
        raise EmptyFamily("no set with pi(S) <= 1/2 to build a profile from")
    if v.min() <= 0:
        raise ZeroConductance(f"some set has zero {gauge} gauge; chain is not irreducible "
                              "or the gauge degenerates")
    return StepFunctionProfile(gauge, r, v, float(v[-1]), float(r[0]), provenance)


def family_matrix(chain: ChainKernel, family) -> np.ndarray:
    """Boolean membership matrix for a family of sets (lists, StateSets or rows)."""
    if isinstance(family, np.ndarray) and family.dtype == bool and family.ndim == 2:
        M = family
    else:
        rows = []
        for S in family:
            ind = np.zeros(chain.n, dtype=bool)
            if isinstance(S, StateSet):
                ind = S.indicator()
            else:
                ind[np.asarray(list(S), dtype=int)] = True
            rows.append(ind)
        if not rows:
            raise EmptyFamily("family is empty")
        M = np.array(rows)
    if M.shape[0] == 0:
        raise EmptyFamily("family is empty")
    sizes = M.sum(axis=1)
    if np.any(sizes == 0) or np.any(sizes == chain.n):
        raise ValueError("family members must be proper nonempty subsets")
    return M


def _enumerate(chain: ChainKernel, gauge: str, max_states: int):
    if chain.n > max_states:
        raise TooLarge(f"enumeration over 2^{chain.n} subsets exceeds ceiling n={max_states}")
    parts = []
    for idx, M in subset_chunks(chain.n, start=1):
        M = M[idx < (1 << chain.n) - 1]
        meas = M.astype(float) @ chain.pi
        M = M[meas <= HALF + MEASURE_TOL]
        if len(M):
            parts.append(_staircase(*gauge_values(chain, M, gauge)))
    return _merge(parts)


def _greedy(chain: ChainKernel, gauge: str, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    nbrs = chain.neighbors
    parts = []
    for _ in range(samples):
        v = int(rng.integers(chain.n))
        ind = np.zeros(chain.n, dtype=bool)
        ind[v] = True
        m0, v0 = gauge_values(chain, ind[None, :], gauge)
        rec_m, rec_v = [m0[0]], [v0[0]]
        boundary = set(nbrs[v].tolist())
        while boundary:
            cand = np.array(sorted(boundary))
            M = np.repeat(ind[None, :], cand.size, axis=0)
            M[np.arange(cand.size), cand] = True
            meas, vals = gauge_values(chain, M, gauge)
            ok = meas <= HALF + MEASURE_TOL
            if not ok.any():
                break
            k = int(np.argmin(np.where(ok, vals, np.inf)))
            c = int(cand[k])
            ind[c] = True
            rec_m.append(meas[k])
            rec_v.append(vals[k])
            boundary.discard(c)
            boundary.update(int(w) for w in nbrs[c] if not ind[w])
        parts.append(_staircase(np.array(rec_m), np.array(rec_v)))
    return _merge(parts)


def gauge_profile(chain: ChainKernel, gauge: str, method: str = "enumerate", family=None,
                  samples: int = 8, seed: int | None = None,
                  max_states: int = ENUMERATE_MAX) -> StepFunctionProfile:
    """Profile of any gauge in ('phi', 'psi', 'theta', 'varphi')."""
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    if method == "enumerate":
        r, v = _enumerate(chain, gauge, max_states)
        return _finish(chain, gauge, r, v, "exact")
    if method == "family":
        if family is None:
            raise EmptyFamily("family method needs a family of sets")
        M = family_matrix(chain, family)
        r, v = _staircase(*gauge_values(chain, M, gauge))
        return _finish(chain, gauge, r, v, "family")
    if method == "monte-carlo":
        if seed is None:
            raise ValueError("monte-carlo profiles need an explicit seed")
        r, v = _greedy(chain, gauge, samples, seed)
        return _finish(chain, gauge, r, v, "monte-carlo")
    raise ValueError(f"unknown method {method!r}")


def conductance_profile(chain: ChainKernel, method: str = "enumerate", **kw) -> StepFunctionProfile:
    """Phi(r) = inf{Phi_S : pi(S) <= r}."""
    return gauge_profile(chain, "phi", method, **kw)


def root_profile(chain: ChainKernel, method: str = "enumerate", **kw) -> StepFunctionProfile:
    """psi(r) = inf{psi(S) : pi(S) <= r}, psi(S) integrated exactly."""
    return gauge_profile(chain, "psi", method, **kw)


def h2_plus(chain: ChainKernel, method: str = "enumerate", **kw) -> float:
    """inf{theta_S : pi(S) <= 1/2}."""
    return gauge_profile(chain, "theta", method, **kw).minimum
