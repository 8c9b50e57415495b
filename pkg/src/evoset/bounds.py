"""Closed-form evaluation of the integral mixing-time bounds over profiles.

Every bound reduces to integral du / (u g(u)) with g a profile value or its
square; over a staircase that is a finite sum of logarithms, and analytic
profiles supply their own antiderivatives.  Discrete bounds are rounded up
to the smallest admissible step count; continuous-time bounds are left real.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import BadRange, EmptyRange, GammaZero, ZeroGauge

THEOREMS = ("hk", "hk2", "psith", "hki", "cont1", "convex-psi", "convex-phi", "gap-lower")
TRANSFORMS = {"identity": 1, "square": 2}


class ClampWarning(UserWarning):
    """Lower integration limit raised to the profile floor."""


@dataclass
class BoundReport:
    theorem: str
    epsilon: float | None
    gamma: float | None
    pi_x: float | None
    pi_y: float | None
    integral: float
    bound: float
    provenance: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _integral(profile, lo: float, hi: float, transform: str, notes: list[str]) -> float:
    if hi <= lo:
        return 0.0
    if lo < profile.floor:
        notes.append(f"lower limit {float(lo)!r} clamped to profile floor {float(profile.floor)!r}")
        lo = profile.floor
        if hi <= lo:
            return 0.0
    if lo <= 0:
        raise BadRange("integration range must lie in (0, inf)")
    return profile.log_integral(lo, hi, TRANSFORMS[transform])


def weighted_log_integral(profile, lo: float, hi: float, transform: str = "square") -> float:
    """Exact integral over [lo, hi] of du / (u g(u)), g = value**2 or value.

    A lower limit below the profile floor is raised to the floor with a
    :class:`ClampWarning`.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {sorted(TRANSFORMS)}")
    if not lo < hi:
        raise EmptyRange(f"empty range [{float(lo)!r}, {float(hi)!r}]")
    notes: list[str] = []
    value = _integral(profile, lo, hi, transform, notes)
    for note in notes:
        warnings.warn(note, ClampWarning, stacklevel=2)
    return value


def gamma_factor(gamma: float) -> float:
    """(1 - gamma)^2 / gamma^2; equals 1 at gamma = 1/2."""
    if gamma <= 0:
        raise GammaZero("laziness gamma = 0 makes the bound vacuous")
    if gamma > 0.5:
        raise ValueError("gamma must lie in (0, 1/2]; use min(gamma, 1/2)")
    return (1.0 - gamma) ** 2 / gamma ** 2


def _endpoint_mass(profile, pi_x, pi_y):
    masses = [m for m in (pi_x, pi_y) if m is not None]
    return min(masses) if masses else profile.floor


def _check_eps(epsilon):
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")


def _ceil(x: float) -> int:
    # absorb floating noise on exact integers before rounding up
    r = round(x)
    return int(r) if abs(x - r) <= 1e-12 * max(1.0, abs(x)) else math.ceil(x)


def tau_uniform_bound(profile, epsilon: float, gamma: float = 0.5, pi_x: float | None = None,
                      pi_y: float | None = None) -> BoundReport:
    """Uniform mixing bound from a conductance profile.

    n = ceil(1 + c_gamma * integral_{4m}^{4/eps} 4 du / (u Phi(u)^2)) with
    m = min(pi_x, pi_y) (default: the profile floor, i.e. pi_*) and
    c_gamma = (1 - gamma)^2 / gamma^2.
    """
    _check_eps(epsilon)
    c = gamma_factor(gamma)
    notes: list[str] = []
    m = _endpoint_mass(profile, pi_x, pi_y)
    integral = 4.0 * _integral(profile, 4 * m, 4 / epsilon, "square", notes)
    theorem = "hk" if gamma == 0.5 else "hk2"
    return BoundReport(theorem, epsilon, gamma, pi_x, pi_y, integral,
                       _ceil(1.0 + c * integral), profile.provenance, notes)


def chi_square_bound(profile, pi_x: float, epsilon: float) -> BoundReport:
    """Steps after which chi^2(p^n(x, .), pi) <= eps, from a root profile.

    n = ceil(integral_{4 pi(x)}^{4/eps} du / (u psi(u))), at least 1.
    """
    _check_eps(epsilon)
    notes: list[str] = []
    integral = _integral(profile, 4 * pi_x, 4 / epsilon, "identity", notes)
    return BoundReport("psith", epsilon, None, pi_x, None, integral,
                       max(1, _ceil(integral)), profile.provenance, notes)


def infinite_bound(profile, pi_x: float, pi_y: float, epsilon: float,
                   gamma: float = 0.5) -> BoundReport:
    """Heat-kernel bound p^n(x, y)/pi(y) <= eps for infinite stationary measures."""
    _check_eps(epsilon)
    c = gamma_factor(gamma)
    notes: list[str] = []
    m = min(pi_x, pi_y)
    integral = 4.0 * _integral(profile, 4 * m, 4 / epsilon, "square", notes)
    return BoundReport("hki", epsilon, gamma, pi_x, pi_y, integral,
                       _ceil(1.0 + c * integral), profile.provenance, notes)


def continuous_bound(profile, epsilon: float, pi_x: float | None = None,
                     pi_y: float | None = None) -> BoundReport:
    """Continuous-time bound t = integral_{4m}^{4/eps} 8 du / (u Phi(u)^2).

    ``profile`` is the conductance profile of P itself; no rounding.
    """
    _check_eps(epsilon)
    notes: list[str] = []
    m = _endpoint_mass(profile, pi_x, pi_y)
    integral = 8.0 * _integral(profile, 4 * m, 4 / epsilon, "square", notes)
    return BoundReport("cont1", epsilon, None, pi_x, pi_y, integral, integral,
                       profile.provenance, notes)


def convexity_violation(profile, lo: float, hi: float, kind: str, points: int = 1000) -> float:
    """Worst negative second difference of z -> z g(z^-2) on a grid.

    g is psi_c (kind='psi') or Phi_c^2 (kind='phi'); the grid covers
    z in [hi^-1/2, lo^-1/2], the image of the integration range.
    """
    power = 1 if kind == "psi" else 2
    z = np.linspace(hi ** -0.5, lo ** -0.5, points)
    h = np.array([zi * profile.value(zi ** -2.0) ** power for zi in z])
    scale = max(1.0, float(np.abs(h).max()))
    second = h[2:] - 2 * h[1:-1] + h[:-2]
    return float(max(0.0, -second.min() / scale))


def convex_variant_bound(profile, pi_x: float, epsilon: float, kind: str = "psi",
                         gamma: float = 0.5, pi_y: float | None = None) -> BoundReport:
    """Sharper bounds for a convex minorant of the profile.

    kind='psi': n = ceil(1/2 integral_{pi(x)}^{1/eps} du / (u psi_c(u))).
    kind='phi': n = ceil(c_gamma integral_{m}^{1/eps} 2 du / (u Phi_c(u)^2)).
    Convexity of z -> z g(z^-2) is checked numerically; failures are warnings.
    """
    _check_eps(epsilon)
    notes: list[str] = []
    m = pi_x if pi_y is None else min(pi_x, pi_y)
    lo, hi = max(m, profile.floor or m), 1.0 / epsilon
    if hi > lo:
        bad = convexity_violation(profile, lo, hi, kind)
        if bad > 1e-9:
            notes.append(f"composite z*g(z^-2) fails the grid convexity check (violation {bad:.3g})")
    if kind == "psi":
        integral = 0.5 * _integral(profile, m, hi, "identity", notes)
        bound = _ceil(integral)
        gamma_used = None
    elif kind == "phi":
        integral = 2.0 * gamma_factor(gamma) * _integral(profile, m, hi, "square", notes)
        bound = _ceil(integral)
        gamma_used = gamma
    else:
        raise ValueError("kind must be 'psi' or 'phi'")
    return BoundReport(f"convex-{kind}", epsilon, gamma_used, pi_x, pi_y, integral,
                       max(1, bound), profile.provenance, notes)


@dataclass(frozen=True)
class GapLowerBound:
    value: float
    psi_star: float | None
    theta_term: float | None
    winner: str


def theta_gap_term(h2p: float) -> float:
    """(h2+)^2 / (8 log(2 / (h2+)^2))."""
    h2 = h2p * h2p
    if not 0 < h2 < 2:
        raise ValueError("theta gauge squared must lie in (0, 2)")
    return h2 / (8.0 * math.log(2.0 / h2))


def gap_lower_bound(psi_star: float | None = None, h2p: float | None = None) -> GapLowerBound:
    """max(psi_*, (h2+)^2 / (8 log(2/(h2+)^2))) with the winning term named."""
    if psi_star is None and h2p is None:
        raise ValueError("need psi_* or h2+")
    term = theta_gap_term(h2p) if h2p is not None else None
    cands = {k: v for k, v in (("psi_star", psi_star), ("h2plus", term)) if v is not None}
    winner = max(cands, key=cands.get)
    return GapLowerBound(cands[winner], psi_star, term, winner)


def chain_gap_lower_bound(chain, method: str = "enumerate", **kw) -> GapLowerBound:
    """Spectral-gap lower bound from exact profiles of a reversible chain.

    The theta term needs holding probability at least 1/2 and is skipped
    otherwise.
    """
    from .profiles import gauge_profile

    psi_star = gauge_profile(chain, "psi", method, **kw).minimum
    h2p = gauge_profile(chain, "theta", method, **kw).minimum if chain.gamma >= 0.5 else None
    return gap_lower_bound(psi_star, h2p)


def lemma_rr_steps(f: Callable[[float], float], L0: float, delta: float) -> int:
    """ceil(integral_delta^L0 dz / (z f(z))) for increasing f into (0, 1].

    Iterating L <- L (1 - f(L)) from L0 for this many steps ends at or below
    delta.  The integral is taken in log coordinates; the quadrature error
    estimate is added before rounding up.
    """
    if not 0 < delta < L0:
        raise BadRange("need 0 < delta < L0")

    def integrand(w):
        val = f(math.exp(w))
        if not 0 < val <= 1:
            raise BadRange(f"f must map into (0, 1], got {val!r}")
        return 1.0 / val

    value, err = integrate.quad(integrand, math.log(delta), math.log(L0),
                                epsrel=1e-10, epsabs=0.0, limit=500)
    return max(0, math.ceil(value + abs(err)))
