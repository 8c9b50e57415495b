"""Verification suites: exact identities, inequalities and bound soundness.

Each check returns a :class:`CheckResult` carrying the largest violation seen
(0 when the property held everywhere).  Identity checks compare two sides and
report the absolute gap; inequality checks report how far the smaller side
overshot, after an absolute slack of ``SLACK`` for rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bounds import (chi_square_bound, continuous_bound, gamma_factor, lemma_rr_steps,
                     tau_uniform_bound)
from .chain import ChainKernel, time_reversal
from .errors import TooLarge
from .evolving import gauge_values, set_kernel, subset_chunks
from .exact import (chi_square_columns, first_chi_square_times, matrix_powers, tau_uniform,
                    tau_uniform_continuous)
from .profiles import conductance_profile, root_profile

SLACK = 1e-12
IDENTITY_TOL = 1e-12
PROPOSITION_TOL = 1e-10
EXACT_MAX = 16
SUITES = ("identities", "inequalities", "bounds")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_violation: float
    note: str = ""

    def row(self) -> str:
        return f"{self.name},{'pass' if self.passed else 'fail'},{self.max_violation:.3e},{self.note}"


def _identity(name, gap, tol=IDENTITY_TOL, note=""):
    gap = float(gap)
    return CheckResult(name, bool(gap < tol), gap, note)


def _inequality(name, small, large, note=""):
    """small <= large elementwise, up to SLACK."""
    over = np.asarray(small, dtype=float) - np.asarray(large, dtype=float)
    worst = float(max(0.0, over.max())) if over.size else 0.0
    return CheckResult(name, bool(worst <= SLACK), worst, note)


def _need_small(chain, limit, what):
    if chain.n > limit:
        raise TooLarge(f"{what} needs at most {limit} states")


# --------------------------------------------------------------------------
# identities


def _kernel_power_hits(sk, chain, steps):
    """hits[k][y, x] = P_{x}(y in S_k) for k = 0..steps, from exact K powers."""
    n = chain.n
    KT = sk.K.T.tocsr()
    D = np.zeros((sk.subset_count, n))
    D[1 << np.arange(n), np.arange(n)] = 1.0
    member = ((np.arange(sk.subset_count)[:, None] >> np.arange(n)) & 1).astype(float)
    out = [member.T @ D]
    for _ in range(steps):
        D = KT @ D
        out.append(member.T @ D)
    return out


def check_proposition(chain: ChainKernel, steps: int = 20, sk=None) -> CheckResult:
    """p^k(x, y) = (pi(y)/pi(x)) P_{x}(y in S_k) for all x, y and k <= steps."""
    sk = sk or set_kernel(chain)
    hits = _kernel_power_hits(sk, chain, steps)
    pi = chain.pi
    worst = 0.0
    for k, Mt in matrix_powers(chain, steps):
        # Mt[y, x] = p^k(x, y)
        rhs = hits[k] * pi[:, None] / pi[None, :]
        worst = max(worst, float(np.abs(Mt - rhs).max()))
    return _identity("proposition", worst, PROPOSITION_TOL, f"steps<={steps}")


def check_kernel_rows(sk) -> CheckResult:
    sums = np.asarray(sk.K.sum(axis=1)).ravel()
    full = sk.subset_count - 1
    absorb = abs(sk.K[0, 0] - 1.0) + abs(sk.K[full, full] - 1.0)
    return _identity("kernel-rows", max(np.abs(sums - 1).max(), absorb))


def check_martingale(sk) -> CheckResult:
    """sum_A K(S, A) pi(A) = pi(S)."""
    return _identity("martingale", np.abs(sk.K @ sk.measures - sk.measures).max())


def check_duality(sk) -> CheckResult:
    """K(S, A) = K(S^c, A^c)."""
    full = sk.subset_count - 1
    comp = full ^ np.arange(sk.subset_count)
    flipped = sk.K[comp][:, comp]
    gap = abs(flipped - sk.K).max() if sk.K.nnz else 0.0
    return _identity("duality", gap)


def check_doob_rows(sk) -> CheckResult:
    sums = np.asarray(sk.K_hat.sum(axis=1)).ravel()[1:]
    return _identity("doob-rows", np.abs(sums - 1).max())


def check_doob_powers(sk, steps: int = 5) -> CheckResult:
    """K_hat^k(S, A) = (pi(A)/pi(S)) K^k(S, A) for k <= steps, S nonempty."""
    meas = sk.measures
    inv = np.zeros_like(meas)
    inv[1:] = 1.0 / meas[1:]
    K = sk.K.tocsr()
    Kh = sk.K_hat.tocsr()
    Kk = sp.identity(sk.subset_count, format="csr")
    Khk = Kk.copy()
    worst = 0.0
    for _ in range(steps):
        Kk = Kk @ K
        Khk = Khk @ Kh
        pred = sp.diags(inv) @ Kk @ sp.diags(meas)
        diff = (Khk - pred).tocsr()[1:]
        if diff.nnz:
            worst = max(worst, float(abs(diff).max()))
    return _identity("doob-powers", worst, note=f"steps<={steps}")


def check_chi_square_replicas(chain: ChainKernel, steps: int = 4, sk=None) -> CheckResult:
    """chi^2(mu_k, pi) = pi(x)^-2 E[pi(S_k & L_k) - pi(S_k) pi(L_k)] over two
    independent replicas S, L started from {x}."""
    sk = sk or set_kernel(chain)
    n = chain.n
    meas = sk.measures
    idx = np.arange(sk.subset_count)
    pair = meas[idx[:, None] & idx[None, :]] - np.outer(meas, meas)
    worst = 0.0
    for x in range(n):
        d = np.zeros(sk.subset_count)
        d[1 << x] = 1.0
        KT = sk.K.T.tocsr()
        for k, Mt in matrix_powers(chain, steps):
            if k:
                d = KT @ d
            rhs = float(d @ pair @ d) / chain.pi[x] ** 2
            lhs = float(chi_square_columns(Mt, chain.pi)[x])
            worst = max(worst, abs(lhs - rhs))
    return _identity("chi-square-replicas", worst, PROPOSITION_TOL, f"steps<={steps}")


def _sharp_measures(meas):
    """pi(S#) for every mask, reading pi(S^c) from the table rather than 1 - pi(S)."""
    return np.minimum(meas, meas[::-1])


def check_z_recursion(chain: ChainKernel, sk=None, psi_profile=None) -> list[CheckResult]:
    """Doob step of Z = sqrt(pi(S#))/pi(S): the conditional ratio equals the
    plain expectation of sqrt(pi(S~#)/pi(S#)) and is at most 1 - psi(pi(S#))."""
    sk = sk or set_kernel(chain)
    psi_profile = psi_profile or root_profile(chain)
    meas = sk.measures
    size = sk.subset_count
    proper = np.arange(1, size - 1)
    sharp = np.sqrt(np.clip(_sharp_measures(meas), 0.0, None))
    Z = np.zeros(size)
    Z[1:] = sharp[1:] / meas[1:]
    doob_side = (sk.K_hat @ Z)[proper] / Z[proper]
    plain_side = (sk.K @ sharp)[proper] / sharp[proper]
    cap = np.array([1.0 - psi_profile.value(m) for m in _sharp_measures(meas)[proper]])
    return [
        _identity("z-recursion", np.abs(doob_side - plain_side).max()),
        _inequality("z-recursion-bound", plain_side, cap),
    ]


def identities_suite(chain: ChainKernel, steps: int = 20) -> list[CheckResult]:
    _need_small(chain, EXACT_MAX, "the identities suite")
    sk = set_kernel(chain)
    out = [
        check_kernel_rows(sk),
        check_proposition(chain, steps, sk),
        check_martingale(sk),
        check_duality(sk),
        check_doob_rows(sk),
        check_doob_powers(sk),
    ]
    if chain.n <= 10:
        out.append(check_chi_square_replicas(chain, sk=sk))
        out.extend(check_z_recursion(chain, sk))
    return out


# --------------------------------------------------------------------------
# inequalities


def _all_gauges(chain):
    """(measure, Phi, psi, varphi, theta) over every proper nonempty subset."""
    cols = {g: [] for g in ("phi", "psi", "varphi", "theta")}
    meas = []
    full = (1 << chain.n) - 1
    for idx, M in subset_chunks(chain.n):
        keep = (idx != 0) & (idx != full)
        M = M[keep]
        for g in cols:
            m, v = gauge_values(chain, M, g)
            cols[g].append(v)
        meas.append(m)
    return np.concatenate(meas), {g: np.concatenate(v) for g, v in cols.items()}


def sqrt_mean_grid(points: int = 10_000) -> CheckResult:
    b = np.linspace(-0.5, 0.5, points)
    left = 0.5 * (np.sqrt(1 + 2 * b) + np.sqrt(1 - 2 * b))
    mid = np.sqrt(1 - b * b)
    right = 1 - b * b / 2
    worst = max(0.0, float((left - mid).max()), float((mid - right).max()))
    return CheckResult("sqrt-mean-grid", worst <= SLACK, worst, f"{points} points")


def doubling_property(seed: int, trials: int = 1000) -> CheckResult:
    """E[Z f(2Z)] >= (EZ/2) f(EZ) for random discrete Z >= 0 and increasing f >= 0."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 8))
        z = rng.exponential(size=k) * rng.integers(0, 2, size=k)
        p = rng.dirichlet(np.ones(k))
        knots = np.sort(rng.exponential(size=4))
        heights = np.cumsum(rng.random(4))
        f = lambda v: np.interp(v, knots, heights, left=heights[0] * 0.5)
        EZ = float(p @ z)
        lhs = float(p @ (z * f(2 * z)))
        worst = max(worst, 0.5 * EZ * float(f(EZ)) - lhs)
    return CheckResult("doubling-expectation", worst <= SLACK, max(0.0, worst), f"{trials} trials")


def check_chi_root_bound(chain: ChainKernel, steps: int = 10, sk=None) -> list[CheckResult]:
    """2||mu_k - pi|| <= chi(mu_k, pi) <= pi(x)^-1 E sqrt(pi(S_k#))."""
    sk = sk or set_kernel(chain)
    sharp = np.sqrt(_sharp_measures(sk.measures).clip(0.0))
    KT = sk.K.T.tocsr()
    D = np.zeros((sk.subset_count, chain.n))
    D[1 << np.arange(chain.n), np.arange(chain.n)] = 1.0
    tv_gap, chi_gap = [], []
    pi = chain.pi
    for k, Mt in matrix_powers(chain, steps):
        if k:
            D = KT @ D
        chi = np.sqrt(np.maximum(chi_square_columns(Mt, pi), 0.0))
        tv = 0.5 * np.abs(Mt - pi[:, None]).sum(axis=0)
        tv_gap.append(2 * tv - chi)
        chi_gap.append(chi - (sharp @ D) / pi)
    return [_inequality("tv-chi", np.concatenate(tv_gap), 0.0),
            _inequality("chi-root-bound", np.concatenate(chi_gap), 0.0)]


def check_composition(chain: ChainKernel, steps: int = 10) -> CheckResult:
    """|p^{a+b}(x,z) - pi(z)|/pi(z) <= chi(p^a(x,.), pi) chi(rev^b(z,.), pi)."""
    pi = chain.pi
    fwd = [Mt.copy() for _, Mt in matrix_powers(chain, 2 * steps)]
    rev = [Mt.copy() for _, Mt in matrix_powers(time_reversal(chain), steps)]
    chi_f = [np.sqrt(np.maximum(chi_square_columns(M, pi), 0.0)) for M in fwd[:steps + 1]]
    chi_r = [np.sqrt(np.maximum(chi_square_columns(M, pi), 0.0)) for M in rev]
    worst = 0.0
    for a in range(steps + 1):
        for b in range(steps + 1):
            dev = np.abs(fwd[a + b] / pi[:, None] - 1.0)  # [z, x]
            cap = np.outer(chi_r[b], chi_f[a])
            worst = max(worst, float((dev - cap).max()))
    return CheckResult("composition", worst <= SLACK, max(0.0, worst), f"a,b<={steps}")


def inequalities_suite(chain: ChainKernel, seed: int = 0, steps: int = 10) -> list[CheckResult]:
    _need_small(chain, EXACT_MAX, "the inequalities suite")
    meas, g = _all_gauges(chain)
    phi, psi, vphi, th = g["phi"], g["psi"], g["varphi"], g["theta"]
    gamma = chain.gamma
    out = []
    if gamma >= 0.5:
        out.append(_inequality("phi-psi", phi ** 2 / 2, psi))
        out.append(_identity("varphi-equals-phi", np.abs(vphi - phi).max()))
    if gamma > 0:
        gm = min(gamma, 0.5)
        out.append(_inequality("phi-psi-gamma", phi ** 2 / (2 * gamma_factor(gm)), psi,
                               f"gamma={gm:.6g}"))
        out.append(_inequality("varphi-gamma", (gm / (1 - gm)) * phi, vphi))
    mid = 0.5 * (np.sqrt(1 + 2 * vphi) + np.sqrt(np.maximum(1 - 2 * vphi, 0.0)))
    out.append(_inequality("root-sandwich-lower", 1 - psi, mid))
    out.append(_inequality("root-sandwich-upper", mid, 1 - vphi ** 2 / 2))
    if gamma >= 0.5:
        t2 = th * th
        out.append(_inequality("theta-psi", t2 / (8 * np.log(2 / t2)), psi))
    if chain.reversible:
        out.append(_inequality("theta-above-phi", phi, th))
    if chain.n <= 10:
        out.extend(check_chi_root_bound(chain, steps))
    out.append(check_composition(chain, steps))
    out.append(doubling_property(seed))
    out.append(sqrt_mean_grid())
    return out


# --------------------------------------------------------------------------
# bounds


def bounds_suite(chain: ChainKernel, epsilons=(0.5, 0.25, 0.125),
                 continuous: bool = True) -> list[CheckResult]:
    """Bound minus exact value for each theorem; negative margins fail."""
    _need_small(chain, 24, "the bounds suite")
    phi = conductance_profile(chain)
    psi = root_profile(chain)
    out = []
    gamma = min(chain.gamma, 0.5)
    hk, ps, ct = [], [], []
    for eps in epsilons:
        if gamma > 0:
            hk.append(tau_uniform(chain, eps) - tau_uniform_bound(phi, eps, gamma).bound)
        first = first_chi_square_times(chain, eps)
        ps.extend(first[x] - chi_square_bound(psi, chain.pi[x], eps).bound for x in range(chain.n))
        if continuous:
            ct.append(tau_uniform_continuous(chain, eps) - continuous_bound(phi, eps).bound)
    theorem = "hk" if gamma == 0.5 else "hk2"
    if hk:
        out.append(_inequality(f"{theorem}-soundness", hk, 0.0))
    else:
        out.append(CheckResult("hk2-soundness", True, 0.0, "skipped: gamma = 0"))
    out.append(_inequality("psith-soundness", ps, 0.0))
    if continuous:
        out.append(_inequality("cont1-soundness", ct, 0.0))
    return out


def rr_recursion(seed: int, trials: int = 100) -> CheckResult:
    """Iterating L <- L (1 - f(L)) for lemma_rr_steps(f, L0, delta) steps ends <= delta."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        c = rng.uniform(0.02, 0.9)
        a = rng.uniform(0.1, 2.0)
        kind = rng.integers(3)
        if kind == 0:
            f = lambda z, c=c: c
        elif kind == 1:
            f = lambda z, c=c, a=a: min(1.0, 0.01 + c * z ** a)
        else:
            f = lambda z, c=c, a=a: c * (1 - math.exp(-a * z)) + 1e-3
        L0 = rng.uniform(0.5, 50)
        delta = L0 * 10 ** rng.uniform(-4, -0.2)
        n = lemma_rr_steps(f, L0, delta)
        L = L0
        for _ in range(n):
            L *= 1 - f(L)
        worst = max(worst, (L - delta) / delta)
    return CheckResult("rr-recursion", worst <= 0.0, max(0.0, worst), f"{trials} trials")


def run_suite(chain: ChainKernel, suite: str, seed: int = 0) -> list[CheckResult]:
    if suite == "identities":
        return identities_suite(chain)
    if suite == "inequalities":
        return inequalities_suite(chain, seed)
    if suite == "bounds":
        return bounds_suite(chain)
    raise ValueError(f"suite must be one of {SUITES}")
