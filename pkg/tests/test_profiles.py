import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from evoset.benchmarks import hypercube, random_chain
from evoset.chain import ChainKernel
from evoset.errors import BelowFloor, EmptyFamily, TooLarge, UnboundedIntegral, ZeroConductance, ZeroGauge
from evoset.profiles import (AnalyticProfile, StepFunctionProfile, conductance_profile,
                             gauge_profile, h2_plus, parse_analytic, profile_query, root_profile)

PSI_C2 = 1 - math.sqrt(2) / 2
PSI_C3 = 1 - (math.sqrt(3) / 4 + 0.25)
seeds = st.integers(0, 10_000)


def test_small_profiles(C2, C3):
    p = conductance_profile(C2)
    assert p.points == [(0.5, 0.5)] and p.tail == 0.5
    p = conductance_profile(C3)
    assert p.points == pytest.approx([(1 / 3, 0.5)]) and p.tail == 0.5
    assert root_profile(C2).points == pytest.approx([(0.5, PSI_C2)])
    assert root_profile(C3).points == pytest.approx([(1 / 3, PSI_C3)])


def test_h2_plus_small(C2, C3):
    assert h2_plus(C2) == pytest.approx(1 / math.sqrt(2))
    assert h2_plus(C3) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("seed", range(10))
def test_h2_plus_above_phi_star_reversible(seed):
    ch = random_chain(3 + seed % 6, 40 + seed, reversible=True, laziness=0.5)
    assert h2_plus(ch) >= conductance_profile(ch).minimum - 1e-12


def test_query_rules(C3):
    p = conductance_profile(C3)
    assert profile_query(p, 0.4) == 0.5
    assert profile_query(p, 10.0) == p.tail
    assert profile_query(p, p.floor) == p.values[0]
    with pytest.raises(BelowFloor):
        profile_query(p, p.floor / 2)


def test_tail_is_value_at_half():
    ch = random_chain(7, 3)
    p = conductance_profile(ch)
    assert p.value(0.5) == p.tail == p.value(0.9) == p.minimum


@given(seeds)
def test_profiles_nonincreasing_positive(seed):
    # laziness keeps psi positive; a periodic chain can have psi(S) = 0
    ch = random_chain(2 + seed % 8, seed, reversible=bool(seed % 2), laziness=0.05 + 0.1 * (seed % 6))
    for gauge in ("phi", "psi", "theta"):
        p = gauge_profile(ch, gauge)
        assert np.all(np.diff(p.r) > 0)
        assert np.all(np.diff(p.values) <= 0) and np.all(p.values > 0)
        grid = np.linspace(p.floor, 1.0, 50)
        vals = [p.value(r) for r in grid]
        assert np.all(np.diff(vals) <= 0)


@given(seeds)
def test_psi_dominates_half_phi_squared(seed):
    ch = random_chain(2 + seed % 8, seed, reversible=bool(seed % 2), laziness=0.5 + 0.1 * (seed % 3))
    phi, psi = conductance_profile(ch), root_profile(ch)
    grid = np.union1d(phi.r, psi.r)
    grid = grid[grid >= max(phi.floor, psi.floor)]
    for r in np.append(grid, 0.75):
        assert psi.value(r) >= phi.value(r) ** 2 / 2 - 1e-12


@pytest.mark.parametrize("dim", [3, 4])
def test_family_dominates_exact(dim):
    b = hypercube(dim)
    for gauge in ("phi", "psi"):
        exact = gauge_profile(b.chain, gauge)
        fam = gauge_profile(b.chain, gauge, "family", family=b.family)
        assert fam.provenance == "family"
        for r in np.append(fam.r, 0.75):
            assert fam.value(r) >= exact.value(r) - 1e-12


def test_monte_carlo_dominates_exact():
    ch = random_chain(9, 12, reversible=True, laziness=0.5)
    exact = conductance_profile(ch)
    mc = conductance_profile(ch, "monte-carlo", samples=6, seed=1)
    assert mc.provenance == "monte-carlo"
    for r in np.append(mc.r, 0.75):
        assert mc.value(r) >= exact.value(r) - 1e-12
    again = conductance_profile(ch, "monte-carlo", samples=6, seed=1)
    assert np.array_equal(mc.r, again.r) and np.array_equal(mc.values, again.values)
    with pytest.raises(ValueError):
        conductance_profile(ch, "monte-carlo")


def test_hamming_ball_profile_log_law():
    consts = []
    for dim in range(6, 11):
        b = hypercube(dim)
        p = gauge_profile(b.chain, "psi", "family", family=b.family)
        consts.append(min(dim * v / math.log(1 / r) for r, v in p.points))
    assert min(consts) > 0
    assert max(consts) / min(consts) <= 2


def test_periodic_chain_has_zero_root_gauge(two_cycle):
    with pytest.raises(ZeroConductance):
        root_profile(two_cycle)
    assert conductance_profile(two_cycle).minimum == 1.0


def test_errors():
    with pytest.raises(TooLarge):
        conductance_profile(random_chain(25, 1))
    with pytest.raises(EmptyFamily):
        conductance_profile(random_chain(4, 1), "family", family=[])
    P = sp.csr_matrix(np.kron(np.eye(2), np.full((2, 2), 0.5)))
    mock = ChainKernel(P, np.full(4, 0.25), 0.5, True)
    with pytest.raises(ZeroConductance):
        conductance_profile(mock)
    with pytest.raises(ZeroGauge):
        StepFunctionProfile("phi", [0.1, 0.2], [0.5, 0.0], 0.0, 0.1)
    with pytest.raises(ValueError):
        StepFunctionProfile("phi", [0.1, 0.2], [0.3, 0.5], 0.5, 0.1)


def test_analytic_profiles():
    p = parse_analytic("powerlaw:a=0.3,b=0.5")
    assert p.kind == "powerlaw" and p.value(0.25) == pytest.approx(0.6)
    c = parse_analytic("constant:a=0.2,floor=0.01")
    assert c.floor == 0.01 and c.value(5.0) == 0.2
    capped = parse_analytic("powerlaw:a=1,b=1,cap=0.5")
    assert capped.value(2.0) == capped.value(0.5) == pytest.approx(2.0)
    log = parse_analytic("loglaw:c=2")
    assert log.log_integral(0.01, 0.5, 1) == pytest.approx(
        math.log(math.log(100) / math.log(2)) / 2)
    with pytest.raises(UnboundedIntegral):
        log.log_integral(0.01, 2.0, 1)
    assert parse_analytic(p.spec()).params == p.params


@pytest.mark.parametrize("kind,params", [("constant", {"a": 0.4}), ("powerlaw", {"a": 0.3, "b": 0.5}),
                                         ("powerlaw", {"a": 0.3, "b": 0.0}), ("loglaw", {"c": 0.7})])
@pytest.mark.parametrize("power", [1, 2])
def test_analytic_integral_against_quadrature(kind, params, power):
    from scipy import integrate
    p = AnalyticProfile(kind, params, cap=0.4)
    want, _ = integrate.quad(lambda u: 1 / (u * p.value(u) ** power), 1e-3, 0.4, epsrel=1e-12)
    want += math.log(3.0 / 0.4) / p.value(0.4) ** power
    assert p.log_integral(1e-3, 3.0, power) == pytest.approx(want, rel=1e-9)
