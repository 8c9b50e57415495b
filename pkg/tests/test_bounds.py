import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from evoset.benchmarks import random_chain
from evoset.bounds import (ClampWarning, chi_square_bound, continuous_bound, convex_variant_bound,
                           convexity_violation, gap_lower_bound, infinite_bound, lemma_rr_steps,
                           tau_uniform_bound, theta_gap_term, weighted_log_integral)
from evoset.checks import doubling_property, rr_recursion
from evoset.errors import BadRange, EmptyRange, GammaZero
from evoset.exact import chi_square, distribution_at, first_chi_square_times, spectral_gap, tau_uniform
from evoset.profiles import AnalyticProfile, StepFunctionProfile, conductance_profile, h2_plus, root_profile

PSI_C2 = 1 - math.sqrt(2) / 2


def const(v, floor=1e-6, gauge="phi"):
    return StepFunctionProfile(gauge, [floor], [v], v, floor)


def test_constant_integral():
    p = const(0.3)
    assert weighted_log_integral(p, 0.01, 5.0) == pytest.approx(math.log(500) / 0.09)
    assert weighted_log_integral(p, 0.01, 5.0, "identity") == pytest.approx(math.log(500) / 0.3)


def test_two_state_integral(C2):
    p = conductance_profile(C2)
    val = weighted_log_integral(p, 2.0, 16.0)
    assert val == pytest.approx(4 * math.log(8))
    # with the bound's coefficient 4 this is the 16 ln 8 ~ 33.271 of the C2 bound
    assert 4 * val == pytest.approx(33.271, abs=1e-3)


def test_two_step_against_quadrature():
    p = StepFunctionProfile("phi", [0.05, 0.2], [0.6, 0.25], 0.25, 0.05)
    f = lambda u: 1 / (u * p.value(u) ** 2)
    want = sum(integrate.quad(f, a, b, epsrel=1e-13)[0] for a, b in [(0.07, 0.2), (0.2, 0.5), (0.5, 3.0)])
    assert weighted_log_integral(p, 0.07, 3.0) == pytest.approx(want, rel=0, abs=1e-10)


def test_integral_errors_and_clamp():
    p = const(0.3, floor=0.1)
    with pytest.raises(EmptyRange):
        weighted_log_integral(p, 2.0, 2.0)
    with pytest.warns(ClampWarning):
        v = weighted_log_integral(p, 0.01, 1.0)
    assert v == pytest.approx(math.log(10) / 0.09)
    with pytest.raises(ValueError):
        weighted_log_integral(p, 0.1, 1.0, "cube")


def test_hk_two_state(C2):
    rep = tau_uniform_bound(conductance_profile(C2), 0.25)
    assert rep.bound == 35 and rep.theorem == "hk"
    assert rep.bound >= tau_uniform(C2, 0.25) == 1


def test_gamma_factor_nine():
    p = const(0.2)
    half = tau_uniform_bound(p, 0.25, 0.5, 0.01, 0.01)
    quarter = tau_uniform_bound(p, 0.25, 0.25, 0.01, 0.01)
    assert quarter.theorem == "hk2"
    assert quarter.integral == half.integral
    assert quarter.bound == math.ceil(1 + 9 * half.integral)
    with pytest.raises(GammaZero):
        tau_uniform_bound(p, 0.25, 0.0)


def test_empty_range_gives_one(C2):
    rep = tau_uniform_bound(conductance_profile(C2), 2.0)
    assert rep.integral == 0 and rep.bound == 1


def test_chi_bound_two_state(C2):
    rep = chi_square_bound(root_profile(C2), 0.5, 0.5)
    assert rep.bound == math.ceil(math.log(4) / PSI_C2) == 5
    assert chi_square(distribution_at(C2, 0, 1), C2.pi) == 0.0


def test_chi_bound_constant():
    p = const(0.1, gauge="psi")
    assert chi_square_bound(p, 0.01, 0.25).bound == math.ceil(10 * math.log(16 / 0.04))


def test_chi_bound_three_cycle(C3):
    first = first_chi_square_times(C3, 0.25)[0]
    assert chi_square_bound(root_profile(C3), 1 / 3, 0.25).bound >= first


def test_infinite_bound_constant_and_power_law():
    a, m, eps = 0.4, 0.01, 0.25
    rep = infinite_bound(AnalyticProfile("constant", {"a": a}), m, 0.02, eps)
    assert rep.integral == pytest.approx(4 / a ** 2 * math.log((4 / eps) / (4 * m)))
    assert rep.bound == math.ceil(1 + rep.integral)
    rep = infinite_bound(AnalyticProfile("powerlaw", {"a": 0.3, "b": 0.5}), m, 0.02, eps, gamma=0.25)
    closed = 4 / 0.09 * (4 / eps - 4 * m)
    assert rep.integral == pytest.approx(closed)
    assert rep.bound == math.ceil(1 + 9 * closed)


def test_infinite_bound_clamp_note():
    rep = infinite_bound(AnalyticProfile("constant", {"a": 0.4}, floor=0.1), 0.01, 0.5, 0.25)
    assert rep.warnings and "clamped" in rep.warnings[0]


def test_continuous_deterministic_two_cycle(two_cycle):
    p = conductance_profile(two_cycle)
    assert p.minimum == 1.0
    rep = continuous_bound(p, 0.25)
    assert rep.bound == pytest.approx(8 * math.log(8))
    from evoset.exact import tau_uniform_continuous
    exact = tau_uniform_continuous(two_cycle, 0.25)
    assert exact == pytest.approx(math.log(4) / 2, abs=1e-4)
    assert rep.bound >= exact


def test_continuous_structure():
    p = const(0.5)
    b1, b2 = continuous_bound(p, 0.25, 0.01).bound, continuous_bound(p, 0.5, 0.01).bound
    assert b1 - b2 == pytest.approx(8 / 0.25 * math.log(2))
    disc = tau_uniform_bound(p, 0.25, 0.5, 0.01)
    assert b1 == pytest.approx(2 * disc.integral)


def test_convex_constant_closed_form():
    p = const(0.2, gauge="psi")
    rep = convex_variant_bound(p, 0.01, 0.25)
    assert rep.bound == math.ceil(math.log(1 / (0.25 * 0.01)) / 0.4)
    assert not rep.warnings


@pytest.mark.parametrize("eps", [0.9, 0.5, 0.1])
@pytest.mark.parametrize("px", [0.25, 0.1, 1e-3])
def test_convex_beats_chi_bound_for_constants(eps, px):
    p = const(0.15, gauge="psi")
    conv = 0.5 * math.log(1 / (eps * px)) / 0.15
    thm3 = math.log(1 / (eps * px)) / 0.15
    assert convex_variant_bound(p, px, eps).integral == pytest.approx(conv)
    assert chi_square_bound(p, px, eps).integral == pytest.approx(thm3)
    assert conv < thm3


class _Root:
    """psi_c(u) = u^(1/4): z * psi_c(z^-2) = sqrt(z) is concave."""
    floor = 0.0
    provenance = "analytic"

    def value(self, u):
        return u ** 0.25


class _Square(_Root):
    def value(self, u):
        return u * u


def test_convexity_check_flags():
    assert convexity_violation(_Root(), 0.01, 4.0, "psi") > 1e-9
    stair = StepFunctionProfile("psi", [0.01, 0.1], [0.5, 0.2], 0.2, 0.01)
    rep = convex_variant_bound(stair, 0.01, 0.25)
    assert rep.warnings and "convexity" in rep.warnings[0]
    # u^2 composes to z^-3, which is convex: no warning
    assert convexity_violation(_Square(), 0.01, 4.0, "psi") <= 1e-9


def test_gap_lower_three_cycle(C3):
    g = gap_lower_bound(root_profile(C3).minimum, h2_plus(C3))
    assert g.value == pytest.approx(0.316987, abs=1e-6) and g.winner == "psi_star"
    assert g.theta_term == pytest.approx(0.5 / (8 * math.log(4)))
    assert spectral_gap(C3) == pytest.approx(0.75)
    assert spectral_gap(C3) >= g.value


def test_gap_lower_two_state(C2):
    g = gap_lower_bound(root_profile(C2).minimum, h2_plus(C2))
    assert g.psi_star == pytest.approx(PSI_C2) and g.value <= spectral_gap(C2)
    with pytest.raises(ValueError):
        theta_gap_term(1.5)


def test_rr_closed_forms():
    assert lemma_rr_steps(lambda z: 0.2, 10.0, 0.1) == math.ceil(5 * math.log(100))
    L0, d = 5.0, 0.05
    want = (1 / d - 1) + math.log(L0)
    assert lemma_rr_steps(lambda z: min(1.0, z), L0, d) == math.ceil(want)
    with pytest.raises(BadRange):
        lemma_rr_steps(lambda z: 0.5, 1.0, 2.0)


def test_rr_recursion_property():
    assert rr_recursion(seed=11).passed


def test_doubling_property():
    assert doubling_property(seed=4).passed


@given(st.integers(0, 5000))
def test_bounds_monotone(seed):
    ch = random_chain(2 + seed % 7, seed, laziness=0.5)
    phi = conductance_profile(ch)
    lower = StepFunctionProfile("phi", phi.r, phi.values * 0.7, phi.tail * 0.7, phi.floor)
    prev = None
    for eps in (1.0, 0.5, 0.25, 0.125):
        b = tau_uniform_bound(phi, eps).bound
        assert tau_uniform_bound(lower, eps).bound >= b
        if prev is not None:
            assert b >= prev
        prev = b


@given(st.integers(0, 5000))
def test_psi_bound_at_most_half_phi_bound(seed):
    ch = random_chain(2 + seed % 7, seed, reversible=bool(seed % 2), laziness=0.5)
    phi, psi = conductance_profile(ch), root_profile(ch)
    for eps in (0.5, 0.25, 0.125):
        hk = tau_uniform_bound(phi, eps).bound
        for px in set(ch.pi.tolist()):
            assert chi_square_bound(psi, px, eps).bound <= hk / 2 + 1


def test_report_json_fields(C2):
    import json
    d = json.loads(tau_uniform_bound(conductance_profile(C2), 0.25).to_json())
    assert set(d) == {"theorem", "epsilon", "gamma", "pi_x", "pi_y", "integral", "bound",
                      "provenance", "warnings"}
