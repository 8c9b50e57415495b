import numpy as np
import pytest
from hypothesis import given, strategies as st

from evoset.benchmarks import random_chain
from evoset.chain import (StateSet, build_chain, conductance, lazify, q_flow, time_reversal)
from evoset.errors import BadStationary, NotStochastic, Reducible
from evoset.profiles import conductance_profile

seeds = st.integers(0, 10_000)


def test_two_state_symmetric(C2):
    assert np.allclose(C2.pi, [0.5, 0.5])
    assert C2.gamma == 0.5
    assert C2.reversible


def test_lazy_three_cycle(C3):
    assert np.allclose(C3.pi, 1 / 3, atol=1e-15)
    assert C3.gamma == 0.5


def test_identity_kernel_is_reducible():
    with pytest.raises(Reducible):
        build_chain([[1.0, 0.0], [0.0, 1.0]])


def test_row_sum_rejected():
    with pytest.raises(NotStochastic):
        build_chain([[0.5, 0.4], [0.5, 0.5]])


def test_row_sum_within_input_tolerance_accepted():
    ch = build_chain([[0.5, 0.5 + 5e-10], [0.5, 0.5]])
    assert np.allclose(np.asarray(ch.P.sum(axis=1)).ravel(), 1.0, atol=1e-15)


def test_bad_supplied_pi():
    with pytest.raises(BadStationary):
        build_chain([[0.5, 0.5], [0.25, 0.75]], pi=[0.5, 0.5])


def test_solved_pi_for_asymmetric_chain():
    ch = build_chain([[0.5, 0.5], [0.25, 0.75]])
    assert np.allclose(ch.pi, [1 / 3, 2 / 3], atol=1e-14)
    assert ch.reversible  # every 2-state chain is reversible


def test_sparse_row_lists():
    ch = build_chain([[(0, 0.5), (1, 0.5)], {0: 0.5, 1: 0.5}])
    assert ch.row(1) == [(0, 0.5), (1, 0.5)]


def test_power_iteration_path_large_cycle():
    from evoset.benchmarks import cycle
    ch = cycle(2100)
    assert np.abs(ch.pi - 1 / 2100).max() < 1e-13


@given(seeds)
def test_invariants_random(seed):
    ch = random_chain(2 + seed % 9, seed, reversible=bool(seed % 2), laziness=0.1 * (seed % 5))
    P = ch.P.toarray()
    assert np.allclose(P.sum(axis=1), 1, atol=1e-12)
    assert np.abs(ch.pi @ P - ch.pi).max() <= 1e-12
    assert ch.gamma == P.diagonal().min()
    Q = ch.pi[:, None] * P
    assert ch.reversible == bool(np.abs(Q - Q.T).max() <= 1e-12)


def test_reversal_of_reversible_is_identity(C3):
    R = time_reversal(C3)
    assert np.abs((R.P - C3.P).toarray()).max() <= 1e-14


def test_reversal_of_deterministic_cycle():
    P = np.roll(np.eye(3), 1, axis=1)
    R = time_reversal(build_chain(P, pi=[1 / 3] * 3))
    assert np.array_equal(R.P.toarray(), P.T)


def test_double_reversal_random():
    ch = random_chain(5, 7)
    back = time_reversal(time_reversal(ch))
    assert np.abs((back.P - ch.P).toarray()).max() <= 1e-13


def test_reversal_keeps_pi_exactly():
    ch = random_chain(6, 3)
    assert np.array_equal(time_reversal(ch).pi, ch.pi)


def test_lazify_cases(C3, two_cycle):
    ch = random_chain(4, 1)
    assert lazify(ch, 0.0) is ch
    lz = lazify(two_cycle, 0.5)
    assert np.allclose(lz.P.toarray(), 0.5)
    assert lazify(C3, 0.5).gamma == pytest.approx(0.75, abs=1e-15)


@given(seeds, st.floats(0.0, 0.95))
def test_lazify_keeps_pi(seed, beta):
    ch = random_chain(2 + seed % 7, seed)
    lz = lazify(ch, beta)
    assert np.abs(lz.pi - ch.pi).max() <= 1e-14
    assert lz.gamma >= beta - 1e-15


def test_q_flow_examples(C2, C3):
    assert q_flow(C2, [0], [1]) == pytest.approx(0.25)
    assert q_flow(C3, [0, 1], 2) == pytest.approx(1 / 6)
    ch = random_chain(5, 2)
    for y in range(5):
        assert q_flow(ch, range(5), y) == pytest.approx(ch.pi[y], abs=1e-14)


@pytest.mark.parametrize("seed", range(100))
def test_flow_balance_all_sets(seed):
    ch = random_chain(2 + seed % 9, seed, reversible=False)
    Q = ch.Q.toarray()
    for mask in range(1, (1 << ch.n) - 1):
        ind = StateSet.from_mask(ch, mask).indicator()
        assert abs(Q[ind][:, ~ind].sum() - Q[~ind][:, ind].sum()) <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_reversal_preserves_conductance_profile(seed):
    ch = random_chain(3 + seed % 6, 500 + seed)
    a, b = conductance_profile(ch), conductance_profile(time_reversal(ch))
    # staircases may split a rounding-level step differently; compare values at every breakpoint
    grid = np.union1d(a.r, b.r)
    grid = grid[grid >= max(a.floor, b.floor)]
    assert max(abs(a.value(r) - b.value(r)) for r in grid) <= 1e-12


def test_state_set_basics(C3):
    S = StateSet.from_members(C3, [0, 2])
    assert S.measure == pytest.approx(2 / 3, abs=1e-14)
    assert S.complement().complement() == S
    assert S.sharp() == StateSet.from_members(C3, [1])
    assert 2 in S and 1 not in S and len(S) == 2
    assert S.encode() == "5"
    assert conductance(C3, StateSet.from_members(C3, [0])) == pytest.approx(0.5)


def test_state_set_encoding_large():
    from evoset.benchmarks import cycle
    ch = cycle(70)
    S = StateSet.from_members(ch, [3, 68])
    assert S.encode() == "3,68"
    assert abs(S.measure - ch.pi[[3, 68]].sum()) <= 1e-14
