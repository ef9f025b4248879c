import numpy as np
import pytest
from hypothesis import given, strategies as st

from acpc_synth.graph import EndComponent, MaecEntry
from acpc_synth.instances import random_ec
from acpc_synth.model import Mdp
from acpc_synth.oracles import absorbing_expectations, brute_force_acpc, chain_renewal_reward
from acpc_synth.reduction import ActionCapExceeded, ReductionError, reduce_maec
from acpc_synth.solvers import acps_solve
from acpc_synth.synthesis import build_acpc_strategy, strategy_chain


def full(m):
    return {s: m.enabled(s) for s in range(m.n_states)}


def test_all_surveillance_is_identity():
    m = Mdp.from_rows(2, {(0, 0): {1: 1.0}, (0, 1): {0: 1.0}, (1, 0): {0: 1.0}}, 1.0, initial=0)
    red = reduce_maec(m, {0, 1}, full(m), {0, 1})
    assert red.states == (0, 1)
    assert [z.assignment for z in red.actions[0]] == [((0, 0),), ((0, 1),)]
    assert red.actions[1][0].row == ((0, 1.0),)


def test_sure_chain_composes():
    # 0 (sur) -> 1 -> 2 (sur) -> 0
    m = Mdp.from_rows(3, {(0, 0): {1: 1.0}, (1, 0): {2: 1.0}, (2, 0): {0: 1.0}}, 1.0, initial=0)
    red = reduce_maec(m, {0, 1, 2}, full(m), {0, 2})
    (z,) = red.actions[0]
    assert z.row == ((2, 1.0),) and z.cost == pytest.approx(2.0)
    assert z.as_dict() == {0: 0, 1: 0}


def test_merge_with_self_loop():
    # v_from=0 -> {v=1: .5, v_to=2: .5} cost 5 ; v=1 -> {1: .25, 2: .75} cost 1
    rows = {(0, 0): {1: 0.5, 2: 0.5}, (1, 0): {1: 0.25, 2: 0.75}, (2, 0): {0: 1.0}}
    m = Mdp.from_rows(3, rows, {(0, 0): 5.0, (1, 0): 1.0, (2, 0): 0.0}, initial=0)
    red = reduce_maec(m, {0, 1, 2}, full(m), {0, 2})
    (z,) = red.actions[0]
    assert dict(z.row) == {2: pytest.approx(1.0)}
    assert z.cost == pytest.approx(5 + 0.5 / 0.75)
    hit, cost = absorbing_expectations(m, z.as_dict(), {0, 2}, [0])[0]
    assert hit == {2: pytest.approx(1.0)} and cost == pytest.approx(17 / 3)


def test_pure_self_loop_dropped():
    rows = {(0, 0): {1: 1.0}, (1, 0): {1: 1.0}, (1, 1): {0: 1.0}}
    m = Mdp.from_rows(2, rows, 1.0, initial=0)
    red = reduce_maec(m, {0, 1}, full(m), {0})
    assert [z.as_dict() for z in red.actions[0]] == [{0: 0, 1: 1}]


def test_errors():
    m = Mdp.from_rows(1, {(0, 0): {0: 1.0}}, 1.0, initial=0)
    with pytest.raises(ReductionError):
        reduce_maec(m, {0}, full(m), set())
    rng = np.random.default_rng(0)
    ec = random_ec(rng, 6, 3, n_sur=1)
    with pytest.raises(ActionCapExceeded):
        reduce_maec(ec.mdp, ec.states, ec.actions, ec.sur, action_cap=1)


def _rowcost_set(red):
    return sorted((tuple((t, round(p, 9)) for t, p in z.row), round(z.cost, 9))
                  for v in red.states for z in red.actions[v])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_semantics_and_order_independence(seed, n):
    rng = np.random.default_rng(seed)
    ec = random_ec(rng, n, 2)
    rest = sorted(ec.states - ec.sur)
    perm = [int(x) for x in rng.permutation(rest)] if rest else []
    reds = [reduce_maec(ec.mdp, ec.states, ec.actions, ec.sur, order=o) for o in (None, perm)]
    for red in reds:
        for v in red.states:
            for z in red.actions[v]:
                hit, cost = absorbing_expectations(ec.mdp, z.as_dict(), ec.sur, [v])[v]
                row = dict(z.row)
                assert set(row) == set(hit)
                assert all(abs(row[k] - hit[k]) < 1e-9 for k in row)
                assert abs(cost - z.cost) < 1e-9
    assert _rowcost_set(reds[0]) == _rowcost_set(reds[1])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_reduced_gain_equals_acpc_and_lifted_strategy(seed, n):
    rng = np.random.default_rng(seed)
    ec = random_ec(rng, n, 2)
    m = ec.mdp
    red = reduce_maec(m, ec.states, ec.actions, ec.sur)
    sol = acps_solve(red)
    assert sol.gain == pytest.approx(brute_force_acpc(m, ec.states, ec.actions, ec.sur), abs=1e-8)
    # gain constancy: every reduced state achieves the same optimum
    assert all(abs(g - sol.gain) < 1e-8 for g in sol.state_gains.values())
    fms = build_acpc_strategy(MaecEntry(EndComponent(ec.states, ec.actions), 0, sol.gain), m, red, sol)
    for s0 in sorted(ec.states):
        order, rows = strategy_chain(m, fms, [s0])
        P = np.zeros((len(order), len(order)))
        c = np.zeros(len(order))
        for i, (_, cost, row) in enumerate(rows):
            c[i] = cost
            for j, p in row:
                P[i, j] += p
        mask = np.array([s in ec.sur for _, s in order])
        assert chain_renewal_reward(P, c, mask, 0) == pytest.approx(sol.gain, abs=1e-8)
