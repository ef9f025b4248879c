import numpy as np
import pytest

from acpc_synth.model import Mdp
from acpc_synth.oracles import (MultichainError, OracleError, absorbing_expectations, brute_force_acps_gain,
                                brute_force_max_reach, chain_renewal_reward, enumerate_ecs, maximal_ecs,
                                renewal_reward)


def cycle(n, costs=None):
    rows = {(i, 0): {(i + 1) % n: 1.0} for i in range(n)}
    return Mdp.from_rows(n, rows, costs if costs is not None else 1.0, initial=0)


def test_enumerate_ecs_examples():
    one = Mdp.from_rows(1, {(0, 0): {0: 1.0}}, 1.0, initial=0)
    assert len(enumerate_ecs(one)) == 1
    ecs = enumerate_ecs(cycle(2))
    assert [set(s) for s, _ in ecs] == [{0, 1}]
    with pytest.raises(OracleError):
        enumerate_ecs(cycle(9))


def test_maximal_ecs_keeps_largest():
    rows = {(0, 0): {0: 1.0}, (0, 1): {1: 1.0}, (1, 0): {0: 1.0}}
    m = Mdp.from_rows(2, rows, 1.0, initial=0)
    ecs = enumerate_ecs(m)
    assert len(ecs) == 3
    (mx,) = maximal_ecs(ecs)
    assert mx[0] == {0, 1} and mx[1][0] == {0, 1}


def test_absorbing_geometric_loop():
    rows = {(0, 0): {1: 1.0}, (1, 0): {1: 0.25, 0: 0.75}}
    m = Mdp.from_rows(2, rows, 1.0, initial=0)
    hit, cost = absorbing_expectations(m, {1: 0}, {0}, [1])[1]
    assert hit == {0: pytest.approx(1.0)}
    assert cost == pytest.approx(1 / 0.75)


def test_absorbing_first_step_semantics():
    # starting inside the target set still takes one step first
    m = Mdp.from_rows(2, {(0, 0): {0: 0.5, 1: 0.5}, (1, 0): {0: 1.0}}, 2.0, initial=0)
    hit, cost = absorbing_expectations(m, {0: 0, 1: 0}, {0}, [0])[0]
    assert hit == {0: pytest.approx(1.0)}
    assert cost == pytest.approx(2 + 0.5 * 2)


def test_absorbing_reports_leaving_domain():
    m = Mdp.from_rows(2, {(0, 0): {1: 1.0}, (1, 0): {0: 1.0}}, 1.0, initial=0)
    with pytest.raises(OracleError):
        absorbing_expectations(m, {0: 0}, {5}, [0])


def test_acps_gain_examples():
    assert brute_force_acps_gain(Mdp.from_rows(1, {(0, 0): {0: 1.0}}, 3.0, initial=0)) == pytest.approx(3)
    assert brute_force_acps_gain(cycle(2, {(0, 0): 2.0, (1, 0): 4.0})) == pytest.approx(3)
    two = Mdp.from_rows(2, {(0, 0): {0: 1.0}, (1, 0): {1: 1.0}}, 1.0, initial=0)
    with pytest.raises(MultichainError):
        brute_force_acps_gain(two)


def test_renewal_reward_examples():
    m = cycle(3)
    assert renewal_reward(m, {0: 0, 1: 0, 2: 0}, {0}) == pytest.approx(3.0)
    m2 = cycle(2, {(0, 0): 2.0, (1, 0): 4.0})
    assert renewal_reward(m2, {0: 0, 1: 0}, {0, 1}) == pytest.approx(3.0)


def test_renewal_reward_multichain_weights():
    # two absorbing classes reached with prob 1/2 each, cycle costs 2 and 6
    P = np.array([[0, .5, .5], [0, 1, 0], [0, 0, 1.]])
    c = np.array([0., 2., 6.])
    assert chain_renewal_reward(P, c, np.array([False, True, True]), 0) == pytest.approx(4.0)


def test_renewal_reward_matches_simulation():
    from acpc_synth.simulation import SplitMix64, _Kernel
    rows = {(0, 0): {1: 0.6, 2: 0.4}, (1, 0): {0: 0.3, 2: 0.7}, (2, 0): {0: 0.5, 1: 0.5}}
    m = Mdp.from_rows(3, rows, {(0, 0): 1.0, (1, 0): 4.0, (2, 0): 2.0}, initial=0)
    exact = renewal_reward(m, {0: 0, 1: 0, 2: 0}, {0})
    rng = SplitMix64(42)
    kernel = _Kernel(m)
    s, cost, cycles = 0, 0.0, 0
    while cycles < 1_000_000:
        cost += m.cost(s, 0)
        s = kernel.sample(s, 0, rng.uniform())
        cycles += s == 0
    assert cost / cycles == pytest.approx(exact, rel=5e-3)


def test_max_reach():
    rows = {(0, 0): {1: 0.5, 2: 0.5}, (0, 1): {0: 1.0}, (1, 0): {1: 1.0}, (2, 0): {2: 1.0}}
    m = Mdp.from_rows(3, rows, 1.0, initial=0)
    assert brute_force_max_reach(m, {1}) == {0: pytest.approx(0.5), 1: 1.0, 2: 0.0}
