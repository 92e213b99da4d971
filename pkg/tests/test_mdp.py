import itertools

import numpy as np
import pytest

from oracles import brute_force_value, mdp_step
from uavsched import mdp
from uavsched.mdp import SmallMdpInstance


def inst(**kw):
    base = dict(n_towers=1, n_uavs=1, energy_levels=3, data_levels=3,
                content_outcomes=((1, 1.0),), horizon=3, gamma=0.9)
    base.update(kw)
    return SmallMdpInstance(**base)


def test_state_counts():
    assert inst(energy_levels=2, data_levels=2).n_states == 8
    i = inst(n_towers=2, n_uavs=2)
    assert i.n_states == 729
    assert len(mdp.enumerate_states(i)) == 729


def test_index_round_trip():
    i = inst(n_towers=2, n_uavs=2)
    for k, s in enumerate(mdp.enumerate_states(i)):
        assert mdp.index_of(i, s) == k
        assert mdp.state_of(i, k) == s


def test_validation():
    with pytest.raises(mdp.InstanceError):
        inst(content_outcomes=((0, 0.5), (1, 0.4)))
    with pytest.raises(mdp.InstanceError):
        inst(n_towers=4)
    with pytest.raises(mdp.InstanceError):
        inst(horizon=9)


def test_deterministic_and_two_point_successors():
    i = inst()
    s = i.initial
    assert len(mdp.successors(i, s, (-1,))) == 1
    j = inst(content_outcomes=((0, 0.5), (1, 0.5)))
    succ = mdp.successors(j, s, (-1,))
    assert sorted(succ.values()) == [0.5, 0.5]


def test_quantised_transfer_saturates():
    i = inst(energy_levels=3, data_levels=3)
    nxt, _ = mdp.transition(i, (1, 2, 2), (0,), (0,))
    assert nxt[0] == min(1 + 2, 2) and nxt[2] == 0


def test_scalar_and_table_transitions_agree():
    rng = np.random.default_rng(1)
    for _ in range(5):
        i = mdp.random_instance(rng, max_states=400)
        tb = mdp.build_tables(i)
        combos = list(mdp.outcomes(i))
        for s_idx in rng.integers(0, i.n_states, 20):
            s = mdp.state_of(i, int(s_idx))
            for a_idx, a in enumerate(tb.actions):
                ok = mdp.is_feasible(i, s, a)
                assert tb.feasible[s_idx, a_idx] == ok
                if not ok:
                    continue
                assert tb.rewards[s_idx, a_idx] == pytest.approx(mdp.reward(i, s, a), abs=1e-12)
                for o, (combo, _) in enumerate(combos):
                    nxt, _ = mdp.transition(i, s, a, combo)
                    assert tb.next_index[s_idx, a_idx, o] == mdp.index_of(i, nxt)


def test_horizon_one_is_max_immediate_reward():
    i = inst(horizon=1, initial=(1, 1, 2))
    sol = mdp.value_iteration(i)
    best = max(mdp.reward(i, i.initial, a) for a in mdp.feasible_actions(i, i.initial))
    assert sol.value(0, i.initial) == pytest.approx(best)


def test_two_step_chain_matches_sequence_enumeration():
    i = inst(horizon=2, initial=(0, 2, 1))
    sol = mdp.value_iteration(i)
    seqs = []
    for a0, a1 in itertools.product([(-1,), (0,)], repeat=2):
        r0, s1 = mdp_step(i, i.initial, a0)
        r1, _ = mdp_step(i, s1, a1)
        seqs.append(r0 + i.gamma * r1)
    assert sol.value(0, i.initial) == pytest.approx(max(seqs), abs=1e-12)
    assert brute_force_value(i) == pytest.approx(max(seqs), abs=1e-12)


def test_gamma_zero_matches_greedy_scheduler():
    rng = np.random.default_rng(7)
    for _ in range(4):
        i = mdp.random_instance(rng, max_states=400)
        i = SmallMdpInstance(**{**i.__dict__, "gamma": 0.0})
        sol = mdp.value_iteration(i)
        greedy = mdp.GreedyPolicy(i)
        for s in range(0, i.n_states, 7):
            assert sol.action(0, s) == greedy[(0, s)]


def test_policy_evaluation_bounds():
    rng = np.random.default_rng(2)
    i = mdp.random_instance(rng, max_states=400)
    sol = mdp.value_iteration(i)
    v_star = sol.value(0, i.initial)
    assert mdp.evaluate_policy(i, sol.policy()) == pytest.approx(v_star, abs=1e-9)

    def idle(t, s):
        return (-1,) * i.n_uavs

    assert mdp.evaluate_policy(i, idle) <= v_star + 1e-9


def test_rollouts_agree_with_exact():
    i = inst(content_outcomes=((0, 0.5), (2, 0.5)), horizon=4)
    sol = mdp.value_iteration(i)
    exact = mdp.evaluate_policy(i, sol.policy())
    mean, se = mdp.evaluate_policy(i, sol.policy(), n_rollouts=2000, rng=np.random.default_rng(0))
    assert abs(mean - exact) <= 4 * se + 1e-12


def test_missing_policy_entry_named():
    i = inst()
    with pytest.raises(mdp.PolicyError, match="step 0"):
        mdp.evaluate_policy(i, {})


def test_export_csv(tmp_path):
    i = inst(horizon=2)
    sol = mdp.value_iteration(i)
    path = tmp_path / "sol.csv"
    mdp.export_solution_csv(sol, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 2 * i.n_states


def test_config_round_trip():
    i = inst(n_towers=2, n_uavs=2)
    assert SmallMdpInstance.from_config(i.to_config()) == i
