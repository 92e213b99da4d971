import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import population_std
from uavsched.reward import (combined_reward, combined_scores, normalized_tower_reward, system_value_timeavg,
                             tower_data_reward, uav_power_reward)


def test_tower_reward_examples():
    assert tower_data_reward([1, 2, 3]) == pytest.approx(7.348, abs=1e-3)
    assert tower_data_reward([1, 2, 3]) == pytest.approx(6 / population_std([1, 2, 3]))
    assert tower_data_reward([5, 5, 5], sigma_floor=1e-6) == pytest.approx(15 / 1e-6)
    assert tower_data_reward([0, 0]) == 0.0


def test_uav_reward_examples():
    assert uav_power_reward([100, 100, 100], [100, 100, 100]) == 3
    assert uav_power_reward([50, 100], [100, 100]) == 1.5
    assert uav_power_reward([0, 0], [100, 100]) == 0
    with pytest.raises(ValueError):
        uav_power_reward([1, 2], [1])


def test_weight_collapse():
    cap = [10, 10]
    for mode in ("raw", "normalized"):
        a = combined_reward(0.0, [1, 2], [5, 5], cap, mode, d_capacity=10).combined
        b = combined_reward(0.0, [7, 0], [5, 5], cap, mode, d_capacity=10).combined
        assert a == b
        c = combined_reward(1.0, [1, 2], [5, 5], cap, mode, d_capacity=10).combined
        d = combined_reward(1.0, [1, 2], [0, 9], cap, mode, d_capacity=10).combined
        assert c == d


@pytest.mark.parametrize("eps", [0.0, 0.3, 1.0])
def test_normalized_perfect_state_is_one(eps):
    r = combined_reward(eps, [4, 4, 4], [10, 10], [10, 10], "normalized", d_capacity=12)
    assert r.combined == pytest.approx(1.0)


def test_normalized_needs_capacity():
    with pytest.raises(ValueError):
        combined_reward(0.5, [1], [1], [1], "normalized", d_capacity=None)
    with pytest.raises(ValueError):
        combined_reward(1.5, [1], [1], [1], "raw")


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(0)
    d = rng.uniform(0, 10, (20, 3))
    e = rng.uniform(0, 5, (20, 4))
    cap = np.full(4, 5.0)
    for mode in ("raw", "normalized"):
        vec = combined_scores(0.4, d, e, cap, mode, 30.0)
        for k in range(20):
            assert vec[k] == pytest.approx(combined_reward(0.4, d[k], e[k], cap, mode, 30.0).combined)


def test_time_average():
    assert system_value_timeavg([2.5] * 7) == 2.5
    assert system_value_timeavg([0, 1]) == 0.5
    with pytest.raises(ValueError):
        system_value_timeavg([])


@given(st.lists(st.floats(0.1, 100), min_size=2, max_size=6), st.floats(0.01, 100))
def test_raw_tower_reward_scale_invariant(d, c):
    if population_std(d) < 1e-3:
        return
    assert tower_data_reward([c * x for x in d]) == pytest.approx(tower_data_reward(d), rel=1e-9)


@given(st.lists(st.floats(0, 1000), min_size=1, max_size=6))
def test_time_average_permutation(xs):
    assert system_value_timeavg(xs) == pytest.approx(system_value_timeavg(list(reversed(xs))))


@given(st.lists(st.floats(0, 50), min_size=1, max_size=6))
def test_normalized_tower_bounded(d):
    r = normalized_tower_reward(d, 50 * len(d))
    assert 0 <= r <= 1 + 1e-12
