import json

import numpy as np
import pytest

from conftest import tiny_config
from uavsched.domain import (Assignment, ScenarioError, build_scenario, initial_state, load_scenario,
                             region_of, scenario_to_config, validate_state)


def test_default_scenario(default_scenario):
    sc = default_scenario
    assert len(sc.uavs) == 10 and len(sc.towers) == 5
    assert sc.area_side == 1250 and sc.n_regions == 100 and sc.horizon == 100


def test_epsilon_out_of_range_names_field():
    with pytest.raises(ScenarioError) as exc:
        build_scenario({"epsilon": 1.3})
    assert exc.value.path == "epsilon"


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError):
        build_scenario({"epsilonn": 0.5})


def test_grid_regions():
    sc = build_scenario(tiny_config())
    assert sc.n_regions == 4


def test_tower_outside_area_rejected():
    cfg = tiny_config(towers=[{"id": 1, "position": [600, 100]}])
    with pytest.raises(ScenarioError):
        build_scenario(cfg)


def test_duplicate_tower_ids_rejected():
    cfg = tiny_config(towers=[{"id": 1, "position": [100, 100]}, {"id": 1, "position": [200, 200]}])
    with pytest.raises(ScenarioError):
        build_scenario(cfg)


def test_region_of(default_scenario):
    sc = default_scenario
    assert region_of((0, 0), sc) == 0
    assert region_of((130, 10), sc) == 1
    assert region_of((1250, 1250), sc) == 99
    # brute-force cell scan
    for x, y in [(130, 10), (10, 130), (624.9, 1249), (1000, 0)]:
        hits = [r for r in range(100)
                if (r % 10) * 125 <= x < (r % 10 + 1) * 125 and (r // 10) * 125 <= y < (r // 10 + 1) * 125]
        assert hits == [region_of((x, y), sc)]


def test_validate_state(tiny, tiny_state):
    assert validate_state(tiny_state, tiny) == []
    bad = tiny_state.copy()
    bad.uav_energy[1] = -1.0
    assert any("energy below zero" in p for p in validate_state(bad, tiny))
    bad = tiny_state.copy()
    bad.uav_energy[1] = 0.0
    assert any("inactive flag" in p for p in validate_state(bad, tiny))


def test_assignment_helpers():
    a = Assignment([(2, 1), (1, 3)])
    assert list(a) == [(1, 3), (2, 1)]
    assert a.tower_of(1) == 2 and a.tower_of(2) is None
    assert len(a) == 2
    assert Assignment().sort_key() < a.sort_key()


def test_config_round_trip(tmp_path, tiny):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(scenario_to_config(tiny)))
    again = load_scenario(path)
    assert again.digest() == tiny.digest()


def test_initial_state_seeded(tiny):
    a = initial_state(tiny, np.random.default_rng(5))
    b = initial_state(tiny, np.random.default_rng(5))
    assert [r.event_class for r in a.regions] == [r.event_class for r in b.regions]
    assert all(a.uav_energy[u.id] == u.battery_capacity for u in tiny.uavs)
