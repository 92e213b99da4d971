import collections

import numpy as np

from uavsched.contents import Content, generate_content, sample_region_events, transfer_contents
from uavsched.domain import DEFAULT_CONTENT_SIZES


def test_resample_zero_keeps_regions(tiny_state):
    out = sample_region_events(tiny_state.regions, 0.0, np.random.default_rng(0), DEFAULT_CONTENT_SIZES)
    assert [r.event_class for r in out] == [r.event_class for r in tiny_state.regions]


def test_resample_one_reproducible(tiny_state):
    a = sample_region_events(tiny_state.regions, 1.0, np.random.default_rng(3), DEFAULT_CONTENT_SIZES)
    b = sample_region_events(tiny_state.regions, 1.0, np.random.default_rng(3), DEFAULT_CONTENT_SIZES)
    assert a == b


def test_class_frequencies_uniform(tiny_state):
    rng = np.random.default_rng(11)
    regions = tiny_state.regions[:1]
    counts = collections.Counter()
    for _ in range(10_000):
        regions = sample_region_events(regions, 1.0, rng, DEFAULT_CONTENT_SIZES)
        counts[regions[0].event_class] += 1
    for c in ("default", "smoke", "fire"):
        assert abs(counts[c] / 10_000 - 1 / 3) <= 0.02


def test_generate_content_rules(tiny_state):
    s = tiny_state
    s.regions[0].event_class, s.regions[0].content_size = "fire", 4.0
    c = generate_content(s, 1, 0, 0, dwelling=True, scheduled=False)
    assert c == Content(0, 4.0, 0)
    assert generate_content(s, 1, 0, 0, dwelling=True, scheduled=True) is None
    assert generate_content(s, 1, 0, 0, dwelling=False, scheduled=False) is None
    assert s.generated_total == 4.0


def test_transfer(tiny_state):
    s = tiny_state
    s.tower_data[1] = 5.0
    s.uav_contents[1] = [Content(0, 2.0, 0), Content(1, 3.0, 0)]
    assert transfer_contents(s, 1, 1) == 5.0
    assert s.tower_data[1] == 10.0 and s.uav_contents[1] == []
    assert transfer_contents(s, 2, 1) == 0.0
    assert s.tower_data[1] == 10.0


def test_two_uavs_one_tower(tiny_state):
    s = tiny_state
    s.tower_data[2] = 0.0
    s.uav_contents[1] = [Content(0, 1.0, 0)]
    s.uav_contents[2] = [Content(0, 4.0, 0)]
    transfer_contents(s, 1, 2)
    transfer_contents(s, 2, 2)
    assert s.tower_data[2] == 5.0
