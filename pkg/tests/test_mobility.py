import math

import pytest
from hypothesis import given, strategies as st

from uavsched.mobility import (Trajectory, distance, load_waypoints_csv, position_at,
                               surveillance_radius, travel_time)


def test_surveillance_radius():
    assert surveillance_radius(100, 90) == pytest.approx(100.0)
    assert surveillance_radius(100, 60) == pytest.approx(57.735, abs=1e-3)
    assert surveillance_radius(0, 45) == 0.0
    with pytest.raises(ValueError):
        surveillance_radius(100, 180)


def test_distance_and_travel():
    assert distance((0, 0), (3, 4)) == 5.0
    assert distance((7, 7), (7, 7)) == 0.0
    d = distance((625, 625), (312.5, 312.5))
    assert d == pytest.approx(441.942, abs=1e-3)
    assert travel_time(500, 20) == 25.0
    assert travel_time(0, 20) == 0.0
    assert travel_time(d, 20) == pytest.approx(22.097, abs=1e-3)
    with pytest.raises(ValueError):
        travel_time(10, 0)


def test_bundled_timetable():
    wps = load_waypoints_csv()
    assert sorted(wps) == list(range(1, 11))
    assert all(len(v) == 10 for v in wps.values())
    traj = Trajectory(wps[1], 20.0)
    assert position_at(traj, 600.0) == (125.0, 1075.0)


def test_interpolation_and_dwell():
    traj = Trajectory([(600.0, (125, 1075)), (1200.0, (625, 1075))], 20.0)
    assert traj.position_at(610.0) == pytest.approx((325, 1075))
    assert traj.position_at(900.0) == (625, 1075)
    assert traj.flight_time_between(600, 1200) == pytest.approx(25.0)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([(10.0, (0, 0)), (5.0, (1, 1))], 20.0)
    with pytest.raises(ValueError):
        Trajectory([(0.0, (0, 0)), (10.0, (1000, 0))], 20.0)
    traj = Trajectory([(10.0, (0, 0)), (20.0, (10, 0))], 20.0)
    with pytest.raises(ValueError):
        traj.position_at(25.0)
    assert traj.with_start(0.0).position_at(5.0) == (0, 0)


@given(st.floats(0, 100))
def test_position_stays_on_segment(dt):
    traj = Trajectory([(0.0, (0, 0)), (100.0, (400, 300))], 20.0)
    x, y = traj.position_at(dt)
    assert 0 <= x <= 400 and 0 <= y <= 300
    assert math.isclose(y * 4, x * 3, abs_tol=1e-9)
