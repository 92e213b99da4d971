import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from oracles import BATTERY_J, BLADE20_W, CRUISE20_W, HOVER_W, INDUCED20_W, PARASITE20_W, hover_oracle
from uavsched import energy
from uavsched.energy import PHANTOM4PRO as AF


def test_hover_matches_hand_evaluation():
    assert energy.hover_power(AF) == pytest.approx(HOVER_W, rel=0.01)
    assert energy.blade_profile_power(AF) == pytest.approx(79.9, rel=0.01)
    assert energy.induced_power(AF) == pytest.approx(88.8, rel=0.01)
    ref = hover_oracle(AF.delta, AF.rho, AF.s, AF.A, AF.Omega, AF.R, AF.k, AF.W)
    assert energy.hover_power(AF) == pytest.approx(ref, rel=1e-12)


def test_hover_linear_in_delta():
    twice = dataclasses.replace(AF, delta=2 * AF.delta)
    assert energy.blade_profile_power(twice) == pytest.approx(2 * energy.blade_profile_power(AF))
    assert energy.induced_power(twice) == energy.induced_power(AF)


def test_induced_without_correction():
    af = dataclasses.replace(AF, k=0.0)
    assert energy.induced_power(af) == pytest.approx(AF.W**1.5 / math.sqrt(2 * AF.rho * AF.A))


def test_cruise_terms_at_20():
    blade, induced, parasite = energy.cruise_terms(AF, 20.0)
    assert blade == pytest.approx(BLADE20_W, rel=0.01)
    assert induced == pytest.approx(INDUCED20_W, rel=0.02)
    assert parasite == pytest.approx(PARASITE20_W, rel=0.01)
    assert parasite == pytest.approx(0.5 * 0.6 * 1.225 * 0.05 * 0.503 * 20**3, rel=1e-3)
    assert energy.cruise_power(AF, 20.0) == pytest.approx(CRUISE20_W, rel=0.02)


def test_cruise_zero_speed_is_hover_exactly():
    assert energy.cruise_power(AF, 0.0) == energy.hover_power(AF)


def test_battery_preset():
    assert energy.PHANTOM4PRO_BATTERY_J == pytest.approx(BATTERY_J, rel=1e-3)


@pytest.mark.parametrize("field", ["delta", "rho", "A", "W", "R"])
def test_airframe_rejects_non_positive(field):
    with pytest.raises(ValueError):
        dataclasses.replace(AF, **{field: 0.0})


def test_charge_examples():
    assert energy.charge_amount(100, 0.9, 0.9, 60, 10) == pytest.approx(4050.0)
    assert energy.charge_amount(100, 0.9, 0.9, 60, 60) == 0.0
    assert energy.charge_amount(100, 0.9, 0.9, 60, 75) == 0.0
    assert energy.charge_amount(100, 1.0, 1.0, 60, 0) == 6000.0


def test_apply_charge_examples():
    assert energy.apply_charge(100, 50, 120) == 120
    assert energy.apply_charge(10, 5, 120) == 15
    assert energy.apply_charge(120, 999, 120) == 120


def test_step_consumption_examples():
    hover = energy.hover_power(AF)
    assert energy.step_consumption(AF, 20, 60, flight_time=0.0) == pytest.approx(10_114, rel=0.01)
    assert energy.step_consumption(AF, 20, 60, scheduled_distance=0.0) == pytest.approx(hover * 60)
    two_leg = energy.step_consumption(AF, 20, 60, scheduled_distance=200.0)
    assert two_leg == pytest.approx(10_308, rel=0.01)
    assert two_leg == pytest.approx(energy.cruise_power(AF, 20) * 20 + hover * 40)


def test_unreachable_pair_raises():
    with pytest.raises(energy.InfeasiblePairError):
        energy.scheduled_consumption(AF, 20, 700.0, 60)


@given(st.floats(0, 30))
def test_cruise_positive_and_finite(v):
    p = energy.cruise_power(AF, v)
    assert p > 0 and math.isfinite(p)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1, 1e6))
def test_apply_charge_bounded(e, e_c, cap):
    e = min(e, cap)
    out = energy.apply_charge(e, e_c, cap)
    assert e <= out <= cap
