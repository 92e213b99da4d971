"""Rotary-wing power model, wireless charging and per-step energy accounting.

Power values are in watts, energies in joules.  The airframe constants follow
the usual blade-profile / induced / parasite decomposition of rotary-wing
propulsion power.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields

logger = logging.getLogger(__name__)


class InfeasiblePairError(ValueError):
    """A scheduled round trip does not fit inside one step."""


@dataclass(frozen=True)
class Airframe:
    """Rotorcraft constants.

    Attributes:
        delta: profile drag coefficient
        rho: air density (kg/m^3)
        s: rotor solidity
        A: rotor disc area (m^2)
        Omega: blade angular velocity (rad/s)
        R: rotor radius (m)
        k: incremental correction factor to induced power
        W: aircraft weight (N)
        U_tip: tip speed of the rotor blade (m/s)
        v0: mean rotor-induced velocity in hover (m/s)
        d0: fuselage drag ratio
    """

    delta: float
    rho: float
    s: float
    A: float
    Omega: float
    R: float
    k: float
    W: float
    U_tip: float
    v0: float
    d0: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            floor_ok = value >= 0 if f.name == "k" else value > 0
            if not (isinstance(value, (int, float)) and math.isfinite(value) and floor_ok):
                raise ValueError(f"airframe.{f.name} must be a positive finite number, got {value!r}")
        # The rotor tip speed is Omega * R (300 * 0.4 = 120 for the preset).
        if not math.isclose(self.U_tip, self.Omega * self.R, rel_tol=0.01):
            warnings.warn(
                f"U_tip={self.U_tip} does not match Omega*R={self.Omega * self.R:.3f}",
                stacklevel=3,
            )

    def to_dict(self) -> dict:
        return asdict(self)


# DJI Phantom 4 Pro v2.0 constants.  W = 20 N (not 1.375 kg * g) so that
# v0 = sqrt(W / (2 rho A)) = 4.03 m/s holds.
PHANTOM4PRO = Airframe(
    delta=0.012,
    rho=1.225,
    s=0.05,
    A=0.503,
    Omega=300.0,
    R=0.4,
    k=0.1,
    W=20.0,
    U_tip=120.0,
    v0=4.03,
    d0=0.6,
)

AIRFRAME_PRESETS = {"phantom4pro": PHANTOM4PRO}

# 5,870 mAh at 17.4 V.
PHANTOM4PRO_BATTERY_J = 5.870 * 17.4 * 3600.0

DEFAULT_SPEED = 20.0
DEFAULT_OFFER_POWER = 100.0
DEFAULT_ETA = 0.9


def blade_profile_power(af: Airframe) -> float:
    """P_o = delta/8 * rho * s * A * Omega^3 * R^3."""
    return af.delta / 8.0 * af.rho * af.s * af.A * af.Omega**3 * af.R**3


def induced_power(af: Airframe) -> float:
    """P_i = (1 + k) * W^1.5 / sqrt(2 rho A)."""
    return (1.0 + af.k) * af.W**1.5 / math.sqrt(2.0 * af.rho * af.A)


def hover_power(af: Airframe) -> float:
    return blade_profile_power(af) + induced_power(af)


def cruise_terms(af: Airframe, v: float) -> tuple[float, float, float]:
    """Return the (blade profile, induced, parasite) components at forward speed ``v``."""
    if v < 0:
        raise ValueError(f"speed must be non-negative, got {v}")
    p_o = blade_profile_power(af)
    p_i = induced_power(af)
    blade = p_o * (1.0 + 3.0 * v**2 / af.U_tip**2)
    radicand = math.sqrt(1.0 + v**4 / (4.0 * af.v0**4)) - v**2 / (2.0 * af.v0**2)
    if radicand < 0.0:
        logger.warning("induced-power radicand %.3e < 0 at v=%s; clamped to 0", radicand, v)
        radicand = 0.0
    induced = p_i * math.sqrt(radicand)
    parasite = 0.5 * af.d0 * af.rho * af.s * af.A * v**3
    return blade, induced, parasite


def cruise_power(af: Airframe, v: float) -> float:
    if v == 0:
        return hover_power(af)
    return sum(cruise_terms(af, v))


def charge_amount(offer_power: float, eta_tower: float, eta_uav: float,
                  step_len: float, travel_time: float) -> float:
    """Energy a UAV receives from one scheduled tower during a step.

    The charging window is the step minus the one-way travel time, floored at 0.
    """
    if offer_power < 0 or step_len < 0 or travel_time < 0:
        raise ValueError("charge_amount arguments must be non-negative")
    if not (0 < eta_tower <= 1 and 0 < eta_uav <= 1):
        raise ValueError("efficiencies must lie in (0, 1]")
    return offer_power * eta_tower * eta_uav * max(0.0, step_len - travel_time)


def apply_charge(e: float, e_c: float, capacity: float) -> float:
    return min(e + e_c, capacity)


def scheduled_consumption(af: Airframe, speed: float, distance: float, step_len: float) -> float:
    """Round trip to a tower at cruise power, hover power for the rest of the step."""
    tau = distance / speed
    if 2.0 * tau > step_len:
        raise InfeasiblePairError(
            f"round trip of {2 * tau:.3f} s exceeds the {step_len} s step (distance {distance:.3f} m)"
        )
    return cruise_power(af, speed) * 2.0 * tau + hover_power(af) * (step_len - 2.0 * tau)


def step_consumption(af: Airframe, speed: float, step_len: float, *,
                     scheduled_distance: float | None = None,
                     flight_time: float = 0.0) -> float:
    """Energy burnt by an active UAV over one step.

    If ``scheduled_distance`` is given the UAV flies to its tower and back;
    otherwise it cruises for ``flight_time`` seconds along its trajectory and
    hovers for the remainder.
    """
    if scheduled_distance is not None:
        return scheduled_consumption(af, speed, scheduled_distance, step_len)
    flight_time = min(max(flight_time, 0.0), step_len)
    return cruise_power(af, speed) * flight_time + hover_power(af) * (step_len - flight_time)
