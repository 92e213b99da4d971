"""Reward algebra: tower fairness term, UAV energy term and their weighted mix.

The functions accept a trailing axis of towers / UAVs so the scheduler can
score many candidate assignments in one call; scalar inputs work as 1-D.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .domain import DEFAULT_SIGMA_FLOOR


@dataclass(frozen=True)
class RewardBreakdown:
    r_tower_raw: float
    r_uav_raw: float
    r_tower_norm: float
    r_uav_norm: float
    combined: float

    def to_dict(self) -> dict:
        return asdict(self)


def tower_data_reward(d, sigma_floor: float = DEFAULT_SIGMA_FLOOR):
    """Sum of tower data divided by its population standard deviation.

    A zero spread is replaced by ``sigma_floor`` to keep the value finite.
    """
    d = np.asarray(d, dtype=float)
    if d.shape[-1] < 1:
        raise ValueError("need at least one tower")
    sigma = np.maximum(d.std(axis=-1), sigma_floor)
    out = d.sum(axis=-1) / sigma
    return float(out) if out.ndim == 0 else out


def uav_power_reward(e, capacity):
    e = np.asarray(e, dtype=float)
    capacity = np.asarray(capacity, dtype=float)
    if e.shape[-1] != capacity.shape[-1]:
        raise ValueError(f"length mismatch: {e.shape[-1]} energies vs {capacity.shape[-1]} capacities")
    out = (e / capacity).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def normalized_tower_reward(d, d_capacity: float):
    """(sum d / d_capacity) / (1 + coefficient of variation); CV is 0 for an all-zero profile."""
    d = np.asarray(d, dtype=float)
    total = d.sum(axis=-1)
    mean = d.mean(axis=-1)
    sigma = d.std(axis=-1)
    safe_mean = np.where(mean > 0, mean, 1.0)
    cv = np.where(mean > 0, sigma / safe_mean, 0.0)
    out = (total / d_capacity) / (1.0 + cv)
    return float(out) if out.ndim == 0 else out


def combine(epsilon: float, tower_term, uav_term):
    return epsilon * tower_term + (1.0 - epsilon) * uav_term


def combined_scores(epsilon: float, d, e, capacity, mode: str = "normalized",
                    d_capacity: float | None = None, sigma_floor: float = DEFAULT_SIGMA_FLOOR):
    """Vectorised combined reward only (no breakdown)."""
    _check_epsilon(epsilon)
    if mode == "raw":
        return combine(epsilon, tower_data_reward(d, sigma_floor), uav_power_reward(e, capacity))
    if mode != "normalized":
        raise ValueError(f"unknown reward mode {mode!r}")
    if d_capacity is None or not d_capacity > 0:
        raise ValueError("normalized mode needs a positive d_capacity")
    m = np.asarray(capacity).shape[-1]
    return combine(epsilon, normalized_tower_reward(d, d_capacity), uav_power_reward(e, capacity) / m)


def combined_reward(epsilon: float, d: Sequence[float], e: Sequence[float],
                    capacity: Sequence[float], mode: str = "normalized",
                    d_capacity: float | None = None,
                    sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> RewardBreakdown:
    _check_epsilon(epsilon)
    r_t = tower_data_reward(d, sigma_floor)
    r_u = uav_power_reward(e, capacity)
    m = len(capacity)
    r_u_norm = r_u / m
    if mode == "normalized":
        if d_capacity is None or not d_capacity > 0:
            raise ValueError("normalized mode needs a positive d_capacity")
        r_t_norm = normalized_tower_reward(d, d_capacity)
        combined = combine(epsilon, r_t_norm, r_u_norm)
    elif mode == "raw":
        r_t_norm = normalized_tower_reward(d, d_capacity) if d_capacity else 0.0
        combined = combine(epsilon, r_t, r_u)
    else:
        raise ValueError(f"unknown reward mode {mode!r}")
    return RewardBreakdown(float(r_t), float(r_u), float(r_t_norm), float(r_u_norm), float(combined))


def system_value_timeavg(series: Sequence[float]) -> float:
    if len(series) == 0:
        raise ValueError("time average of an empty series is undefined")
    return float(np.mean(series))


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
