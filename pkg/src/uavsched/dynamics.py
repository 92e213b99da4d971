"""Deterministic per-step physics shared by the simulator and the scheduler.

``exchange`` applies transfer -> charge -> consumption to a state in place.
``StepModel`` precomputes, for one state, what every UAV/tower option does to
the post-step tower data and energies, so that whole batches of candidate
assignments can be scored with array arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import energy
from .contents import transfer_contents
from .domain import Assignment, Scenario, SystemState, assignment_violations
from .mobility import Point, distance, travel_time
from .reward import combined_scores

# Motion-plan tolerance for "still on its timetabled track".
_ON_TRACK_TOL = 1e-6


class InfeasibleAssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class MotionPlan:
    flight_time: float
    end: Point
    dwelling: bool


def step_window(state: SystemState, scenario: Scenario) -> tuple[float, float]:
    t0 = state.t * scenario.step_len
    return t0, t0 + scenario.step_len


def motion_plan(state: SystemState, scenario: Scenario, uav_id: int) -> MotionPlan:
    """Where an unscheduled UAV ends the step and how long it cruises getting there.

    A UAV on its timetable follows the trajectory.  A UAV displaced by an
    earlier tower visit flies straight back towards its timetabled position.
    """
    uav = scenario.uav(uav_id)
    t0, t1 = step_window(state, scenario)
    pos = state.uav_position[uav_id]
    target = uav.position_at_clock(t1)
    if distance(pos, uav.position_at_clock(t0)) <= _ON_TRACK_TOL:
        flight = min(uav.flight_time_between(t0, t1), scenario.step_len)
        end = target
    else:
        gap = distance(pos, target)
        needed = gap / uav.speed
        flight = min(needed, scenario.step_len)
        if needed <= scenario.step_len:
            end = target
        else:
            frac = scenario.step_len / needed
            end = (pos[0] + frac * (target[0] - pos[0]), pos[1] + frac * (target[1] - pos[1]))
    return MotionPlan(flight, end, scenario.step_len - flight > 1e-9)


def reachable(state: SystemState, scenario: Scenario, tower_id: int, uav_id: int) -> bool:
    uav = scenario.uav(uav_id)
    dist = distance(state.uav_position[uav_id], scenario.tower(tower_id).position)
    return 2.0 * dist / uav.speed <= scenario.step_len


def check_assignment(assignment: Assignment, state: SystemState, scenario: Scenario) -> None:
    problems = assignment_violations(assignment, state, scenario)
    for i, j in assignment.pairs:
        if j in state.uav_active and i in scenario.tower_ids and not reachable(state, scenario, i, j):
            problems.append(f"uav {j} cannot reach tower {i} and return within one step")
    if problems:
        raise InfeasibleAssignmentError("; ".join(problems))


def _charge_for(scenario: Scenario, tower_id: int, uav_id: int, dist: float) -> float:
    tower, uav = scenario.tower(tower_id), scenario.uav(uav_id)
    return energy.charge_amount(tower.offer_power, tower.eta_tower, uav.eta_uav,
                                scenario.step_len, travel_time(dist, uav.speed))


def exchange(state: SystemState, assignment: Assignment, scenario: Scenario,
             plans: dict[int, MotionPlan] | None = None) -> dict:
    """Transfer, charge and consume for one step, mutating ``state``.

    Returns per-UAV bookkeeping: moved data, charge received, consumption and
    the list of UAVs that ran dry.
    """
    check_assignment(assignment, state, scenario)
    if plans is None:
        plans = {j: motion_plan(state, scenario, j) for j in scenario.uav_ids if state.uav_active[j]}
    moved, charged, consumed = {}, {}, {}
    for i, j in assignment:
        moved[j] = transfer_contents(state, j, i)
    dists = {j: distance(state.uav_position[j], scenario.tower(i).position) for i, j in assignment}
    for i, j in assignment:
        e_c = _charge_for(scenario, i, j, dists[j])
        before = state.uav_energy[j]
        state.uav_energy[j] = energy.apply_charge(before, e_c, scenario.uav(j).battery_capacity)
        charged[j] = state.uav_energy[j] - before
    deactivated = []
    for uav in scenario.uavs:
        j = uav.id
        if not state.uav_active[j]:
            continue
        tower = assignment.tower_of(j)
        if tower is not None:
            cost = energy.step_consumption(uav.airframe, uav.speed, scenario.step_len,
                                           scheduled_distance=dists[j])
        else:
            cost = energy.step_consumption(uav.airframe, uav.speed, scenario.step_len,
                                           flight_time=plans[j].flight_time)
        consumed[j] = cost
        remaining = state.uav_energy[j] - cost
        if remaining <= 0.0:
            state.uav_energy[j] = 0.0
            state.uav_active[j] = False
            deactivated.append(j)
        else:
            state.uav_energy[j] = remaining
    return {"moved": moved, "charged": charged, "consumed": consumed,
            "deactivated": deactivated, "plans": plans}


@dataclass
class StepModel:
    """Per-option outcomes for one decision epoch.

    Arrays are indexed [uav] or [uav, tower] in scenario order.  ``reach``
    already excludes inactive UAVs.  ``data_cap`` saturates tower data (used
    by the quantised MDP); ``None`` means unbounded.
    """

    tower_ids: list[int]
    uav_ids: list[int]
    tower_data: np.ndarray
    held: np.ndarray
    energy_idle: np.ndarray
    energy_sched: np.ndarray
    reach: np.ndarray
    capacity: np.ndarray
    panels: np.ndarray
    data_cap: float | None = None

    @property
    def n_towers(self) -> int:
        return len(self.tower_ids)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_ids)

    def outcomes(self, choices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Post-step (tower data, UAV energy) for rows of per-UAV tower indices (-1 = idle)."""
        choices = np.atleast_2d(choices)
        k = choices.shape[0]
        data = np.repeat(self.tower_data[None, :], k, axis=0)
        rows = np.arange(k)
        energies = np.empty((k, self.n_uavs))
        for j in range(self.n_uavs):
            col = choices[:, j]
            on = col >= 0
            if on.any():
                data[rows[on], col[on]] += self.held[j]
            energies[:, j] = np.where(on, self.energy_sched[j, np.maximum(col, 0)], self.energy_idle[j])
        if self.data_cap is not None:
            np.minimum(data, self.data_cap, out=data)
        return data, energies

    def scores(self, choices: np.ndarray, epsilon: float, mode: str,
               d_capacity: float | None, sigma_floor: float) -> np.ndarray:
        data, energies = self.outcomes(choices)
        return np.asarray(combined_scores(epsilon, data, energies, self.capacity, mode,
                                          d_capacity, sigma_floor), dtype=float)

    def feasible_mask(self, choices: np.ndarray) -> np.ndarray:
        choices = np.atleast_2d(choices)
        ok = np.ones(choices.shape[0], dtype=bool)
        for j in range(self.n_uavs):
            col = choices[:, j]
            on = col >= 0
            ok &= ~on | self.reach[j, np.maximum(col, 0)]
        for i in range(self.n_towers):
            ok &= (choices == i).sum(axis=1) <= self.panels[i]
        return ok

    def to_assignment(self, row) -> Assignment:
        return Assignment((self.tower_ids[i], self.uav_ids[j]) for j, i in enumerate(row) if i >= 0)

    def to_choices(self, assignment: Assignment) -> np.ndarray:
        t_index = {t: k for k, t in enumerate(self.tower_ids)}
        u_index = {u: k for k, u in enumerate(self.uav_ids)}
        row = np.full(self.n_uavs, -1, dtype=np.int64)
        for i, j in assignment.pairs:
            row[u_index[j]] = t_index[i]
        return row


def build_step_model(state: SystemState, scenario: Scenario) -> StepModel:
    n, m = len(scenario.towers), len(scenario.uavs)
    held = np.zeros(m)
    e_idle = np.zeros(m)
    e_sched = np.zeros((m, n))
    reach = np.zeros((m, n), dtype=bool)
    for j, uav in enumerate(scenario.uavs):
        if not state.uav_active[uav.id]:
            continue
        held[j] = state.held_data(uav.id)
        e = state.uav_energy[uav.id]
        plan = motion_plan(state, scenario, uav.id)
        idle_cost = energy.step_consumption(uav.airframe, uav.speed, scenario.step_len,
                                            flight_time=plan.flight_time)
        e_idle[j] = _floor(e - idle_cost)
        for i, tower in enumerate(scenario.towers):
            dist = distance(state.uav_position[uav.id], tower.position)
            if 2.0 * dist / uav.speed > scenario.step_len:
                continue
            reach[j, i] = True
            charged = energy.apply_charge(e, _charge_for(scenario, tower.id, uav.id, dist), uav.battery_capacity)
            cost = energy.step_consumption(uav.airframe, uav.speed, scenario.step_len, scheduled_distance=dist)
            e_sched[j, i] = _floor(charged - cost)
    return StepModel(
        tower_ids=scenario.tower_ids,
        uav_ids=scenario.uav_ids,
        tower_data=np.array([state.tower_data[t] for t in scenario.tower_ids], dtype=float),
        held=held,
        energy_idle=e_idle,
        energy_sched=e_sched,
        reach=reach,
        capacity=np.array([u.battery_capacity for u in scenario.uavs], dtype=float),
        panels=np.array([t.panels for t in scenario.towers], dtype=np.int64),
    )


def _floor(e: float) -> float:
    return e if e > 0.0 else 0.0
