"""World data model: scenario description, system state and assignments."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .energy import (
    AIRFRAME_PRESETS,
    DEFAULT_ETA,
    DEFAULT_OFFER_POWER,
    DEFAULT_SPEED,
    PHANTOM4PRO,
    PHANTOM4PRO_BATTERY_J,
    Airframe,
)
from .mobility import Point, Trajectory, Waypoint, load_waypoints_csv

EVENT_CLASSES = ("default", "smoke", "fire")
DEFAULT_CONTENT_SIZES = {"default": 1.0, "smoke": 2.0, "fire": 4.0}
REWARD_MODES = ("raw", "normalized")

DEFAULT_AREA_SIDE = 1250.0
DEFAULT_GRID_DIM = 10
DEFAULT_STEP_LEN = 60.0
DEFAULT_HORIZON = 100
DEFAULT_EPSILON = 0.5
DEFAULT_RESAMPLE_PROB = 0.05
DEFAULT_SIGMA_FLOOR = 1e-6
DEFAULT_ALTITUDE = 100.0
DEFAULT_FOV = 90.0


class ScenarioError(ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class TowerSpec:
    id: int
    position: Point
    panels: int = 1
    offer_power: float = DEFAULT_OFFER_POWER
    eta_tower: float = DEFAULT_ETA


@dataclass(frozen=True)
class UavSpec:
    id: int
    waypoints: tuple[Waypoint, ...]
    speed: float = DEFAULT_SPEED
    battery_capacity: float = PHANTOM4PRO_BATTERY_J
    eta_uav: float = DEFAULT_ETA
    airframe: Airframe = PHANTOM4PRO
    altitude: float = DEFAULT_ALTITUDE
    fov: float = DEFAULT_FOV

    @cached_property
    def trajectory(self) -> Trajectory:
        # Mission clock starts at 0; the UAV waits at its first waypoint until listed.
        return Trajectory(self.waypoints, self.speed).with_start(0.0)

    def position_at_clock(self, time: float) -> Point:
        """Trajectory position, holding the last waypoint after the timetable ends."""
        traj = self.trajectory
        return traj.position_at(min(max(time, traj.start_time), traj.end_time))

    def flight_time_between(self, t0: float, t1: float) -> float:
        return self.trajectory.flight_time_between(t0, t1)


@dataclass(frozen=True)
class Scenario:
    towers: tuple[TowerSpec, ...]
    uavs: tuple[UavSpec, ...]
    area_side: float = DEFAULT_AREA_SIDE
    grid_dim: int = DEFAULT_GRID_DIM
    step_len: float = DEFAULT_STEP_LEN
    horizon: int = DEFAULT_HORIZON
    epsilon: float = DEFAULT_EPSILON
    rng_seed: int = 0
    reward_mode: str = "normalized"
    event_resample_prob: float = DEFAULT_RESAMPLE_PROB
    content_size_map: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_CONTENT_SIZES))
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    d_capacity: float | None = None
    mdp: Mapping[str, Any] | None = None

    def __post_init__(self):
        object.__setattr__(self, "towers", tuple(self.towers))
        object.__setattr__(self, "uavs", tuple(self.uavs))
        _validate_scenario(self)

    @property
    def n_regions(self) -> int:
        return self.grid_dim**2

    @property
    def cell(self) -> float:
        return self.area_side / self.grid_dim

    @property
    def tower_ids(self) -> list[int]:
        return [t.id for t in self.towers]

    @property
    def uav_ids(self) -> list[int]:
        return [u.id for u in self.uavs]

    @property
    def data_capacity(self) -> float:
        """Upper bound on deliverable data used to normalise the tower term."""
        if self.d_capacity is not None:
            return self.d_capacity
        return self.horizon * len(self.uavs) * max(self.content_size_map.values())

    def tower(self, tower_id: int) -> TowerSpec:
        return self._tower_index[tower_id]

    def uav(self, uav_id: int) -> UavSpec:
        return self._uav_index[uav_id]

    @cached_property
    def _tower_index(self) -> dict[int, TowerSpec]:
        return {t.id: t for t in self.towers}

    @cached_property
    def _uav_index(self) -> dict[int, UavSpec]:
        return {u.id: u for u in self.uavs}

    def digest(self) -> str:
        blob = json.dumps(scenario_to_config(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RegionState:
    region_id: int
    event_class: str
    content_size: float


@dataclass
class SystemState:
    t: int
    tower_data: dict[int, float]
    uav_energy: dict[int, float]
    uav_position: dict[int, Point]
    uav_contents: dict[int, list]
    uav_active: dict[int, bool]
    regions: list[RegionState]
    generated_total: float = 0.0

    def copy(self) -> "SystemState":
        return copy.deepcopy(self)

    def held_data(self, uav_id: int) -> float:
        return float(sum(c.size for c in self.uav_contents[uav_id]))


@dataclass(frozen=True)
class Assignment:
    """Set of (tower_id, uav_id) pairs scheduled for one step."""

    pairs: frozenset[tuple[int, int]] = frozenset()

    def __init__(self, pairs: Iterable[tuple[int, int]] = ()):
        object.__setattr__(self, "pairs", frozenset((int(i), int(j)) for i, j in pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def tower_of(self, uav_id: int) -> int | None:
        for i, j in self.pairs:
            if j == uav_id:
                return i
        return None

    def uavs_at(self, tower_id: int) -> list[int]:
        return sorted(j for i, j in self.pairs if i == tower_id)

    def sort_key(self) -> tuple:
        """Tie-break order: fewest pairs first, then lexicographically smallest pair list."""
        return (len(self.pairs), tuple(sorted(self.pairs)))

    def to_list(self) -> list[list[int]]:
        return [list(p) for p in sorted(self.pairs)]


def assignment_violations(assignment: Assignment, state: SystemState, scenario: Scenario) -> list[str]:
    """Panel, uniqueness and activity checks (reachability is checked by the dynamics)."""
    problems = []
    towers = set(scenario.tower_ids)
    seen: dict[int, int] = {}
    for i, j in assignment.pairs:
        if i not in towers:
            problems.append(f"unknown tower {i}")
        if j not in state.uav_active:
            problems.append(f"unknown uav {j}")
            continue
        if not state.uav_active[j]:
            problems.append(f"uav {j} is inactive")
        seen[j] = seen.get(j, 0) + 1
    for j, n in seen.items():
        if n > 1:
            problems.append(f"uav {j} assigned to {n} towers")
    for tower in scenario.towers:
        n = len(assignment.uavs_at(tower.id))
        if n > tower.panels:
            problems.append(f"tower {tower.id} has {n} uavs for {tower.panels} panels")
    return problems


# -- scenario construction -------------------------------------------------

def default_tower_positions(area_side: float) -> list[Point]:
    """Quincunx layout: centre plus the four quarter points."""
    q, c, h = area_side / 4.0, area_side / 2.0, 3.0 * area_side / 4.0
    return [(c, c), (q, q), (q, h), (h, q), (h, h)]


_TOP_KEYS = {
    "area_side", "grid_dim", "step_len", "horizon", "epsilon", "rng_seed", "reward_mode",
    "event_resample_prob", "content_size_map", "sigma_floor", "d_capacity", "towers", "uavs",
    "waypoints_csv", "mdp",
}
_TOWER_KEYS = {"id", "position", "panels", "offer_power", "eta_tower"}
_UAV_KEYS = {"id", "waypoints", "speed", "battery_capacity", "eta_uav", "airframe", "altitude", "fov"}


def _check_keys(obj: Mapping, allowed: set[str], path: str) -> None:
    if not isinstance(obj, Mapping):
        raise ScenarioError(path or "<root>", "expected a mapping")
    for key in obj:
        if key not in allowed:
            name = f"{path}.{key}" if path else key
            raise ScenarioError(name, "unknown key")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _point(value, path: str) -> Point:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(path, f"expected [x, y], got {value!r}")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _airframe(value, path: str) -> Airframe:
    if isinstance(value, Airframe):
        return value
    if isinstance(value, str):
        if value not in AIRFRAME_PRESETS:
            raise ScenarioError(path, f"unknown airframe preset {value!r}")
        return AIRFRAME_PRESETS[value]
    if isinstance(value, Mapping):
        base = PHANTOM4PRO.to_dict()
        _check_keys(value, set(base), path)
        base.update({k: _number(v, f"{path}.{k}") for k, v in value.items()})
        try:
            return Airframe(**base)
        except ValueError as exc:
            raise ScenarioError(path, str(exc)) from None
    raise ScenarioError(path, f"expected a preset name or mapping, got {value!r}")


def _parse_tower(raw: Mapping, k: int) -> TowerSpec:
    path = f"towers[{k}]"
    _check_keys(raw, _TOWER_KEYS, path)
    if "position" not in raw:
        raise ScenarioError(f"{path}.position", "required")
    panels = raw.get("panels", 1)
    if isinstance(panels, bool) or not isinstance(panels, int):
        raise ScenarioError(f"{path}.panels", f"expected an integer, got {panels!r}")
    return TowerSpec(
        id=int(raw.get("id", k + 1)),
        position=_point(raw["position"], f"{path}.position"),
        panels=panels,
        offer_power=_number(raw.get("offer_power", DEFAULT_OFFER_POWER), f"{path}.offer_power"),
        eta_tower=_number(raw.get("eta_tower", DEFAULT_ETA), f"{path}.eta_tower"),
    )


def _parse_uav(raw: Mapping, k: int) -> UavSpec:
    path = f"uavs[{k}]"
    _check_keys(raw, _UAV_KEYS, path)
    if "waypoints" not in raw:
        raise ScenarioError(f"{path}.waypoints", "required")
    wps = []
    for n, wp in enumerate(raw["waypoints"]):
        wpath = f"{path}.waypoints[{n}]"
        if not isinstance(wp, (list, tuple)) or len(wp) != 3:
            raise ScenarioError(wpath, f"expected [time_s, x, y], got {wp!r}")
        wps.append((_number(wp[0], wpath + "[0]"), _point(wp[1:], wpath)))
    return UavSpec(
        id=int(raw.get("id", k + 1)),
        waypoints=tuple(wps),
        speed=_number(raw.get("speed", DEFAULT_SPEED), f"{path}.speed"),
        battery_capacity=_number(raw.get("battery_capacity", PHANTOM4PRO_BATTERY_J), f"{path}.battery_capacity"),
        eta_uav=_number(raw.get("eta_uav", DEFAULT_ETA), f"{path}.eta_uav"),
        airframe=_airframe(raw.get("airframe", "phantom4pro"), f"{path}.airframe"),
        altitude=_number(raw.get("altitude", DEFAULT_ALTITUDE), f"{path}.altitude"),
        fov=_number(raw.get("fov", DEFAULT_FOV), f"{path}.fov"),
    )


def build_scenario(config: Mapping[str, Any] | None = None) -> Scenario:
    """Build a validated Scenario; omitted fields take the 10-UAV / 5-tower defaults."""
    config = dict(config or {})
    _check_keys(config, _TOP_KEYS, "")
    area = _number(config.get("area_side", DEFAULT_AREA_SIDE), "area_side")

    if "towers" in config:
        if not isinstance(config["towers"], list):
            raise ScenarioError("towers", "expected a list")
        towers = [_parse_tower(raw, k) for k, raw in enumerate(config["towers"])]
    else:
        towers = [TowerSpec(id=k + 1, position=p) for k, p in enumerate(default_tower_positions(area))]

    if "uavs" in config:
        if "waypoints_csv" in config:
            raise ScenarioError("waypoints_csv", "cannot be combined with explicit uavs")
        if not isinstance(config["uavs"], list):
            raise ScenarioError("uavs", "expected a list")
        uavs = [_parse_uav(raw, k) for k, raw in enumerate(config["uavs"])]
    else:
        table = load_waypoints_csv(config.get("waypoints_csv"))
        uavs = [UavSpec(id=uid, waypoints=tuple(wps)) for uid, wps in table.items()]

    sizes = config.get("content_size_map", DEFAULT_CONTENT_SIZES)
    _check_keys(sizes, set(EVENT_CLASSES), "content_size_map")
    sizes = {c: _number(sizes.get(c, DEFAULT_CONTENT_SIZES[c]), f"content_size_map.{c}") for c in EVENT_CLASSES}

    grid_dim = config.get("grid_dim", DEFAULT_GRID_DIM)
    horizon = config.get("horizon", DEFAULT_HORIZON)
    seed = config.get("rng_seed", 0)
    for name, value in (("grid_dim", grid_dim), ("horizon", horizon), ("rng_seed", seed)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(name, f"expected an integer, got {value!r}")
    d_cap = config.get("d_capacity")
    mdp = config.get("mdp")
    if mdp is not None and not isinstance(mdp, Mapping):
        raise ScenarioError("mdp", "expected a mapping")

    return Scenario(
        towers=tuple(towers),
        uavs=tuple(uavs),
        area_side=area,
        grid_dim=grid_dim,
        step_len=_number(config.get("step_len", DEFAULT_STEP_LEN), "step_len"),
        horizon=horizon,
        epsilon=_number(config.get("epsilon", DEFAULT_EPSILON), "epsilon"),
        rng_seed=seed,
        reward_mode=config.get("reward_mode", "normalized"),
        event_resample_prob=_number(config.get("event_resample_prob", DEFAULT_RESAMPLE_PROB), "event_resample_prob"),
        content_size_map=sizes,
        sigma_floor=_number(config.get("sigma_floor", DEFAULT_SIGMA_FLOOR), "sigma_floor"),
        d_capacity=None if d_cap is None else _number(d_cap, "d_capacity"),
        mdp=dict(mdp) if mdp is not None else None,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path), f"invalid JSON: {exc}") from None
    return build_scenario(config)


def scenario_to_config(scenario: Scenario) -> dict[str, Any]:
    """Inverse of build_scenario: a plain JSON-ready dict."""

    def airframe(af: Airframe):
        for name, preset in AIRFRAME_PRESETS.items():
            if af == preset:
                return name
        return af.to_dict()

    cfg: dict[str, Any] = {
        "area_side": scenario.area_side,
        "grid_dim": scenario.grid_dim,
        "step_len": scenario.step_len,
        "horizon": scenario.horizon,
        "epsilon": scenario.epsilon,
        "rng_seed": scenario.rng_seed,
        "reward_mode": scenario.reward_mode,
        "event_resample_prob": scenario.event_resample_prob,
        "content_size_map": dict(scenario.content_size_map),
        "sigma_floor": scenario.sigma_floor,
        "d_capacity": scenario.d_capacity,
        "towers": [
            {"id": t.id, "position": list(t.position), "panels": t.panels,
             "offer_power": t.offer_power, "eta_tower": t.eta_tower}
            for t in scenario.towers
        ],
        "uavs": [
            {"id": u.id, "waypoints": [[t, p[0], p[1]] for t, p in u.waypoints], "speed": u.speed,
             "battery_capacity": u.battery_capacity, "eta_uav": u.eta_uav,
             "airframe": airframe(u.airframe), "altitude": u.altitude, "fov": u.fov}
            for u in scenario.uavs
        ],
    }
    if scenario.mdp is not None:
        cfg["mdp"] = dict(scenario.mdp)
    return cfg


def _validate_scenario(sc: Scenario) -> None:
    if not sc.area_side > 0:
        raise ScenarioError("area_side", "must be > 0")
    if sc.grid_dim < 1:
        raise ScenarioError("grid_dim", "must be >= 1")
    if sc.horizon < 1:
        raise ScenarioError("horizon", "must be >= 1")
    if not sc.step_len > 0:
        raise ScenarioError("step_len", "must be > 0")
    if not 0 <= sc.epsilon <= 1:
        raise ScenarioError("epsilon", f"must lie in [0, 1], got {sc.epsilon}")
    if not 0 <= sc.event_resample_prob <= 1:
        raise ScenarioError("event_resample_prob", f"must lie in [0, 1], got {sc.event_resample_prob}")
    if sc.reward_mode not in REWARD_MODES:
        raise ScenarioError("reward_mode", f"must be one of {REWARD_MODES}, got {sc.reward_mode!r}")
    if not sc.sigma_floor > 0:
        raise ScenarioError("sigma_floor", "must be > 0")
    if sc.d_capacity is not None and not sc.d_capacity > 0:
        raise ScenarioError("d_capacity", "must be > 0")
    if not 0 <= sc.rng_seed < 2**64:
        raise ScenarioError("rng_seed", "must be a 64-bit unsigned integer")
    for cls in EVENT_CLASSES:
        if not sc.content_size_map.get(cls, 0) > 0:
            raise ScenarioError(f"content_size_map.{cls}", "must be > 0")
    if not sc.towers:
        raise ScenarioError("towers", "at least one tower is required")
    if not sc.uavs:
        raise ScenarioError("uavs", "at least one UAV is required")

    def inside(p: Point) -> bool:
        return 0 <= p[0] <= sc.area_side and 0 <= p[1] <= sc.area_side

    seen: set[int] = set()
    for k, t in enumerate(sc.towers):
        path = f"towers[{k}]"
        if t.id in seen:
            raise ScenarioError(f"{path}.id", f"duplicate tower id {t.id}")
        seen.add(t.id)
        if not inside(t.position):
            raise ScenarioError(f"{path}.position", f"{t.position} outside the area")
        if t.panels < 1:
            raise ScenarioError(f"{path}.panels", "must be >= 1")
        if not t.offer_power > 0:
            raise ScenarioError(f"{path}.offer_power", "must be > 0")
        if not 0 < t.eta_tower <= 1:
            raise ScenarioError(f"{path}.eta_tower", "must lie in (0, 1]")
    seen = set()
    for k, u in enumerate(sc.uavs):
        path = f"uavs[{k}]"
        if u.id in seen:
            raise ScenarioError(f"{path}.id", f"duplicate uav id {u.id}")
        seen.add(u.id)
        if not u.speed > 0:
            raise ScenarioError(f"{path}.speed", "must be > 0")
        if not u.battery_capacity > 0:
            raise ScenarioError(f"{path}.battery_capacity", "must be > 0")
        if not 0 < u.eta_uav <= 1:
            raise ScenarioError(f"{path}.eta_uav", "must lie in (0, 1]")
        if not 0 < u.fov < 180:
            raise ScenarioError(f"{path}.fov", "must lie in (0, 180)")
        if u.altitude < 0:
            raise ScenarioError(f"{path}.altitude", "must be >= 0")
        if not u.waypoints:
            raise ScenarioError(f"{path}.waypoints", "at least one waypoint is required")
        for n, (t, p) in enumerate(u.waypoints):
            if t < 0:
                raise ScenarioError(f"{path}.waypoints[{n}]", "time must be >= 0")
            if not inside(p):
                raise ScenarioError(f"{path}.waypoints[{n}]", f"{p} outside the area")
            if n and t <= u.waypoints[n - 1][0]:
                raise ScenarioError(f"{path}.waypoints[{n}]", "times must be strictly increasing")
        try:
            u.trajectory
        except ValueError as exc:
            raise ScenarioError(f"{path}.waypoints", str(exc)) from None


# -- geometry and state -----------------------------------------------------

def region_of(position: Point, scenario: Scenario) -> int:
    x, y = position
    side = scenario.area_side
    if not (0 <= x <= side and 0 <= y <= side):
        raise ValueError(f"position {position} outside [0, {side}]^2")
    n = scenario.grid_dim
    col = min(int(math.floor(x / scenario.cell)), n - 1)
    row = min(int(math.floor(y / scenario.cell)), n - 1)
    return col + n * row


def initial_state(scenario: Scenario, rng: np.random.Generator) -> SystemState:
    """Full batteries, empty towers, UAVs at their first waypoints, random region events."""
    classes = rng.integers(0, len(EVENT_CLASSES), size=scenario.n_regions)
    regions = [
        RegionState(r, EVENT_CLASSES[c], scenario.content_size_map[EVENT_CLASSES[c]])
        for r, c in enumerate(classes)
    ]
    return SystemState(
        t=0,
        tower_data={t.id: 0.0 for t in scenario.towers},
        uav_energy={u.id: float(u.battery_capacity) for u in scenario.uavs},
        uav_position={u.id: u.position_at_clock(0.0) for u in scenario.uavs},
        uav_contents={u.id: [] for u in scenario.uavs},
        uav_active={u.id: True for u in scenario.uavs},
        regions=regions,
    )


def validate_state(state: SystemState, scenario: Scenario,
                   previous: SystemState | None = None) -> list[str]:
    """Return every invariant violation found (an empty list means the state is valid)."""
    problems = []
    for u in scenario.uavs:
        e = state.uav_energy.get(u.id)
        if e is None:
            problems.append(f"uav {u.id}: missing energy")
            continue
        if e < 0:
            problems.append(f"uav {u.id}: energy below zero ({e})")
        if e > u.battery_capacity * (1 + 1e-12):
            problems.append(f"uav {u.id}: energy above capacity ({e} > {u.battery_capacity})")
        active = state.uav_active.get(u.id)
        if active is None or bool(active) != (e > 0):
            problems.append(f"uav {u.id}: inactive flag inconsistent with energy {e}")
        pos = state.uav_position.get(u.id)
        if pos is None or not (0 <= pos[0] <= scenario.area_side and 0 <= pos[1] <= scenario.area_side):
            problems.append(f"uav {u.id}: position {pos} outside the area")
    for t in scenario.towers:
        d = state.tower_data.get(t.id)
        if d is None:
            problems.append(f"tower {t.id}: missing data")
            continue
        if d < 0:
            problems.append(f"tower {t.id}: negative data ({d})")
        if previous is not None and d < previous.tower_data.get(t.id, 0.0):
            problems.append(f"tower {t.id}: data decreased ({previous.tower_data[t.id]} -> {d})")
    if len(state.regions) != scenario.n_regions:
        problems.append(f"expected {scenario.n_regions} regions, found {len(state.regions)}")
    for r in state.regions:
        if scenario.content_size_map.get(r.event_class) != r.content_size:
            problems.append(f"region {r.region_id}: content size {r.content_size} does not match class {r.event_class}")
    return problems
