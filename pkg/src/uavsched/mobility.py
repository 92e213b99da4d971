"""Waypoint trajectories, planar geometry and camera coverage."""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

Point = tuple[float, float]
Waypoint = tuple[float, Point]


def surveillance_radius(altitude: float, fov: float) -> float:
    """Ground radius covered by a downward camera with field of view ``fov`` degrees."""
    if not 0 < fov < 180:
        raise ValueError(f"fov must lie in (0, 180) degrees, got {fov}")
    if altitude < 0:
        raise ValueError(f"altitude must be non-negative, got {altitude}")
    return altitude * math.tan(math.radians(fov) / 2.0)


def surveillance_area(altitude: float, fov: float) -> float:
    return math.pi * surveillance_radius(altitude, fov) ** 2


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def travel_time(dist: float, speed: float) -> float:
    if speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    return dist / speed


@dataclass(frozen=True)
class Segment:
    depart: float
    start: Point
    end: Point
    arrive: float
    next_depart: float

    @property
    def length(self) -> float:
        return distance(self.start, self.end)


@dataclass(frozen=True)
class Trajectory:
    """Timetabled waypoints flown at constant speed.

    The UAV leaves waypoint k at its listed time, flies straight to waypoint
    k+1 at ``speed`` and hovers there until that waypoint's time.
    """

    waypoints: tuple[Waypoint, ...]
    speed: float
    segments: tuple[Segment, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.speed <= 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        wps = tuple((float(t), (float(p[0]), float(p[1]))) for t, p in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        segs = []
        for k, ((t0, p0), (t1, p1)) in enumerate(zip(wps, wps[1:])):
            if t1 <= t0:
                raise ValueError(f"waypoint times must be strictly increasing (index {k + 1})")
            arrive = t0 + distance(p0, p1) / self.speed
            if arrive > t1 + 1e-9:
                raise ValueError(
                    f"waypoint {k + 1} unreachable: needs {arrive - t0:.2f} s, timetable gives {t1 - t0:.2f} s"
                )
            segs.append(Segment(t0, p0, p1, min(arrive, t1), t1))
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def start_time(self) -> float:
        return self.waypoints[0][0]

    @property
    def end_time(self) -> float:
        return self.waypoints[-1][0]

    def with_start(self, t0: float) -> "Trajectory":
        """Hover at the first waypoint from ``t0`` until its listed time."""
        if t0 >= self.start_time:
            return self
        return Trajectory(((t0, self.waypoints[0][1]),) + self.waypoints, self.speed)

    def _segment_index(self, time: float) -> int:
        times = [t for t, _ in self.waypoints]
        return min(bisect.bisect_right(times, time) - 1, len(self.segments) - 1)

    def position_at(self, time: float) -> Point:
        if not self.start_time <= time <= self.end_time:
            raise ValueError(
                f"time {time} outside trajectory span [{self.start_time}, {self.end_time}]"
            )
        if not self.segments:
            return self.waypoints[0][1]
        seg = self.segments[self._segment_index(time)]
        if time >= seg.arrive:
            return seg.end
        frac = (time - seg.depart) / (seg.arrive - seg.depart)
        return (
            seg.start[0] + frac * (seg.end[0] - seg.start[0]),
            seg.start[1] + frac * (seg.end[1] - seg.start[1]),
        )

    def flight_time_between(self, t0: float, t1: float) -> float:
        """Seconds spent cruising (not hovering) inside [t0, t1]."""
        total = 0.0
        for seg in self.segments:
            lo, hi = max(t0, seg.depart), min(t1, seg.arrive)
            if hi > lo:
                total += hi - lo
        return total


def position_at(trajectory: Trajectory, time: float) -> Point:
    return trajectory.position_at(time)


def load_waypoints_csv(path: str | Path | None = None) -> dict[int, list[Waypoint]]:
    """Read a ``time_min,uav_id,x,y`` table into per-UAV waypoint lists (times in seconds).

    With no path, the bundled 10-UAV timetable is returned.
    """
    if path is None:
        text = resources.files("uavsched.data").joinpath("fleet_waypoints.csv").read_text()
    else:
        text = Path(path).read_text()
    out: dict[int, list[Waypoint]] = {}
    reader = csv.DictReader(text.splitlines())
    expected = {"time_min", "uav_id", "x", "y"}
    if set(reader.fieldnames or ()) != expected:
        raise ValueError(f"waypoint CSV header must be {sorted(expected)}, got {reader.fieldnames}")
    for row in reader:
        uid = int(row["uav_id"])
        out.setdefault(uid, []).append((float(row["time_min"]) * 60.0, (float(row["x"]), float(row["y"]))))
    for wps in out.values():
        wps.sort(key=lambda w: w[0])
    return dict(sorted(out.items()))
