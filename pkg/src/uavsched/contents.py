"""Region events, content generation and delivery to towers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import EVENT_CLASSES, RegionState, SystemState


@dataclass(frozen=True)
class Content:
    source_region: int
    size: float
    created_at: int


def sample_region_events(regions: Sequence[RegionState], resample_prob: float,
                         rng: np.random.Generator,
                         size_map: Mapping[str, float]) -> list[RegionState]:
    """Each region redraws its event class uniformly with probability ``resample_prob``.

    Always consumes two draws per region so the stream position does not depend
    on the outcome.
    """
    n = len(regions)
    redraw = rng.random(n) < resample_prob
    classes = rng.integers(0, len(EVENT_CLASSES), size=n)
    out = []
    for r, flip, c in zip(regions, redraw, classes):
        if flip:
            cls = EVENT_CLASSES[c]
            out.append(RegionState(r.region_id, cls, size_map[cls]))
        else:
            out.append(RegionState(r.region_id, r.event_class, r.content_size))
    return out


def generate_content(state: SystemState, uav_id: int, region_id: int, t: int, *,
                     dwelling: bool, scheduled: bool) -> Content | None:
    """Append one content for a UAV that hovered (and was not scheduled) this step."""
    if not state.uav_active[uav_id] or scheduled or not dwelling:
        return None
    content = Content(region_id, state.regions[region_id].content_size, t)
    state.uav_contents[uav_id].append(content)
    state.generated_total += content.size
    return content


def transfer_contents(state: SystemState, uav_id: int, tower_id: int) -> float:
    """Move every stored content of ``uav_id`` to ``tower_id``; returns the amount moved."""
    moved = float(sum(c.size for c in state.uav_contents[uav_id]))
    state.tower_data[tower_id] += moved
    state.uav_contents[uav_id] = []
    return moved
