import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uavsched.domain import build_scenario, initial_state  # noqa: E402


def tiny_config(**overrides):
    cfg = {
        "area_side": 500.0,
        "grid_dim": 2,
        "horizon": 6,
        "towers": [{"id": 1, "position": [100, 100]}, {"id": 2, "position": [400, 400]}],
        "uavs": [
            {"id": 1, "waypoints": [[0, 100, 150], [120, 100, 300], [240, 300, 300]]},
            {"id": 2, "waypoints": [[0, 350, 400], [180, 350, 100]]},
        ],
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def tiny():
    return build_scenario(tiny_config())


@pytest.fixture
def tiny_state(tiny):
    return initial_state(tiny, np.random.default_rng(0))


@pytest.fixture(scope="session")
def default_scenario():
    return build_scenario({})


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
