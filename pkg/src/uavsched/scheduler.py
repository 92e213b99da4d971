"""Per-step scheduling: feasible assignments, the four policies and their searches."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .domain import Assignment, Scenario, SystemState
from .dynamics import StepModel, build_step_model, check_assignment, exchange
from .reward import combined_reward

POLICY_KINDS = ("proposed", "comp1", "comp2", "comp3")
SEARCH_KINDS = ("exhaustive", "local")
DEFAULT_BOUND = 10**6
# Above this many rows the all-pairs template is not materialised.
TEMPLATE_LIMIT = 2 * 10**6
TIE_TOL = 1e-12


class SearchBoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class Policy:
    kind: str = "proposed"
    epsilon: float = 0.5
    search: str = "exhaustive"
    search_budget: int = 1000
    bound: int = DEFAULT_BOUND

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.search not in SEARCH_KINDS:
            raise ValueError(f"unknown search {self.search!r}; expected one of {SEARCH_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.search_budget < 0:
            raise ValueError("search_budget must be >= 0")

    @property
    def weight(self) -> float:
        """Tower-term weight actually used by the objective."""
        return {"comp1": 0.0, "comp2": 1.0}.get(self.kind, self.epsilon)

    @property
    def label(self) -> str:
        return f"proposed({self.epsilon:g})" if self.kind == "proposed" else self.kind

    @classmethod
    def parse(cls, text: str, **kw) -> "Policy":
        """``proposed``, ``proposed(0.3)``, ``comp1`` ... -> Policy."""
        text = text.strip()
        if text.startswith("proposed(") and text.endswith(")"):
            return cls("proposed", float(text[len("proposed("):-1]), **kw)
        return cls(text, **kw)


# -- enumeration ------------------------------------------------------------

@lru_cache(maxsize=32)
def assignment_template(n_towers: int, n_uavs: int, panels: tuple[int, ...]) -> np.ndarray:
    """Every panel-respecting assignment with all pairs allowed, as per-UAV tower indices."""
    rows = np.zeros((1, 0), dtype=np.int8)
    used = np.zeros((1, n_towers), dtype=np.int16)
    for _ in range(n_uavs):
        new_rows = [np.hstack([rows, np.full((len(rows), 1), -1, dtype=np.int8)])]
        new_used = [used]
        for i in range(n_towers):
            ok = used[:, i] < panels[i]
            if not ok.any():
                continue
            r = np.hstack([rows[ok], np.full((ok.sum(), 1), i, dtype=np.int8)])
            u = used[ok].copy()
            u[:, i] += 1
            new_rows.append(r)
            new_used.append(u)
        rows, used = np.vstack(new_rows), np.vstack(new_used)
    rows.setflags(write=False)
    return rows


def count_template(n_towers: int, n_uavs: int, panels: tuple[int, ...]) -> int:
    return count_feasible_rows(np.ones((n_uavs, n_towers), dtype=bool), np.asarray(panels))


def count_feasible_rows(reach: np.ndarray, panels: np.ndarray) -> int:
    """Number of feasible assignments, by dynamic programming over UAVs."""
    counts: dict[tuple[int, ...], int] = {tuple([0] * len(panels)): 1}
    for j in range(reach.shape[0]):
        nxt: dict[tuple[int, ...], int] = {}
        for used, c in counts.items():
            nxt[used] = nxt.get(used, 0) + c
            for i in np.flatnonzero(reach[j]):
                if used[i] < panels[i]:
                    key = used[:i] + (used[i] + 1,) + used[i + 1:]
                    nxt[key] = nxt.get(key, 0) + c
        counts = nxt
    return sum(counts.values())


def iter_feasible_rows(model: StepModel) -> Iterator[tuple[int, ...]]:
    m = model.n_uavs
    left = [int(p) for p in model.panels]
    row = [-1] * m

    def rec(j):
        if j == m:
            yield tuple(row)
            return
        row[j] = -1
        yield from rec(j + 1)
        for i in np.flatnonzero(model.reach[j]):
            if left[i] > 0:
                left[i] -= 1
                row[j] = int(i)
                yield from rec(j + 1)
                left[i] += 1
        row[j] = -1

    yield from rec(0)


def feasible_choice_matrix(model: StepModel) -> np.ndarray:
    panels = tuple(int(p) for p in model.panels)
    if count_template(model.n_towers, model.n_uavs, panels) <= TEMPLATE_LIMIT:
        template = assignment_template(model.n_towers, model.n_uavs, panels)
        return template[model.feasible_mask(template)]
    return np.array(list(iter_feasible_rows(model)), dtype=np.int64).reshape(-1, model.n_uavs)


def feasible_assignments(state: SystemState, scenario: Scenario) -> Iterator[Assignment]:
    """Lazily yield every feasible assignment (the empty one first)."""
    model = build_step_model(state, scenario)
    for row in iter_feasible_rows(model):
        yield model.to_assignment(row)


# -- objective --------------------------------------------------------------

def one_step_objective(state: SystemState, scenario: Scenario, assignment: Assignment,
                       policy: Policy) -> float:
    """Combined reward of the post-step state, simulated on a scratch copy."""
    scratch = state.copy()
    exchange(scratch, assignment, scenario)
    return post_step_reward(scratch, scenario, policy.weight).combined


def post_step_reward(state: SystemState, scenario: Scenario, epsilon: float):
    return combined_reward(
        epsilon,
        [state.tower_data[t] for t in scenario.tower_ids],
        [state.uav_energy[u] for u in scenario.uav_ids],
        [u.battery_capacity for u in scenario.uavs],
        mode=scenario.reward_mode,
        d_capacity=scenario.data_capacity,
        sigma_floor=scenario.sigma_floor,
    )


def _scores(model: StepModel, rows: np.ndarray, scenario: Scenario, policy: Policy) -> np.ndarray:
    return model.scores(rows, policy.weight, scenario.reward_mode, scenario.data_capacity, scenario.sigma_floor)


def pick_best(model: StepModel, rows: np.ndarray, scores: np.ndarray) -> tuple[Assignment, float]:
    """Argmax with the deterministic tie-break (fewest pairs, then smallest pair list)."""
    best = scores.max()
    tied = np.flatnonzero(scores >= best - TIE_TOL * max(1.0, abs(best)))
    n_pairs = (rows[tied] >= 0).sum(axis=1)
    tied = tied[n_pairs == n_pairs.min()]
    candidates = [model.to_assignment(rows[k]) for k in tied]
    k = min(range(len(tied)), key=lambda n: candidates[n].sort_key())
    return candidates[k], float(scores[tied[k]])


def best_in_model(model: StepModel, epsilon: float, mode: str, d_capacity: float | None,
                  sigma_floor: float, bound: int = DEFAULT_BOUND) -> tuple[Assignment, float]:
    n = count_feasible_rows(model.reach, model.panels)
    if n > bound:
        raise SearchBoundError(f"{n} feasible assignments exceed the exhaustive bound {bound}; use local search")
    rows = feasible_choice_matrix(model)
    return pick_best(model, rows, model.scores(rows, epsilon, mode, d_capacity, sigma_floor))


def best_assignment_exhaustive(state: SystemState, scenario: Scenario, policy: Policy,
                               model: StepModel | None = None) -> Assignment:
    model = model or build_step_model(state, scenario)
    assignment, _ = best_in_model(model, policy.weight, scenario.reward_mode, scenario.data_capacity,
                                  scenario.sigma_floor, policy.bound)
    return assignment


def local_search_assignment(state: SystemState, scenario: Scenario, policy: Policy,
                            rng: np.random.Generator, model: StepModel | None = None) -> Assignment:
    """Best-improvement hill climbing over add / remove / swap moves from the empty assignment.

    Equal-valued best moves are broken with ``rng``.
    """
    model = model or build_step_model(state, scenario)
    current = np.full(model.n_uavs, -1, dtype=np.int64)
    current_score = _scores(model, current[None, :], scenario, policy)[0]
    for _ in range(policy.search_budget):
        moves = _neighbours(model, current)
        if len(moves) == 0:
            break
        scores = _scores(model, moves, scenario, policy)
        best = scores.max()
        if best <= current_score + TIE_TOL * max(1.0, abs(current_score)):
            break
        top = np.flatnonzero(scores >= best - TIE_TOL * max(1.0, abs(best)))
        pick = top[rng.integers(len(top))] if len(top) > 1 else top[0]
        current, current_score = moves[pick], scores[pick]
    return model.to_assignment(current)


def _neighbours(model: StepModel, row: np.ndarray) -> np.ndarray:
    load = np.bincount(row[row >= 0], minlength=model.n_towers)
    out = []
    for j in range(model.n_uavs):
        here = row[j]
        if here >= 0:
            r = row.copy()
            r[j] = -1
            out.append(r)  # remove
        for i in np.flatnonzero(model.reach[j]):
            if i == here:
                continue
            if load[i] < model.panels[i]:
                r = row.copy()
                r[j] = i
                out.append(r)  # add, or move to another tower
            elif here < 0:
                # swap: j takes the place of a UAV already at tower i
                for k in np.flatnonzero(row == i):
                    r = row.copy()
                    r[k] = -1
                    r[j] = i
                    out.append(r)
    if not out:
        return np.empty((0, model.n_uavs), dtype=np.int64)
    return np.array(out)


def random_assignment(state: SystemState, scenario: Scenario, rng: np.random.Generator,
                      model: StepModel | None = None) -> Assignment:
    """Comp3: each reachable UAV, in random order, picks uniformly among idle and open towers."""
    model = model or build_step_model(state, scenario)
    left = model.panels.copy()
    row = np.full(model.n_uavs, -1, dtype=np.int64)
    for j in rng.permutation(model.n_uavs):
        if not model.reach[j].any():
            continue
        options = [-1] + [int(i) for i in np.flatnonzero(model.reach[j]) if left[i] > 0]
        choice = options[rng.integers(len(options))]
        if choice >= 0:
            left[choice] -= 1
            row[j] = choice
    return model.to_assignment(row)


def decide(policy: Policy, state: SystemState, scenario: Scenario,
           rng: np.random.Generator) -> Assignment:
    model = build_step_model(state, scenario)
    if policy.kind == "comp3":
        assignment = random_assignment(state, scenario, rng, model)
    elif policy.search == "local":
        assignment = local_search_assignment(state, scenario, policy, rng, model)
    else:
        try:
            assignment = best_assignment_exhaustive(state, scenario, policy, model)
        except SearchBoundError:
            assignment = local_search_assignment(state, scenario, policy, rng, model)
    check_assignment(assignment, state, scenario)
    return assignment
