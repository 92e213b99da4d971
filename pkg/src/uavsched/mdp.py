"""Exact finite-horizon MDP on small quantised instances.

Tower data, UAV energy and UAV content are integer levels with saturating
arithmetic.  The only randomness is how much content each surveilling UAV
picks up in a step.  Backward induction gives the optimal values and policy;
``evaluate_policy`` scores any policy, in particular the one-step greedy rule
used by the full-scale scheduler.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Sequence

import numpy as np

from .dynamics import StepModel
from .reward import combined_reward, combined_scores
from .scheduler import TIE_TOL, assignment_template, best_in_model

MAX_TOWERS = 3
MAX_UAVS = 3
MAX_LEVELS = 5
MAX_HORIZON = 8
MAX_STATES = 10**5

Action = tuple[int, ...]  # per-UAV tower index, -1 for idle
State = tuple[int, ...]   # tower levels, then (energy, content) per UAV


class InstanceError(ValueError):
    pass


class PolicyError(KeyError):
    pass


@dataclass(frozen=True)
class SmallMdpInstance:
    n_towers: int
    n_uavs: int
    energy_levels: int
    data_levels: int
    content_outcomes: tuple[tuple[int, float], ...]
    horizon: int
    gamma: float = 0.95
    reach: tuple[tuple[bool, ...], ...] | None = None
    charge: tuple[tuple[int, ...], ...] | None = None
    sched_cost: tuple[tuple[int, ...], ...] | None = None
    idle_cost: tuple[int, ...] | None = None
    panels: tuple[int, ...] | None = None
    epsilon: float = 0.5
    initial: State | None = None

    def __post_init__(self):
        n, m = self.n_towers, self.n_uavs
        fill = {
            "reach": tuple(tuple(True for _ in range(n)) for _ in range(m)),
            "charge": tuple(tuple(2 for _ in range(n)) for _ in range(m)),
            "sched_cost": tuple(tuple(1 for _ in range(n)) for _ in range(m)),
            "idle_cost": tuple(1 for _ in range(m)),
            "panels": tuple(1 for _ in range(n)),
        }
        for name, default in fill.items():
            value = getattr(self, name)
            value = default if value is None else _freeze(value)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "content_outcomes",
                           tuple((int(s), float(p)) for s, p in self.content_outcomes))
        if self.initial is None:
            init = (0,) * n + (self.energy_levels - 1, 0) * m
        else:
            init = tuple(int(x) for x in self.initial)
        object.__setattr__(self, "initial", init)
        self._validate()

    def _validate(self) -> None:
        n, m = self.n_towers, self.n_uavs
        if not 1 <= n <= MAX_TOWERS:
            raise InstanceError(f"n_towers must lie in [1, {MAX_TOWERS}]")
        if not 1 <= m <= MAX_UAVS:
            raise InstanceError(f"n_uavs must lie in [1, {MAX_UAVS}]")
        for name in ("energy_levels", "data_levels"):
            if not 2 <= getattr(self, name) <= MAX_LEVELS:
                raise InstanceError(f"{name} must lie in [2, {MAX_LEVELS}]")
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise InstanceError(f"horizon must lie in [1, {MAX_HORIZON}]")
        if not 0.0 <= self.gamma <= 1.0:
            raise InstanceError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InstanceError("epsilon must lie in [0, 1]")
        if self.n_states > MAX_STATES:
            raise InstanceError(f"{self.n_states} states exceed the bound {MAX_STATES}")
        if not self.content_outcomes:
            raise InstanceError("content_outcomes must not be empty")
        probs = [p for _, p in self.content_outcomes]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise InstanceError(f"content outcome probabilities must be >= 0 and sum to 1, got {probs}")
        if any(s < 0 for s, _ in self.content_outcomes):
            raise InstanceError("content sizes must be >= 0")
        for name in ("reach", "charge", "sched_cost"):
            table = getattr(self, name)
            if len(table) != m or any(len(row) != n for row in table):
                raise InstanceError(f"{name} must be {m} x {n}")
        if len(self.idle_cost) != m or len(self.panels) != n:
            raise InstanceError("idle_cost / panels have the wrong length")
        if any(p < 1 for p in self.panels):
            raise InstanceError("panels must be >= 1")
        if any(x < 0 for row in self.charge + self.sched_cost for x in row) or any(x < 0 for x in self.idle_cost):
            raise InstanceError("charge and costs must be >= 0")
        if len(self.initial) != n + 2 * m or not self.is_state(self.initial):
            raise InstanceError(f"initial state {self.initial} is not a valid state")

    @property
    def n_states(self) -> int:
        return self.data_levels**self.n_towers * (self.energy_levels * self.data_levels) ** self.n_uavs

    @property
    def radices(self) -> tuple[int, ...]:
        return (self.data_levels,) * self.n_towers + (self.energy_levels, self.data_levels) * self.n_uavs

    def is_state(self, s: Sequence[int]) -> bool:
        return len(s) == len(self.radices) and all(0 <= x < r for x, r in zip(s, self.radices))

    def to_config(self) -> dict[str, Any]:
        d = asdict(self)
        d["content_outcomes"] = [list(o) for o in self.content_outcomes]
        return d

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "SmallMdpInstance":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(cfg) - known
        if unknown:
            raise InstanceError(f"unknown mdp keys: {sorted(unknown)}")
        kw = dict(cfg)
        kw["content_outcomes"] = tuple(tuple(o) for o in kw["content_outcomes"])
        return cls(**kw)


def _freeze(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return tuple(_freeze(v) for v in x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    return int(x)


# -- state indexing ---------------------------------------------------------

def index_of(instance: SmallMdpInstance, state: Sequence[int]) -> int:
    idx = 0
    for x, r in zip(state, instance.radices):
        idx = idx * r + int(x)
    return idx


def state_of(instance: SmallMdpInstance, index: int) -> State:
    out = []
    for r in reversed(instance.radices):
        index, x = divmod(index, r)
        out.append(x)
    return tuple(reversed(out))


def enumerate_states(instance: SmallMdpInstance) -> list[State]:
    if instance.n_states > MAX_STATES:
        raise InstanceError(f"{instance.n_states} states exceed the bound {MAX_STATES}")
    return list(itertools.product(*(range(r) for r in instance.radices)))


def _split(instance: SmallMdpInstance, state: Sequence[int]):
    n = instance.n_towers
    d = list(state[:n])
    q = [state[n + 2 * j] for j in range(instance.n_uavs)]
    c = [state[n + 2 * j + 1] for j in range(instance.n_uavs)]
    return d, q, c


def _join(d, q, c) -> State:
    out = list(d)
    for qj, cj in zip(q, c):
        out += [qj, cj]
    return tuple(int(x) for x in out)


# -- actions and dynamics ---------------------------------------------------

def action_templates(instance: SmallMdpInstance) -> list[Action]:
    """Panel- and reach-feasible actions in tie-break order (fewest pairs, then smallest pairs)."""
    rows = assignment_template(instance.n_towers, instance.n_uavs, instance.panels)
    reach = np.array(instance.reach, dtype=bool)
    keep = []
    for row in rows:
        if all(i < 0 or reach[j, i] for j, i in enumerate(row)):
            keep.append(tuple(int(i) for i in row))
    return sorted(keep, key=_action_key)


def _action_key(action: Action) -> tuple:
    pairs = sorted((i + 1, j + 1) for j, i in enumerate(action) if i >= 0)
    return (len(pairs), tuple(pairs))


def is_feasible(instance: SmallMdpInstance, state: Sequence[int], action: Action) -> bool:
    _, q, _ = _split(instance, state)
    if len(action) != instance.n_uavs:
        return False
    load = [0] * instance.n_towers
    for j, i in enumerate(action):
        if i < 0:
            continue
        if not (0 <= i < instance.n_towers) or q[j] == 0 or not instance.reach[j][i]:
            return False
        load[i] += 1
    return all(l <= p for l, p in zip(load, instance.panels))


def feasible_actions(instance: SmallMdpInstance, state: Sequence[int]) -> list[Action]:
    return [a for a in action_templates(instance) if is_feasible(instance, state, a)]


def _exchange(instance: SmallMdpInstance, state: Sequence[int], action: Action):
    """Quantised transfer -> charge -> consume.  Returns (d, q, c) lists."""
    d, q, c = _split(instance, state)
    top_d, top_q = instance.data_levels - 1, instance.energy_levels - 1
    for j, i in enumerate(action):
        if i >= 0:
            d[i] += c[j]
            c[j] = 0
    d = [min(x, top_d) for x in d]
    for j, i in enumerate(action):
        if q[j] == 0:
            continue
        if i >= 0:
            q[j] = max(min(q[j] + instance.charge[j][i], top_q) - instance.sched_cost[j][i], 0)
        else:
            q[j] = max(q[j] - instance.idle_cost[j], 0)
    return d, q, c


def reward(instance: SmallMdpInstance, state: Sequence[int], action: Action) -> float:
    """Normalised combined reward of the post-exchange state."""
    if not is_feasible(instance, state, action):
        raise InstanceError(f"infeasible action {action} in state {tuple(state)}")
    d, q, _ = _exchange(instance, state, action)
    return combined_reward(
        instance.epsilon, d, q, [instance.energy_levels - 1] * instance.n_uavs,
        mode="normalized", d_capacity=instance.n_towers * (instance.data_levels - 1),
    ).combined


def outcomes(instance: SmallMdpInstance) -> Iterator[tuple[tuple[int, ...], float]]:
    """Joint per-UAV content outcomes (as outcome indices) with their probabilities."""
    k = len(instance.content_outcomes)
    for combo in itertools.product(range(k), repeat=instance.n_uavs):
        yield combo, math.prod(instance.content_outcomes[o][1] for o in combo)


def transition(instance: SmallMdpInstance, state: Sequence[int], action: Action,
               outcome: Sequence[int]) -> tuple[State, float]:
    """Successor under one joint content outcome, and that outcome's probability."""
    if not is_feasible(instance, state, action):
        raise InstanceError(f"infeasible action {action} in state {tuple(state)}")
    d, q, c = _exchange(instance, state, action)
    top_d = instance.data_levels - 1
    prob = 1.0
    for j, o in enumerate(outcome):
        size, p = instance.content_outcomes[o]
        prob *= p
        if action[j] < 0 and q[j] > 0:
            c[j] = min(c[j] + size, top_d)
    return _join(d, q, c), prob


def successors(instance: SmallMdpInstance, state: Sequence[int], action: Action) -> dict[State, float]:
    out: dict[State, float] = {}
    for combo, _ in outcomes(instance):
        nxt, p = transition(instance, state, action, combo)
        out[nxt] = out.get(nxt, 0.0) + p
    return out


def step_model(instance: SmallMdpInstance, state: Sequence[int]) -> StepModel:
    """The quantised state seen through the scheduler's per-option outcome model."""
    d, q, c = _split(instance, state)
    n, m = instance.n_towers, instance.n_uavs
    top_q = instance.energy_levels - 1
    e_idle = np.array([max(q[j] - instance.idle_cost[j], 0) if q[j] > 0 else 0 for j in range(m)], dtype=float)
    e_sched = np.array([[max(min(q[j] + instance.charge[j][i], top_q) - instance.sched_cost[j][i], 0)
                         for i in range(n)] for j in range(m)], dtype=float)
    reach = np.array(instance.reach, dtype=bool) & (np.array(q) > 0)[:, None]
    return StepModel(
        tower_ids=list(range(1, n + 1)),
        uav_ids=list(range(1, m + 1)),
        tower_data=np.array(d, dtype=float),
        held=np.array(c, dtype=float),
        energy_idle=e_idle,
        energy_sched=e_sched,
        reach=reach,
        capacity=np.full(m, float(top_q)),
        panels=np.array(instance.panels, dtype=np.int64),
        data_cap=float(instance.data_levels - 1),
    )


# -- vectorised tables ------------------------------------------------------

@dataclass
class Tables:
    actions: list[Action]
    feasible: np.ndarray      # (S, A) bool
    rewards: np.ndarray       # (S, A), -inf where infeasible
    next_index: np.ndarray    # (S, A, O) successor index per joint outcome
    probs: np.ndarray         # (O,)


def build_tables(instance: SmallMdpInstance) -> Tables:
    actions = action_templates(instance)
    n, m = instance.n_towers, instance.n_uavs
    states = np.array(enumerate_states(instance), dtype=np.int64)
    d = states[:, :n]
    q = states[:, [n + 2 * j for j in range(m)]]
    c = states[:, [n + 2 * j + 1 for j in range(m)]]
    top_d, top_q = instance.data_levels - 1, instance.energy_levels - 1
    sizes = np.array([s for s, _ in instance.content_outcomes], dtype=np.int64)
    combos = np.array(list(itertools.product(range(len(sizes)), repeat=m)), dtype=np.int64)
    probs = np.array([p for _, p in outcomes(instance)])
    radix = np.array(instance.radices, dtype=np.int64)
    weights = np.array([int(np.prod(radix[k + 1:])) for k in range(len(radix))], dtype=np.int64)
    S, A, O = len(states), len(actions), len(combos)
    feasible = np.zeros((S, A), dtype=bool)
    rewards = np.full((S, A), -np.inf)
    next_index = np.zeros((S, A, O), dtype=np.int64)
    caps = np.full(m, float(top_q))
    d_capacity = n * top_d
    for a, action in enumerate(actions):
        act = np.array(action)
        sched = act >= 0
        ok = np.all(~sched | (q > 0), axis=1)
        feasible[:, a] = ok
        d2 = d.copy()
        c2 = c.copy()
        for j in np.flatnonzero(sched):
            d2[:, act[j]] += c[:, j]
            c2[:, j] = 0
        d2 = np.minimum(d2, top_d)
        q2 = q.copy()
        for j in range(m):
            alive = q[:, j] > 0
            if sched[j]:
                i = act[j]
                new = np.maximum(np.minimum(q[:, j] + instance.charge[j][i], top_q) - instance.sched_cost[j][i], 0)
            else:
                new = np.maximum(q[:, j] - instance.idle_cost[j], 0)
            q2[:, j] = np.where(alive, new, 0)
        r = combined_scores(instance.epsilon, d2.astype(float), q2.astype(float), caps, "normalized", d_capacity)
        rewards[:, a] = np.where(ok, r, -np.inf)
        base = (d2 * weights[:n]).sum(axis=1)
        qw = weights[[n + 2 * j for j in range(m)]]
        cw = weights[[n + 2 * j + 1 for j in range(m)]]
        base = base + (q2 * qw).sum(axis=1)
        for o, combo in enumerate(combos):
            gain = sizes[combo]
            collect = (~sched)[None, :] & (q2 > 0)
            c3 = np.where(collect, np.minimum(c2 + gain[None, :], top_d), c2)
            next_index[:, a, o] = base + (c3 * cw).sum(axis=1)
    return Tables(actions, feasible, rewards, next_index, probs)


# -- solvers ----------------------------------------------------------------

@dataclass
class MdpSolution:
    instance: SmallMdpInstance
    values: np.ndarray        # (T + 1, S); row T is the zero terminal value
    action_index: np.ndarray  # (T, S) into ``actions``
    actions: list[Action]
    q_values: list[np.ndarray] = field(repr=False, default_factory=list)

    def value(self, t: int, state: Sequence[int]) -> float:
        return float(self.values[t, index_of(self.instance, state)])

    def action(self, t: int, state_index: int) -> Action:
        return self.actions[self.action_index[t, state_index]]

    def policy(self) -> dict[tuple[int, int], Action]:
        T, S = self.action_index.shape
        return {(t, s): self.actions[self.action_index[t, s]] for t in range(T) for s in range(S)}


def _tie_break_argmax(q: np.ndarray) -> np.ndarray:
    best = q.max(axis=1, keepdims=True)
    near = q >= best - TIE_TOL * np.maximum(1.0, np.abs(best))
    return near.argmax(axis=1)


def value_iteration(instance: SmallMdpInstance, tables: Tables | None = None) -> MdpSolution:
    """Backward induction: V_t(s) = max_a r(s, a) + gamma * E[V_{t+1}(s')], V_T = 0."""
    tables = tables or build_tables(instance)
    T, S = instance.horizon, tables.rewards.shape[0]
    values = np.zeros((T + 1, S))
    act = np.zeros((T, S), dtype=np.int64)
    qs = []
    for t in range(T - 1, -1, -1):
        cont = values[t + 1][tables.next_index] @ tables.probs
        q = np.where(tables.feasible, tables.rewards + instance.gamma * cont, -np.inf)
        act[t] = _tie_break_argmax(q)
        values[t] = q[np.arange(S), act[t]]
        qs.append(q)
    return MdpSolution(instance, values, act, tables.actions, qs[::-1])


def bellman_residual(solution: MdpSolution, tables: Tables | None = None) -> float:
    """Largest |V_t(s) - max_a Q_t(s, a)| recomputed from the transition tables."""
    inst = solution.instance
    tables = tables or build_tables(inst)
    worst = 0.0
    for t in range(inst.horizon):
        cont = solution.values[t + 1][tables.next_index] @ tables.probs
        q = np.where(tables.feasible, tables.rewards + inst.gamma * cont, -np.inf)
        worst = max(worst, float(np.abs(q.max(axis=1) - solution.values[t]).max()))
    worst = max(worst, float(np.abs(solution.values[inst.horizon]).max()))
    return worst


PolicyLike = Mapping[tuple[int, int], Action] | Callable[[int, State], Action]


def _lookup(policy: PolicyLike, instance: SmallMdpInstance, t: int, state: State) -> Action:
    if callable(policy) and not isinstance(policy, Mapping):
        return tuple(policy(t, state))
    key = (t, index_of(instance, state))
    try:
        return tuple(policy[key])
    except KeyError:
        raise PolicyError(f"policy has no action for step {t}, state {key[1]} {state}") from None


def evaluate_policy(instance: SmallMdpInstance, policy: PolicyLike, *, start: State | None = None,
                    n_rollouts: int | None = None,
                    rng: np.random.Generator | None = None) -> float | tuple[float, float]:
    """Expected discounted return of ``policy`` from ``start``.

    Exact (default): expectation over every reachable branch.  With
    ``n_rollouts``: Monte-Carlo mean and its standard error.
    """
    start = instance.initial if start is None else tuple(start)
    if n_rollouts is not None:
        return _rollouts(instance, policy, start, n_rollouts, rng or np.random.default_rng(0))
    memo: dict[tuple[int, State], float] = {}

    def value(t: int, s: State) -> float:
        if t == instance.horizon:
            return 0.0
        key = (t, s)
        if key not in memo:
            a = _lookup(policy, instance, t, s)
            total = reward(instance, s, a)
            if instance.gamma > 0:
                total += instance.gamma * sum(p * value(t + 1, s2) for s2, p in successors(instance, s, a).items())
            memo[key] = total
        return memo[key]

    return value(0, start)


def _rollouts(instance, policy, start, n, rng) -> tuple[float, float]:
    sizes = len(instance.content_outcomes)
    p = np.array([pr for _, pr in instance.content_outcomes])
    returns = np.empty(n)
    for k in range(n):
        s, total, disc = start, 0.0, 1.0
        for t in range(instance.horizon):
            a = _lookup(policy, instance, t, s)
            total += disc * reward(instance, s, a)
            combo = tuple(rng.choice(sizes, size=instance.n_uavs, p=p))
            s, _ = transition(instance, s, a, combo)
            disc *= instance.gamma
        returns[k] = total
    se = returns.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
    return float(returns.mean()), float(se)


class GreedyPolicy(Mapping):
    """One-step reward maximiser, via the scheduler's exhaustive search; computed lazily."""

    def __init__(self, instance: SmallMdpInstance):
        self.instance = instance
        self._cache: dict[int, Action] = {}

    def action_for(self, state: Sequence[int]) -> Action:
        idx = index_of(self.instance, state)
        if idx not in self._cache:
            model = step_model(self.instance, state)
            d_cap = self.instance.n_towers * (self.instance.data_levels - 1)
            assignment, _ = best_in_model(model, self.instance.epsilon, "normalized", d_cap, 1e-6)
            self._cache[idx] = tuple(int(i) for i in model.to_choices(assignment))
        return self._cache[idx]

    def __getitem__(self, key: tuple[int, int]) -> Action:
        t, idx = key
        if not (0 <= t < self.instance.horizon and 0 <= idx < self.instance.n_states):
            raise KeyError(key)
        return self.action_for(state_of(self.instance, idx))

    def __iter__(self):
        return ((t, s) for t in range(self.instance.horizon) for s in range(self.instance.n_states))

    def __len__(self) -> int:
        return self.instance.horizon * self.instance.n_states


def random_instance(rng: np.random.Generator, *, max_states: int = 729, max_horizon: int = 6,
                    deterministic: bool = False, max_towers: int = MAX_TOWERS,
                    max_uavs: int = MAX_UAVS) -> SmallMdpInstance:
    """Draw a random valid instance within the given size limits."""
    while True:
        n = int(rng.integers(1, max_towers + 1))
        m = int(rng.integers(1, max_uavs + 1))
        Q = int(rng.integers(2, MAX_LEVELS + 1))
        D = int(rng.integers(2, MAX_LEVELS + 1))
        if D**n * (Q * D) ** m <= max_states:
            break
    if deterministic:
        co = ((int(rng.integers(0, D)), 1.0),)
    else:
        p = float(rng.uniform(0.2, 0.8))
        co = ((0, p), (int(rng.integers(1, D)), 1.0 - p))
    reach = rng.random((m, n)) < 0.8
    return SmallMdpInstance(
        n_towers=n, n_uavs=m, energy_levels=Q, data_levels=D, content_outcomes=co,
        horizon=int(rng.integers(1, max_horizon + 1)),
        gamma=float(rng.choice([0.0, 0.5, 0.9, 0.95, 1.0])),
        reach=reach, charge=rng.integers(0, Q, size=(m, n)),
        sched_cost=rng.integers(0, 2, size=(m, n)), idle_cost=rng.integers(0, 2, size=m),
        panels=(1,) * n, epsilon=float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0])),
        initial=(0,) * n + tuple(x for _ in range(m) for x in (Q - 1, int(rng.integers(0, D)))),
    )


def greedy_gap_report(instance: SmallMdpInstance) -> dict[str, float]:
    sol = value_iteration(instance)
    v_star = sol.value(0, instance.initial)
    v_greedy = evaluate_policy(instance, GreedyPolicy(instance))
    return {"v_star": v_star, "v_greedy": v_greedy,
            "ratio": v_greedy / v_star if v_star > 0 else 1.0}


def export_solution_csv(solution: MdpSolution, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "state_index", "value", "action"])
        T, S = solution.action_index.shape
        for t in range(T):
            for s in range(S):
                a = solution.actions[solution.action_index[t, s]]
                writer.writerow([t, s, f"{solution.values[t, s]:.6g}", " ".join(map(str, a))])
