"""Discrete-time episode engine."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .contents import generate_content, sample_region_events
from .domain import Assignment, Scenario, SystemState, initial_state, region_of, validate_state
from .dynamics import exchange, motion_plan
from .reward import RewardBreakdown, system_value_timeavg
from .scheduler import Policy, decide, post_step_reward


class StateInvariantError(AssertionError):
    pass


@dataclass
class StepRecord:
    t: int
    assignment: list[list[int]]
    reward: RewardBreakdown
    tower_data: dict[int, float]
    uav_energy: dict[int, float]
    generated: list[list[float]]
    deactivated: list[int]
    delivered: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "assignment": self.assignment,
            "reward": self.reward.to_dict(),
            "tower_data": {str(k): v for k, v in self.tower_data.items()},
            "uav_energy": {str(k): v for k, v in self.uav_energy.items()},
            "generated": self.generated,
            "deactivated": self.deactivated,
            "delivered": self.delivered,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(
            t=d["t"],
            assignment=[list(p) for p in d["assignment"]],
            reward=RewardBreakdown(**d["reward"]),
            tower_data={int(k): v for k, v in d["tower_data"].items()},
            uav_energy={int(k): v for k, v in d["uav_energy"].items()},
            generated=[list(g) for g in d["generated"]],
            deactivated=list(d["deactivated"]),
            delivered=d.get("delivered", 0.0),
        )


@dataclass
class EpisodeLog:
    scenario_digest: str
    seed: int
    policy: str
    records: list[StepRecord] = field(default_factory=list)
    truncated: bool = False

    @property
    def value(self) -> float:
        """Time-averaged combined reward."""
        return system_value_timeavg([r.reward.combined for r in self.records])

    def header(self) -> dict:
        return {"scenario_digest": self.scenario_digest, "seed": self.seed, "policy": self.policy,
                "steps": len(self.records), "truncated": self.truncated,
                "value": self.value if self.records else None}

    def to_ndjson(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text: str) -> "EpisodeLog":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = lines[0]
        return cls(head["scenario_digest"], head["seed"], head["policy"],
                   [StepRecord.from_dict(d) for d in lines[1:]], head["truncated"])

    def to_csv(self) -> str:
        """One row per step, ready for plotting."""
        buf = io.StringIO()
        tower_ids = sorted(self.records[0].tower_data) if self.records else []
        uav_ids = sorted(self.records[0].uav_energy) if self.records else []
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "assignment", "combined", "r_tower_raw", "r_uav_raw", "r_tower_norm",
                         "r_uav_norm", "delivered", "n_generated", "deactivated"]
                        + [f"tower_{i}" for i in tower_ids] + [f"energy_{j}" for j in uav_ids])
        for r in self.records:
            rw = r.reward
            writer.writerow(
                [r.t, " ".join(f"{i}-{j}" for i, j in r.assignment)]
                + [_fmt(x) for x in (rw.combined, rw.r_tower_raw, rw.r_uav_raw, rw.r_tower_norm,
                                     rw.r_uav_norm, r.delivered)]
                + [len(r.generated), " ".join(map(str, r.deactivated))]
                + [_fmt(r.tower_data[i]) for i in tower_ids] + [_fmt(r.uav_energy[j]) for j in uav_ids]
            )
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def step(state: SystemState, assignment: Assignment, scenario: Scenario,
         rng: np.random.Generator) -> tuple[SystemState, StepRecord]:
    """Advance one step; returns the new state and the step record.

    Order: transfer, charge, consume, move, collect, resample events, reward.
    """
    s = state.copy()
    plans = {j: motion_plan(s, scenario, j) for j in scenario.uav_ids if s.uav_active[j]}
    info = exchange(s, assignment, scenario, plans)
    scheduled = {j for _, j in assignment.pairs}
    generated = []
    for j in scenario.uav_ids:
        if j in scheduled or not s.uav_active[j]:
            continue
        plan = plans[j]
        s.uav_position[j] = plan.end
        region = region_of(plan.end, scenario)
        content = generate_content(s, j, region, s.t, dwelling=plan.dwelling, scheduled=False)
        if content is not None:
            generated.append([j, content.size])
    s.regions = sample_region_events(s.regions, scenario.event_resample_prob, rng, scenario.content_size_map)
    reward = post_step_reward(s, scenario, scenario.epsilon)
    record = StepRecord(
        t=s.t,
        assignment=assignment.to_list(),
        reward=reward,
        tower_data=dict(s.tower_data),
        uav_energy=dict(s.uav_energy),
        generated=generated,
        deactivated=list(info["deactivated"]),
        delivered=float(sum(info["moved"].values())),
    )
    s.t += 1
    return s, record


def episode_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (initial regions, region events, policy) generators for one episode."""
    init, events, policy = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(events), np.random.default_rng(policy)


def run_episode(scenario: Scenario, policy: Policy, seed: int, *, check: bool = False,
                policy_fn=None) -> EpisodeLog:
    """Run ``scenario.horizon`` steps of decide -> step.

    ``check`` validates every intermediate state.  ``policy_fn`` overrides the
    decision rule with ``f(state, scenario, rng) -> Assignment``.
    """
    init_rng, event_rng, policy_rng = episode_streams(seed)
    state = initial_state(scenario, init_rng)
    log = EpisodeLog(scenario.digest(), seed, policy.label)
    for _ in range(scenario.horizon):
        if not any(state.uav_active.values()):
            log.truncated = True
            break
        if policy_fn is not None:
            assignment = policy_fn(state, scenario, policy_rng)
        else:
            assignment = decide(policy, state, scenario, policy_rng)
        new_state, record = step(state, assignment, scenario, event_rng)
        if check:
            _check(new_state, state, scenario)
        state = new_state
        log.records.append(record)
    return log


def _check(state: SystemState, previous: SystemState, scenario: Scenario) -> None:
    problems = validate_state(state, scenario, previous)
    held = sum(state.held_data(j) for j in scenario.uav_ids)
    total = sum(state.tower_data.values()) + held
    if abs(total - state.generated_total) > 1e-9 * max(1.0, state.generated_total):
        problems.append(f"data not conserved: {total} held vs {state.generated_total} generated")
    if problems:
        raise StateInvariantError(f"step {state.t}: " + "; ".join(problems))


def replay(log: EpisodeLog, scenario: Scenario) -> EpisodeLog:
    """Re-simulate a log from its recorded assignments."""
    if log.scenario_digest != scenario.digest():
        raise ValueError("log was produced by a different scenario")
    recorded = iter(log.records)

    def logged(state, sc, rng):
        return Assignment(tuple(p) for p in next(recorded).assignment)

    out = run_episode(scenario, Policy(), log.seed, policy_fn=logged)
    out.policy = log.policy
    return out
