"""Aggregation of episode logs into figure-ready series, policy comparison and export."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import Scenario
from .scheduler import Policy
from .sim import EpisodeLog, run_episode

ORDERING_THRESHOLD = 0.8
_SERIES = ("combined", "r_tower_raw", "r_uav_raw", "r_tower_norm", "r_uav_norm")


@dataclass
class SummaryStats:
    policy: str
    scenario_digest: str
    seeds: list[int]
    tower_ids: list[int]
    energy_mean: list[float]                  # per step, UAVs then seeds averaged
    tower_data: dict[str, list[float]]        # per tower, seed-averaged cumulative data
    data_quantiles: list[list[float]]         # per step: min, q1, median, q3, max
    rewards: dict[str, list[float]]           # seed-averaged reward series
    value: float                              # time-average combined reward, seed-averaged
    final_energy: list[float] = field(default_factory=list)   # per seed
    final_data_std: list[float] = field(default_factory=list)
    final_data_total: list[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.energy_mean)

    def to_dict(self) -> dict:
        return _round(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryStats":
        return cls(**d)


def _padded(log: EpisodeLog, steps: int):
    recs = list(log.records)
    if not recs:
        raise ValueError(f"log for seed {log.seed} has no records")
    return recs + [recs[-1]] * (steps - len(recs))


def summarize(logs: Sequence[EpisodeLog]) -> SummaryStats:
    """Aggregate logs of one scenario and policy over seeds.

    Truncated episodes are padded with their last record, so a fleet that ran
    dry keeps contributing its final (zero-energy) state.
    """
    if not logs:
        raise ValueError("nothing to summarize")
    digests = {log.scenario_digest for log in logs}
    if len(digests) > 1:
        raise ValueError(f"logs come from different scenarios: {sorted(digests)}")
    steps = max(len(log.records) for log in logs)
    padded = [_padded(log, steps) for log in logs]
    tower_ids = sorted(padded[0][0].tower_data)
    uav_ids = sorted(padded[0][0].uav_energy)

    energy = np.array([[[r.uav_energy[j] for j in uav_ids] for r in recs] for recs in padded])  # seed, t, uav
    data = np.array([[[r.tower_data[i] for i in tower_ids] for r in recs] for recs in padded])   # seed, t, tower
    pooled = data.transpose(1, 0, 2).reshape(steps, -1)
    # Inverse-CDF quantiles are unchanged when identical seeds are pooled.
    quant = np.quantile(pooled, [0.0, 0.25, 0.5, 0.75, 1.0], axis=1, method="inverted_cdf").T
    rewards = {k: np.mean([[getattr(r.reward, k) for r in recs] for recs in padded], axis=0).tolist()
               for k in _SERIES}
    return SummaryStats(
        policy=logs[0].policy,
        scenario_digest=logs[0].scenario_digest,
        seeds=[log.seed for log in logs],
        tower_ids=tower_ids,
        energy_mean=energy.mean(axis=(0, 2)).tolist(),
        tower_data={str(i): data[:, :, k].mean(axis=0).tolist() for k, i in enumerate(tower_ids)},
        data_quantiles=quant.tolist(),
        rewards=rewards,
        value=float(np.mean([log.value for log in logs])),
        final_energy=energy[:, -1, :].mean(axis=1).tolist(),
        final_data_std=data[:, -1, :].std(axis=1).tolist(),
        final_data_total=data[:, -1, :].sum(axis=1).tolist(),
    )


# -- comparison -------------------------------------------------------------

@dataclass
class Ordering:
    name: str
    fraction: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.fraction >= self.threshold


@dataclass
class Comparison:
    stats: dict[str, SummaryStats]
    logs: dict[str, list[EpisodeLog]]
    orderings: list[Ordering]

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.orderings)

    def table(self) -> list[dict]:
        rows = []
        for label, s in self.stats.items():
            rows.append({
                "policy": label,
                "seeds": len(s.seeds),
                "value": s.value,
                "final_energy": float(np.mean(s.final_energy)),
                "final_data_std": float(np.mean(s.final_data_std)),
                "final_data_total": float(np.mean(s.final_data_total)),
            })
        return rows


def _episode(args):
    scenario, policy, seed, check = args
    return run_episode(scenario, policy, seed, check=check)


def run_many(scenario: Scenario, policies: Sequence[Policy], seeds: Sequence[int], *,
             check: bool = False, workers: int = 1) -> dict[str, list[EpisodeLog]]:
    jobs = [(scenario, p, s, check) for p in policies for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_episode, jobs))
    else:
        results = [_episode(j) for j in jobs]
    out: dict[str, list[EpisodeLog]] = {}
    for (_, p, _, _), log in zip(jobs, results):
        out.setdefault(p.label, []).append(log)
    return out


def orderings(stats: dict[str, SummaryStats], policies: Sequence[Policy],
              threshold: float = ORDERING_THRESHOLD) -> list[Ordering]:
    """Per-seed benchmark orderings between whichever of the four policy kinds are present."""
    by_kind: dict[str, SummaryStats] = {}
    for p in policies:
        by_kind.setdefault(p.kind, stats[p.label])
    checks = [
        ("final_energy", "comp1", ">=", "proposed"),
        ("final_energy", "proposed", ">=", "comp2"),
        ("final_energy", "comp1", ">=", "comp3"),
        ("final_data_std", "comp2", "<=", "proposed"),
        ("final_data_std", "proposed", "<=", "comp3"),
        ("final_data_std", "comp2", "<=", "comp1"),
        ("final_data_total", "proposed", ">=", "comp3"),
        ("final_data_total", "comp2", ">=", "comp3"),
    ]
    out = []
    for metric, a, op, b in checks:
        if a not in by_kind or b not in by_kind:
            continue
        x = np.array(getattr(by_kind[a], metric))
        y = np.array(getattr(by_kind[b], metric))
        n = min(len(x), len(y))
        holds = x[:n] >= y[:n] if op == ">=" else x[:n] <= y[:n]
        out.append(Ordering(f"{metric}: {a} {op} {b}", float(holds.mean()), threshold))
    return out


def compare(scenario: Scenario, policies: Sequence[Policy], seeds: Sequence[int], *,
            check: bool = False, workers: int = 1,
            threshold: float = ORDERING_THRESHOLD) -> Comparison:
    if not policies or not seeds:
        raise ValueError("compare needs at least one policy and one seed")
    logs = run_many(scenario, policies, seeds, check=check, workers=workers)
    stats = {label: summarize(ls) for label, ls in logs.items()}
    return Comparison(stats, logs, orderings(stats, policies, threshold))


# -- export -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _round(obj):
    """6-significant-digit floats throughout; refuses non-finite numbers."""
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"refusing to serialise non-finite value {obj}")
        return float(_fmt(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _stats_csv(stats: SummaryStats) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    towers = [str(i) for i in stats.tower_ids]
    writer.writerow(["t", "energy_mean"] + [f"tower_{i}" for i in towers]
                    + ["data_min", "data_q1", "data_median", "data_q3", "data_max"] + list(_SERIES))
    for t in range(stats.steps):
        row = [stats.energy_mean[t]] + [stats.tower_data[i][t] for i in towers] + list(stats.data_quantiles[t]) \
            + [stats.rewards[k][t] for k in _SERIES]
        for x in row:
            if not math.isfinite(x):
                raise ValueError(f"refusing to serialise non-finite value at step {t}")
        writer.writerow([t] + [_fmt(x) for x in row])
    return buf.getvalue()


def render(obj: SummaryStats | EpisodeLog | Comparison, fmt: str) -> str:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if isinstance(obj, SummaryStats):
        return _stats_csv(obj) if fmt == "csv" else json.dumps(obj.to_dict(), sort_keys=True, indent=1) + "\n"
    if isinstance(obj, EpisodeLog):
        if fmt == "csv":
            return obj.to_csv()
        body = {"header": obj.header(), "records": [r.to_dict() for r in obj.records]}
        return json.dumps(_round(body), sort_keys=True, indent=1) + "\n"
    if isinstance(obj, Comparison):
        rows = obj.table()
        if fmt == "json":
            body = {"table": rows,
                    "orderings": [{"name": o.name, "fraction": o.fraction, "threshold": o.threshold,
                                   "passed": o.passed} for o in obj.orderings]}
            return json.dumps(_round(body), sort_keys=True, indent=1) + "\n"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        keys = ["policy", "seeds", "value", "final_energy", "final_data_std", "final_data_total"]
        writer.writerow(keys)
        for r in rows:
            writer.writerow([r[k] if isinstance(r[k], (str, int)) else _fmt(r[k]) for k in keys])
        return buf.getvalue()
    raise TypeError(f"cannot export {type(obj).__name__}")


def export(obj: SummaryStats | EpisodeLog | Comparison, path: str | Path, fmt: str | None = None) -> Path:
    """Write ``obj`` as CSV or JSON; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    text = render(obj, fmt)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def load(path: str | Path) -> SummaryStats:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return SummaryStats.from_dict(data)
