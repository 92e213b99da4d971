"""Command-line driver: run, compare, sweep-epsilon and mdp-check.

Exit codes: 0 success, 1 invalid input, 2 a benchmark ordering failed under
``compare --assert``.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import mdp, report
from .domain import ScenarioError, build_scenario, load_scenario
from .scheduler import Policy
from .sim import run_episode

EXIT_INVALID = 1
EXIT_ORDERING = 2

DEFAULT_MDP = {
    "n_towers": 2, "n_uavs": 2, "energy_levels": 4, "data_levels": 4,
    "content_outcomes": [[0, 0.5], [2, 0.5]], "horizon": 5, "gamma": 0.95,
}


def _scenario(path: str | None):
    return load_scenario(path) if path else build_scenario({})


def _seeds(text: str) -> list[int]:
    """``0..19`` (inclusive) or ``1,4,7``."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def _policies(text: str, search: str) -> list[Policy]:
    out, depth, cur = [], 0, ""
    for ch in text:  # split on commas outside parentheses
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [Policy.parse(p, search=search) for p in out if p.strip()]


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def main():
    """Tower / UAV charging and data-collection scheduling experiments."""


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scenario JSON (defaults to the built-in scenario).")
@click.option("--policy", default="proposed", show_default=True, help="proposed, comp1, comp2 or comp3.")
@click.option("--epsilon", type=float, default=None, help="Tower weight for the proposed policy.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--search", type=click.Choice(["exhaustive", "local"]), default="exhaustive", show_default=True)
@click.option("--out", required=True, help="Output directory.")
def run(scenario_path, policy, epsilon, seed, search, out):
    """Run one episode and write its log (NDJSON) and step series (CSV)."""
    sc = _scenario(scenario_path)
    pol = Policy.parse(policy, search=search)
    if epsilon is not None:
        pol = Policy(pol.kind, epsilon, search=search)
    log = run_episode(sc, pol, seed)
    out_dir = _out_dir(out)
    stem = f"{pol.label}_seed{seed}"
    (out_dir / f"{stem}.ndjson").write_text(log.to_ndjson())
    report.export(log, out_dir / f"{stem}.csv")
    click.echo(f"{pol.label} seed {seed}: {len(log.records)} steps, value {log.value:.6g}"
               + (" (fleet ran dry)" if log.truncated else ""))


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--policies", default="proposed(0.5),comp1,comp2,comp3", show_default=True)
@click.option("--seeds", default="0..19", show_default=True, help="Range a..b (inclusive) or a comma list.")
@click.option("--search", type=click.Choice(["exhaustive", "local"]), default="exhaustive", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--check/--no-check", default=False, help="Validate state invariants every step.")
@click.option("--assert", "assert_", is_flag=True, help="Exit 2 if any benchmark ordering fails.")
@click.option("--out", required=True, help="Output directory.")
def compare(scenario_path, policies, seeds, search, workers, check, assert_, out):
    """Run policies x seeds and report the benchmark orderings."""
    sc = _scenario(scenario_path)
    pols = _policies(policies, search)
    res = report.compare(sc, pols, _seeds(seeds), check=check, workers=workers)
    out_dir = _out_dir(out)
    for label, stats in res.stats.items():
        report.export(stats, out_dir / f"summary_{label}.json")
        report.export(stats, out_dir / f"summary_{label}.csv")
    report.export(res, out_dir / "comparison.json")
    report.export(res, out_dir / "comparison.csv")
    for row in res.table():
        click.echo(f"{row['policy']:>14}  value {row['value']:.4g}  energy {row['final_energy']:.6g}  "
                   f"data std {row['final_data_std']:.4g}  data total {row['final_data_total']:.6g}")
    for o in res.orderings:
        click.echo(f"{'PASS' if o.passed else 'FAIL'}  {o.name}  ({o.fraction:.2f} of seeds)")
    if assert_ and not res.passed:
        sys.exit(EXIT_ORDERING)


@main.command("sweep-epsilon")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--values", default="0,0.25,0.5,0.75,1", show_default=True)
@click.option("--seeds", default="0..4", show_default=True)
@click.option("--search", type=click.Choice(["exhaustive", "local"]), default="exhaustive", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", required=True)
def sweep_epsilon(scenario_path, values, seeds, search, workers, out):
    """Run the proposed policy over a list of tower weights."""
    sc = _scenario(scenario_path)
    eps = [float(v) for v in values.split(",") if v.strip()]
    pols = [Policy("proposed", e, search=search) for e in eps]
    res = report.compare(sc, pols, _seeds(seeds), workers=workers)
    out_dir = _out_dir(out)
    for label, stats in res.stats.items():
        report.export(stats, out_dir / f"summary_{label}.json")
    report.export(res, out_dir / "sweep.csv")
    for row in res.table():
        click.echo(f"{row['policy']:>14}  energy {row['final_energy']:.6g}  data std {row['final_data_std']:.4g}")


@main.command("mdp-check")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scenario JSON whose 'mdp' section defines the instance.")
@click.option("--random", "n_random", type=int, default=0, help="Also check this many random instances.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
def mdp_check(scenario_path, n_random, seed, out):
    """Solve the quantised MDP exactly and report the greedy policy's gap."""
    cfg = DEFAULT_MDP
    if scenario_path:
        sc = load_scenario(scenario_path)
        if sc.mdp is not None:
            cfg = sc.mdp
    instances = [mdp.SmallMdpInstance.from_config(cfg)]
    rng = np.random.default_rng(seed)
    instances += [mdp.random_instance(rng) for _ in range(n_random)]
    out_dir = _out_dir(out)
    rows = []
    for k, inst in enumerate(instances):
        tables = mdp.build_tables(inst)
        sol = mdp.value_iteration(inst, tables)
        gap = mdp.greedy_gap_report(inst)
        gap["bellman_residual"] = mdp.bellman_residual(sol, tables)
        gap["n_states"] = inst.n_states
        rows.append(gap)
        if k == 0:
            mdp.export_solution_csv(sol, out_dir / "solution.csv")
        click.echo(f"instance {k}: {inst.n_states} states  V* {gap['v_star']:.6g}  greedy {gap['v_greedy']:.6g}  "
                   f"ratio {gap['ratio']:.4f}  residual {gap['bellman_residual']:.1e}")
    (out_dir / "greedy_gap.json").write_text(json.dumps(report._round(rows), indent=1, sort_keys=True) + "\n")


def cli(argv=None) -> int:
    """Entry point mapping input errors to exit code 1."""
    try:
        main.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return EXIT_INVALID
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except (ScenarioError, mdp.InstanceError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    return 0


def entry() -> None:
    sys.exit(cli())
