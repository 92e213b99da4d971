import json

from uavsched.cli import cli
from uavsched.domain import scenario_to_config


def _write(tmp_path, sc, **extra):
    cfg = scenario_to_config(sc)
    cfg.update(extra)
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_run(tmp_path, tiny):
    path = _write(tmp_path, tiny)
    assert cli(["run", "--scenario", path, "--policy", "comp3", "--seed", "1", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "comp3_seed1.ndjson").exists()
    assert (tmp_path / "o" / "comp3_seed1.csv").exists()


def test_compare_and_assert(tmp_path, tiny):
    path = _write(tmp_path, tiny)
    out = str(tmp_path / "c")
    assert cli(["compare", "--scenario", path, "--policies", "proposed(0.5),comp3", "--seeds", "0..1",
                "--out", out]) == 0
    table = json.loads((tmp_path / "c" / "comparison.json").read_text())
    assert [r["policy"] for r in table["table"]] == ["proposed(0.5)", "comp3"]
    rc = cli(["compare", "--scenario", path, "--policies", "proposed(0.5),comp3", "--seeds", "0..1",
              "--out", out, "--assert"])
    passed = all(o["passed"] for o in table["orderings"])
    assert rc == (0 if passed else 2)


def test_validation_errors_exit_1(tmp_path, tiny):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epsilon": 2}))
    assert cli(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert cli(["run", "--policy", "nope", "--out", str(tmp_path)]) == 1
    assert cli(["run", "--unknown-flag"]) == 1


def test_sweep_epsilon(tmp_path, tiny):
    path = _write(tmp_path, tiny)
    assert cli(["sweep-epsilon", "--scenario", path, "--values", "0,1", "--seeds", "0",
                "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "sweep.csv").exists()


def test_mdp_check(tmp_path, tiny):
    mdp_cfg = {"n_towers": 1, "n_uavs": 1, "energy_levels": 3, "data_levels": 3,
               "content_outcomes": [[0, 0.5], [1, 0.5]], "horizon": 3}
    path = _write(tmp_path, tiny, mdp=mdp_cfg)
    assert cli(["mdp-check", "--scenario", path, "--out", str(tmp_path / "m")]) == 0
    gap = json.loads((tmp_path / "m" / "greedy_gap.json").read_text())
    assert gap[0]["n_states"] == 27 and gap[0]["bellman_residual"] <= 1e-9
