"""
Export and command-line tests: file layout, byte stability and exit codes
"""

import json

import pandas as pd
import pytest

import simulate
from scenario import read_scenario_dict
from harness import PAIR_COLUMNS, RunLog, RunMetrics, PairMetrics, run_scenario
from export import compare_summary, export_csv, pair_frame

SHORT = [
    "--set", "stages.0.duration=3", "--set", "stages.1.duration=3", "--set", "stages.2.duration=1",
]


def _short_config(**changes):
    raw = {
        "name": "short",
        "n_agents": 3,
        "seed": 4,
        "stages": [{"duration": 1.0, "setpoints": {"L_d": 1.5, "alpha_d": 0.2}}],
        "leader_script": [{"duration": 1.0, "v": 0.5, "omega": 0.1}],
        "perception": {"mode": "modeled", "bearing": {"misclass_rate": 0.1}},
    }
    raw.update(changes)
    return read_scenario_dict(raw)


# ── export_csv ────────────────────────────────────────────────────────────────

def test_empty_run_writes_header_only(tmp_path):
    log = RunLog("empty", True, n_agents=2)
    metrics = RunMetrics("empty", True, seed=0, pairs=[PairMetrics(pair=1, n_stages=1)])
    export_csv(log, metrics, tmp_path)

    assert (tmp_path / "pair_1.csv").read_text() == ",".join(PAIR_COLUMNS) + "\n"
    assert (tmp_path / "agents.csv").exists()
    data = json.loads((tmp_path / "metrics.json").read_text())
    assert data["steps"] == 0
    assert data["pairs"][0]["first_violation_t"] is None


def test_export_layout(tmp_path):
    log, metrics = run_scenario(_short_config())
    written = export_csv(log, metrics, tmp_path / "out")
    names = sorted(p.name for p in written)
    assert names == ["agents.csv", "metrics.json", "pair_1.csv", "pair_2.csv"]

    frame = pd.read_csv(tmp_path / "out" / "pair_2.csv")
    assert list(frame.columns) == PAIR_COLUMNS
    assert len(frame) == metrics.steps == 20
    assert set(frame["visible"].unique()) <= {0, 1}

    agents = pd.read_csv(tmp_path / "out" / "agents.csv")
    assert list(agents.columns[:4]) == ["t", "x0", "y0", "theta0"]
    assert len(agents) == 20


def test_export_is_byte_stable(tmp_path):
    for name in ("a", "b"):
        log, metrics = run_scenario(_short_config())
        export_csv(log, metrics, tmp_path / name)
    for fname in ("pair_1.csv", "pair_2.csv", "agents.csv", "metrics.json"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes(), fname


def test_pair_frame_of_missing_pair_is_empty():
    log = RunLog("empty", True, n_agents=2)
    assert pair_frame(log, 1).empty


def test_compare_summary_rows():
    cfg = _short_config()
    _, on = run_scenario(cfg.with_filter(True))
    _, off = run_scenario(cfg.with_filter(False))
    summary = compare_summary(on, off)
    assert list(summary.columns) == ["pair", "metric", "filter_on", "filter_off"]
    assert set(summary["pair"]) == {1, 2}
    assert "violation_steps" in set(summary["metric"])


# ── command line ──────────────────────────────────────────────────────────────

def _cli(tmp_path, *args):
    return simulate.main(["--log-dir", str(tmp_path / "logs"), "--db", str(tmp_path / "runs.db"), *args])


@pytest.mark.slow
def test_compare_outputs_are_reproducible(tmp_path, scenario_dir, restore_logging):
    scenario = str(scenario_dir / "two_robot.yaml")
    for name in ("first", "second"):
        code = _cli(tmp_path, "compare", scenario, "--output", str(tmp_path / name), *SHORT)
        assert code == 0

    for arm in ("filter_on", "filter_off"):
        for fname in ("pair_1.csv", "agents.csv", "metrics.json"):
            first = (tmp_path / "first" / arm / fname).read_bytes()
            second = (tmp_path / "second" / arm / fname).read_bytes()
            assert first == second, f"{arm}/{fname}"
    assert (tmp_path / "first" / "compare_summary.csv").exists()


def test_run_command_writes_outputs(tmp_path, scenario_dir, restore_logging):
    code = _cli(tmp_path, "run", str(scenario_dir / "two_robot.yaml"), "-o", str(tmp_path / "run"), *SHORT)
    assert code == 0
    assert (tmp_path / "run" / "pair_1.csv").exists()
    assert (tmp_path / "logs" / "fovsafe.log").exists()


def test_missing_scenario_exit_code(tmp_path, restore_logging):
    assert _cli(tmp_path, "run", str(tmp_path / "missing.yaml")) == simulate.EXIT_CONFIG


def test_unknown_override_exit_code(tmp_path, scenario_dir, restore_logging):
    code = _cli(tmp_path, "run", str(scenario_dir / "two_robot.yaml"), "--set", "bogus=1")
    assert code == simulate.EXIT_CONFIG


def test_malformed_override_exit_code(tmp_path, scenario_dir, restore_logging):
    code = _cli(tmp_path, "run", str(scenario_dir / "two_robot.yaml"), "--set", "no-equals-sign")
    assert code == simulate.EXIT_CONFIG


def test_degenerate_run_exit_code(tmp_path, restore_logging):
    path = tmp_path / "collapsed.yaml"
    path.write_text(
        "name: collapsed\n"
        "n_agents: 2\n"
        "stages: [{duration: 1.0, setpoints: {L_d: 1.5, alpha_d: 0.0}}]\n"
        "leader_script: [{duration: 1.0, v: 0.0, omega: 0.0}]\n"
        "initial_poses: [[0.1, 0.0, 0.0], [0.0, 0.0, 0.0]]\n"
    )
    code = _cli(tmp_path, "run", str(path), "-o", str(tmp_path / "out"))
    assert code == simulate.EXIT_FAULT
    assert (tmp_path / "out" / "pair_1.csv").read_text() == ",".join(PAIR_COLUMNS) + "\n"


def test_sweep_and_stats(tmp_path, scenario_dir, restore_logging, capsys):
    code = _cli(
        tmp_path, "sweep", str(scenario_dir / "two_robot.yaml"), "-o", str(tmp_path / "sweep"),
        "--param", "safety.gamma", "--values", "0.2", "1.0", *SHORT,
    )
    assert code == 0
    summary = pd.read_csv(tmp_path / "sweep" / "summary.csv")
    assert list(summary["value"]) == [0.2, 1.0]

    capsys.readouterr()
    assert _cli(tmp_path, "stats") == 0
    assert "total_runs: 2" in capsys.readouterr().out
