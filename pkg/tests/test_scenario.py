"""
Scenario loader tests: shipped files, strict keys, broadcasting and overrides
"""

import copy

import numpy as np
import pytest

from exceptions import ConfigError
from scenario import (
    apply_override,
    load_scenario,
    read_scenario_dict,
    read_scenario_file,
)

MINIMAL = {
    "name": "minimal",
    "n_agents": 3,
    "stages": [{"duration": 2.0, "setpoints": {"L_d": 1.5, "alpha_d": 0.0}}],
    "leader_script": [{"duration": 2.0, "v": 0.5, "omega": 0.0}],
}


def _with(**changes):
    raw = copy.deepcopy(MINIMAL)
    raw.update(changes)
    return raw


# ── shipped scenarios ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("name", ["two_robot", "three_robot", "perception_study", "oval_track"])
def test_shipped_scenarios_load(scenario_dir, name):
    cfg = load_scenario(scenario_dir / f"{name}.yaml")
    assert cfg.name == name
    assert cfg.n_steps > 0


def test_two_robot_program(scenario_dir):
    cfg = load_scenario(scenario_dir / "two_robot.yaml")
    assert cfg.n_agents == 2
    assert [s.duration for s in cfg.stages] == [20.0, 30.0, 20.0]
    assert cfg.n_steps == 1400
    assert cfg.setpoint(25.0, 1).alpha_d == 0.6
    assert cfg.leader_input(10.0).v == 0.5
    assert cfg.seed == 7


def test_stage_boundaries(scenario_dir):
    cfg = load_scenario(scenario_dir / "two_robot.yaml")
    assert cfg.stage_index(19.95) == 0
    assert cfg.stage_index(20.0) == 1
    assert cfg.stage_index(400 * 0.05) == 1
    assert cfg.stage_index(1000.0) == 2


# ── strict keys ───────────────────────────────────────────────────────────────

def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="bogus"):
        read_scenario_dict(_with(bogus=1))


def test_unknown_nested_key_names_path():
    with pytest.raises(ConfigError, match="safety.foo"):
        read_scenario_dict(_with(safety={"foo": 1.0}))
    with pytest.raises(ConfigError, match="perception.bearing.n_class"):
        read_scenario_dict(_with(perception={"bearing": {"n_class": 4}}))


def test_missing_required_key():
    raw = copy.deepcopy(MINIMAL)
    del raw["stages"]
    with pytest.raises(ConfigError, match="stages"):
        read_scenario_dict(raw)


@pytest.mark.parametrize("section, value", [
    ("integrator", {"dt": 0.5}),
    ("safety", {"D_min": 3.0, "D_max": 2.0}),
    ("qp_weight", [[1.0, 0.2], [0.0, 1.0]]),
    ("seed", -3),
    ("n_agents", 1),
])
def test_invalid_values_raise_config_error(section, value):
    with pytest.raises(ConfigError):
        read_scenario_dict(_with(**{section: value}))


def test_setpoint_count_must_match_pairs():
    raw = _with(stages=[{"duration": 2.0, "setpoints": [{"L_d": 1.5, "alpha_d": 0.0}] * 3}])
    with pytest.raises(ConfigError):
        read_scenario_dict(raw)


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        read_scenario_file(tmp_path / "nope.yaml")


def test_non_mapping_file(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        read_scenario_file(path)


# ── broadcasting and defaults ─────────────────────────────────────────────────

def test_single_setpoint_broadcasts_to_all_pairs():
    cfg = read_scenario_dict(MINIMAL)
    assert len(cfg.stages[0].setpoints) == 2
    assert cfg.setpoint(0.0, 2).L_d == 1.5


def test_scalar_gamma_broadcasts():
    cfg = read_scenario_dict(_with(safety={"gamma": 0.3}))
    assert cfg.safety.gamma == (0.3, 0.3, 0.3, 0.3)


def test_bearing_fov_follows_safety_fov():
    cfg = read_scenario_dict(_with(safety={"psi_max": 0.4}))
    assert cfg.perception.bearing.psi_max == 0.4


def test_scalar_qp_weight():
    cfg = read_scenario_dict(_with(qp_weight=2.0))
    np.testing.assert_array_equal(cfg.qp_weight, 2.0 * np.eye(2))


def test_leader_script_holds_last_segment():
    cfg = read_scenario_dict(_with(leader_script=[{"duration": 1.0, "v": 0.2, "omega": 0.1}]))
    u = cfg.leader_input(5.0)
    assert (u.v, u.omega) == (0.2, 0.1)


def test_with_filter_copies():
    cfg = read_scenario_dict(MINIMAL)
    off = cfg.with_filter(False)
    assert cfg.safety_filter_enabled and not off.safety_filter_enabled


def test_hold_step_correction_toggle():
    assert read_scenario_dict(MINIMAL).hold_step_correction
    assert not read_scenario_dict(_with(hold_step_correction=False)).hold_step_correction


# ── overrides ─────────────────────────────────────────────────────────────────

def test_override_parses_yaml_scalars():
    raw = apply_override(MINIMAL, "perception.bearing.misclass_rate", "0.2")
    assert raw["perception"]["bearing"]["misclass_rate"] == 0.2
    assert "perception" not in MINIMAL


def test_override_list_index():
    raw = apply_override(MINIMAL, "stages.0.duration", "5")
    assert read_scenario_dict(raw).total_duration == 5.0


def test_override_bad_index():
    with pytest.raises(ConfigError):
        apply_override(MINIMAL, "stages.4.duration", "5")


def test_load_with_overrides(scenario_dir):
    cfg = load_scenario(scenario_dir / "two_robot.yaml", [("safety.gamma", "0.3"), ("message_delay_steps", "2")])
    assert cfg.safety.gamma == (0.3,) * 4
    assert cfg.message_delay_steps == 2


def test_override_unknown_key_fails_validation(scenario_dir):
    with pytest.raises(ConfigError, match="bogus"):
        load_scenario(scenario_dir / "two_robot.yaml", [("bogus", "1")])
