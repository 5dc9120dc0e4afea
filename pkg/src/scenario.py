"""
Scenario Module
Scenario configuration dataclasses and the strict YAML loader
"""

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union
import logging

import numpy as np
import yaml

try:
    from .exceptions import ConfigError
    from .geometry import InputBounds, VehicleGeometry, ControlInput
    from .dynamics import IntegratorConfig
    from .formation_controller import ControllerGains, FormationSetpoint
    from .safety import DEFAULT_FOV_TOLERANCE, SafetySet
    from .perception import (
        IDEAL,
        PERCEPTION_MODES,
        BearingClassifierModel,
        DepthEstimatorModel,
    )
    from .qp_solver import check_weight
except ImportError:
    from exceptions import ConfigError
    from geometry import InputBounds, VehicleGeometry, ControlInput
    from dynamics import IntegratorConfig
    from formation_controller import ControllerGains, FormationSetpoint
    from safety import DEFAULT_FOV_TOLERANCE, SafetySet
    from perception import (
        IDEAL,
        PERCEPTION_MODES,
        BearingClassifierModel,
        DepthEstimatorModel,
    )
    from qp_solver import check_weight

logger = logging.getLogger(__name__)

# Stage boundaries are compared against k * dt
TIME_EPS = 1e-9


@dataclass(frozen=True)
class Stage:
    """A time span with one formation setpoint per pair"""
    duration: float
    setpoints: Tuple[FormationSetpoint, ...]

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"Stage duration must be positive, got {self.duration}")
        if not self.setpoints:
            raise ValueError("Stage needs at least one setpoint")


@dataclass(frozen=True)
class LeaderSegment:
    """Constant leader input held for `duration` seconds"""
    duration: float
    v: float
    omega: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"Leader segment duration must be positive, got {self.duration}")
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"Leader input must be finite, got ({self.v}, {self.omega})")


@dataclass(frozen=True)
class PerceptionConfig:
    mode: str = IDEAL
    K_f: float = 0.55
    bearing: BearingClassifierModel = field(default_factory=BearingClassifierModel)
    depth: DepthEstimatorModel = field(default_factory=DepthEstimatorModel)

    def __post_init__(self):
        if self.mode not in PERCEPTION_MODES:
            raise ValueError(f"perception mode must be one of {PERCEPTION_MODES}, got '{self.mode}'")
        if not 0.0 < self.K_f < 1.0:
            raise ValueError(f"K_f must lie in (0, 1), got {self.K_f}")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything one closed-loop run needs"""
    name: str
    n_agents: int
    stages: Tuple[Stage, ...]
    leader_script: Tuple[LeaderSegment, ...]
    safety_filter_enabled: bool = True
    hold_step_correction: bool = True
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    gains: ControllerGains = field(default_factory=ControllerGains)
    safety: SafetySet = field(default_factory=SafetySet)
    input_bounds: InputBounds = field(default_factory=InputBounds)
    qp_weight: np.ndarray = field(default_factory=lambda: np.eye(2))
    geometry: VehicleGeometry = field(default_factory=VehicleGeometry)
    initial_poses: Optional[Tuple[Tuple[float, float, float], ...]] = None
    message_delay_steps: int = 0
    fov_tolerance: float = DEFAULT_FOV_TOLERANCE
    blind_decay: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError(f"n_agents must be >= 2, got {self.n_agents}")
        if not self.stages:
            raise ValueError("At least one stage is required")
        if not self.leader_script:
            raise ValueError("leader_script needs at least one segment")
        n_pairs = self.n_agents - 1
        for k, stage in enumerate(self.stages):
            if len(stage.setpoints) != n_pairs:
                raise ValueError(f"Stage {k} has {len(stage.setpoints)} setpoints for {n_pairs} pairs")
        if self.initial_poses is not None and len(self.initial_poses) != self.n_agents:
            raise ValueError(f"initial_poses has {len(self.initial_poses)} entries for {self.n_agents} agents")
        if self.message_delay_steps < 0:
            raise ValueError(f"message_delay_steps must be >= 0, got {self.message_delay_steps}")
        if self.fov_tolerance < 0:
            raise ValueError(f"fov_tolerance must be >= 0, got {self.fov_tolerance}")
        if not 0.0 <= self.blind_decay <= 1.0:
            raise ValueError(f"blind_decay must lie in [0, 1], got {self.blind_decay}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "qp_weight", check_weight(self.qp_weight))

    @property
    def n_pairs(self) -> int:
        return self.n_agents - 1

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.stages))

    @property
    def n_steps(self) -> int:
        return int(round(self.total_duration / self.integrator.dt))

    def stage_index(self, t: float) -> int:
        end = 0.0
        for k, stage in enumerate(self.stages):
            end += stage.duration
            if t < end - TIME_EPS:
                return k
        return len(self.stages) - 1

    def setpoint(self, t: float, pair: int) -> FormationSetpoint:
        """Setpoint of pair (1-based follower index) at time t"""
        return self.stages[self.stage_index(t)].setpoints[pair - 1]

    def leader_input(self, t: float) -> ControlInput:
        """Scripted leader input; the last segment is held after the script ends"""
        end = 0.0
        for seg in self.leader_script:
            end += seg.duration
            if t < end - TIME_EPS:
                return ControlInput(seg.v, seg.omega, self.input_bounds)
        last = self.leader_script[-1]
        return ControlInput(last.v, last.omega, self.input_bounds)

    def with_filter(self, enabled: bool) -> "ScenarioConfig":
        return dataclasses.replace(self, safety_filter_enabled=enabled)


SECTION_TYPES = {
    "integrator": IntegratorConfig,
    "gains": ControllerGains,
    "safety": SafetySet,
    "input_bounds": InputBounds,
    "geometry": VehicleGeometry,
}
TOP_LEVEL_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)}


def _keys_of(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(mapping: Any, allowed: Iterable[str], path: str) -> Dict:
    if not isinstance(mapping, dict):
        raise ConfigError(f"'{path}' must be a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"Unknown key '{where}{unknown[0]}'")
    return mapping


def _build(cls, mapping: Any, path: str):
    mapping = _check_keys(mapping, _keys_of(cls), path)
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid '{path}': {e}") from e


def _setpoints(raw: Any, n_pairs: int, path: str) -> Tuple[FormationSetpoint, ...]:
    items = [raw] if isinstance(raw, dict) else raw
    if not isinstance(items, list) or not items:
        raise ConfigError(f"'{path}' must be a setpoint mapping or a non-empty list of them")
    setpoints = tuple(_build(FormationSetpoint, item, f"{path}.{k}") for k, item in enumerate(items))
    if len(setpoints) == 1:
        setpoints = setpoints * n_pairs
    return setpoints


def _safety(raw: Any) -> SafetySet:
    raw = dict(_check_keys(raw, _keys_of(SafetySet), "safety"))
    gamma = raw.get("gamma")
    if isinstance(gamma, (int, float)):
        raw["gamma"] = (float(gamma),) * 4
    elif isinstance(gamma, list):
        raw["gamma"] = tuple(gamma)
    return _build(SafetySet, raw, "safety")


def _perception(raw: Any, psi_max: float) -> PerceptionConfig:
    raw = dict(_check_keys(raw, _keys_of(PerceptionConfig), "perception"))
    bearing = dict(_check_keys(raw.get("bearing", {}), _keys_of(BearingClassifierModel), "perception.bearing"))
    bearing.setdefault("psi_max", psi_max)
    raw["bearing"] = _build(BearingClassifierModel, bearing, "perception.bearing")

    depth = dict(_check_keys(raw.get("depth", {}), _keys_of(DepthEstimatorModel), "perception.depth"))
    if "outlier_offset_range" in depth:
        depth["outlier_offset_range"] = tuple(depth["outlier_offset_range"])
    raw["depth"] = _build(DepthEstimatorModel, depth, "perception.depth")
    return _build(PerceptionConfig, raw, "perception")


def read_scenario_dict(raw: Dict[str, Any]) -> ScenarioConfig:
    """
    Build a ScenarioConfig from a parsed scenario mapping.

    Raises:
        ConfigError: on unknown keys, missing required keys or invalid values
    """
    raw = dict(_check_keys(raw, TOP_LEVEL_KEYS, ""))
    for key in ("name", "n_agents", "stages", "leader_script"):
        if key not in raw:
            raise ConfigError(f"Missing required key '{key}'")

    n_agents = raw["n_agents"]
    if not isinstance(n_agents, int) or n_agents < 2:
        raise ConfigError(f"'n_agents' must be an integer >= 2, got {n_agents!r}")
    n_pairs = n_agents - 1

    if not isinstance(raw["stages"], list) or not raw["stages"]:
        raise ConfigError("'stages' must be a non-empty list")
    stages = []
    for k, item in enumerate(raw["stages"]):
        path = f"stages.{k}"
        item = _check_keys(item, ("duration", "setpoints"), path)
        if "setpoints" not in item or "duration" not in item:
            raise ConfigError(f"'{path}' needs 'duration' and 'setpoints'")
        try:
            stages.append(Stage(float(item["duration"]), _setpoints(item["setpoints"], n_pairs, f"{path}.setpoints")))
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid '{path}': {e}") from e
    raw["stages"] = tuple(stages)

    script = raw["leader_script"]
    if isinstance(script, dict):
        script = [script]
    if not isinstance(script, list) or not script:
        raise ConfigError("'leader_script' must be a non-empty list of segments")
    raw["leader_script"] = tuple(
        _build(LeaderSegment, seg, f"leader_script.{k}") for k, seg in enumerate(script)
    )

    for key, cls in SECTION_TYPES.items():
        if key in raw:
            raw[key] = _safety(raw[key]) if cls is SafetySet else _build(cls, raw[key], key)

    psi_max = raw.get("safety", SafetySet()).psi_max
    raw["perception"] = _perception(raw.get("perception", {}), psi_max)

    if raw.get("initial_poses") is not None:
        try:
            raw["initial_poses"] = tuple(tuple(float(x) for x in pose) for pose in raw["initial_poses"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid 'initial_poses': {e}") from e
        if any(len(pose) != 3 for pose in raw["initial_poses"]):
            raise ConfigError("Each initial pose must be [x, y, theta]")

    if "qp_weight" in raw:
        weight = raw["qp_weight"]
        raw["qp_weight"] = np.eye(2) * float(weight) if isinstance(weight, (int, float)) else np.array(weight, dtype=float)

    try:
        return ScenarioConfig(**raw)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid scenario: {e}") from e


def apply_override(raw: Dict[str, Any], dotted: str, value: Any) -> Dict[str, Any]:
    """
    Set a dotted-path value in a copy of a scenario mapping.

    String values are parsed with YAML scalar rules, so "0.3" becomes a
    float and "[1, 2]" a list. Numeric path segments index into lists.

    Returns:
        Updated copy of raw
    """
    if isinstance(value, str):
        try:
            value = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse override value for '{dotted}': {e}") from e

    updated = copy.deepcopy(raw)
    parts = dotted.split(".")
    node = updated
    for depth, part in enumerate(parts[:-1]):
        where = ".".join(parts[:depth + 1])
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError) as e:
                raise ConfigError(f"Bad list index in override path '{where}'") from e
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise ConfigError(f"Override path '{where}' does not address a section")

    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError) as e:
            raise ConfigError(f"Bad list index in override path '{dotted}'") from e
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"Override path '{dotted}' does not address a section")
    return updated


def read_scenario_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Parse a YAML scenario file into a mapping.

    Raises:
        OSError: if the file cannot be read
        ConfigError: if it is not a YAML mapping
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse scenario file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Scenario file {path} must contain a mapping")
    return raw


def load_scenario(path: Union[str, Path], overrides: Iterable[Tuple[str, Any]] = ()) -> ScenarioConfig:
    """
    Load, override and validate a scenario file.

    Args:
        path: YAML file
        overrides: (dotted path, value) pairs applied before validation

    Returns:
        ScenarioConfig
    """
    raw = read_scenario_file(path)
    for dotted, value in overrides:
        raw = apply_override(raw, dotted, value)
    cfg = read_scenario_dict(raw)
    logger.info(
        f"Loaded scenario '{cfg.name}': {cfg.n_agents} agents, {len(cfg.stages)} stages, "
        f"{cfg.total_duration:.1f} s, filter={'on' if cfg.safety_filter_enabled else 'off'}"
    )
    return cfg


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    scenarios_dir = Path(__file__).parent.parent / "scenarios"
    for path in sorted(scenarios_dir.glob("*.yaml")):
        cfg = load_scenario(path)
        print(f"{path.name}: {cfg.n_steps} steps, stages={[s.duration for s in cfg.stages]}")
