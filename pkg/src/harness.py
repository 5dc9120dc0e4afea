"""
Simulation Harness Module
Runs a leader-follower chain through a staged scenario and collects metrics
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np

try:
    from .exceptions import DegenerateGeometry
    from .geometry import (
        ZERO_INPUT,
        AgentState,
        ControlInput,
        PairState,
        VehicleGeometry,
        pair_state_from_global,
        wrap_angle,
    )
    from .dynamics import step_agent
    from .formation_controller import nominal_control
    from .safety import barrier_values, camera_sees, safety_filter
    from .perception import PairEstimator
    from .messaging import MessageChannel, NeighborMessage
    from .qp_solver import FILTERED, INFEASIBLE, NOMINAL_FEASIBLE
    from .scenario import ScenarioConfig
    from .monitoring import log_run_event
except ImportError:
    from exceptions import DegenerateGeometry
    from geometry import (
        ZERO_INPUT,
        AgentState,
        ControlInput,
        PairState,
        VehicleGeometry,
        pair_state_from_global,
        wrap_angle,
    )
    from dynamics import step_agent
    from formation_controller import nominal_control
    from safety import barrier_values, camera_sees, safety_filter
    from perception import PairEstimator
    from messaging import MessageChannel, NeighborMessage
    from qp_solver import FILTERED, INFEASIBLE, NOMINAL_FEASIBLE
    from scenario import ScenarioConfig
    from monitoring import log_run_event

logger = logging.getLogger(__name__)

BLIND = "blind"
UNFILTERED = "unfiltered"
STATUSES = (NOMINAL_FEASIBLE, FILTERED, INFEASIBLE, BLIND, UNFILTERED)

PAIR_COLUMNS = [
    "t", "L_true", "alpha_true", "phi_true", "L_filt", "phi_filt",
    "h1", "h2", "h3", "h4", "v_nom", "w_nom", "v_safe", "w_safe", "status", "visible",
    "L_raw", "phi_raw", "L_d", "alpha_d", "stage", "active_set",
]


@dataclass
class ChainState:
    """Agents of the chain and the pairs linking agents i-1 and i"""
    time: float
    agents: List[AgentState]
    pairs: List[PairState]

    @classmethod
    def from_agents(cls, time: float, agents: List[AgentState], geom: VehicleGeometry) -> "ChainState":
        pairs = [pair_state_from_global(agents[i - 1], agents[i], geom) for i in range(1, len(agents))]
        return cls(time, list(agents), pairs)


@dataclass
class PairMetrics:
    pair: int
    n_stages: int
    min_h: List[float] = field(default_factory=lambda: [math.inf] * 4)
    violation_steps: int = 0
    blind_steps: int = 0
    infeasible_steps: int = 0
    filter_active_steps: int = 0
    first_violation_t: Optional[float] = None
    first_blind_t: Optional[float] = None
    stage_violations: List[int] = field(default_factory=list)
    rmse_L: List[float] = field(default_factory=list)
    rmse_alpha: List[float] = field(default_factory=list)
    bearing_mae_raw: float = math.nan
    bearing_mae_filtered: float = math.nan
    depth_rejections: int = 0
    # Accumulators, folded into the public fields by finalize()
    _sq_L: List[float] = field(default_factory=list, repr=False)
    _sq_alpha: List[float] = field(default_factory=list, repr=False)
    _stage_steps: List[int] = field(default_factory=list, repr=False)
    _abs_raw: float = field(default=0.0, repr=False)
    _abs_filtered: float = field(default=0.0, repr=False)
    _measured: int = field(default=0, repr=False)

    def __post_init__(self):
        self.stage_violations = [0] * self.n_stages
        self._sq_L = [0.0] * self.n_stages
        self._sq_alpha = [0.0] * self.n_stages
        self._stage_steps = [0] * self.n_stages

    def finalize(self):
        self.rmse_L = [
            math.sqrt(s / n) if n else math.nan for s, n in zip(self._sq_L, self._stage_steps)
        ]
        self.rmse_alpha = [
            math.sqrt(s / n) if n else math.nan for s, n in zip(self._sq_alpha, self._stage_steps)
        ]
        if self._measured:
            self.bearing_mae_raw = self._abs_raw / self._measured
            self.bearing_mae_filtered = self._abs_filtered / self._measured

    @property
    def min_h_overall(self) -> float:
        return min(self.min_h)

    def to_dict(self) -> Dict:
        data = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        data.pop("n_stages")
        return _json_safe(data)


@dataclass
class RunMetrics:
    scenario: str
    filter_enabled: bool
    seed: int
    steps: int = 0
    degenerate: bool = False
    fault: Optional[str] = None
    pairs: List[PairMetrics] = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return sum(p.violation_steps for p in self.pairs)

    @property
    def total_infeasible(self) -> int:
        return sum(p.infeasible_steps for p in self.pairs)

    @property
    def has_fault(self) -> bool:
        """Infeasible QP steps or a degenerate-geometry abort"""
        return self.degenerate or self.total_infeasible > 0

    def to_dict(self) -> Dict:
        return _json_safe({
            "scenario": self.scenario,
            "filter_enabled": self.filter_enabled,
            "seed": self.seed,
            "steps": self.steps,
            "degenerate": self.degenerate,
            "fault": self.fault,
            "total_violations": self.total_violations,
            "total_infeasible": self.total_infeasible,
            "pairs": [p.to_dict() for p in self.pairs],
        })


def _json_safe(value):
    """Replace non-finite floats with None so metrics serialize as strict JSON"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


@dataclass
class RunLog:
    """Per-pair step records plus the agent poses at every logged step"""
    scenario: str
    filter_enabled: bool
    n_agents: int
    rows: Dict[int, List[Dict]] = field(default_factory=dict)
    poses: List[np.ndarray] = field(default_factory=list)
    times: List[float] = field(default_factory=list)

    def __post_init__(self):
        for i in range(1, self.n_agents):
            self.rows.setdefault(i, [])

    @property
    def n_pairs(self) -> int:
        return self.n_agents - 1


def default_initial_agents(cfg: ScenarioConfig) -> List[AgentState]:
    """
    Leader at the origin heading along +x; each follower shares its leader's
    heading with its front point at the stage-1 setpoint behind it.
    """
    d = cfg.geometry.d
    agents = [AgentState(0.0, 0.0, 0.0)]
    for i in range(1, cfg.n_agents):
        leader = agents[-1]
        sp = cfg.stages[0].setpoints[i - 1]
        theta = leader.theta
        phi = -sp.alpha_d
        front_x = leader.x - sp.L_d * math.cos(theta + phi)
        front_y = leader.y - sp.L_d * math.sin(theta + phi)
        agents.append(AgentState(front_x - d * math.cos(theta), front_y - d * math.sin(theta), theta))
    return agents


def initial_agents(cfg: ScenarioConfig) -> List[AgentState]:
    if cfg.initial_poses is None:
        return default_initial_agents(cfg)
    return [AgentState(x, y, theta) for x, y, theta in cfg.initial_poses]


def _blind_command(last: ControlInput, decay: float) -> ControlInput:
    return ControlInput(last.v * decay, last.omega, last.bounds)


def run_scenario(cfg: ScenarioConfig) -> Tuple[RunLog, RunMetrics]:
    """
    Simulate the chain for the full scenario duration.

    Per step: the leader follows its script; each follower in chain order
    senses its true pair state, updates its estimators, computes the nominal
    formation input from the filtered estimates and the received leader
    message, passes it through the safety filter when enabled, clamps it to
    the input box and publishes it to its own follower. All agents then
    advance synchronously.

    A degenerate pair geometry stops the run; the partial log is returned
    and the metrics are flagged.

    Args:
        cfg: Validated scenario

    Returns:
        (RunLog, RunMetrics)
    """
    bounds = cfg.input_bounds
    dt = cfg.integrator.dt
    n = cfg.n_agents
    n_stages = len(cfg.stages)

    agents = initial_agents(cfg)
    estimators = {
        i: PairEstimator(
            mode=cfg.perception.mode,
            bearing=cfg.perception.bearing,
            depth=cfg.perception.depth,
            K_f=cfg.perception.K_f,
            stream_seed=cfg.seed * 1000 + i,
        )
        for i in range(1, n)
    }
    channels = {
        i: MessageChannel(
            cfg.message_delay_steps,
            initial=NeighborMessage(i - 1, ZERO_INPUT, agents[i - 1].theta, 0.0),
        )
        for i in range(1, n)
    }
    last_cmd = {i: ControlInput(0.0, 0.0, bounds) for i in range(1, n)}

    log = RunLog(cfg.name, cfg.safety_filter_enabled, n)
    metrics = RunMetrics(cfg.name, cfg.safety_filter_enabled, cfg.seed)
    metrics.pairs = [PairMetrics(pair=i, n_stages=n_stages) for i in range(1, n)]

    log_run_event(cfg.name, "run_started", details={
        "agents": n, "steps": cfg.n_steps, "filter": cfg.safety_filter_enabled,
        "perception": cfg.perception.mode,
    })

    stage = -1
    for k in range(cfg.n_steps):
        t = k * dt
        if cfg.stage_index(t) != stage:
            stage = cfg.stage_index(t)
            logger.info(f"[{cfg.name}] t={t:.2f}s entering stage {stage + 1}/{n_stages}")

        try:
            commands, pending = _step_followers(
                cfg, t, stage, agents, estimators, channels, last_cmd, metrics
            )
        except DegenerateGeometry as e:
            metrics.degenerate = True
            metrics.fault = str(e)
            logger.error(f"[{cfg.name}] t={t:.2f}s degenerate geometry, stopping run: {e}")
            log_run_event(cfg.name, "degenerate_geometry", "ERROR", {"t": t, "error": str(e)})
            break

        for i, pm, p_true, sp, h, seen, est, status, row in pending:
            _update_metrics(pm, t, stage, p_true, sp, h, seen, est, status)
            log.rows[i].append(row)

        log.times.append(t)
        log.poses.append(np.array([[a.x, a.y, a.theta] for a in agents]))
        agents = [step_agent(a, u, cfg.integrator) for a, u in zip(agents, commands)]
        metrics.steps = k + 1

    for i, pm in enumerate(metrics.pairs, start=1):
        pm.depth_rejections = estimators[i].depth_rejections
        pm.finalize()

    log_run_event(cfg.name, "run_finished", details={
        "steps": metrics.steps,
        "violations": metrics.total_violations,
        "infeasible": metrics.total_infeasible,
        "degenerate": metrics.degenerate,
    })
    return log, metrics


def _step_followers(cfg: ScenarioConfig, t, stage, agents, estimators, channels, last_cmd, metrics):
    """
    Sense, estimate, control and filter every follower for one step.

    Returns:
        (commands for all agents, pending metric/log records per follower)
    """
    geom = cfg.geometry
    bounds = cfg.input_bounds
    n = cfg.n_agents

    chain = ChainState.from_agents(t, agents, geom)
    commands = [cfg.leader_input(t)]
    channels[1].publish(NeighborMessage(0, commands[0], agents[0].theta, t))
    pending = []

    for i in range(1, n):
        follower = agents[i]
        p_true = chain.pairs[i - 1]
        sp = cfg.setpoint(t, i)

        h_true = barrier_values(p_true, agents[i - 1].theta, follower.theta, cfg.safety)
        seen = camera_sees(h_true, cfg.fov_tolerance)
        est = estimators[i].observe(t, p_true.L, p_true.phi, seen)
        msg = channels[i].receive(t)

        u_nom = None
        active_set: Tuple[int, ...] = ()
        if est.visible:
            p_est = PairState(
                est.L_filtered,
                wrap_angle(msg.theta - follower.theta - est.phi_filtered),
                est.phi_filtered,
            )
            u_nom = nominal_control(p_est, msg.u, sp, cfg.gains, geom, bounds)
            if cfg.safety_filter_enabled:
                sol = safety_filter(
                    p_est, msg.u, u_nom, msg.theta, follower.theta,
                    cfg.safety, geom, cfg.qp_weight, bounds, pair_index=i, t=t,
                    integrator=cfg.integrator if cfg.hold_step_correction else None,
                )
                u_cmd, status, active_set = sol.u_safe, sol.status, sol.active_set
                if status == INFEASIBLE:
                    logger.warning(
                        f"[{cfg.name}] t={t:.2f}s pair {i} infeasible safety QP "
                        f"(violation {sol.max_violation:.3e})"
                    )
            else:
                u_cmd, status = u_nom, UNFILTERED
            u_cmd = u_cmd.clamped()
        else:
            u_cmd, status = _blind_command(last_cmd[i], cfg.blind_decay), BLIND

        last_cmd[i] = u_cmd
        commands.append(u_cmd)
        if i + 1 < n:
            channels[i + 1].publish(NeighborMessage(i, u_cmd, follower.theta, t))

        row = {
            "t": t,
            "L_true": p_true.L,
            "alpha_true": p_true.alpha,
            "phi_true": p_true.phi,
            "L_filt": est.L_filtered,
            "phi_filt": est.phi_filtered,
            "h1": h_true.h[0],
            "h2": h_true.h[1],
            "h3": h_true.h[2],
            "h4": h_true.h[3],
            "v_nom": u_nom.v if u_nom is not None else None,
            "w_nom": u_nom.omega if u_nom is not None else None,
            "v_safe": u_cmd.v,
            "w_safe": u_cmd.omega,
            "status": status,
            "visible": est.visible,
            "L_raw": est.L_raw,
            "phi_raw": est.phi_raw,
            "L_d": sp.L_d,
            "alpha_d": sp.alpha_d,
            "stage": stage + 1,
            "active_set": " ".join(str(j) for j in active_set),
        }
        pending.append((i, metrics.pairs[i - 1], p_true, sp, h_true.h, seen, est, status, row))

    return commands, pending


def _update_metrics(pm: PairMetrics, t, stage, p_true, sp, h, seen, est, status):
    pm.min_h = [min(m, float(x)) for m, x in zip(pm.min_h, h)]

    if not seen:
        pm.violation_steps += 1
        pm.stage_violations[stage] += 1
        if pm.first_violation_t is None:
            pm.first_violation_t = t
            logger.info(f"t={t:.2f}s pair {pm.pair} leaves the camera field of view")

    if not est.visible:
        pm.blind_steps += 1
        if pm.first_blind_t is None:
            pm.first_blind_t = t
            logger.info(f"t={t:.2f}s pair {pm.pair} loses sight of its leader")
    elif est.phi_raw is not None:
        pm._abs_raw += abs(est.phi_raw - p_true.phi)
        pm._abs_filtered += abs(est.phi_filtered - p_true.phi)
        pm._measured += 1

    if status == INFEASIBLE:
        pm.infeasible_steps += 1
    if status in (FILTERED, INFEASIBLE):
        pm.filter_active_steps += 1

    pm._sq_L[stage] += (p_true.L - sp.L_d) ** 2
    pm._sq_alpha[stage] += wrap_angle(p_true.alpha - sp.alpha_d) ** 2
    pm._stage_steps[stage] += 1


if __name__ == "__main__":
    from pathlib import Path
    from scenario import load_scenario

    logging.basicConfig(level=logging.INFO)

    cfg = load_scenario(Path(__file__).parent.parent / "scenarios" / "two_robot.yaml")
    for enabled in (True, False):
        _, metrics = run_scenario(cfg.with_filter(enabled))
        pm = metrics.pairs[0]
        print(f"filter={enabled}: violations={pm.violation_steps}, blind={pm.blind_steps}, "
              f"min_h={[round(x, 3) for x in pm.min_h]}")
