"""
Dynamics Module
Unicycle kinematics integration and the relative dynamics of a leader-follower pair
"""

import math
from dataclasses import dataclass
from typing import Tuple
import logging

import numpy as np

try:
    from .exceptions import DegenerateGeometry
    from .geometry import (
        DEGENERACY_THRESHOLD,
        AgentState,
        ControlInput,
        PairState,
        VehicleGeometry,
    )
except ImportError:
    from exceptions import DegenerateGeometry
    from geometry import (
        DEGENERACY_THRESHOLD,
        AgentState,
        ControlInput,
        PairState,
        VehicleGeometry,
    )

logger = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings"""
    dt: float = 0.05
    scheme: str = "rk4"

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValueError(f"Integrator dt must lie in (0, 0.1], got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"Unknown integration scheme '{self.scheme}', expected one of {SCHEMES}")


@dataclass(frozen=True)
class PairDynamicsMatrices:
    """Input maps of the pair dynamics: r_dot = g u_follower + f u_leader"""
    g_mat: np.ndarray
    f_mat: np.ndarray


def _unicycle_rate(state: np.ndarray, v: float, omega: float) -> np.ndarray:
    return np.array([v * math.cos(state[2]), v * math.sin(state[2]), omega])


def step_agent(a: AgentState, u: ControlInput, cfg: IntegratorConfig) -> AgentState:
    """
    Advance one agent by one step with the input held constant.

    Args:
        a: Current agent state
        u: Input applied over the step
        cfg: Integrator settings

    Returns:
        New AgentState carrying u as its current input
    """
    dt = cfg.dt
    s = np.array([a.x, a.y, a.theta])

    if cfg.scheme == "euler":
        s_next = s + dt * _unicycle_rate(s, u.v, u.omega)
    else:
        k1 = _unicycle_rate(s, u.v, u.omega)
        k2 = _unicycle_rate(s + 0.5 * dt * k1, u.v, u.omega)
        k3 = _unicycle_rate(s + 0.5 * dt * k2, u.v, u.omega)
        k4 = _unicycle_rate(s + dt * k3, u.v, u.omega)
        s_next = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return AgentState(float(s_next[0]), float(s_next[1]), float(s_next[2]), u.v, u.omega)


def pair_matrices(p: PairState, geom: VehicleGeometry) -> PairDynamicsMatrices:
    """
    Evaluate g(phi, L) and f(alpha, L) of the pair dynamics.

    Args:
        p: Pair state
        geom: Vehicle geometry providing d

    Returns:
        PairDynamicsMatrices

    Raises:
        DegenerateGeometry: when L is below the degeneracy threshold
    """
    if p.L < DEGENERACY_THRESHOLD:
        raise DegenerateGeometry(f"Pair dynamics undefined at L={p.L:.3e}")

    d, L = geom.d, p.L
    cphi, sphi = math.cos(p.phi), math.sin(p.phi)
    calpha, salpha = math.cos(p.alpha), math.sin(p.alpha)

    g_mat = np.array([
        [-cphi, -d * sphi],
        [-sphi / L, d * cphi / L],
    ])
    f_mat = np.array([
        [calpha, 0.0],
        [-salpha / L, 1.0],
    ])
    return PairDynamicsMatrices(g_mat=g_mat, f_mat=f_mat)


def pair_rate(
    p: PairState,
    u_follower: ControlInput,
    u_leader: ControlInput,
    geom: VehicleGeometry
) -> Tuple[float, float]:
    """
    Rates (dL/dt, dalpha/dt) of a pair under the given inputs.

    Returns:
        (dL, dalpha) = g u_follower + f u_leader
    """
    mats = pair_matrices(p, geom)
    rate = mats.g_mat @ u_follower.as_array() + mats.f_mat @ u_leader.as_array()
    return float(rate[0]), float(rate[1])


def _relative_rate(s: np.ndarray, u_follower, u_leader, geom) -> np.ndarray:
    dL, dalpha = pair_rate(PairState(s[0], s[1], s[2]), u_follower, u_leader, geom)
    # alpha + phi = theta_leader - theta_follower
    dphi = u_leader.omega - u_follower.omega - dalpha
    return np.array([dL, dalpha, dphi])


def step_pair(
    p: PairState,
    u_follower: ControlInput,
    u_leader: ControlInput,
    geom: VehicleGeometry,
    cfg: IntegratorConfig
) -> PairState:
    """
    Advance the relative state (L, alpha, phi) of a pair by one step with
    both inputs held, using the same scheme as step_agent.

    Raises:
        DegenerateGeometry: when L leaves the valid range during the step
    """
    dt = cfg.dt
    s = np.array([p.L, p.alpha, p.phi])

    if cfg.scheme == "euler":
        s_next = s + dt * _relative_rate(s, u_follower, u_leader, geom)
    else:
        k1 = _relative_rate(s, u_follower, u_leader, geom)
        k2 = _relative_rate(s + 0.5 * dt * k1, u_follower, u_leader, geom)
        k3 = _relative_rate(s + 0.5 * dt * k2, u_follower, u_leader, geom)
        k4 = _relative_rate(s + dt * k3, u_follower, u_leader, geom)
        s_next = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return PairState(float(s_next[0]), float(s_next[1]), float(s_next[2]))


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    cfg = IntegratorConfig(dt=0.05, scheme="rk4")
    agent = AgentState(0.0, 0.0, 0.0)
    for _ in range(20):
        agent = step_agent(agent, ControlInput(1.0, 1.0), cfg)
    print(f"After 1 s on a unit circle: {agent}")

    p = PairState(1.0, 0.0, 0.0)
    mats = pair_matrices(p, VehicleGeometry(0.1))
    print(f"g = {mats.g_mat.tolist()}")
    print(f"f = {mats.f_mat.tolist()}")
    print(f"det(g) = {np.linalg.det(mats.g_mat):.6f}")
