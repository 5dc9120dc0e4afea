"""
Safety Module
Field-of-view and depth barrier functions and the CBF-QP safety filter
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple
import logging

import numpy as np

try:
    from .exceptions import DegenerateGeometry
    from .geometry import (
        DEFAULT_BOUNDS,
        DEGENERACY_THRESHOLD,
        ControlInput,
        InputBounds,
        PairState,
        VehicleGeometry,
        wrap_angle,
    )
    from .dynamics import IntegratorConfig, pair_matrices, step_pair
    from .qp_solver import INFEASIBLE, ConstraintRow, QpProblem, QpSolution, solve_qp
    from .monitoring import log_filter_event
except ImportError:
    from exceptions import DegenerateGeometry
    from geometry import (
        DEFAULT_BOUNDS,
        DEGENERACY_THRESHOLD,
        ControlInput,
        InputBounds,
        PairState,
        VehicleGeometry,
        wrap_angle,
    )
    from dynamics import IntegratorConfig, pair_matrices, step_pair
    from qp_solver import INFEASIBLE, ConstraintRow, QpProblem, QpSolution, solve_qp
    from monitoring import log_filter_event

logger = logging.getLogger(__name__)

# h = A r + B + C (theta_follower - theta_leader), r = (L, alpha)
A_MAT = np.array([
    [1.0, 0.0],
    [-1.0, 0.0],
    [0.0, -1.0],
    [0.0, 1.0],
])
C_VEC = np.array([0.0, 0.0, -1.0, 1.0])
# C times the selector of omega in u = (v, omega)
C_BAR = np.outer(C_VEC, [0.0, 1.0])

DEFAULT_FOV_TOLERANCE = 1e-3
HOLD_STEP_PASSES = 3


@dataclass(frozen=True)
class SafetySet:
    """Depth band [D_min, D_max], half field of view psi_max and CBF slopes gamma"""
    D_min: float = 0.6
    D_max: float = 8.0
    psi_max: float = 0.5236
    gamma: Tuple[float, float, float, float] = (0.45, 0.45, 0.45, 0.45)

    def __post_init__(self):
        if not 0.0 < self.D_min < self.D_max:
            raise ValueError(f"Need 0 < D_min < D_max, got ({self.D_min}, {self.D_max})")
        if not 0.0 < self.psi_max < math.pi / 2:
            raise ValueError(f"psi_max must lie in (0, pi/2), got {self.psi_max}")
        gamma = tuple(float(g) for g in self.gamma)
        if len(gamma) != 4 or not all(g > 0 for g in gamma):
            raise ValueError(f"gamma must be four positive slopes, got {self.gamma}")
        object.__setattr__(self, "gamma", gamma)

    @property
    def B(self) -> np.ndarray:
        return np.array([-self.D_min, self.D_max, self.psi_max, self.psi_max])


@dataclass(frozen=True, eq=False)
class BarrierValues:
    """
    Barrier vector ordered as
    (L - D_min, D_max - L, psi_max + phi, psi_max - phi)
    """
    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(4))

    def min(self) -> float:
        return float(self.h.min())

    def __iter__(self):
        return iter(self.h.tolist())


def barrier_values(
    p: PairState,
    theta_leader: float,
    theta_follower: float,
    safety_set: SafetySet
) -> BarrierValues:
    """
    Evaluate h(r) = A r + B + C (theta_follower - theta_leader).

    The heading difference is wrapped together with alpha, so h3 and h4 are
    psi_max +/- wrap(theta_leader - theta_follower - alpha), i.e. the bearing
    margins to the two FOV edges.

    Args:
        p: Pair state (L, alpha)
        theta_leader: Leader heading
        theta_follower: Follower heading
        safety_set: Safe-set parameters

    Returns:
        BarrierValues
    """
    bearing = wrap_angle(theta_leader - theta_follower - p.alpha)
    # theta_follower - theta_leader up to a multiple of 2 pi
    dtheta = -bearing - p.alpha
    h = A_MAT @ p.r + safety_set.B + C_VEC * dtheta
    return BarrierValues(h)


def assemble_cbf_constraints(
    p: PairState,
    u_leader: ControlInput,
    theta_leader: float,
    theta_follower: float,
    safety_set: SafetySet,
    geom: VehicleGeometry
) -> List[ConstraintRow]:
    """
    Affine CBF conditions dh_k/dt + gamma_k h_k >= 0 in the follower input.

    Row k is (a_k, b_k) with a_k = [A g + C_bar]_k and
    b_k = [(A f - C_bar) u_leader]_k + gamma_k h_k.

    Raises:
        DegenerateGeometry: when L is below the degeneracy threshold
    """
    if p.L < DEGENERACY_THRESHOLD:
        raise DegenerateGeometry(f"Barrier constraints undefined at L={p.L:.3e}")

    mats = pair_matrices(p, geom)
    h = barrier_values(p, theta_leader, theta_follower, safety_set).h
    gamma = np.array(safety_set.gamma)

    a_rows = A_MAT @ mats.g_mat + C_BAR
    b_vals = (A_MAT @ mats.f_mat - C_BAR) @ u_leader.as_array() + gamma * h
    return [(a_rows[k].copy(), float(b_vals[k])) for k in range(4)]


def camera_sees(h: BarrierValues, tolerance: float = DEFAULT_FOV_TOLERANCE) -> bool:
    """True iff the leader lies inside the depth band and the FOV cone (up to tolerance)"""
    return bool(np.all(h.h >= -tolerance))


def hold_step_gap(
    p: PairState,
    rows: List[ConstraintRow],
    u_follower: ControlInput,
    u_leader: ControlInput,
    theta_leader: float,
    theta_follower: float,
    safety_set: SafetySet,
    geom: VehicleGeometry,
    integrator: IntegratorConfig
) -> np.ndarray:
    """
    Barrier values after one held step minus their first-order prediction
    h + dt dh/dt, per constraint. Negative entries are barrier lost to the
    held inputs beyond what the continuous-time rows account for.
    """
    dt = integrator.dt
    h = barrier_values(p, theta_leader, theta_follower, safety_set).h
    u = u_follower.as_array()
    rate = np.array([a @ u + b for a, b in rows]) - np.array(safety_set.gamma) * h

    p_next = step_pair(p, u_follower, u_leader, geom, integrator)
    h_next = barrier_values(
        p_next,
        theta_leader + dt * u_leader.omega,
        theta_follower + dt * u_follower.omega,
        safety_set,
    ).h
    return h_next - (h + dt * rate)


def _hold_step_solve(
    problem: QpProblem,
    solution: QpSolution,
    p: PairState,
    u_leader: ControlInput,
    theta_leader: float,
    theta_follower: float,
    safety_set: SafetySet,
    geom: VehicleGeometry,
    integrator: IntegratorConfig
) -> QpSolution:
    """
    Tighten each row by the barrier its held step loses and re-solve, so
    that h_k one step ahead stays above (1 - gamma_k dt) h_k.

    An infeasible solution of the pure rows is returned as is; a pass whose
    tightened rows are infeasible keeps the previous solution.
    """
    if solution.status == INFEASIBLE:
        return solution
    rows = list(problem.rows)
    for _ in range(HOLD_STEP_PASSES):
        gap = hold_step_gap(
            p, rows, solution.u_safe, u_leader, theta_leader, theta_follower,
            safety_set, geom, integrator,
        )
        shift = np.minimum(gap, 0.0) / integrator.dt
        if not np.any(shift < 0.0):
            break
        previous = solution.u_safe.as_array()
        tightened = [(a, b + s) for (a, b), s in zip(rows, shift)]
        candidate = solve_qp(QpProblem(P=problem.P, u_nom=problem.u_nom, rows=tightened, bounds=problem.bounds))
        if candidate.status == INFEASIBLE:
            logger.debug(f"Held-step tightening infeasible (violation {candidate.max_violation:.3e}), keeping previous input")
            break
        solution = candidate
        if np.array_equal(solution.u_safe.as_array(), previous):
            break
    return solution


def safety_filter(
    p: PairState,
    u_leader: ControlInput,
    u_nominal: ControlInput,
    theta_leader: float,
    theta_follower: float,
    safety_set: SafetySet,
    geom: VehicleGeometry,
    P: Optional[np.ndarray] = None,
    bounds: Optional[InputBounds] = None,
    pair_index: int = 0,
    t: float = 0.0,
    integrator: Optional[IntegratorConfig] = None
) -> QpSolution:
    """
    Minimally modify the nominal input so the four barrier conditions hold.

    Args:
        p: Pair state used by the filter (estimated in closed loop)
        u_leader: Communicated leader input
        u_nominal: Formation controller output
        theta_leader: Communicated leader heading
        theta_follower: Own heading
        safety_set: Safe-set parameters
        geom: Vehicle geometry
        P: QP cost weight (identity when None)
        bounds: Input box (taken from u_nominal when None)
        pair_index: Follower index, for the event log
        t: Simulation time, for the event log
        integrator: When given, rows are also tightened by the barrier one
            held step of this integrator loses (see hold_step_gap)

    Returns:
        QpSolution
    """
    if P is None:
        P = np.eye(2)
    if bounds is None:
        bounds = u_nominal.bounds

    h = barrier_values(p, theta_leader, theta_follower, safety_set)
    rows = assemble_cbf_constraints(p, u_leader, theta_leader, theta_follower, safety_set, geom)
    problem = QpProblem(P=P, u_nom=u_nominal, rows=rows, bounds=bounds)
    solution = solve_qp(problem)
    if integrator is not None:
        solution = _hold_step_solve(
            problem, solution, p, u_leader, theta_leader, theta_follower, safety_set, geom, integrator
        )

    log_filter_event(
        pair=pair_index,
        t=t,
        h=h.h,
        status=solution.status,
        active_set=solution.active_set,
        u_nom=u_nominal.as_array(),
        u_safe=solution.u_safe.as_array(),
    )
    return solution


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)

    geom = VehicleGeometry(0.1)
    sset = SafetySet()
    p = PairState(1.5, -0.45, 0.45)
    u_leader = ControlInput(0.5, 0.0)

    print(f"h = {list(barrier_values(p, 0.0, 0.0, sset))}")
    sol = safety_filter(p, u_leader, ControlInput(0.5, 0.5), 0.0, 0.0, sset, geom)
    print(f"Filtered: {sol}")
