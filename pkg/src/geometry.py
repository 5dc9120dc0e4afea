"""
Geometry Module
Core state types and the exact maps between global agent poses and
pair-relative coordinates (L, alpha, phi)
"""

import math
from dataclasses import dataclass, field, replace
from typing import Tuple
import logging

import numpy as np

try:
    from .exceptions import DegenerateGeometry
except ImportError:
    from exceptions import DegenerateGeometry

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Leader center closer than this to the follower front point is rejected
DEGENERACY_THRESHOLD = 1e-9


def wrap_angle(angle: float) -> float:
    """
    Wrap an angle to the half-open interval (-pi, pi].

    Args:
        angle: Angle in radians

    Returns:
        Equivalent angle in (-pi, pi]
    """
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class VehicleGeometry:
    """Center-to-front displacement d of a unicycle agent"""
    d: float = 0.1

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"Vehicle displacement d must be positive, got {self.d}")


@dataclass(frozen=True)
class InputBounds:
    """Admissible input box for (v, omega)"""
    v_min: float = -1.0
    v_max: float = 1.0
    omega_min: float = -2.0
    omega_max: float = 2.0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
        if not self.omega_min < self.omega_max:
            raise ValueError(
                f"omega_min ({self.omega_min}) must be below omega_max ({self.omega_max})"
            )

    def box_rows(self) -> Tuple[Tuple[np.ndarray, float], ...]:
        """Box faces as (a, b) rows meaning a . u + b >= 0"""
        return (
            (np.array([1.0, 0.0]), -self.v_min),
            (np.array([-1.0, 0.0]), self.v_max),
            (np.array([0.0, 1.0]), -self.omega_min),
            (np.array([0.0, -1.0]), self.omega_max),
        )


DEFAULT_BOUNDS = InputBounds()


@dataclass(frozen=True)
class ControlInput:
    """Unicycle input (v, omega) together with its admissible box"""
    v: float
    omega: float
    bounds: InputBounds = field(default=DEFAULT_BOUNDS, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"Control input must be finite, got ({self.v}, {self.omega})")

    @classmethod
    def from_array(cls, values, bounds: InputBounds = DEFAULT_BOUNDS) -> "ControlInput":
        return cls(float(values[0]), float(values[1]), bounds)

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])

    def within_bounds(self, tol: float = 0.0) -> bool:
        b = self.bounds
        return (
            b.v_min - tol <= self.v <= b.v_max + tol
            and b.omega_min - tol <= self.omega <= b.omega_max + tol
        )

    def clamped(self) -> "ControlInput":
        """Saturate into the box (returns self when already inside)"""
        if self.within_bounds():
            return self
        b = self.bounds
        return ControlInput(
            min(max(self.v, b.v_min), b.v_max),
            min(max(self.omega, b.omega_min), b.omega_max),
            b,
        )


ZERO_INPUT = ControlInput(0.0, 0.0)


@dataclass(frozen=True)
class AgentState:
    """Global pose (x, y, theta) and current input of one agent"""
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"Agent input must be finite, got ({self.v}, {self.omega})")

    @property
    def input(self) -> ControlInput:
        return ControlInput(self.v, self.omega)

    def with_input(self, u: ControlInput) -> "AgentState":
        return replace(self, v=u.v, omega=u.omega)


@dataclass(frozen=True)
class FrontPoint:
    """Global coordinates of an agent's front midpoint (camera position)"""
    x_bar: float
    y_bar: float


@dataclass(frozen=True)
class PairState:
    """Relative coordinates of one leader-follower pair"""
    L: float
    alpha: float
    phi: float

    def __post_init__(self):
        if not self.L > 0:
            raise DegenerateGeometry(f"Inter-vehicle distance must be positive, got {self.L}")
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def r(self) -> np.ndarray:
        """Stacked (L, alpha) vector"""
        return np.array([self.L, self.alpha])


def front_point(a: AgentState, geom: VehicleGeometry) -> FrontPoint:
    """
    Front midpoint of an agent.

    Args:
        a: Agent pose
        geom: Vehicle geometry providing d

    Returns:
        FrontPoint at (x + d cos theta, y + d sin theta)
    """
    return FrontPoint(
        a.x + geom.d * math.cos(a.theta),
        a.y + geom.d * math.sin(a.theta),
    )


def pair_state_from_global(
    leader: AgentState,
    follower: AgentState,
    geom: VehicleGeometry
) -> PairState:
    """
    Derive (L, alpha, phi) of a pair from global poses.

    phi is the bearing of the leader center seen from the follower front
    point, counterclockwise positive from the follower heading.

    Args:
        leader: Pose of agent i-1
        follower: Pose of agent i
        geom: Vehicle geometry

    Returns:
        PairState with alpha = theta_{i-1} - theta_i - phi (wrapped)

    Raises:
        DegenerateGeometry: when the leader center sits on the follower front point
    """
    front = front_point(follower, geom)
    dx = leader.x - front.x_bar
    dy = leader.y - front.y_bar
    L = math.hypot(dx, dy)

    if L < DEGENERACY_THRESHOLD:
        raise DegenerateGeometry(f"Leader center coincides with follower front point (L={L:.3e})")

    phi = wrap_angle(math.atan2(dy, dx) - follower.theta)
    alpha = wrap_angle(leader.theta - follower.theta - phi)
    return PairState(L, alpha, phi)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    geom = VehicleGeometry(d=0.1)
    leader = AgentState(1.1, 0.0, 0.0)
    follower = AgentState(0.0, 0.0, 0.0)

    print(f"Front point: {front_point(follower, geom)}")
    print(f"Pair state: {pair_state_from_global(leader, follower, geom)}")

    leader = AgentState(0.1, 1.0, 0.0)
    print(f"Leader to the left: {pair_state_from_global(leader, follower, geom)}")
