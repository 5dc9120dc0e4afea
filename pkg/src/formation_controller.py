"""
Formation Controller Module
Distributed feedback-linearization controller for one leader-follower pair
"""

import math
from dataclasses import dataclass
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
    from .dynamics import pair_matrices
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
    from dynamics import pair_matrices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FormationSetpoint:
    """Desired distance and leader-heading angle of a pair"""
    L_d: float
    alpha_d: float

    def __post_init__(self):
        if not self.L_d > 0:
            raise ValueError(f"Setpoint distance L_d must be positive, got {self.L_d}")


@dataclass(frozen=True)
class ControllerGains:
    """Linear tracking gains of the linearized (L, alpha) error dynamics"""
    K_L: float = 1.0
    K_alpha: float = 0.15

    def __post_init__(self):
        if not (self.K_L > 0 and self.K_alpha > 0):
            raise ValueError(f"Controller gains must be positive, got ({self.K_L}, {self.K_alpha})")


def linearizing_matrix(p: PairState, geom: VehicleGeometry) -> np.ndarray:
    """Closed-form inverse of g(phi, L)"""
    d, L = geom.d, p.L
    cphi, sphi = math.cos(p.phi), math.sin(p.phi)
    return np.array([
        [-cphi, -L * sphi],
        [-sphi / d, L * cphi / d],
    ])


def tracking_error(p: PairState, sp: FormationSetpoint) -> np.ndarray:
    """Setpoint error (L_d - L, wrapped alpha_d - alpha)"""
    return np.array([sp.L_d - p.L, wrap_angle(sp.alpha_d - p.alpha)])


def nominal_control(
    p: PairState,
    u_leader: ControlInput,
    sp: FormationSetpoint,
    gains: ControllerGains,
    geom: VehicleGeometry,
    bounds: InputBounds = DEFAULT_BOUNDS
) -> ControlInput:
    """
    Feedback-linearizing formation control law.

    Renders the pair dynamics linear and decoupled:
    dL/dt = K_L (L_d - L), dalpha/dt = K_alpha (alpha_d - alpha).
    The output is not saturated; the safety filter owns the input box.

    Args:
        p: (Estimated) pair state
        u_leader: Leader input received from the neighbor channel
        sp: Formation setpoint
        gains: Tracking gains
        geom: Vehicle geometry
        bounds: Input box attached to the returned command

    Returns:
        Nominal follower input

    Raises:
        DegenerateGeometry: when L is below the degeneracy threshold
    """
    if p.L < DEGENERACY_THRESHOLD:
        raise DegenerateGeometry(f"Controller undefined at L={p.L:.3e}")

    error = tracking_error(p, sp)
    desired_rate = np.array([gains.K_L * error[0], gains.K_alpha * error[1]])
    f_mat = pair_matrices(p, geom).f_mat

    u = linearizing_matrix(p, geom) @ (desired_rate - f_mat @ u_leader.as_array())
    return ControlInput.from_array(u, bounds)
