"""
Formation controller tests: the closed loop of the linearized pair is
exactly K e, and the law handles the obvious special cases.
"""

import math

import numpy as np
import pytest

from exceptions import DegenerateGeometry
from geometry import ControlInput, PairState, VehicleGeometry
from dynamics import pair_matrices, pair_rate
from formation_controller import (
    ControllerGains,
    FormationSetpoint,
    linearizing_matrix,
    nominal_control,
    tracking_error,
)

GEOM = VehicleGeometry(d=0.1)
GAINS = ControllerGains(K_L=1.0, K_alpha=0.15)


def test_linearizing_matrix_inverts_g():
    rng = np.random.default_rng(0)
    for _ in range(500):
        p = PairState(rng.uniform(0.3, 5.0), rng.uniform(-3, 3), rng.uniform(-3, 3))
        product = linearizing_matrix(p, GEOM) @ pair_matrices(p, GEOM).g_mat
        np.testing.assert_allclose(product, np.eye(2), atol=1e-12)


def test_closed_loop_rate_equals_gain_times_error():
    """10 000 random states: r_dot under the nominal law is K e within 1e-9"""
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10_000):
        p = PairState(rng.uniform(0.5, 5.0), rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi))
        u_leader = ControlInput(rng.uniform(-1, 1), rng.uniform(-2, 2))
        sp = FormationSetpoint(rng.uniform(0.6, 4.0), rng.uniform(-1.0, 1.0))
        gains = ControllerGains(rng.uniform(0.1, 2.0), rng.uniform(0.05, 1.0))

        u = nominal_control(p, u_leader, sp, gains, GEOM)
        rate = np.array(pair_rate(p, u, u_leader, GEOM))
        e = tracking_error(p, sp)
        expected = np.array([gains.K_L * e[0], gains.K_alpha * e[1]])
        worst = max(worst, float(np.abs(rate - expected).max()))

    assert worst < 1e-9, f"linearization residual {worst:.3e}"


def test_angle_error_is_wrapped():
    p = PairState(1.5, 3.0, 0.0)
    e = tracking_error(p, FormationSetpoint(1.5, -3.0))
    assert e[1] == pytest.approx(2 * math.pi - 6.0, abs=1e-12)


def test_follower_copies_leader_at_setpoint():
    u = nominal_control(PairState(1.5, 0.0, 0.0), ControlInput(0.5, 0.0), FormationSetpoint(1.5, 0.0), GAINS, GEOM)
    assert (u.v, u.omega) == pytest.approx((0.5, 0.0), abs=1e-12)


def test_output_is_not_saturated():
    """Large errors produce commands outside the input box"""
    u = nominal_control(PairState(6.0, 0.0, 0.0), ControlInput(1.0, 0.0), FormationSetpoint(1.0, 0.0), GAINS, GEOM)
    assert u.v > u.bounds.v_max
    assert not u.within_bounds()


def test_degenerate_distance_raises():
    with pytest.raises(DegenerateGeometry):
        nominal_control(PairState(1e-12, 0.0, 0.0), ControlInput(0.5, 0.0), FormationSetpoint(1.5, 0.0), GAINS, GEOM)


def test_invalid_gains_and_setpoints():
    with pytest.raises(ValueError):
        ControllerGains(K_L=0.0)
    with pytest.raises(ValueError):
        ControllerGains(K_alpha=-0.1)
    with pytest.raises(ValueError):
        FormationSetpoint(0.0, 0.2)
