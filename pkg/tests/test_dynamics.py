"""
Dynamics tests

 Group 1: integrator settings and single-agent steps
 Group 2: pair matrices
 Group 3: pair rates against finite differences of integrated global motion
"""

import math

import numpy as np
import pytest

from exceptions import DegenerateGeometry
from geometry import AgentState, ControlInput, PairState, VehicleGeometry, pair_state_from_global, wrap_angle
from dynamics import IntegratorConfig, pair_matrices, pair_rate, step_agent, step_pair

GEOM = VehicleGeometry(d=0.1)


# ── Group 1 ───────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("dt", [0.0, -0.01, 0.2])
def test_integrator_rejects_bad_dt(dt):
    with pytest.raises(ValueError):
        IntegratorConfig(dt=dt)


def test_integrator_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="midpoint")


def test_euler_straight_line():
    a = step_agent(AgentState(0.0, 0.0, 0.0), ControlInput(1.0, 0.0), IntegratorConfig(0.05, "euler"))
    assert (a.x, a.y, a.theta) == pytest.approx((0.05, 0.0, 0.0), abs=1e-15)


def test_step_records_applied_input():
    a = step_agent(AgentState(0.0, 0.0, 0.0), ControlInput(0.3, -0.2), IntegratorConfig())
    assert (a.v, a.omega) == (0.3, -0.2)


def test_rk4_unit_circle():
    """One second on a unit-radius arc matches the closed form"""
    cfg = IntegratorConfig(0.05, "rk4")
    a = AgentState(0.0, 0.0, 0.0)
    for _ in range(20):
        a = step_agent(a, ControlInput(1.0, 1.0), cfg)
    assert a.x == pytest.approx(math.sin(1.0), abs=1e-6)
    assert a.y == pytest.approx(1.0 - math.cos(1.0), abs=1e-6)
    assert a.theta == pytest.approx(1.0, abs=1e-12)


# ── Group 2 ───────────────────────────────────────────────────────────────────

def test_pair_matrices_head_on():
    mats = pair_matrices(PairState(1.0, 0.0, 0.0), GEOM)
    np.testing.assert_allclose(mats.g_mat, [[-1.0, 0.0], [0.0, 0.1]], atol=1e-15)
    np.testing.assert_allclose(mats.f_mat, [[1.0, 0.0], [0.0, 1.0]], atol=1e-15)


def test_g_determinant():
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = PairState(rng.uniform(0.2, 6.0), rng.uniform(-3, 3), rng.uniform(-3, 3))
        det = np.linalg.det(pair_matrices(p, GEOM).g_mat)
        assert det == pytest.approx(-GEOM.d / p.L, rel=1e-9)


def test_pair_matrices_degenerate():
    with pytest.raises(DegenerateGeometry):
        pair_matrices(PairState(1e-12, 0.0, 0.0), GEOM)


# ── Group 3 ───────────────────────────────────────────────────────────────────

def _random_pair(rng):
    follower = AgentState(*rng.uniform(-3, 3, 2), rng.uniform(-math.pi, math.pi))
    bearing = rng.uniform(-math.pi, math.pi)
    dist = rng.uniform(0.5, 3.0)
    fx = follower.x + GEOM.d * math.cos(follower.theta)
    fy = follower.y + GEOM.d * math.sin(follower.theta)
    leader = AgentState(
        fx + dist * math.cos(follower.theta + bearing),
        fy + dist * math.sin(follower.theta + bearing),
        rng.uniform(-math.pi, math.pi),
    )
    return leader, follower


def test_pair_rate_matches_finite_differences():
    """Forward-difference error of (L, alpha) shrinks at least linearly with dt"""
    rng = np.random.default_rng(3)
    samples = []
    for _ in range(100):
        leader, follower = _random_pair(rng)
        u_l = ControlInput(*rng.uniform([-1, -2], [1, 2]))
        u_f = ControlInput(*rng.uniform([-1, -2], [1, 2]))
        samples.append((leader, follower, u_l, u_f))

    errors = []
    for dt in (1e-3, 5e-4, 2.5e-4, 1.25e-4):
        cfg = IntegratorConfig(dt, "rk4")
        worst = 0.0
        for leader, follower, u_l, u_f in samples:
            p0 = pair_state_from_global(leader, follower, GEOM)
            p1 = pair_state_from_global(step_agent(leader, u_l, cfg), step_agent(follower, u_f, cfg), GEOM)
            fd = np.array([(p1.L - p0.L) / dt, wrap_angle(p1.alpha - p0.alpha) / dt])
            worst = max(worst, float(np.abs(fd - np.array(pair_rate(p0, u_f, u_l, GEOM))).max()))
        errors.append(worst)

    assert errors[0] < 1e-1, f"finite-difference error too large: {errors}"
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= 0.6 * coarse + 1e-9, f"error not shrinking linearly: {errors}"


def test_step_pair_matches_stepping_both_agents():
    """One RK4 step of the relative state lands where the two stepped agents put the pair"""
    rng = np.random.default_rng(5)
    cfg = IntegratorConfig(0.05, "rk4")
    checked = 0
    while checked < 200:
        leader, follower = _random_pair(rng)
        p0 = pair_state_from_global(leader, follower, GEOM)
        if p0.L < 1.0:
            continue
        u_l = ControlInput(*rng.uniform([-1, -2], [1, 2]))
        u_f = ControlInput(*rng.uniform([-1, -2], [1, 2]))

        predicted = step_pair(p0, u_f, u_l, GEOM, cfg)
        actual = pair_state_from_global(step_agent(leader, u_l, cfg), step_agent(follower, u_f, cfg), GEOM)
        assert predicted.L == pytest.approx(actual.L, abs=1e-5)
        assert abs(wrap_angle(predicted.alpha - actual.alpha)) <= 1e-5
        assert abs(wrap_angle(predicted.phi - actual.phi)) <= 1e-5
        checked += 1


def test_step_pair_degenerate():
    with pytest.raises(DegenerateGeometry):
        step_pair(PairState(1e-12, 0.0, 0.0), ControlInput(0.0, 0.0), ControlInput(0.0, 0.0), GEOM, IntegratorConfig())
