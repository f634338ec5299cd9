import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionnav.kinematics import (
    BodyTwist,
    KinematicParams,
    Pose,
    WheelSpeeds,
    forward_body,
    forward_global,
    integrate_pose,
    inverse,
    normalize_angle,
)

# ---------------------------------------------------------------------------
# Independent oracles


def drive_matrix_body(r, l):
    """Body-frame drive matrix mapping (w_right, w_left) -> (v_x, v_y, omega)."""
    return np.array([[r / 2, r / 2], [0.0, 0.0], [r / (2 * l), -r / (2 * l)]])


def drive_matrix_global(theta, r, l):
    return np.array(
        [
            [r / 2 * math.cos(theta), r / 2 * math.cos(theta)],
            [r / 2 * math.sin(theta), r / 2 * math.sin(theta)],
            [r / (2 * l), -r / (2 * l)],
        ]
    )


def euler_integrate(pose, v, omega, dt, n_steps):
    """Small-step Euler integration oracle for the arc formula."""
    x, y, theta = pose.x, pose.y, pose.theta
    h = dt / n_steps
    for _ in range(n_steps):
        x += v * math.cos(theta) * h
        y += v * math.sin(theta) * h
        theta += omega * h
    return x, y, theta


finite_params = st.builds(
    KinematicParams,
    wheel_radius=st.floats(0.01, 1.0),
    half_axle=st.floats(0.01, 1.0),
)


# ---------------------------------------------------------------------------
# forward_body


def test_forward_body_straight():
    twist = forward_body(WheelSpeeds(1.0, 1.0), KinematicParams(0.1, 0.2))
    assert twist == BodyTwist(v_x=pytest.approx(0.1), v_y=0.0, omega=pytest.approx(0.0))


def test_forward_body_spin_in_place():
    twist = forward_body(WheelSpeeds(1.0, -1.0), KinematicParams(0.1, 0.2))
    assert twist.v_x == pytest.approx(0.0)
    assert twist.omega == pytest.approx(0.5)


def test_forward_body_matches_matrix_substitution():
    # Expected values computed by matrix-vector substitution into the drive
    # matrix: M(0.05, 0.15) @ [2, 1] = [0.075, 0, 0.16666...].
    expected = drive_matrix_body(0.05, 0.15) @ np.array([2.0, 1.0])
    twist = forward_body(WheelSpeeds(2.0, 1.0), KinematicParams(0.05, 0.15))
    assert twist.v_x == pytest.approx(expected[0], abs=1e-15)
    assert twist.v_y == 0.0
    assert twist.omega == pytest.approx(expected[2], abs=1e-15)
    assert twist.v_x == pytest.approx(0.075)
    assert twist.omega == pytest.approx(1.0 / 6.0)


def test_forward_body_rejects_non_finite():
    with pytest.raises(ValueError):
        forward_body(WheelSpeeds(math.nan, 1.0), KinematicParams(0.1, 0.2))
    with pytest.raises(ValueError):
        KinematicParams(-0.1, 0.2)
    with pytest.raises(ValueError):
        KinematicParams(0.1, math.inf)


# ---------------------------------------------------------------------------
# forward_global


def test_forward_global_at_zero_heading_equals_body_frame():
    out = forward_global(0.0, WheelSpeeds(1.0, 1.0), KinematicParams(0.1, 0.2))
    assert out == (pytest.approx(0.1), pytest.approx(0.0), pytest.approx(0.0))


def test_forward_global_heading_along_y():
    x_dot, y_dot, theta_dot = forward_global(
        math.pi / 2, WheelSpeeds(1.0, 1.0), KinematicParams(0.1, 0.2)
    )
    assert x_dot == pytest.approx(0.0, abs=1e-15)
    assert y_dot == pytest.approx(0.1)
    assert theta_dot == 0.0


def test_forward_global_matches_matrix_substitution():
    theta = math.pi / 4
    expected = drive_matrix_global(theta, 0.05, 0.15) @ np.array([2.0, 1.0])
    out = forward_global(theta, WheelSpeeds(2.0, 1.0), KinematicParams(0.05, 0.15))
    assert out[0] == pytest.approx(expected[0], abs=1e-15)
    assert out[1] == pytest.approx(expected[1], abs=1e-15)
    assert out[2] == pytest.approx(expected[2], abs=1e-15)
    assert out[0] == pytest.approx(0.075 * math.cos(theta))
    assert out[1] == pytest.approx(0.075 * math.sin(theta))


# ---------------------------------------------------------------------------
# inverse


def test_inverse_straight_drive():
    wheels = inverse(0.1, 0.0, KinematicParams(0.05, 0.15))
    assert wheels.right == pytest.approx(2.0)
    assert wheels.left == pytest.approx(2.0)


def test_inverse_matches_substitution():
    # (0.1 + 0.5*0.15)/0.05 = 3.5 and (0.1 - 0.5*0.15)/0.05 = 0.5
    wheels = inverse(0.1, 0.5, KinematicParams(0.05, 0.15))
    assert wheels.right == pytest.approx(3.5)
    assert wheels.left == pytest.approx(0.5)


def test_inverse_at_rest():
    wheels = inverse(0.0, 0.0, KinematicParams(0.03, 0.1))
    assert wheels == WheelSpeeds(0.0, 0.0)


def test_inverse_rejects_non_finite():
    with pytest.raises(ValueError):
        inverse(math.inf, 0.0, KinematicParams(0.1, 0.2))


# ---------------------------------------------------------------------------
# integrate_pose


def test_integrate_straight_line():
    pose = integrate_pose(Pose(0.0, 0.0, 0.0), v=0.1, omega=0.0, dt=1.0)
    assert pose == Pose(pytest.approx(0.1), pytest.approx(0.0), 0.0)


def test_integrate_spin_in_place_normalizes_to_pi():
    pose = integrate_pose(Pose(0.0, 0.0, 0.0), v=0.0, omega=math.pi, dt=1.0)
    assert pose.x == pytest.approx(0.0)
    assert pose.y == pytest.approx(0.0)
    assert pose.theta == pytest.approx(math.pi)


def test_integrate_arc_matches_closed_form():
    # Independent closed-form evaluation: radius = 0.1/0.5 = 0.2, swept
    # angle = 1 rad, so x = 0.2*sin(1), y = 0.2*(1 - cos(1)).
    pose = integrate_pose(Pose(0.0, 0.0, 0.0), v=0.1, omega=0.5, dt=2.0)
    assert pose.x == pytest.approx(0.2 * math.sin(1.0), abs=1e-15)
    assert pose.y == pytest.approx(0.2 * (1.0 - math.cos(1.0)), abs=1e-15)
    assert pose.theta == pytest.approx(1.0)
    assert pose.x == pytest.approx(0.1682941969615793)
    assert pose.y == pytest.approx(0.09193953882637205)


def test_integrate_rejects_bad_dt():
    with pytest.raises(ValueError):
        integrate_pose(Pose(0, 0, 0), 0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        integrate_pose(Pose(0, 0, 0), 0.1, 0.0, -0.5)


def test_arc_converges_to_straight_line_as_omega_vanishes():
    straight = integrate_pose(Pose(0, 0, 0.3), v=0.1, omega=0.0, dt=1.0)
    arc = integrate_pose(Pose(0, 0, 0.3), v=0.1, omega=1e-8, dt=1.0)
    assert abs(arc.x - straight.x) < 1e-9
    assert abs(arc.y - straight.y) < 1e-9


@given(
    v=st.floats(-1.0, 1.0),
    omega=st.floats(-1.0, 1.0),
    theta0=st.floats(-3.0, 3.0),
    dt=st.floats(0.1, 2.0),
)
@settings(max_examples=25, deadline=None)
def test_arc_matches_small_step_euler(v, omega, theta0, dt):
    start = Pose(0.0, 0.0, theta0)
    arc = integrate_pose(start, v, omega, dt)
    ex, ey, _ = euler_integrate(start, v, omega, dt, n_steps=10_000)
    assert math.hypot(arc.x - ex, arc.y - ey) < 1e-4


# ---------------------------------------------------------------------------
# Cross-operation properties


@given(
    v=st.floats(-10.0, 10.0),
    omega=st.floats(-10.0, 10.0),
    params=finite_params,
)
def test_round_trip_inverse_then_forward(v, omega, params):
    twist = forward_body(inverse(v, omega, params), params)
    assert abs(twist.v_x - v) < 1e-12 * max(1.0, abs(v))
    assert twist.v_y == 0.0
    assert abs(twist.omega - omega) < 1e-12 * max(1.0, abs(omega))


@given(
    theta=st.floats(-10.0, 10.0),
    right=st.floats(-5.0, 5.0),
    left=st.floats(-5.0, 5.0),
    params=finite_params,
)
def test_global_frame_is_rotation_of_body_frame(theta, right, left, params):
    wheels = WheelSpeeds(right, left)
    twist = forward_body(wheels, params)
    x_dot, y_dot, theta_dot = forward_global(theta, wheels, params)
    # theta_dot must agree exactly; the linear part is the 2D rotation of
    # (v_x, 0) by theta.
    assert theta_dot == twist.omega
    assert abs(x_dot - twist.v_x * math.cos(theta)) < 1e-12
    assert abs(y_dot - twist.v_x * math.sin(theta)) < 1e-12


@given(theta=st.floats(-100.0, 100.0))
def test_normalize_angle_range(theta):
    wrapped = normalize_angle(theta)
    assert -math.pi < wrapped <= math.pi
    # same direction modulo 2*pi
    assert math.isclose(
        math.cos(wrapped), math.cos(theta), abs_tol=1e-9
    ) and math.isclose(math.sin(wrapped), math.sin(theta), abs_tol=1e-9)
