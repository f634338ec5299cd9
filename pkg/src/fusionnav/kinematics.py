"""Differential-drive kinematics: wheel speeds <-> body twist <-> global frame,
plus exact unicycle-arc pose integration.

All functions are pure and operate on plain floats; angles are radians and
positive angular velocity turns the robot counter-clockwise (left).
"""

import math
from dataclasses import dataclass

# Below this |omega| the arc formula degenerates; use the straight-line limit.
STRAIGHT_OMEGA_EPS = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.pi - (math.pi - theta) % (2.0 * math.pi)
    if wrapped <= -math.pi:  # float rounding can land exactly on -pi
        wrapped = math.pi
    return wrapped


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class KinematicParams:
    """Physical constants of the drive: wheel radius and half the axle track
    (distance from chassis center to each wheel), both in meters."""

    wheel_radius: float
    half_axle: float

    def __post_init__(self):
        _require_finite(wheel_radius=self.wheel_radius, half_axle=self.half_axle)
        if self.wheel_radius <= 0 or self.half_axle <= 0:
            raise ValueError(
                f"wheel_radius and half_axle must be positive, got "
                f"({self.wheel_radius}, {self.half_axle})"
            )


@dataclass(frozen=True)
class WheelSpeeds:
    """Angular speeds of the right and left wheels, rad/s."""

    right: float
    left: float

    def __post_init__(self):
        _require_finite(right=self.right, left=self.left)


@dataclass(frozen=True)
class BodyTwist:
    """Velocity in the robot body frame: forward v_x, lateral v_y (always 0
    for this drive), and yaw rate omega (positive = counter-clockwise)."""

    v_x: float
    v_y: float
    omega: float


@dataclass(frozen=True)
class Pose:
    """Planar pose in the global frame; theta is kept in (-pi, pi]."""

    x: float
    y: float
    theta: float


def forward_body(wheels: WheelSpeeds, params: KinematicParams) -> BodyTwist:
    """Map wheel speeds to the body-frame twist.

    v_x = (R/2)(w_right + w_left), v_y = 0,
    omega = (R/(2L))(w_right - w_left).
    """
    r = params.wheel_radius
    v_x = (r / 2.0) * (wheels.right + wheels.left)
    omega = (r / (2.0 * params.half_axle)) * (wheels.right - wheels.left)
    return BodyTwist(v_x=v_x, v_y=0.0, omega=omega)


def forward_global(
    theta: float, wheels: WheelSpeeds, params: KinematicParams
) -> tuple[float, float, float]:
    """Map wheel speeds to global-frame velocities (x_dot, y_dot, theta_dot)
    for a robot currently heading at `theta`."""
    _require_finite(theta=theta)
    twist = forward_body(wheels, params)
    return (
        twist.v_x * math.cos(theta),
        twist.v_x * math.sin(theta),
        twist.omega,
    )


def inverse(v: float, omega: float, params: KinematicParams) -> WheelSpeeds:
    """Map a commanded (linear velocity, angular velocity) to wheel speeds.

    w_right = (v + omega*L)/R, w_left = (v - omega*L)/R.
    """
    _require_finite(v=v, omega=omega)
    r = params.wheel_radius
    arm = omega * params.half_axle
    return WheelSpeeds(right=(v + arm) / r, left=(v - arm) / r)


def integrate_pose(pose: Pose, v: float, omega: float, dt: float) -> Pose:
    """Advance a pose by driving at constant (v, omega) for dt seconds.

    Uses the closed-form circular-arc solution so the result is independent
    of any internal step size; near-zero omega falls back to the straight
    line limit (heading unchanged).
    """
    _require_finite(v=v, omega=omega, dt=dt)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if abs(omega) < STRAIGHT_OMEGA_EPS:
        return Pose(
            x=pose.x + v * math.cos(pose.theta) * dt,
            y=pose.y + v * math.sin(pose.theta) * dt,
            theta=pose.theta,
        )
    theta_end = pose.theta + omega * dt
    radius = v / omega
    return Pose(
        x=pose.x + radius * (math.sin(theta_end) - math.sin(pose.theta)),
        y=pose.y + radius * (math.cos(pose.theta) - math.cos(theta_end)),
        theta=normalize_angle(theta_end),
    )
