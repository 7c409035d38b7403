"""Ackermann motion: kinematic bicycle model with sub-stepped integration.

State advances as x' = v cos(theta), y' = v sin(theta),
theta' = (v / wheelbase) * tan(steer), with the commanded action held constant
over the whole control interval. RK4 substeps keep the trajectory within
1e-3 m per simulated second of the exact constant-curvature arc and make the
forward/backward step pair reversible to nearly machine precision; forward
Euler misses both at the default substep count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D

V_MAX = 0.6
W_MAX = 0.6
_STRAIGHT_EPS = 1e-12


def _clamp(value: float, bound: float) -> float:
    return min(bound, max(-bound, value))


@dataclass(frozen=True)
class Action:
    """Control pair: linear speed v (m/s) and front steering angle w (rad).

    Both clamp to [-0.6, 0.6] on construction.
    """

    v: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "v", _clamp(float(self.v), V_MAX))
        object.__setattr__(self, "w", _clamp(float(self.w), W_MAX))

    def as_tuple(self) -> tuple[float, float]:
        return (self.v, self.w)


@dataclass(frozen=True)
class AckermannState:
    """Pose plus the action that produced it (fed back into the RL state)."""

    pose: Pose2D
    last_action: Action = Action()


def min_turning_radius(wheelbase: float, w_max: float = W_MAX) -> float:
    """Tightest achievable arc radius: wheelbase / tan(w_max)."""
    if not 0.0 < w_max < math.pi / 2:
        raise ValueError("w_max must be in (0, pi/2)")
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    return wheelbase / math.tan(w_max)


def _rk4(x: float, y: float, theta: float, v: float, k: float, h: float):
    """One RK4 slice of the bicycle ODE; k = tan(steer)/wheelbase."""

    def f(th):
        return v * math.cos(th), v * math.sin(th), v * k

    d1x, d1y, d1t = f(theta)
    d2x, d2y, d2t = f(theta + 0.5 * h * d1t)
    d3x, d3y, d3t = f(theta + 0.5 * h * d2t)
    d4x, d4y, d4t = f(theta + h * d3t)
    x += h / 6.0 * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)
    y += h / 6.0 * (d1y + 2.0 * d2y + 2.0 * d3y + d4y)
    theta += h / 6.0 * (d1t + 2.0 * d2t + 2.0 * d3t + d4t)
    return x, y, theta


def step_kinematics(
    state: AckermannState,
    action: Action,
    dt: float = 0.2,
    wheelbase: float = 0.6,
    substeps: int = 10,
) -> AckermannState:
    """Advance the pose by one control interval under a constant action.

    Args:
        state: current pose and previous action.
        action: commanded (v, w); clamped by the Action type.
        dt: control interval in seconds.
        wheelbase: front-to-rear axle distance in meters.
        substeps: integration slices per interval.

    Returns:
        New state with last_action set to the clamped command.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")

    v, w = action.v, action.w
    pose = state.pose
    if abs(w) < _STRAIGHT_EPS or v == 0.0:
        # Straight line (or no motion): exact, no integration error.
        return AckermannState(
            Pose2D(
                pose.x + v * dt * math.cos(pose.theta),
                pose.y + v * dt * math.sin(pose.theta),
                pose.theta,
            ),
            action,
        )

    k = math.tan(w) / wheelbase
    h = dt / substeps
    x, y, theta = pose.x, pose.y, pose.theta
    for _ in range(substeps):
        x, y, theta = _rk4(x, y, theta, v, k, h)
    return AckermannState(Pose2D(x, y, theta), action)
