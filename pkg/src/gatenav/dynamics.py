"""Simplified quadrotor kinematics with a first-order velocity-tracking controller.

The vehicle is reduced to a point mass with yaw: translation follows a
first-order lag toward the commanded velocity (acceleration-capped), and the
heading tracks the direction of horizontal motion. Per-axis velocity limits
are +/-3 m/s in x/y and +/-2 m/s in z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Per-axis velocity limits, m/s.
V_LIMIT_XY = 3.0
V_LIMIT_Z = 2.0

# Velocity-tracking time constant and acceleration cap: 0 -> 3 m/s settles in
# roughly 5*TAU_V = 1.5 s.
TAU_V = 0.3
A_MAX = 6.0

# Heading tracking.
TAU_YAW = 0.2
YAW_RATE_MAX = 3.0
YAW_SPEED_EPS = 0.05  # below this horizontal speed the heading holds

DT_DEFAULT = 0.02  # 50 Hz control


@dataclass
class DroneState:
    """Kinematic state: position (m), yaw in (-pi, pi], velocity (m/s), yaw rate (rad/s)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_rate: float = 0.0

    def copy(self) -> "DroneState":
        return DroneState(self.position.copy(), self.yaw, self.velocity.copy(), self.yaw_rate)


@dataclass
class VelocityCommand:
    """Desired velocity vector plus the speed budget it was scaled to."""

    v_des: np.ndarray
    v_max: float


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def map_action(a) -> VelocityCommand:
    """Map a policy action in [-1, 1]^4 to a velocity command.

    The first three components scale to per-axis desired velocities
    (3, 3, 2 m/s full scale); the fourth sets the speed budget
    v_max = 3*(a3+1)/2. The desired vector is rescaled (direction preserved)
    so its norm does not exceed v_max, then per-axis limits are applied.

    Raises:
        ValueError: if any component is not finite.
    """
    a0, a1, a2, a3 = float(a[0]), float(a[1]), float(a[2]), float(a[3])
    if not (math.isfinite(a0) and math.isfinite(a1) and math.isfinite(a2) and math.isfinite(a3)):
        raise ValueError(f"non-finite action: {a!r}")

    v_max = V_LIMIT_XY * (a3 + 1.0) / 2.0
    vx = V_LIMIT_XY * a0
    vy = V_LIMIT_XY * a1
    vz = V_LIMIT_Z * a2

    norm = math.sqrt(vx * vx + vy * vy + vz * vz)
    if norm > v_max:
        scale = v_max / norm if norm > 0.0 else 0.0
        vx *= scale
        vy *= scale
        vz *= scale

    # Per-axis caps last; they never increase the norm.
    vx = min(max(vx, -V_LIMIT_XY), V_LIMIT_XY)
    vy = min(max(vy, -V_LIMIT_XY), V_LIMIT_XY)
    vz = min(max(vz, -V_LIMIT_Z), V_LIMIT_Z)

    return VelocityCommand(np.array([vx, vy, vz]), v_max)


def yaw_from_velocity(v, prev_yaw: float) -> float:
    """Heading implied by the horizontal velocity; holds prev_yaw when nearly static."""
    vx, vy = float(v[0]), float(v[1])
    if math.sqrt(vx * vx + vy * vy) > YAW_SPEED_EPS:
        return math.atan2(vy, vx)
    return prev_yaw


def step_dynamics(s: DroneState, cmd: VelocityCommand, dt: float) -> DroneState:
    """Advance the state by one control period.

    Velocity relaxes toward the (re-clamped) command with time constant TAU_V
    and per-step acceleration capped at A_MAX; position integrates the new
    velocity explicitly; yaw tracks the motion heading with constant TAU_YAW
    and rate limit YAW_RATE_MAX.

    Raises:
        ValueError: if dt <= 0.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    px, py, pz = float(s.position[0]), float(s.position[1]), float(s.position[2])
    vx, vy, vz = float(s.velocity[0]), float(s.velocity[1]), float(s.velocity[2])

    cx, cy, cz, v_max = _clamp_command(
        float(cmd.v_des[0]), float(cmd.v_des[1]), float(cmd.v_des[2]), float(cmd.v_max)
    )

    alpha = dt / TAU_V
    if alpha > 1.0:
        alpha = 1.0
    dvx = (cx - vx) * alpha
    dvy = (cy - vy) * alpha
    dvz = (cz - vz) * alpha
    dn = math.sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
    dv_cap = A_MAX * dt
    if dn > dv_cap:
        k = dv_cap / dn
        dvx *= k
        dvy *= k
        dvz *= k

    vx += dvx
    vy += dvy
    vz += dvz
    px += vx * dt
    py += vy * dt
    pz += vz * dt

    yaw_des = yaw_from_velocity((vx, vy), s.yaw)
    err = wrap_angle(yaw_des - s.yaw)
    beta = dt / TAU_YAW
    if beta > 1.0:
        beta = 1.0
    dpsi = err * beta
    dpsi_cap = YAW_RATE_MAX * dt
    if dpsi > dpsi_cap:
        dpsi = dpsi_cap
    elif dpsi < -dpsi_cap:
        dpsi = -dpsi_cap
    yaw = wrap_angle(s.yaw + dpsi)
    yaw_rate = dpsi / dt

    return DroneState(np.array([px, py, pz]), yaw, np.array([vx, vy, vz]), yaw_rate)


def _clamp_command(cx: float, cy: float, cz: float, v_max: float):
    """Re-apply the command invariants (norm <= v_max, per-axis caps)."""
    if v_max < 0.0:
        v_max = 0.0
    elif v_max > V_LIMIT_XY:
        v_max = V_LIMIT_XY
    norm = math.sqrt(cx * cx + cy * cy + cz * cz)
    if norm > v_max:
        scale = v_max / norm if norm > 0.0 else 0.0
        cx *= scale
        cy *= scale
        cz *= scale
    cx = min(max(cx, -V_LIMIT_XY), V_LIMIT_XY)
    cy = min(max(cy, -V_LIMIT_XY), V_LIMIT_XY)
    cz = min(max(cz, -V_LIMIT_Z), V_LIMIT_Z)
    return cx, cy, cz, v_max
