"""Reward terms for goal traversal with obstacle avoidance.

Four terms summed per step: inverse-distance goal proximity, exponential
obstacle penalty, a flat collision penalty, and a quadratic speed penalty
active inside the obstacle safety region. Obstacles are infinite-height, so
obstacle distance is horizontal distance to the nearest obstacle axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class RewardConfig:
    c_proximity: float = 0.1  # softening constant in 1/(d + c)
    c_obstacle: float = 2.0  # obstacle penalty scale
    c_collision: float = 100.0  # flat penalty on collision
    c_velocity: float = 0.1  # speed penalty scale inside the safety region
    r_safety: float = 1.0  # safety radius around an obstacle, m

    def validate(self) -> None:
        for name in ("c_proximity", "c_obstacle", "c_collision", "c_velocity", "r_safety"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"RewardConfig.{name} must be positive")


def r_proximity(d_goal: float, cfg: RewardConfig) -> float:
    """1/(d_goal + c): grows sharply as the drone closes on the goal."""
    if d_goal < 0.0:
        raise ValueError(f"negative goal distance: {d_goal}")
    return 1.0 / (d_goal + cfg.c_proximity)


def r_obstacle(d_obs: float, cfg: RewardConfig) -> float:
    """Exponential penalty -c*exp(-d/r_safety), in [-c, 0)."""
    return -cfg.c_obstacle * math.exp(-d_obs / cfg.r_safety)


def r_collision(collided: bool, cfg: RewardConfig) -> float:
    return -cfg.c_collision if collided else 0.0


def r_velocity(v, d_obs: float, cfg: RewardConfig) -> float:
    """-c*|v|^2 while inside the safety region, else 0."""
    if d_obs < cfg.r_safety:
        vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
        return -cfg.c_velocity * (vx * vx + vy * vy + vz * vz)
    return 0.0


def total_from_components(d_goal: float, d_obs: float, v, collided: bool, cfg: RewardConfig) -> float:
    """Sum of the four terms on raw scalars (the hot-path form)."""
    return (
        r_proximity(d_goal, cfg)
        + r_obstacle(d_obs, cfg)
        + r_collision(collided, cfg)
        + r_velocity(v, d_obs, cfg)
    )


def r_total(world, collided: bool, cfg: RewardConfig) -> float:
    """Evaluate the reward on a world state (duck-typed to avoid an import cycle).

    Uses the current goal (gate center until crossed, then the target) and the
    horizontal distance to the nearest obstacle axis; with no obstacles in the
    scene the obstacle and velocity terms vanish.
    """
    d_goal = world.distance_to_goal()
    d_obs = world.distance_to_nearest_obstacle()
    if math.isinf(d_obs):
        return r_proximity(d_goal, cfg) + r_collision(collided, cfg)
    return total_from_components(d_goal, d_obs, world.drone.velocity, collided, cfg)
