"""Episode environment: scene state, randomization, object motion, observations.

A scene holds the drone, an optional square gate, vertical cylinder obstacles
(infinite height for collision purposes), and a target point. The active goal
is the gate center until the drone crosses the gate plane inside the opening,
then the target. Training scenes are gate-free: the goal is the target from
the start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import reward
from .dynamics import DroneState, map_action, step_dynamics

OBS_DIM = 21

# Termination codes reported in step info.
RUNNING = "running"
SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"


class ContractViolation(RuntimeError):
    """Raised when a caller steps a finished episode or passes an invalid action."""


@dataclass
class Gate:
    """Square opening; yaw gives the plane normal (cos yaw, sin yaw, 0)."""

    center: np.ndarray
    yaw: float = 0.0
    half_width: float = 0.75
    half_height: float = 0.75

    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    def lateral(self) -> np.ndarray:
        return np.array([-math.sin(self.yaw), math.cos(self.yaw), 0.0])


@dataclass
class Obstacle:
    """Vertical cylinder; z is cosmetic (observation only), collisions ignore it."""

    center_xy: np.ndarray
    radius: float = 0.05
    z: float = 1.0


@dataclass
class WorldConfig:
    dt: float = 0.02
    t_max: float = 10.0
    success_radius: float = 0.2
    drone_radius: float = 0.15
    ground_z: float = 0.05
    frame_outer: float = 0.95  # outer half-extent of the physical gate frame
    # Random-walk speed bound for object jitter during training, m/s.
    v_max_obj: float = 0.5
    move_target: bool = True
    move_obstacles: bool = True
    # Episode randomization bounds.
    spawn_xy: float = 4.0
    spawn_z_min: float = 0.3
    spawn_z_max: float = 4.0
    spawn_yaw: float = math.pi / 2.0
    target_xy: float = 3.5
    target_z_min: float = 0.5
    target_z_max: float = 2.5
    target_size: float = 0.2
    n_obstacles: int = 1
    obstacle_radius: float = 0.05
    min_goal_distance: float = 1.0
    obstacle_clearance: float = 0.4

    def validate(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if not 0 <= self.n_obstacles <= 8:
            raise ValueError("n_obstacles out of range")


@dataclass
class WorldState:
    drone: DroneState
    gate: Optional[Gate]
    obstacles: list
    target: np.ndarray
    target_size: float = 0.2
    gate_passed: bool = False
    t: float = 0.0
    rng_seed: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            self.drone.copy(),
            Gate(self.gate.center.copy(), self.gate.yaw, self.gate.half_width, self.gate.half_height)
            if self.gate is not None
            else None,
            [Obstacle(o.center_xy.copy(), o.radius, o.z) for o in self.obstacles],
            self.target.copy(),
            self.target_size,
            self.gate_passed,
            self.t,
            self.rng_seed,
        )

    # -- goal/obstacle accessors used by observation, reward and planners --

    def goal(self):
        """(position, size, yaw) of the active goal."""
        if self.gate is not None and not self.gate_passed:
            return self.gate.center, 2.0 * self.gate.half_width, self.gate.yaw
        return self.target, self.target_size, 0.0

    def distance_to_goal(self) -> float:
        gp, _, _ = self.goal()
        dx = float(self.drone.position[0]) - float(gp[0])
        dy = float(self.drone.position[1]) - float(gp[1])
        dz = float(self.drone.position[2]) - float(gp[2])
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def nearest_obstacle(self) -> Optional[Obstacle]:
        best = None
        best_d = math.inf
        px, py = float(self.drone.position[0]), float(self.drone.position[1])
        for o in self.obstacles:
            dx = float(o.center_xy[0]) - px
            dy = float(o.center_xy[1]) - py
            d = math.sqrt(dx * dx + dy * dy)
            if d < best_d:
                best_d = d
                best = o
        return best

    def distance_to_nearest_obstacle(self) -> float:
        """Horizontal distance to the nearest obstacle axis; +inf with no obstacles."""
        o = self.nearest_obstacle()
        if o is None:
            return math.inf
        dx = float(o.center_xy[0]) - float(self.drone.position[0])
        dy = float(o.center_xy[1]) - float(self.drone.position[1])
        return math.sqrt(dx * dx + dy * dy)


def observe(w: WorldState) -> np.ndarray:
    """Assemble the 21-feature observation vector.

    Layout: position(3), euler(3; roll=pitch=0), velocity(3), angular
    velocity(3; only z), goal position(3)+size(1)+yaw(1), nearest-obstacle
    relative position(3)+radius(1). With no obstacles the obstacle block is
    zero.
    """
    obs = np.zeros(OBS_DIM)
    obs[0:3] = w.drone.position
    obs[5] = w.drone.yaw
    obs[6:9] = w.drone.velocity
    obs[11] = w.drone.yaw_rate
    gp, gsize, gyaw = w.goal()
    obs[12:15] = gp
    obs[15] = gsize
    obs[16] = gyaw
    o = w.nearest_obstacle()
    if o is not None:
        obs[17] = float(o.center_xy[0]) - float(w.drone.position[0])
        obs[18] = float(o.center_xy[1]) - float(w.drone.position[1])
        obs[19] = o.z - float(w.drone.position[2])
        obs[20] = o.radius
    return obs


def check_collision(w: WorldState, cfg: WorldConfig, prev_position=None) -> bool:
    """True if the drone hits an obstacle, the ground, or the gate frame.

    Obstacles are infinite-height: only horizontal distance counts. The frame
    test needs the previous position to detect plane crossings and fires when
    the crossing point falls in the square band between the opening and the
    outer frame extent.
    """
    px, py, pz = (float(w.drone.position[i]) for i in range(3))
    if pz < cfg.ground_z:
        return True
    for o in w.obstacles:
        dx = float(o.center_xy[0]) - px
        dy = float(o.center_xy[1]) - py
        if math.sqrt(dx * dx + dy * dy) < o.radius + cfg.drone_radius:
            return True
    if w.gate is not None and prev_position is not None:
        hit, offset, _ = _plane_crossing(w.gate, prev_position, w.drone.position)
        if hit and offset is not None:
            lat, vert = offset
            m = max(abs(lat), abs(vert))
            if w.gate.half_width < m <= cfg.frame_outer:
                return True
    return False


def _plane_crossing(gate: Gate, p_old, p_new):
    """Detect a crossing of the gate plane by the segment p_old -> p_new.

    Returns (crossed, (lateral, vertical) in-plane offsets at the crossing
    point, signed fraction along the segment), with offsets None when there
    is no crossing.
    """
    nx, ny = math.cos(gate.yaw), math.sin(gate.yaw)
    cx, cy = float(gate.center[0]), float(gate.center[1])
    s_old = (float(p_old[0]) - cx) * nx + (float(p_old[1]) - cy) * ny
    s_new = (float(p_new[0]) - cx) * nx + (float(p_new[1]) - cy) * ny
    if s_old == 0.0 and s_new == 0.0:
        return False, None, None
    if (s_old > 0.0 and s_new > 0.0) or (s_old < 0.0 and s_new < 0.0):
        return False, None, None
    denom = s_new - s_old
    frac = 0.0 if denom == 0.0 else -s_old / denom
    qx = float(p_old[0]) + (float(p_new[0]) - float(p_old[0])) * frac
    qy = float(p_old[1]) + (float(p_new[1]) - float(p_old[1])) * frac
    qz = float(p_old[2]) + (float(p_new[2]) - float(p_old[2])) * frac
    lx, ly = -math.sin(gate.yaw), math.cos(gate.yaw)
    lat = (qx - cx) * lx + (qy - cy) * ly
    vert = qz - float(gate.center[2])
    return True, (lat, vert), frac


def move_objects(
    w: WorldState,
    v_max_obj: float,
    dt: float,
    rng: np.random.Generator,
    move_gate: bool = True,
    move_obstacles: bool = True,
    move_target: bool = True,
) -> None:
    """Random-walk jitter: each moving object shifts by U(-v, v)*dt per axis (xy).

    Draw order is fixed (gate, target, obstacles) so seeded runs are
    reproducible. Mutates w in place.
    """
    if v_max_obj < 0.0:
        raise ValueError("v_max_obj must be >= 0")
    if v_max_obj == 0.0:
        return
    if w.gate is not None and move_gate:
        w.gate.center[0] += rng.uniform(-v_max_obj, v_max_obj) * dt
        w.gate.center[1] += rng.uniform(-v_max_obj, v_max_obj) * dt
    if move_target:
        w.target[0] += rng.uniform(-v_max_obj, v_max_obj) * dt
        w.target[1] += rng.uniform(-v_max_obj, v_max_obj) * dt
    if move_obstacles:
        for o in w.obstacles:
            o.center_xy[0] += rng.uniform(-v_max_obj, v_max_obj) * dt
            o.center_xy[1] += rng.uniform(-v_max_obj, v_max_obj) * dt


def randomize_episode(rng: np.random.Generator, cfg: WorldConfig, seed: int = 0) -> WorldState:
    """Sample a gate-free training scene.

    The drone spawns uniformly in the arena; the target is resampled until it
    is far enough away and not directly above/below the spawn; each obstacle
    sits between drone and target (longitudinal fraction U(0.25, 0.75) of the
    connecting line, lateral offset U(-0.5, 0.5) m) with a clearance guard
    against spawning in contact.
    """
    dx = rng.uniform(-cfg.spawn_xy, cfg.spawn_xy)
    dy = rng.uniform(-cfg.spawn_xy, cfg.spawn_xy)
    dz = rng.uniform(cfg.spawn_z_min, cfg.spawn_z_max)
    yaw = rng.uniform(-cfg.spawn_yaw, cfg.spawn_yaw)
    drone = DroneState(np.array([dx, dy, dz]), yaw, np.zeros(3), 0.0)

    while True:
        tx = rng.uniform(-cfg.target_xy, cfg.target_xy)
        ty = rng.uniform(-cfg.target_xy, cfg.target_xy)
        tz = rng.uniform(cfg.target_z_min, cfg.target_z_max)
        lx, ly, lz = tx - dx, ty - dy, tz - dz
        l_norm = math.sqrt(lx * lx + ly * ly + lz * lz)
        l_xy = math.sqrt(lx * lx + ly * ly)
        if l_norm >= cfg.min_goal_distance and l_xy >= 0.5:
            break
    target = np.array([tx, ty, tz])

    # Lateral direction: cross(L, z) normalized; horizontal and perpendicular to L.
    lat_x, lat_y = ly / l_xy, -lx / l_xy
    obstacles = []
    for _ in range(cfg.n_obstacles):
        while True:
            d_long = rng.uniform(0.25, 0.75)
            d_lat = rng.uniform(-0.5, 0.5)
            oz = rng.uniform(0.0, 2.0)
            ox = dx + d_long * lx + d_lat * lat_x
            oy = dy + d_long * ly + d_lat * lat_y
            clear_d = math.sqrt((ox - dx) ** 2 + (oy - dy) ** 2)
            clear_t = math.sqrt((ox - tx) ** 2 + (oy - ty) ** 2)
            if clear_d >= cfg.obstacle_clearance and clear_t >= cfg.obstacle_clearance:
                break
        obstacles.append(Obstacle(np.array([ox, oy]), cfg.obstacle_radius, oz))

    # Gate-free scene: the target is the goal from the start.
    return WorldState(
        drone=drone,
        gate=None,
        obstacles=obstacles,
        target=target,
        target_size=cfg.target_size,
        gate_passed=True,
        t=0.0,
        rng_seed=seed,
    )


def step_env(
    w: WorldState,
    action,
    rng: Optional[np.random.Generator],
    cfg: WorldConfig,
    rcfg: reward.RewardConfig,
    motion: Optional[Callable[[WorldState, float], None]] = None,
):
    """Advance the world one control period.

    Pipeline: action mapping -> dynamics -> object motion (scenario override
    or random-walk jitter) -> gate-crossing detection -> reward -> termination.
    Returns (new_state, observation, reward, done, info); info carries the
    outcome code and, on a crossing, the in-plane offset from the gate center.

    Raises:
        ContractViolation: if the state is already terminal or the action is
            outside [-1, 1]^4.
    """
    if _is_terminal(w, cfg):
        raise ContractViolation("step_env called on a finished episode")
    a = np.asarray(action, dtype=float)
    if a.shape != (4,) or not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0 + 1e-12):
        raise ContractViolation(f"action must be in [-1,1]^4, got {action!r}")

    nw = w.copy()
    prev_position = w.drone.position.copy()
    cmd = map_action(a)
    nw.drone = step_dynamics(nw.drone, cmd, cfg.dt)

    if motion is not None:
        motion(nw, cfg.dt)
    elif rng is not None:
        move_objects(
            nw,
            cfg.v_max_obj,
            cfg.dt,
            rng,
            move_gate=True,
            move_obstacles=cfg.move_obstacles,
            move_target=cfg.move_target,
        )

    info = {"outcome": RUNNING, "crossed": False, "cross_offset": None}
    if nw.gate is not None and not nw.gate_passed:
        crossed, offset, _ = _plane_crossing(nw.gate, prev_position, nw.drone.position)
        if crossed and offset is not None:
            lat, vert = offset
            if abs(lat) <= nw.gate.half_width and abs(vert) <= nw.gate.half_height:
                nw.gate_passed = True
                info["crossed"] = True
                info["cross_offset"] = math.sqrt(lat * lat + vert * vert)

    collided = check_collision(nw, cfg, prev_position)
    r = reward.r_total(nw, collided, rcfg)
    nw.t = w.t + cfg.dt

    done = False
    if collided:
        done = True
        info["outcome"] = COLLISION
    elif nw.gate_passed and nw.distance_to_goal() < cfg.success_radius:
        done = True
        info["outcome"] = SUCCESS
    elif nw.t >= cfg.t_max - 1e-9:
        done = True
        info["outcome"] = TIMEOUT

    return nw, observe(nw), r, done, info


def _is_terminal(w: WorldState, cfg: WorldConfig) -> bool:
    if w.t >= cfg.t_max - 1e-9:
        return True
    if w.gate_passed and w.distance_to_goal() < cfg.success_radius:
        return True
    return check_collision(w, cfg)


class Episode:
    """Stateful wrapper around step_env with auto-randomized resets.

    A scenario may supply both the initial state (via `layout`) and a
    deterministic per-step motion override (via `motion`).
    """

    def __init__(
        self,
        cfg: WorldConfig,
        rcfg: reward.RewardConfig,
        rng: np.random.Generator,
        layout: Optional[Callable[[np.random.Generator], WorldState]] = None,
        motion: Optional[Callable[[WorldState, float], None]] = None,
    ):
        cfg.validate()
        rcfg.validate()
        self.cfg = cfg
        self.rcfg = rcfg
        self.rng = rng
        self.layout = layout
        self.motion = motion
        self.state: Optional[WorldState] = None
        self.done = True

    def reset(self) -> np.ndarray:
        if self.layout is not None:
            self.state = self.layout(self.rng)
        else:
            self.state = randomize_episode(self.rng, self.cfg)
        self.done = False
        return observe(self.state)

    def step(self, action):
        if self.done or self.state is None:
            raise ContractViolation("step() on a finished episode; call reset()")
        self.state, obs, r, done, info = step_env(
            self.state, action, self.rng, self.cfg, self.rcfg, self.motion
        )
        self.done = done
        return obs, r, done, info
