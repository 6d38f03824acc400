"""Vectorized training environment backed by the fused step kernel.

Holds N gate-free training scenes as flat arrays and steps them all through
kernels.step_batch (compiled when available). Episodes auto-reset on
termination; per-env RNG streams keep seeded runs reproducible regardless of
how other envs terminate.
"""

from __future__ import annotations

import numpy as np

from . import kernels, world
from .reward import RewardConfig
from .world import OBS_DIM, WorldConfig, WorldState, randomize_episode


def pack_params(cfg: WorldConfig, rcfg: RewardConfig) -> np.ndarray:
    from . import dynamics

    p = np.zeros(kernels.N_PARAMS)
    p[kernels.P_DT] = cfg.dt
    p[kernels.P_TAU_V] = dynamics.TAU_V
    p[kernels.P_A_MAX] = dynamics.A_MAX
    p[kernels.P_TAU_YAW] = dynamics.TAU_YAW
    p[kernels.P_YAW_RATE_MAX] = dynamics.YAW_RATE_MAX
    p[kernels.P_YAW_SPEED_EPS] = dynamics.YAW_SPEED_EPS
    p[kernels.P_V_LIMIT_XY] = dynamics.V_LIMIT_XY
    p[kernels.P_V_LIMIT_Z] = dynamics.V_LIMIT_Z
    p[kernels.P_T_MAX] = cfg.t_max
    p[kernels.P_SUCCESS_RADIUS] = cfg.success_radius
    p[kernels.P_DRONE_RADIUS] = cfg.drone_radius
    p[kernels.P_GROUND_Z] = cfg.ground_z
    p[kernels.P_FRAME_OUTER] = cfg.frame_outer
    p[kernels.P_C_PROXIMITY] = rcfg.c_proximity
    p[kernels.P_C_OBSTACLE] = rcfg.c_obstacle
    p[kernels.P_C_COLLISION] = rcfg.c_collision
    p[kernels.P_C_VELOCITY] = rcfg.c_velocity
    p[kernels.P_R_SAFETY] = rcfg.r_safety
    return p


class VecEnv:
    """N independent training environments stepped as one batch."""

    def __init__(self, n_envs: int, cfg: WorldConfig, rcfg: RewardConfig, seed: int):
        cfg.validate()
        rcfg.validate()
        if n_envs < 1:
            raise ValueError("n_envs must be >= 1")
        self.n = n_envs
        self.cfg = cfg
        self.rcfg = rcfg
        self.params = pack_params(cfg, rcfg)
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_envs)]

        k = cfg.n_obstacles  # zero-width arrays are fine for the kernels
        self.k_slots = cfg.n_obstacles
        self.pos = np.zeros((n_envs, 3))
        self.yaw = np.zeros(n_envs)
        self.vel = np.zeros((n_envs, 3))
        self.yaw_rate = np.zeros(n_envs)
        self.gate_present = np.zeros(n_envs, dtype=np.uint8)
        self.gate_center = np.zeros((n_envs, 3))
        self.gate_yaw = np.zeros(n_envs)
        self.gate_half = np.full(n_envs, 0.75)
        self.gate_passed = np.zeros(n_envs, dtype=np.uint8)
        self.obstacles = np.zeros((n_envs, k, 4))
        self.target = np.zeros((n_envs, 3))
        self.target_size = np.zeros(n_envs)
        self.t = np.zeros(n_envs)

        self._active = np.ones(n_envs, dtype=np.uint8)
        self._disp_gate = np.zeros((n_envs, 2))
        self._disp_target = np.zeros((n_envs, 2))
        self._disp_obs = np.zeros((n_envs, k, 2))
        self._obs = np.zeros((n_envs, OBS_DIM))
        self._reward = np.zeros(n_envs)
        self._done = np.zeros(n_envs, dtype=np.uint8)
        self._outcome = np.zeros(n_envs, dtype=np.int32)
        self._cross = np.zeros(n_envs)

        self.ep_return = np.zeros(n_envs)
        self.ep_length = np.zeros(n_envs, dtype=np.int64)
        self.current_obs: np.ndarray | None = None

    def reset_all(self) -> np.ndarray:
        for i in range(self.n):
            self._reset_env(i)
        self.ep_return[:] = 0.0
        self.ep_length[:] = 0
        self.current_obs = self._observe_all()
        return self.current_obs.copy()

    def _reset_env(self, i: int) -> None:
        w = randomize_episode(self.rngs[i], self.cfg)
        self.load_state(i, w)

    def load_state(self, i: int, w: WorldState) -> None:
        """Overwrite slot i with an externally built scene (scenario evals)."""
        self.pos[i] = w.drone.position
        self.yaw[i] = w.drone.yaw
        self.vel[i] = w.drone.velocity
        self.yaw_rate[i] = w.drone.yaw_rate
        if w.gate is not None:
            self.gate_present[i] = 1
            self.gate_center[i] = w.gate.center
            self.gate_yaw[i] = w.gate.yaw
            self.gate_half[i] = w.gate.half_width
        else:
            self.gate_present[i] = 0
        self.gate_passed[i] = 1 if w.gate_passed else 0
        if len(w.obstacles) > self.obstacles.shape[1]:
            raise ValueError("scene has more obstacles than the configured slots")
        self.obstacles[i] = 0.0
        for k, o in enumerate(w.obstacles):
            self.obstacles[i, k, 0] = o.center_xy[0]
            self.obstacles[i, k, 1] = o.center_xy[1]
            self.obstacles[i, k, 2] = o.z
            self.obstacles[i, k, 3] = o.radius
        self.target[i] = w.target
        self.target_size[i] = w.target_size
        self.t[i] = w.t

    def _observe_all(self) -> np.ndarray:
        # Build from the same state via a zero-displacement, reward-free view:
        # observation layout matches world.observe.
        obs = np.zeros((self.n, OBS_DIM))
        obs[:, 0:3] = self.pos
        obs[:, 5] = self.yaw
        obs[:, 6:9] = self.vel
        obs[:, 11] = self.yaw_rate
        before_gate = (self.gate_present == 1) & (self.gate_passed == 0)
        obs[:, 12:15] = np.where(before_gate[:, None], self.gate_center, self.target)
        obs[:, 15] = np.where(before_gate, 2.0 * self.gate_half, self.target_size)
        obs[:, 16] = np.where(before_gate, self.gate_yaw, 0.0)
        if self.k_slots > 0:
            d = self.obstacles[:, : self.k_slots, 0:2] - self.pos[:, None, 0:2]
            nearest = np.argmin(np.sqrt((d * d).sum(axis=2)), axis=1)
            rows = np.arange(self.n)
            obs[:, 17] = self.obstacles[rows, nearest, 0] - self.pos[:, 0]
            obs[:, 18] = self.obstacles[rows, nearest, 1] - self.pos[:, 1]
            obs[:, 19] = self.obstacles[rows, nearest, 2] - self.pos[:, 2]
            obs[:, 20] = self.obstacles[rows, nearest, 3]
        return obs

    def _draw_displacements(self) -> None:
        # Mirrors world.move_objects: per-env draw order is gate, target,
        # obstacles; no draws at all when the jitter speed is zero.
        v = self.cfg.v_max_obj
        dt = self.cfg.dt
        self._disp_gate[:] = 0.0
        self._disp_target[:] = 0.0
        self._disp_obs[:] = 0.0
        if v == 0.0:
            return
        for i in range(self.n):
            rng = self.rngs[i]
            if self.gate_present[i]:
                self._disp_gate[i, 0] = rng.uniform(-v, v) * dt
                self._disp_gate[i, 1] = rng.uniform(-v, v) * dt
            if self.cfg.move_target:
                self._disp_target[i, 0] = rng.uniform(-v, v) * dt
                self._disp_target[i, 1] = rng.uniform(-v, v) * dt
            if self.cfg.move_obstacles:
                for k in range(self.k_slots):
                    self._disp_obs[i, k, 0] = rng.uniform(-v, v) * dt
                    self._disp_obs[i, k, 1] = rng.uniform(-v, v) * dt

    def step(self, actions: np.ndarray):
        """Step all envs; auto-resets finished episodes.

        Returns (obs, rewards, dones, outcomes, episode_stats) where
        episode_stats lists (return, length, outcome) for episodes that ended
        this step, in env order. The returned observation for a finished env
        is the first observation of its replacement episode.
        """
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.n, 4):
            raise ValueError(f"actions must have shape ({self.n}, 4)")
        if not np.all(np.isfinite(actions)):
            raise FloatingPointError("non-finite action batch")
        actions = np.clip(actions, -1.0, 1.0)

        self._draw_displacements()
        kernels.step_batch(
            self.pos,
            self.yaw,
            self.vel,
            self.yaw_rate,
            self.gate_present,
            self.gate_center,
            self.gate_yaw,
            self.gate_half,
            self.gate_passed,
            self.obstacles,
            self.target,
            self.target_size,
            self.t,
            actions,
            self._disp_gate,
            self._disp_target,
            self._disp_obs,
            self.params,
            self._active,
            self._obs,
            self._reward,
            self._done,
            self._outcome,
            self._cross,
        )

        obs = self._obs.copy()
        rewards = self._reward.copy()
        dones = self._done.astype(bool)
        outcomes = self._outcome.copy()

        self.ep_return += rewards
        self.ep_length += 1
        stats = []
        done_idx = np.nonzero(dones)[0]
        if done_idx.size:
            for i in done_idx:
                stats.append((float(self.ep_return[i]), int(self.ep_length[i]), int(outcomes[i])))
                self.ep_return[i] = 0.0
                self.ep_length[i] = 0
                self._reset_env(i)
            fresh = self._observe_all()
            obs[done_idx] = fresh[done_idx]
        self.current_obs = obs
        return obs.copy(), rewards, dones, outcomes, stats
