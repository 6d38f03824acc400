"""Pure-Python fallback for the fused environment-step kernel.

Mirrors world.step_env (action mapping -> dynamics -> object motion ->
gate crossing -> reward -> termination) over a batch of environments, but on
flat arrays so the compiled twin in _speedups.pyx can share the exact call
signature. Both implementations must stay bit-for-bit identical to the
composition of dynamics/reward/world; tests/test_kernels.py enforces this.

Scalar math uses the math module (libm), matching C semantics of the
compiled kernel.
"""

import math

ABI_VERSION = 1
COMPILED = False

# params vector layout (see pack_params in vecenv.py)
P_DT = 0
P_TAU_V = 1
P_A_MAX = 2
P_TAU_YAW = 3
P_YAW_RATE_MAX = 4
P_YAW_SPEED_EPS = 5
P_V_LIMIT_XY = 6
P_V_LIMIT_Z = 7
P_T_MAX = 8
P_SUCCESS_RADIUS = 9
P_DRONE_RADIUS = 10
P_GROUND_Z = 11
P_FRAME_OUTER = 12
P_C_PROXIMITY = 13
P_C_OBSTACLE = 14
P_C_COLLISION = 15
P_C_VELOCITY = 16
P_R_SAFETY = 17
N_PARAMS = 18

# outcome codes
OUT_RUNNING = 0
OUT_SUCCESS = 1
OUT_COLLISION = 2
OUT_TIMEOUT = 3


def step_batch(
    pos,
    yaw,
    vel,
    yaw_rate,
    gate_present,
    gate_center,
    gate_yaw,
    gate_half,
    gate_passed,
    obstacles,
    target,
    target_size,
    t,
    actions,
    disp_gate,
    disp_target,
    disp_obs,
    params,
    active,
    obs_out,
    reward_out,
    done_out,
    outcome_out,
    cross_out,
):
    """Step every active environment in place; write per-env outputs.

    Array shapes: pos/vel (n,3); yaw/yaw_rate/t (n,); gate_present/
    gate_passed (n,) uint8; gate_center (n,3); gate_yaw/gate_half (n,);
    obstacles (n,K,4) as [x,y,z,radius]; target (n,3); actions (n,4);
    disp_gate/disp_target (n,2); disp_obs (n,K,2); params (N_PARAMS,);
    obs_out (n,21); reward/t (n,); done/outcome/cross (n,).
    """
    n = pos.shape[0]
    n_obs = obstacles.shape[1]

    dt = params[P_DT]
    tau_v = params[P_TAU_V]
    a_max = params[P_A_MAX]
    tau_yaw = params[P_TAU_YAW]
    yaw_rate_max = params[P_YAW_RATE_MAX]
    yaw_eps = params[P_YAW_SPEED_EPS]
    vlim_xy = params[P_V_LIMIT_XY]
    vlim_z = params[P_V_LIMIT_Z]
    t_max = params[P_T_MAX]
    success_radius = params[P_SUCCESS_RADIUS]
    drone_radius = params[P_DRONE_RADIUS]
    ground_z = params[P_GROUND_Z]
    frame_outer = params[P_FRAME_OUTER]
    c_prox = params[P_C_PROXIMITY]
    c_obst = params[P_C_OBSTACLE]
    c_coll = params[P_C_COLLISION]
    c_vel = params[P_C_VELOCITY]
    r_safety = params[P_R_SAFETY]

    for i in range(n):
        if not active[i]:
            continue

        px = float(pos[i, 0])
        py = float(pos[i, 1])
        pz = float(pos[i, 2])
        psi = float(yaw[i])
        vx = float(vel[i, 0])
        vy = float(vel[i, 1])
        vz = float(vel[i, 2])

        # -- action mapping (dynamics.map_action) --
        a3 = float(actions[i, 3])
        v_max = vlim_xy * (a3 + 1.0) / 2.0
        cx = vlim_xy * float(actions[i, 0])
        cy = vlim_xy * float(actions[i, 1])
        cz = vlim_z * float(actions[i, 2])
        norm = math.sqrt(cx * cx + cy * cy + cz * cz)
        if norm > v_max:
            scale = v_max / norm if norm > 0.0 else 0.0
            cx *= scale
            cy *= scale
            cz *= scale
        cx = min(max(cx, -vlim_xy), vlim_xy)
        cy = min(max(cy, -vlim_xy), vlim_xy)
        cz = min(max(cz, -vlim_z), vlim_z)

        # -- velocity tracking (dynamics.step_dynamics incl. its re-clamp) --
        if v_max < 0.0:
            v_max = 0.0
        elif v_max > vlim_xy:
            v_max = vlim_xy
        norm = math.sqrt(cx * cx + cy * cy + cz * cz)
        if norm > v_max:
            scale = v_max / norm if norm > 0.0 else 0.0
            cx *= scale
            cy *= scale
            cz *= scale
        cx = min(max(cx, -vlim_xy), vlim_xy)
        cy = min(max(cy, -vlim_xy), vlim_xy)
        cz = min(max(cz, -vlim_z), vlim_z)

        alpha = dt / tau_v
        if alpha > 1.0:
            alpha = 1.0
        dvx = (cx - vx) * alpha
        dvy = (cy - vy) * alpha
        dvz = (cz - vz) * alpha
        dn = math.sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
        dv_cap = a_max * dt
        if dn > dv_cap:
            k = dv_cap / dn
            dvx *= k
            dvy *= k
            dvz *= k
        vx += dvx
        vy += dvy
        vz += dvz
        prev_px, prev_py, prev_pz = px, py, pz
        px += vx * dt
        py += vy * dt
        pz += vz * dt

        if math.sqrt(vx * vx + vy * vy) > yaw_eps:
            yaw_des = math.atan2(vy, vx)
        else:
            yaw_des = psi
        err = _wrap(yaw_des - psi)
        beta = dt / tau_yaw
        if beta > 1.0:
            beta = 1.0
        dpsi = err * beta
        dpsi_cap = yaw_rate_max * dt
        if dpsi > dpsi_cap:
            dpsi = dpsi_cap
        elif dpsi < -dpsi_cap:
            dpsi = -dpsi_cap
        psi = _wrap(psi + dpsi)
        psi_rate = dpsi / dt

        # -- object motion (pre-drawn displacements) --
        has_gate = gate_present[i] != 0
        if has_gate:
            gate_center[i, 0] += disp_gate[i, 0]
            gate_center[i, 1] += disp_gate[i, 1]
        target[i, 0] += disp_target[i, 0]
        target[i, 1] += disp_target[i, 1]
        for k in range(n_obs):
            obstacles[i, k, 0] += disp_obs[i, k, 0]
            obstacles[i, k, 1] += disp_obs[i, k, 1]

        # -- gate plane crossing: goal switch through the opening, frame hits
        #    in the band (the frame stays solid after the gate is passed) --
        frame_hit = False
        cross_offset = -1.0
        if has_gate:
            gcx = float(gate_center[i, 0])
            gcy = float(gate_center[i, 1])
            gcz = float(gate_center[i, 2])
            gyaw = float(gate_yaw[i])
            nx = math.cos(gyaw)
            ny = math.sin(gyaw)
            s_old = (prev_px - gcx) * nx + (prev_py - gcy) * ny
            s_new = (px - gcx) * nx + (py - gcy) * ny
            crossed = not (
                (s_old == 0.0 and s_new == 0.0)
                or (s_old > 0.0 and s_new > 0.0)
                or (s_old < 0.0 and s_new < 0.0)
            )
            if crossed:
                denom = s_new - s_old
                frac = 0.0 if denom == 0.0 else -s_old / denom
                qx = prev_px + (px - prev_px) * frac
                qy = prev_py + (py - prev_py) * frac
                qz = prev_pz + (pz - prev_pz) * frac
                lx = -math.sin(gyaw)
                ly = math.cos(gyaw)
                lat = (qx - gcx) * lx + (qy - gcy) * ly
                vert = qz - gcz
                half = float(gate_half[i])
                if abs(lat) <= half and abs(vert) <= half:
                    if not gate_passed[i]:
                        gate_passed[i] = 1
                        cross_offset = math.sqrt(lat * lat + vert * vert)
                else:
                    m = max(abs(lat), abs(vert))
                    if half < m <= frame_outer:
                        frame_hit = True

        # -- collision (world.check_collision) --
        collided = pz < ground_z
        if not collided:
            for k in range(n_obs):
                dx = float(obstacles[i, k, 0]) - px
                dy = float(obstacles[i, k, 1]) - py
                if math.sqrt(dx * dx + dy * dy) < float(obstacles[i, k, 3]) + drone_radius:
                    collided = True
                    break
        if not collided and frame_hit:
            collided = True

        # -- reward on the post-step state (reward.r_total) --
        if has_gate and not gate_passed[i]:
            gx = float(gate_center[i, 0])
            gy = float(gate_center[i, 1])
            gz = float(gate_center[i, 2])
        else:
            gx = float(target[i, 0])
            gy = float(target[i, 1])
            gz = float(target[i, 2])
        dgx = px - gx
        dgy = py - gy
        dgz = pz - gz
        d_goal = math.sqrt(dgx * dgx + dgy * dgy + dgz * dgz)

        nearest = -1
        d_obs = math.inf
        for k in range(n_obs):
            dx = float(obstacles[i, k, 0]) - px
            dy = float(obstacles[i, k, 1]) - py
            d = math.sqrt(dx * dx + dy * dy)
            if d < d_obs:
                d_obs = d
                nearest = k
        if nearest < 0:
            r = 1.0 / (d_goal + c_prox) + (-c_coll if collided else 0.0)
        else:
            r = (
                1.0 / (d_goal + c_prox)
                + (-c_obst * math.exp(-d_obs / r_safety))
                + (-c_coll if collided else 0.0)
                + (-c_vel * (vx * vx + vy * vy + vz * vz) if d_obs < r_safety else 0.0)
            )

        t_new = float(t[i]) + dt

        done = 0
        outcome = OUT_RUNNING
        if collided:
            done = 1
            outcome = OUT_COLLISION
        elif gate_passed[i] and d_goal < success_radius:
            done = 1
            outcome = OUT_SUCCESS
        elif t_new >= t_max - 1e-9:
            done = 1
            outcome = OUT_TIMEOUT

        # -- write back state --
        pos[i, 0] = px
        pos[i, 1] = py
        pos[i, 2] = pz
        vel[i, 0] = vx
        vel[i, 1] = vy
        vel[i, 2] = vz
        yaw[i] = psi
        yaw_rate[i] = psi_rate
        t[i] = t_new

        # -- observation (world.observe layout) --
        obs_out[i, 0] = px
        obs_out[i, 1] = py
        obs_out[i, 2] = pz
        obs_out[i, 3] = 0.0
        obs_out[i, 4] = 0.0
        obs_out[i, 5] = psi
        obs_out[i, 6] = vx
        obs_out[i, 7] = vy
        obs_out[i, 8] = vz
        obs_out[i, 9] = 0.0
        obs_out[i, 10] = 0.0
        obs_out[i, 11] = psi_rate
        if has_gate and not gate_passed[i]:
            obs_out[i, 12] = float(gate_center[i, 0])
            obs_out[i, 13] = float(gate_center[i, 1])
            obs_out[i, 14] = float(gate_center[i, 2])
            obs_out[i, 15] = 2.0 * float(gate_half[i])
            obs_out[i, 16] = float(gate_yaw[i])
        else:
            obs_out[i, 12] = float(target[i, 0])
            obs_out[i, 13] = float(target[i, 1])
            obs_out[i, 14] = float(target[i, 2])
            obs_out[i, 15] = float(target_size[i])
            obs_out[i, 16] = 0.0
        if nearest >= 0:
            obs_out[i, 17] = float(obstacles[i, nearest, 0]) - px
            obs_out[i, 18] = float(obstacles[i, nearest, 1]) - py
            obs_out[i, 19] = float(obstacles[i, nearest, 2]) - pz
            obs_out[i, 20] = float(obstacles[i, nearest, 3])
        else:
            obs_out[i, 17] = 0.0
            obs_out[i, 18] = 0.0
            obs_out[i, 19] = 0.0
            obs_out[i, 20] = 0.0

        reward_out[i] = r
        done_out[i] = done
        outcome_out[i] = outcome
        cross_out[i] = cross_offset


def _wrap(a):
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a
