# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused environment-step kernel.

Bit-for-bit mirror of _speedups_py.step_batch (same call signature, same
operation order, same libm calls); tests/test_kernels.py holds the two
implementations equal. Keep edits synchronized with the Python twin and bump
ABI_VERSION on any signature change.
"""

from libc.math cimport atan2, cos, exp, fabs, fmod, sin, sqrt

ABI_VERSION = 1
COMPILED = True

cdef double PI = 3.141592653589793

# params vector layout — must match _speedups_py.
cdef enum:
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

cdef enum:
    OUT_RUNNING = 0
    OUT_SUCCESS = 1
    OUT_COLLISION = 2
    OUT_TIMEOUT = 3


cdef inline double _wrap(double a) noexcept:
    a = fmod(a, 2.0 * PI)
    if a > PI:
        a -= 2.0 * PI
    elif a <= -PI:
        a += 2.0 * PI
    return a


cdef inline double _clip(double x, double lo, double hi) noexcept:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def step_batch(
    double[:, ::1] pos,
    double[::1] yaw,
    double[:, ::1] vel,
    double[::1] yaw_rate,
    unsigned char[::1] gate_present,
    double[:, ::1] gate_center,
    double[::1] gate_yaw,
    double[::1] gate_half,
    unsigned char[::1] gate_passed,
    double[:, :, ::1] obstacles,
    double[:, ::1] target,
    double[::1] target_size,
    double[::1] t,
    double[:, ::1] actions,
    double[:, ::1] disp_gate,
    double[:, ::1] disp_target,
    double[:, :, ::1] disp_obs,
    double[::1] params,
    unsigned char[::1] active,
    double[:, ::1] obs_out,
    double[::1] reward_out,
    unsigned char[::1] done_out,
    int[::1] outcome_out,
    double[::1] cross_out,
):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t n_obs = obstacles.shape[1]
    cdef Py_ssize_t i, k

    cdef double dt = params[P_DT]
    cdef double tau_v = params[P_TAU_V]
    cdef double a_max = params[P_A_MAX]
    cdef double tau_yaw = params[P_TAU_YAW]
    cdef double yaw_rate_max = params[P_YAW_RATE_MAX]
    cdef double yaw_eps = params[P_YAW_SPEED_EPS]
    cdef double vlim_xy = params[P_V_LIMIT_XY]
    cdef double vlim_z = params[P_V_LIMIT_Z]
    cdef double t_max = params[P_T_MAX]
    cdef double success_radius = params[P_SUCCESS_RADIUS]
    cdef double drone_radius = params[P_DRONE_RADIUS]
    cdef double ground_z = params[P_GROUND_Z]
    cdef double frame_outer = params[P_FRAME_OUTER]
    cdef double c_prox = params[P_C_PROXIMITY]
    cdef double c_obst = params[P_C_OBSTACLE]
    cdef double c_coll = params[P_C_COLLISION]
    cdef double c_vel = params[P_C_VELOCITY]
    cdef double r_safety = params[P_R_SAFETY]

    cdef double px, py, pz, psi, vx, vy, vz
    cdef double a3, v_max, cx, cy, cz, norm, scale
    cdef double alpha, dvx, dvy, dvz, dn, dv_cap, kk
    cdef double prev_px, prev_py, prev_pz
    cdef double yaw_des, err, beta, dpsi, dpsi_cap, psi_rate
    cdef bint has_gate, crossed, frame_hit, collided
    cdef double cross_offset
    cdef double gcx, gcy, gcz, gyaw, nx, ny, s_old, s_new, denom, frac
    cdef double qx, qy, qz, lx, ly, lat, vert, half, m
    cdef double gx, gy, gz, dgx, dgy, dgz, d_goal
    cdef double dx, dy, d, d_obs, r, t_new
    cdef Py_ssize_t nearest
    cdef int done, outcome

    for i in range(n):
        if not active[i]:
            continue

        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        psi = yaw[i]
        vx = vel[i, 0]
        vy = vel[i, 1]
        vz = vel[i, 2]

        # -- action mapping --
        a3 = actions[i, 3]
        v_max = vlim_xy * (a3 + 1.0) / 2.0
        cx = vlim_xy * actions[i, 0]
        cy = vlim_xy * actions[i, 1]
        cz = vlim_z * actions[i, 2]
        norm = sqrt(cx * cx + cy * cy + cz * cz)
        if norm > v_max:
            scale = v_max / norm if norm > 0.0 else 0.0
            cx *= scale
            cy *= scale
            cz *= scale
        cx = _clip(cx, -vlim_xy, vlim_xy)
        cy = _clip(cy, -vlim_xy, vlim_xy)
        cz = _clip(cz, -vlim_z, vlim_z)

        # -- velocity tracking (incl. step_dynamics re-clamp) --
        if v_max < 0.0:
            v_max = 0.0
        elif v_max > vlim_xy:
            v_max = vlim_xy
        norm = sqrt(cx * cx + cy * cy + cz * cz)
        if norm > v_max:
            scale = v_max / norm if norm > 0.0 else 0.0
            cx *= scale
            cy *= scale
            cz *= scale
        cx = _clip(cx, -vlim_xy, vlim_xy)
        cy = _clip(cy, -vlim_xy, vlim_xy)
        cz = _clip(cz, -vlim_z, vlim_z)

        alpha = dt / tau_v
        if alpha > 1.0:
            alpha = 1.0
        dvx = (cx - vx) * alpha
        dvy = (cy - vy) * alpha
        dvz = (cz - vz) * alpha
        dn = sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
        dv_cap = a_max * dt
        if dn > dv_cap:
            kk = dv_cap / dn
            dvx *= kk
            dvy *= kk
            dvz *= kk
        vx += dvx
        vy += dvy
        vz += dvz
        prev_px = px
        prev_py = py
        prev_pz = pz
        px += vx * dt
        py += vy * dt
        pz += vz * dt

        if sqrt(vx * vx + vy * vy) > yaw_eps:
            yaw_des = atan2(vy, vx)
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

        # -- object motion --
        has_gate = gate_present[i] != 0
        if has_gate:
            gate_center[i, 0] += disp_gate[i, 0]
            gate_center[i, 1] += disp_gate[i, 1]
        target[i, 0] += disp_target[i, 0]
        target[i, 1] += disp_target[i, 1]
        for k in range(n_obs):
            obstacles[i, k, 0] += disp_obs[i, k, 0]
            obstacles[i, k, 1] += disp_obs[i, k, 1]

        # -- gate plane crossing --
        frame_hit = False
        cross_offset = -1.0
        if has_gate:
            gcx = gate_center[i, 0]
            gcy = gate_center[i, 1]
            gcz = gate_center[i, 2]
            gyaw = gate_yaw[i]
            nx = cos(gyaw)
            ny = sin(gyaw)
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
                lx = -sin(gyaw)
                ly = cos(gyaw)
                lat = (qx - gcx) * lx + (qy - gcy) * ly
                vert = qz - gcz
                half = gate_half[i]
                if fabs(lat) <= half and fabs(vert) <= half:
                    if not gate_passed[i]:
                        gate_passed[i] = 1
                        cross_offset = sqrt(lat * lat + vert * vert)
                else:
                    m = fabs(lat)
                    if fabs(vert) > m:
                        m = fabs(vert)
                    if half < m <= frame_outer:
                        frame_hit = True

        # -- collision --
        collided = pz < ground_z
        if not collided:
            for k in range(n_obs):
                dx = obstacles[i, k, 0] - px
                dy = obstacles[i, k, 1] - py
                if sqrt(dx * dx + dy * dy) < obstacles[i, k, 3] + drone_radius:
                    collided = True
                    break
        if not collided and frame_hit:
            collided = True

        # -- reward on the post-step state --
        if has_gate and not gate_passed[i]:
            gx = gate_center[i, 0]
            gy = gate_center[i, 1]
            gz = gate_center[i, 2]
        else:
            gx = target[i, 0]
            gy = target[i, 1]
            gz = target[i, 2]
        dgx = px - gx
        dgy = py - gy
        dgz = pz - gz
        d_goal = sqrt(dgx * dgx + dgy * dgy + dgz * dgz)

        nearest = -1
        d_obs = 0.0
        for k in range(n_obs):
            dx = obstacles[i, k, 0] - px
            dy = obstacles[i, k, 1] - py
            d = sqrt(dx * dx + dy * dy)
            if nearest < 0 or d < d_obs:
                d_obs = d
                nearest = k
        if nearest < 0:
            r = 1.0 / (d_goal + c_prox) + (-c_coll if collided else 0.0)
        else:
            r = (
                1.0 / (d_goal + c_prox)
                + (-c_obst * exp(-d_obs / r_safety))
                + (-c_coll if collided else 0.0)
                + (-c_vel * (vx * vx + vy * vy + vz * vz) if d_obs < r_safety else 0.0)
            )

        t_new = t[i] + dt

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

        # -- observation --
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
            obs_out[i, 12] = gate_center[i, 0]
            obs_out[i, 13] = gate_center[i, 1]
            obs_out[i, 14] = gate_center[i, 2]
            obs_out[i, 15] = 2.0 * gate_half[i]
            obs_out[i, 16] = gate_yaw[i]
        else:
            obs_out[i, 12] = target[i, 0]
            obs_out[i, 13] = target[i, 1]
            obs_out[i, 14] = target[i, 2]
            obs_out[i, 15] = target_size[i]
            obs_out[i, 16] = 0.0
        if nearest >= 0:
            obs_out[i, 17] = obstacles[i, nearest, 0] - px
            obs_out[i, 18] = obstacles[i, nearest, 1] - py
            obs_out[i, 19] = obstacles[i, nearest, 2] - pz
            obs_out[i, 20] = obstacles[i, nearest, 3]
        else:
            obs_out[i, 17] = 0.0
            obs_out[i, 18] = 0.0
            obs_out[i, 19] = 0.0
            obs_out[i, 20] = 0.0

        reward_out[i] = r
        done_out[i] = done
        outcome_out[i] = outcome
        cross_out[i] = cross_offset
