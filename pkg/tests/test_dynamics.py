import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatenav.dynamics import (
    A_MAX,
    DT_DEFAULT,
    TAU_V,
    DroneState,
    VelocityCommand,
    map_action,
    step_dynamics,
    wrap_angle,
    yaw_from_velocity,
)


def state(pos=(0, 0, 0), yaw=0.0, vel=(0, 0, 0), yaw_rate=0.0):
    return DroneState(np.array(pos, dtype=float), yaw, np.array(vel, dtype=float), yaw_rate)


class TestMapAction:
    def test_zero_direction(self):
        cmd = map_action((0, 0, 0, 1))
        assert np.allclose(cmd.v_des, 0.0)
        assert cmd.v_max == 3.0

    def test_full_x(self):
        cmd = map_action((1, 0, 0, 1))
        assert np.allclose(cmd.v_des, [3, 0, 0])
        assert cmd.v_max == 3.0

    def test_zero_budget_scales_to_zero(self):
        cmd = map_action((1, 1, 0, -1))
        assert cmd.v_max == 0.0
        assert np.allclose(cmd.v_des, 0.0)

    def test_rescale_preserves_direction(self):
        cmd = map_action((1, 1, 1, 1))
        raw = np.array([3.0, 3.0, 2.0])
        assert math.isclose(float(np.linalg.norm(cmd.v_des)), 3.0, rel_tol=1e-12)
        cos = float(cmd.v_des @ raw) / (np.linalg.norm(cmd.v_des) * np.linalg.norm(raw))
        assert math.isclose(cos, 1.0, rel_tol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            map_action((math.nan, 0, 0, 0))
        with pytest.raises(ValueError):
            map_action((0, math.inf, 0, 0))

    @given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
    def test_norm_never_exceeds_budget(self, a):
        cmd = map_action(a)
        assert float(np.linalg.norm(cmd.v_des)) <= cmd.v_max + 1e-12


class TestYawFromVelocity:
    def test_plus_x(self):
        assert yaw_from_velocity((1.0, 0.0, 5.0), 0.3) == 0.0

    def test_diagonal(self):
        assert math.isclose(yaw_from_velocity((1.0, 1.0, 0.0), 0.0), math.pi / 4)

    def test_holds_on_degenerate(self):
        assert yaw_from_velocity((0.0, 0.0, 2.0), 0.7) == 0.7

    def test_threshold(self):
        assert yaw_from_velocity((0.04, 0.0, 0.0), 0.9) == 0.9
        assert yaw_from_velocity((0.06, 0.0, 0.0), 0.9) == 0.0


class TestStepDynamics:
    def test_equilibrium(self):
        s = state(pos=(1, 2, 3))
        out = step_dynamics(s, VelocityCommand(np.zeros(3), 3.0), DT_DEFAULT)
        assert np.allclose(out.position, [1, 2, 3])
        assert np.allclose(out.velocity, 0.0)

    def test_acceleration_cap_binds(self):
        # First-order delta would be 3*0.02/0.3 = 0.2; cap = 6*0.02 = 0.12.
        s = state()
        out = step_dynamics(s, VelocityCommand(np.array([3.0, 0, 0]), 3.0), 0.02)
        assert math.isclose(float(out.velocity[0]), 0.12, rel_tol=1e-12)
        assert out.velocity[1] == 0.0

    def test_converges_within_five_tau(self):
        s = state()
        cmd = VelocityCommand(np.array([3.0, 0, 0]), 3.0)
        n = int(round(5 * TAU_V / DT_DEFAULT))
        for _ in range(n):
            s = step_dynamics(s, cmd, DT_DEFAULT)
        assert abs(float(s.velocity[0]) - 3.0) / 3.0 < 0.01

    def test_velocity_fixed_point(self):
        s = state(vel=(1.0, -0.5, 0.3))
        out = step_dynamics(s, VelocityCommand(s.velocity.copy(), 3.0), DT_DEFAULT)
        assert np.allclose(out.velocity, s.velocity)

    def test_position_rule_exact(self):
        s = state(pos=(0, 0, 1), vel=(2.0, 0, 0))
        cmd = VelocityCommand(np.array([2.0, 0, 0]), 3.0)
        out = step_dynamics(s, cmd, 0.02)
        assert np.allclose(out.position, s.position + out.velocity * 0.02)

    def test_halfstep_convergence(self):
        # Two half-steps agree with one full step to O(dt^2).
        cmd = VelocityCommand(np.array([2.0, 1.0, -0.5]), 3.0)
        errs = []
        for dt in (0.04, 0.02, 0.01):
            full = step_dynamics(state(vel=(0.5, 0, 0)), cmd, dt)
            half = step_dynamics(
                step_dynamics(state(vel=(0.5, 0, 0)), cmd, dt / 2), cmd, dt / 2
            )
            errs.append(float(np.linalg.norm(full.position - half.position)))
        # Error should shrink ~4x per dt halving.
        assert errs[1] < errs[0] / 2.5
        assert errs[2] < errs[1] / 2.5

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            step_dynamics(state(), VelocityCommand(np.zeros(3), 1.0), 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(st.floats(-1, 1), min_size=4, max_size=4), min_size=1, max_size=8))
    def test_axis_bounds_invariant(self, actions):
        # From rest, any command sequence keeps per-axis caps, the
        # acceleration cap, and |v'| <= max(|v|, v_max) at every step.
        s = state()
        for a in actions:
            cmd = map_action(a)
            prev = s.velocity.copy()
            s = step_dynamics(s, cmd, DT_DEFAULT)
            assert abs(float(s.velocity[0])) <= 3.0 + 1e-12
            assert abs(float(s.velocity[1])) <= 3.0 + 1e-12
            assert abs(float(s.velocity[2])) <= 2.0 + 1e-12
            dv = float(np.linalg.norm(s.velocity - prev))
            assert dv <= A_MAX * DT_DEFAULT + 1e-9
            bound = max(float(np.linalg.norm(prev)), cmd.v_max)
            assert float(np.linalg.norm(s.velocity)) <= bound + 1e-9

    def test_persistent_command_norm_bound(self):
        s = state()
        cmd = map_action((0.9, -0.8, 0.5, 0.2))
        for _ in range(400):
            s = step_dynamics(s, cmd, DT_DEFAULT)
            assert float(np.linalg.norm(s.velocity)) <= cmd.v_max + 1e-9

    def test_yaw_wrap_range(self):
        s = state(yaw=3.1, vel=(0, 0, 0))
        cmd = VelocityCommand(np.array([-3.0, -0.5, 0.0]), 3.0)
        for _ in range(200):
            s = step_dynamics(s, cmd, DT_DEFAULT)
            assert -math.pi < s.yaw <= math.pi


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert math.isclose(wrap_angle(3 * math.pi), math.pi)
    assert math.isclose(wrap_angle(-3 * math.pi), math.pi)
    assert math.isclose(wrap_angle(math.pi + 0.1), -math.pi + 0.1)
