import math

import numpy as np
import pytest

from gatenav import policy as pol


def tiny_params(obs_dim=2, hidden=(2,), act_dim=1, seed=0):
    return pol.init_params(np.random.default_rng(seed), obs_dim, hidden, act_dim)


class TestForward:
    def test_zero_network(self):
        p = tiny_params(obs_dim=4, hidden=(3,), act_dim=2)
        for a in p.arrays():
            a[...] = 0.0
        out, _ = pol.forward(p, np.ones(4))
        assert np.allclose(out.mean, 0.0)
        assert out.value == 0.0

    def test_hand_computed_small_net(self):
        p = tiny_params()
        p.weights[0][...] = np.eye(2)
        p.biases[0][...] = 0.0
        p.w_mean[...] = [[1.0, 1.0]]
        p.b_mean[...] = 0.0
        p.w_value[...] = [[0.5, -0.5]]
        p.b_value[...] = 0.25
        p.log_std[...] = -0.5
        out, _ = pol.forward(p, np.array([0.3, -0.2]))
        # relu -> (0.3, 0); mean = tanh(0.3); value = 0.5*0.3 + 0.25
        assert math.isclose(float(out.mean[0]), math.tanh(0.3), rel_tol=1e-15)
        assert math.isclose(float(out.value), 0.4, rel_tol=1e-15)

    def test_deterministic(self):
        p = tiny_params(obs_dim=21, hidden=(16, 8), act_dim=4, seed=3)
        x = np.random.default_rng(1).normal(size=(5, 21))
        a, _ = pol.forward(p, x)
        b, _ = pol.forward(p, x)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.value, b.value)

    def test_shape_mismatch_raises(self):
        p = tiny_params(obs_dim=4, hidden=(3,), act_dim=2)
        with pytest.raises(ValueError):
            pol.forward(p, np.ones(5))

    def test_log_std_clamped(self):
        p = tiny_params()
        p.log_std[...] = 7.0
        out, _ = pol.forward(p, np.zeros(2))
        assert out.log_std[0] == pol.LOG_STD_MAX
        p.log_std[...] = -9.0
        out, _ = pol.forward(p, np.zeros(2))
        assert out.log_std[0] == pol.LOG_STD_MIN


class TestInit:
    def test_param_count_closed_form(self):
        p = pol.init_params(np.random.default_rng(0))
        assert pol.param_count(p) == pol.expected_param_count()
        expected = (
            (21 * 512 + 512)
            + (512 * 512 + 512)
            + (512 * 256 + 256)
            + (256 * 128 + 128)
            + (128 * 4 + 4)
            + (128 * 1 + 1)
            + 4
        )
        assert pol.expected_param_count() == expected

    def test_orthogonal_rows(self):
        w = pol.orthogonal_init(np.random.default_rng(5), (8, 32), math.sqrt(2.0))
        assert np.allclose(w @ w.T, 2.0 * np.eye(8), atol=1e-10)

    def test_layer_shapes(self):
        p = pol.init_params(np.random.default_rng(0))
        assert [w.shape for w in p.weights] == [(512, 21), (512, 512), (256, 512), (128, 256)]
        assert p.w_mean.shape == (4, 128)
        assert p.w_value.shape == (1, 128)
        assert p.log_std.shape == (4,)
        assert np.all(p.log_std == -0.5)


class TestSampling:
    def test_tiny_std_returns_mean(self):
        out = pol.PolicyOutput(np.array([0.2, -0.1, 0.0, 0.5]), np.full(4, -40.0), np.zeros(1))
        a, _ = pol.sample_action(out, np.random.default_rng(0))
        assert np.allclose(a, out.mean, atol=1e-15)

    def test_deterministic_mode(self):
        out = pol.PolicyOutput(np.array([0.2, -0.1, 0.0, 0.5]), np.zeros(4), np.zeros(1))
        a, _ = pol.sample_action(out, None, deterministic=True)
        assert np.array_equal(a, out.mean)

    def test_log_prob_at_mean_unit_std(self):
        mean = np.zeros(4)
        lp = pol.log_prob(mean, np.zeros(4), mean)
        assert math.isclose(float(lp), -2.0 * math.log(2.0 * math.pi), rel_tol=1e-12)
        assert math.isclose(float(lp), -3.6758, abs_tol=2e-4)

    def test_sample_mean_statistics(self):
        rng = np.random.default_rng(11)
        mean = np.array([0.1, -0.3, 0.0, 0.2])
        out = pol.PolicyOutput(mean, np.full(4, -1.0), np.zeros(1))
        n = 100_000
        acc = np.zeros(4)
        for _ in range(n):
            raw, _, _ = pol.sample_action_raw(out, rng)
            acc += raw
        emp = acc / n
        sigma = math.exp(-1.0)
        assert np.all(np.abs(emp - mean) < 4.0 * sigma / math.sqrt(n))

    def test_clipping(self):
        out = pol.PolicyOutput(np.array([0.99, -0.99, 0.0, 0.0]), np.zeros(4), np.zeros(1))
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, _ = pol.sample_action(out, rng)
            assert np.all(np.abs(a) <= 1.0)


class TestBackwardStructure:
    def test_zero_upstream_zero_grads(self):
        p = tiny_params(obs_dim=3, hidden=(4, 4), act_dim=2, seed=9)
        x = np.random.default_rng(0).normal(size=(6, 3))
        _, cache = pol.forward(p, x, cache=True)
        g = pol.backward(p, cache, np.zeros((6, 2)), np.zeros(6))
        for arr in g.arrays():
            assert np.all(arr == 0.0)

    def test_value_head_independent_of_actor_head(self):
        p = tiny_params(obs_dim=3, hidden=(4,), act_dim=2, seed=9)
        x = np.random.default_rng(0).normal(size=(6, 3))
        out1, _ = pol.forward(p, x)
        p.w_mean[...] = np.random.default_rng(1).normal(size=p.w_mean.shape)
        out2, _ = pol.forward(p, x)
        assert np.array_equal(out1.value, out2.value)

    def test_relu_dead_zone(self):
        p = tiny_params(obs_dim=2, hidden=(3,), act_dim=1, seed=4)
        p.biases[0][...] = -10.0  # all units dead for small inputs
        x = 0.01 * np.random.default_rng(0).normal(size=(5, 2))
        _, cache = pol.forward(p, x, cache=True)
        g = pol.backward(p, cache, np.ones((5, 1)), np.ones(5))
        assert np.all(g.weights[0] == 0.0)
        assert np.all(g.biases[0] == 0.0)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        p = pol.init_params(np.random.default_rng(42), obs_dim=7, hidden=(16, 8), act_dim=3)
        path = tmp_path / "ck.npz"
        pol.save_checkpoint(path, p, {"steps": 123})
        q = pol.load_checkpoint(path)
        for a, b in zip(p.arrays(), q.arrays()):
            assert np.array_equal(a, b) and a.dtype == b.dtype

    def test_shape_check_names_layer(self, tmp_path):
        p = pol.init_params(np.random.default_rng(0), obs_dim=7, hidden=(16, 8), act_dim=3)
        p.biases[1] = np.zeros(5)  # wrong width
        path = tmp_path / "bad.npz"
        pol.save_checkpoint(path, p)
        with pytest.raises(ValueError, match="layer 1"):
            pol.load_checkpoint(path)

    def test_vector_roundtrip(self):
        p = pol.init_params(np.random.default_rng(1), obs_dim=5, hidden=(6,), act_dim=2)
        v = pol.to_vector(p)
        q = pol.from_vector(p, v * 2.0)
        assert np.allclose(pol.to_vector(q), v * 2.0)
        with pytest.raises(ValueError):
            pol.from_vector(p, v[:-1])
