"""Analytic gradients vs central finite differences on float64 toy networks.

The finite-difference probe is the oracle; the production backward pass,
the Q-learning update, and the actor path of the actor-critic update must
all match it to a relative error under 1e-4.
"""

import numpy as np
import pytest

from narrowsim.nets import MLP, Adam, soft_update

FD_H = 1e-6
REL_TOL = 1e-4


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b))


def fd_param_grads(loss_fn, params, h=FD_H):
    """Central differences of loss_fn() over every scalar in params."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            i = it.multi_index
            orig = p[i]
            p[i] = orig + h
            hi = loss_fn()
            p[i] = orig - h
            lo = loss_fn()
            p[i] = orig
            g[i] = (hi - lo) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def toy_mlp(in_dim, out_dim, seed, out="linear", out_scale=1.0):
    rng = np.random.default_rng(seed)
    return MLP(in_dim, out_dim, rng, hidden=(5, 4), out=out,
               out_scale=out_scale, dtype=np.float64)


def assert_no_relu_kinks(net, x, margin=1e-4):
    """FD perturbations must not flip any rectifier, or the check is invalid."""
    w1, b1, w2, b2, _, _ = net.params
    z1 = x @ w1 + b1
    z2 = np.maximum(z1, 0.0) @ w2 + b2
    assert min(np.abs(z1).min(), np.abs(z2).min()) > margin


class TestMLPGradients:
    @pytest.mark.parametrize("out,scale", [("linear", 1.0), ("tanh", 0.6)])
    def test_parameter_gradients(self, out, scale):
        net = toy_mlp(3, 2, seed=1, out=out, out_scale=scale)
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, (6, 3))
        dout = rng.normal(0, 1, (6, 2))
        assert_no_relu_kinks(net, x)

        def loss():
            return float(np.sum(dout * net(x)))

        y, cache = net.forward(x)
        analytic, _ = net.backward(cache, dout)
        numeric = fd_param_grads(loss, net.params)
        for a, n in zip(analytic, numeric):
            assert rel_err(a, n).max() < REL_TOL

    def test_input_gradient(self):
        net = toy_mlp(3, 2, seed=3)
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, (5, 3))
        dout = rng.normal(0, 1, (5, 2))
        assert_no_relu_kinks(net, x)
        _, cache = net.forward(x)
        _, dx = net.backward(cache, dout)
        numeric = np.zeros_like(x)
        for i in np.ndindex(x.shape):
            orig = x[i]
            xp = x.copy(); xp[i] = orig + FD_H
            xm = x.copy(); xm[i] = orig - FD_H
            numeric[i] = (np.sum(dout * net(xp)) - np.sum(dout * net(xm))) / (2 * FD_H)
        assert rel_err(dx, numeric).max() < REL_TOL

    def test_vector_forward_squeezes(self):
        net = toy_mlp(3, 2, seed=5)
        y = net(np.array([0.1, -0.2, 0.3]))
        assert y.shape == (2,)
        yb = net(np.array([[0.1, -0.2, 0.3]]))
        np.testing.assert_array_equal(y, yb[0])

    def test_tanh_output_bounded(self):
        net = toy_mlp(3, 2, seed=6, out="tanh", out_scale=0.6)
        rng = np.random.default_rng(7)
        y = net(rng.normal(0, 5, (100, 3)))
        assert np.all(np.abs(y) < 0.6)

    def test_invalid_head_rejected(self):
        with pytest.raises(ValueError):
            MLP(3, 2, np.random.default_rng(0), out="sigmoid")

    def test_clone_is_independent(self):
        net = toy_mlp(3, 2, seed=8)
        copy = net.clone()
        copy.params[5][0] += 1.0  # output bias shifts the head unconditionally
        assert net.params[5][0] != copy.params[5][0]
        x = np.ones(3)
        assert not np.array_equal(net(x), copy(x))

    def test_load_params_validates_shapes(self):
        net = toy_mlp(3, 2, seed=9)
        other = toy_mlp(3, 2, seed=10)
        net.load_params([p.copy() for p in other.params])
        np.testing.assert_array_equal(net.params[2], other.params[2])
        with pytest.raises(ValueError):
            net.load_params(other.params[:-1])
        with pytest.raises(ValueError):
            bad = [p.copy() for p in other.params]
            bad[0] = np.zeros((4, 5))
            net.load_params(bad)


class TestUpdateGradients:
    def test_q_learning_loss_gradient(self):
        online = toy_mlp(4, 3, seed=11)
        target = toy_mlp(4, 3, seed=12)
        rng = np.random.default_rng(13)
        n = 8
        states = rng.normal(0, 1, (n, 4))
        ids = rng.integers(0, 3, n)
        rewards = rng.normal(0, 1, n)
        next_states = rng.normal(0, 1, (n, 4))
        dones = (rng.random(n) < 0.3).astype(float)
        gamma = 0.99
        assert_no_relu_kinks(online, states)
        y = rewards + gamma * (1.0 - dones) * target(next_states).max(axis=1)

        def loss():
            q = online(states)[np.arange(n), ids]
            return float(np.mean((q - y) ** 2))

        q_all, cache = online.forward(states)
        err = q_all[np.arange(n), ids] - y
        dq = np.zeros_like(q_all)
        dq[np.arange(n), ids] = 2.0 * err / n
        analytic, _ = online.backward(cache, dq)
        numeric = fd_param_grads(loss, online.params)
        for a, g in zip(analytic, numeric):
            assert rel_err(a, g).max() < REL_TOL

    def test_actor_path_gradient_through_critic(self):
        actor = toy_mlp(3, 2, seed=14, out="tanh", out_scale=0.6)
        critic = toy_mlp(5, 1, seed=15)
        rng = np.random.default_rng(16)
        n = 6
        states = rng.normal(0, 1, (n, 3))
        assert_no_relu_kinks(actor, states)

        def loss():
            a = actor(states)
            return float(-np.mean(critic(np.concatenate([states, a], axis=1))))

        a_pi, actor_cache = actor.forward(states)
        q_pi, q_cache = critic.forward(np.concatenate([states, a_pi], axis=1))
        _, dsa = critic.backward(q_cache, np.full_like(q_pi, -1.0 / n))
        analytic, _ = actor.backward(actor_cache, dsa[:, 3:])
        numeric = fd_param_grads(loss, actor.params)
        for a, g in zip(analytic, numeric):
            assert rel_err(a, g).max() < REL_TOL

    def test_critic_regression_gradient(self):
        critic = toy_mlp(5, 1, seed=17)
        rng = np.random.default_rng(18)
        n = 8
        sa = rng.normal(0, 1, (n, 5))
        y = rng.normal(0, 1, n)
        assert_no_relu_kinks(critic, sa)

        def loss():
            return float(np.mean((critic(sa)[:, 0] - y) ** 2))

        q, cache = critic.forward(sa)
        err = q[:, 0] - y
        analytic, _ = critic.backward(cache, (2.0 * err / n)[:, None])
        numeric = fd_param_grads(loss, critic.params)
        for a, g in zip(analytic, numeric):
            assert rel_err(a, g).max() < REL_TOL


class TestSoftUpdate:
    def test_tau_one_is_hard_copy(self):
        target, online = toy_mlp(3, 2, seed=19), toy_mlp(3, 2, seed=20)
        soft_update(target, online, 1.0)
        for tp, op in zip(target.params, online.params):
            np.testing.assert_array_equal(tp, op)

    def test_tau_zero_is_noop(self):
        target, online = toy_mlp(3, 2, seed=21), toy_mlp(3, 2, seed=22)
        before = [p.copy() for p in target.params]
        soft_update(target, online, 0.0)
        for tp, b in zip(target.params, before):
            np.testing.assert_array_equal(tp, b)

    def test_blend_formula(self):
        target, online = toy_mlp(3, 2, seed=23), toy_mlp(3, 2, seed=24)
        before = [p.copy() for p in target.params]
        soft_update(target, online, 0.005)
        for tp, b, op in zip(target.params, before, online.params):
            np.testing.assert_allclose(tp, 0.005 * op + 0.995 * b, atol=1e-12)

    def test_tau_out_of_range(self):
        target, online = toy_mlp(3, 2, seed=25), toy_mlp(3, 2, seed=26)
        with pytest.raises(ValueError):
            soft_update(target, online, 1.5)


class TestAdam:
    def test_first_step_matches_closed_form(self):
        p = np.zeros(3)
        g = np.array([0.5, -2.0, 1e-12])
        opt = Adam([p], lr=0.01)
        opt.step([p], [g])
        want = -0.01 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(p, want, atol=1e-12)

    def test_regression_loss_decreases(self):
        rng = np.random.default_rng(27)
        x = np.linspace(-2, 2, 64)[:, None]
        y = np.sin(2.0 * x)
        net = MLP(1, 1, rng, hidden=(16, 16), dtype=np.float64)
        opt = Adam(net.params, lr=1e-2)

        def mse():
            return float(np.mean((net(x) - y) ** 2))

        first = mse()
        for _ in range(300):
            pred, cache = net.forward(x)
            grads, _ = net.backward(cache, 2.0 * (pred - y) / x.size)
            opt.step(net.params, grads)
        assert mse() < 0.1 * first
