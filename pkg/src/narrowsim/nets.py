"""Small fully-connected networks with manual backprop and Adam.

Everything the agents need lives here: a two-hidden-layer MLP (rectified
linear units, optional scaled-tanh output squash for the actor), exact
analytic gradients with respect to both parameters and inputs (the actor
update differentiates the critic through its action input), Adam updates,
and soft target blending. Plain numpy keeps runs deterministic for a fixed
seed and lets the tests verify every gradient against finite differences.
"""

from __future__ import annotations

import numpy as np


class MLP:
    """input -> hidden -> hidden -> output, ReLU inside.

    out="linear" leaves the head raw (critics, Q-values); out="tanh" squashes
    to (-out_scale, out_scale) for bounded continuous actions. Parameters are
    kept as a flat list [W1, b1, W2, b2, W3, b3].
    """

    def __init__(self, in_dim, out_dim, rng, hidden=(512, 512),
                 out="linear", out_scale=1.0, dtype=np.float32):
        if out not in ("linear", "tanh"):
            raise ValueError("out must be 'linear' or 'tanh'")
        self.dims = (int(in_dim), *map(int, hidden), int(out_dim))
        self.out = out
        self.out_scale = float(out_scale)
        self.dtype = np.dtype(dtype)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype))
            self.params.append(np.zeros(fan_out, dtype=self.dtype))

    def forward(self, x: np.ndarray):
        """Returns (output, cache); feed the cache to backward."""
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        w1, b1, w2, b2, w3, b3 = self.params
        h1 = np.maximum(x @ w1 + b1, 0.0)
        h2 = np.maximum(h1 @ w2 + b2, 0.0)
        y = h2 @ w3 + b3
        t = None
        if self.out == "tanh":
            t = np.tanh(y)
            y = self.out_scale * t
        cache = (x, h1, h2, t, squeeze)
        return (y[0] if squeeze else y), cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dout: np.ndarray):
        """Gradients of sum(dout * output) w.r.t. params and input.

        Returns (grads, dx) with grads shaped like self.params.
        """
        x, h1, h2, t, squeeze = cache
        dout = np.asarray(dout, dtype=self.dtype)
        if squeeze:
            dout = dout[None, :] if dout.ndim == 1 else dout.reshape(1, -1)
        w1, b1, w2, b2, w3, b3 = self.params

        dy = dout
        if self.out == "tanh":
            dy = dout * self.out_scale * (1.0 - t * t)
        dw3 = h2.T @ dy
        db3 = dy.sum(axis=0)
        dh2 = dy @ w3.T
        dz2 = dh2 * (h2 > 0)
        dw2 = h1.T @ dz2
        db2 = dz2.sum(axis=0)
        dh1 = dz2 @ w2.T
        dz1 = dh1 * (h1 > 0)
        dw1 = x.T @ dz1
        db1 = dz1.sum(axis=0)
        dx = dz1 @ w1.T
        return [dw1, db1, dw2, db2, dw3, db3], (dx[0] if squeeze else dx)

    def clone(self) -> "MLP":
        copy = object.__new__(MLP)
        copy.dims = self.dims
        copy.out = self.out
        copy.out_scale = self.out_scale
        copy.dtype = self.dtype
        copy.params = [p.copy() for p in self.params]
        return copy

    def load_params(self, params) -> None:
        if len(params) != len(self.params):
            raise ValueError("parameter count mismatch")
        for own, new in zip(self.params, params):
            if own.shape != new.shape:
                raise ValueError(f"shape mismatch {own.shape} vs {new.shape}")
            own[...] = new


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """Blend target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    for tp, op in zip(target.params, online.params):
        tp *= 1.0 - tau
        tp += tau * op


class Adam:
    """Per-parameter adaptive moments, bias-corrected."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = g.astype(p.dtype, copy=False)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
