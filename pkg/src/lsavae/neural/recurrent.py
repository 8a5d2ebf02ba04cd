"""GRU and LSTM cells, their unrolled layers, and a bidirectional LSTM.

Recurrent layers consume ``(batch, length, features)`` and return the final
hidden state ``(batch, hidden)``. Gate pre-activations act on the
concatenation ``[h_{t-1}, x_t]``.
"""
from __future__ import annotations

import numpy as np

from .layers import Layer, ShapeError, glorot_uniform, sigmoid


class GRUCell(Layer):
    """Gated recurrent unit.

    ``u = s(W_u [h, x] + b_u)``, ``r = s(W_r [h, x] + b_r)``,
    ``c = tanh(W_h [r*h, x] + b_h)``, ``h' = u*h + (1-u)*c``.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.input_size, self.hidden_size = input_size, hidden_size
        n = input_size + hidden_size
        for g in ("u", "r", "h"):
            self.params[f"W_{g}"] = glorot_uniform(rng, (n, hidden_size), n, hidden_size)
            self.params[f"b_{g}"] = np.zeros(hidden_size)

    def config(self):
        return {"input_size": self.input_size, "hidden_size": self.hidden_size}

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, x, h):
        """One time step; returns ``(h_new, cache)``."""
        if x.ndim != 2 or x.shape[1] != self.input_size or h.shape != (x.shape[0], self.hidden_size):
            raise ShapeError(f"{self.name}: bad step shapes x={x.shape} h={h.shape}")
        p = self.params
        a = np.concatenate([h, x], axis=1)
        u = sigmoid(a @ p["W_u"] + p["b_u"])
        r = sigmoid(a @ p["W_r"] + p["b_r"])
        a2 = np.concatenate([r * h, x], axis=1)
        c = np.tanh(a2 @ p["W_h"] + p["b_h"])
        h_new = u * h + (1.0 - u) * c
        return h_new, (a, a2, h, u, r, c)

    def step_backward(self, dh_new, cache):
        """Accumulates into ``self.grads``; returns ``(dx, dh_prev)``."""
        a, a2, h, u, r, c = cache
        p, g = self.params, self.grads
        H = self.hidden_size
        du = dh_new * (h - c)
        dh_prev = dh_new * u
        dpre_c = dh_new * (1.0 - u) * (1.0 - c * c)
        g["W_h"] += a2.T @ dpre_c
        g["b_h"] += dpre_c.sum(axis=0)
        da2 = dpre_c @ p["W_h"].T
        drh = da2[:, :H]
        dx = da2[:, H:].copy()
        dh_prev += drh * r
        dr = drh * h
        dpre_u = du * u * (1.0 - u)
        dpre_r = dr * r * (1.0 - r)
        g["W_u"] += a.T @ dpre_u
        g["b_u"] += dpre_u.sum(axis=0)
        g["W_r"] += a.T @ dpre_r
        g["b_r"] += dpre_r.sum(axis=0)
        da = dpre_u @ p["W_u"].T + dpre_r @ p["W_r"].T
        dh_prev += da[:, :H]
        dx += da[:, H:]
        return dx, dh_prev


def gru_cell_step(cell: GRUCell, x_t, h_prev):
    return cell.step(np.asarray(x_t, dtype=np.float64), np.asarray(h_prev, dtype=np.float64))[0]


class LSTMCell(Layer):
    """Standard LSTM cell with input, forget, output gates and candidate ``g``."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.input_size, self.hidden_size = input_size, hidden_size
        n = input_size + hidden_size
        self.params["W"] = glorot_uniform(rng, (n, 4 * hidden_size), n, 4 * hidden_size)
        self.params["b"] = np.zeros(4 * hidden_size)

    def config(self):
        return {"input_size": self.input_size, "hidden_size": self.hidden_size}

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, x, h, c):
        if x.ndim != 2 or x.shape[1] != self.input_size or h.shape != (x.shape[0], self.hidden_size):
            raise ShapeError(f"{self.name}: bad step shapes x={x.shape} h={h.shape}")
        H = self.hidden_size
        a = np.concatenate([h, x], axis=1)
        z = a @ self.params["W"] + self.params["b"]
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        o = sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        return h_new, c_new, (a, c, i, f, o, g, tc)

    def step_backward(self, dh, dc, cache):
        a, c, i, f, o, g, tc = cache
        H = self.hidden_size
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ], axis=1)
        self.grads["W"] += a.T @ dz
        self.grads["b"] += dz.sum(axis=0)
        da = dz @ self.params["W"].T
        return da[:, H:], da[:, :H], dc * f


class _Unrolled(Layer):
    """Runs a cell over the time axis and emits the last hidden state."""

    def __init__(self, cell, reverse: bool = False):
        super().__init__()
        self.cell, self.reverse = cell, reverse
        self.params = cell.params

    @property
    def name(self):
        return type(self).__name__

    def config(self):
        return {**self.cell.config(), "reverse": self.reverse}

    def _steps(self, length):
        return range(length - 1, -1, -1) if self.reverse else range(length)

    def _check(self, x):
        if x.ndim != 3 or x.shape[2] != self.cell.input_size:
            raise ShapeError(f"{self.name}: expected (batch, length, {self.cell.input_size}), got {x.shape}")


class GRU(_Unrolled):
    def __init__(self, input_size, hidden_size, rng, reverse=False):
        super().__init__(GRUCell(input_size, hidden_size, rng), reverse)

    def forward(self, x, train=False):
        self._check(x)
        h = np.zeros((x.shape[0], self.cell.hidden_size))
        caches = []
        for t in self._steps(x.shape[1]):
            h, cache = self.cell.step(x[:, t, :], h)
            caches.append((t, cache))
        self._cache = (x.shape, caches)
        return h

    def backward(self, grad):
        shape, caches = self._cached()
        self.cell.zero_grads()
        dx = np.zeros(shape)
        dh = grad
        for t, cache in reversed(caches):
            dx[:, t, :], dh = self.cell.step_backward(dh, cache)
        self.grads = self.cell.grads
        return dx


class LSTM(_Unrolled):
    def __init__(self, input_size, hidden_size, rng, reverse=False):
        super().__init__(LSTMCell(input_size, hidden_size, rng), reverse)

    def forward(self, x, train=False):
        self._check(x)
        h = np.zeros((x.shape[0], self.cell.hidden_size))
        c = np.zeros_like(h)
        caches = []
        for t in self._steps(x.shape[1]):
            h, c, cache = self.cell.step(x[:, t, :], h, c)
            caches.append((t, cache))
        self._cache = (x.shape, caches)
        return h

    def backward(self, grad):
        shape, caches = self._cached()
        self.cell.zero_grads()
        dx = np.zeros(shape)
        dh, dc = grad, np.zeros_like(grad)
        for t, cache in reversed(caches):
            dx[:, t, :], dh, dc = self.cell.step_backward(dh, dc, cache)
        self.grads = self.cell.grads
        return dx


class BLSTM(Layer):
    """Forward and time-reversed LSTMs; final states concatenated to width ``2*hidden``."""

    def __init__(self, input_size, hidden_size, rng):
        super().__init__()
        self.fw = LSTM(input_size, hidden_size, rng)
        self.bw = LSTM(input_size, hidden_size, rng, reverse=True)
        self.hidden_size = hidden_size
        self.params = {**{f"fw.{k}": v for k, v in self.fw.params.items()},
                       **{f"bw.{k}": v for k, v in self.bw.params.items()}}

    def config(self):
        return {"input_size": self.fw.cell.input_size, "hidden_size": self.hidden_size}

    def forward(self, x, train=False):
        out = np.concatenate([self.fw.forward(x, train), self.bw.forward(x, train)], axis=1)
        self._cache = True
        return out

    def backward(self, grad):
        self._cached()
        H = self.hidden_size
        dx = self.fw.backward(grad[:, :H]) + self.bw.backward(grad[:, H:])
        self.grads = {**{f"fw.{k}": v for k, v in self.fw.grads.items()},
                      **{f"bw.{k}": v for k, v in self.bw.grads.items()}}
        return dx
