"""Feed-forward layers with hand-written backward passes.

Tensors are float64 numpy arrays. Sequence/convolution inputs use the
channels-last layout ``(batch, length, channels)``.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer.

    ``params`` holds trainable arrays, ``buffers`` non-trainable state (e.g.
    BatchNorm running statistics) and ``grads`` mirrors ``params`` after
    :meth:`backward`.
    """

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    @property
    def name(self) -> str:
        return type(self).__name__

    def config(self) -> dict:
        return {}

    def parameters(self) -> dict:
        return self.params

    def gradients(self) -> dict:
        return self.grads

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.name}.backward called before forward")
        return self._cache

    def _expect(self, x, ndim, last=None):
        if x.ndim != ndim or (last is not None and x.shape[-1] != last):
            want = f"ndim {ndim}" + (f" with last dim {last}" if last is not None else "")
            raise ShapeError(f"{self.name}: expected input of {want}, got shape {x.shape}")


class Dense(Layer):
    def __init__(self, in_features: int, units: int, rng: np.random.Generator):
        super().__init__()
        self.in_features, self.units = in_features, units
        self.params["W"] = glorot_uniform(rng, (in_features, units), in_features, units)
        self.params["b"] = np.zeros(units)

    def config(self):
        return {"in_features": self.in_features, "units": self.units}

    def forward(self, x, train=False):
        self._expect(x, 2, self.in_features)
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        x = self._cached()
        self.grads = {"W": x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T


class Conv1D(Layer):
    """Valid-padding 1-D convolution; output length ``(L - K) // stride + 1``."""

    def __init__(self, in_channels: int, filters: int, kernel_size: int, stride: int, rng: np.random.Generator,
                 use_bias: bool = True):
        super().__init__()
        self.in_channels, self.filters, self.kernel_size, self.stride = in_channels, filters, kernel_size, stride
        k = kernel_size
        self.params["W"] = glorot_uniform(rng, (k, in_channels, filters), k * in_channels, k * filters)
        if use_bias:
            self.params["b"] = np.zeros(filters)

    def config(self):
        return {"in_channels": self.in_channels, "filters": self.filters,
                "kernel_size": self.kernel_size, "stride": self.stride, "use_bias": "b" in self.params}

    def output_length(self, length: int) -> int:
        return (length - self.kernel_size) // self.stride + 1

    def forward(self, x, train=False):
        self._expect(x, 3, self.in_channels)
        lout = self.output_length(x.shape[1])
        if lout < 1:
            raise ShapeError(f"{self.name}: input length {x.shape[1]} shorter than kernel {self.kernel_size}")
        W, s = self.params["W"], self.stride
        span = s * (lout - 1) + 1
        y = np.empty((x.shape[0], lout, self.filters))
        y[...] = self.params.get("b", 0.0)
        for k in range(self.kernel_size):
            y += x[:, k:k + span:s, :] @ W[k]
        self._cache = x
        return y

    def backward(self, grad):
        x = self._cached()
        W, s = self.params["W"], self.stride
        lout = grad.shape[1]
        span = s * (lout - 1) + 1
        gx = np.zeros_like(x)
        gW = np.empty_like(W)
        for k in range(self.kernel_size):
            xs = x[:, k:k + span:s, :]
            gW[k] = np.tensordot(xs, grad, axes=([0, 1], [0, 1]))
            gx[:, k:k + span:s, :] += grad @ W[k].T
        self.grads = {"W": gW}
        if "b" in self.params:
            self.grads["b"] = grad.sum(axis=(0, 1))
        return gx


class Conv1DTranspose(Layer):
    """Adjoint of :class:`Conv1D`; output length ``(L - 1) * stride + K``."""

    def __init__(self, in_channels: int, filters: int, kernel_size: int, stride: int, rng: np.random.Generator,
                 use_bias: bool = True):
        super().__init__()
        self.in_channels, self.filters, self.kernel_size, self.stride = in_channels, filters, kernel_size, stride
        k = kernel_size
        self.params["W"] = glorot_uniform(rng, (k, in_channels, filters), k * in_channels, k * filters)
        if use_bias:
            self.params["b"] = np.zeros(filters)

    def config(self):
        return {"in_channels": self.in_channels, "filters": self.filters,
                "kernel_size": self.kernel_size, "stride": self.stride, "use_bias": "b" in self.params}

    def output_length(self, length: int) -> int:
        return (length - 1) * self.stride + self.kernel_size

    def forward(self, x, train=False):
        self._expect(x, 3, self.in_channels)
        W, s = self.params["W"], self.stride
        lin = x.shape[1]
        span = s * (lin - 1) + 1
        y = np.zeros((x.shape[0], self.output_length(lin), self.filters))
        for k in range(self.kernel_size):
            y[:, k:k + span:s, :] += x @ W[k]
        if "b" in self.params:
            y += self.params["b"]
        self._cache = x
        return y

    def backward(self, grad):
        x = self._cached()
        W, s = self.params["W"], self.stride
        span = s * (x.shape[1] - 1) + 1
        gx = np.zeros_like(x)
        gW = np.empty_like(W)
        for k in range(self.kernel_size):
            gs = grad[:, k:k + span:s, :]
            gW[k] = np.tensordot(x, gs, axes=([0, 1], [0, 1]))
            gx += gs @ W[k].T
        self.grads = {"W": gW}
        if "b" in self.params:
            self.grads["b"] = grad.sum(axis=(0, 1))
        return gx


class BatchNorm(Layer):
    """Normalises over every axis but the last (features/channels)."""

    def __init__(self, features: int, momentum: float = 0.99, eps: float = 1e-5):
        super().__init__()
        self.features, self.momentum, self.eps = features, momentum, eps
        self.params["gamma"] = np.ones(features)
        self.params["beta"] = np.zeros(features)
        self.buffers["running_mean"] = np.zeros(features)
        self.buffers["running_var"] = np.ones(features)
        self.buffers["batches_seen"] = np.zeros(1)
        self.cumulative = False

    def config(self):
        return {"features": self.features, "momentum": self.momentum, "eps": self.eps}

    def forward(self, x, train=False):
        if x.shape[-1] != self.features:
            raise ShapeError(f"{self.name}: expected {self.features} features, got shape {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if self.cumulative:
                n = self.buffers["batches_seen"][0]
                rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
                self.buffers["running_mean"] = rm + (mean - rm) / (n + 1)
                self.buffers["running_var"] = rv + (var - rv) / (n + 1)
            elif self.buffers["batches_seen"][0] == 0:
                # seed the averages with the first batch instead of (0, 1) so
                # short runs are not dominated by the initial values
                self.buffers["running_mean"] = mean.copy()
                self.buffers["running_var"] = var.copy()
            else:
                m = self.momentum
                self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mean
                self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
            self.buffers["batches_seen"] = self.buffers["batches_seen"] + 1
        else:
            mean, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train, axes)
        return self.params["gamma"] * xhat + self.params["beta"]

    def backward(self, grad):
        xhat, inv_std, train, axes = self._cached()
        gamma = self.params["gamma"]
        self.grads = {"gamma": (grad * xhat).sum(axis=axes), "beta": grad.sum(axis=axes)}
        gxhat = grad * gamma
        if not train:
            return gxhat * inv_std
        return inv_std * (gxhat - gxhat.mean(axis=axes) - xhat * (gxhat * xhat).mean(axis=axes))


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = slope

    def config(self):
        return {"slope": self.slope}

    def forward(self, x, train=False):
        mask = x > 0
        self._cache = mask
        self.kink_margin = float(np.abs(x).min()) if x.size else np.inf
        return np.where(mask, x, self.slope * x)

    def backward(self, grad):
        return np.where(self._cached(), grad, self.slope * grad)


class ReLU(Layer):
    def forward(self, x, train=False):
        mask = x > 0
        self._cache = mask
        self.kink_margin = float(np.abs(x).min()) if x.size else np.inf
        return np.where(mask, x, 0.0)

    def backward(self, grad):
        return np.where(self._cached(), grad, 0.0)


class Tanh(Layer):
    def forward(self, x, train=False):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._cached()
        return grad * (1.0 - y * y)


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Sigmoid(Layer):
    def forward(self, x, train=False):
        y = sigmoid(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._cached()
        return grad * y * (1.0 - y)


class Flatten(Layer):
    def forward(self, x, train=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached())


class Reshape(Layer):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def config(self):
        return {"shape": list(self.shape)}

    def forward(self, x, train=False):
        if int(np.prod(x.shape[1:])) != int(np.prod(self.shape)):
            raise ShapeError(f"{self.name}: cannot reshape {x.shape[1:]} to {self.shape}")
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._cached())


class Sequential(Layer):
    """Ordered stack of layers; parameters are addressed as ``"<i>.<name>"``."""

    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def describe(self) -> list[dict]:
        return [{"type": layer.name, **layer.config()} for layer in self.layers]

    def named(self, attr: str) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in getattr(layer, attr).items():
                out[f"{i}.{key}"] = value
        return out

    def parameters(self):
        return self.named("params")

    def gradients(self):
        return self.named("grads")

    def state(self):
        """Parameters then buffers, in declaration order."""
        return {**self.named("params"), **{f"{k}@": v for k, v in self.named("buffers").items()}}

    def load_state(self, state: dict):
        for i, layer in enumerate(self.layers):
            for key in layer.params:
                layer.params[key][...] = state[f"{i}.{key}"]
            for key in layer.buffers:
                layer.buffers[key] = np.array(state[f"{i}.{key}@"], dtype=np.float64)


def recalibrate_batchnorm(model, run):
    """Replace every BatchNorm's running statistics with the plain average over the batches ``run()`` feeds.

    ``run`` must perform train-mode forward passes (no parameter updates).
    The exponential averages otherwise lag behind weights that moved during
    the last few hundred steps, which makes infer-mode output drift from
    train-mode output.
    """
    from .gradcheck import iter_layers

    norms = [layer for layer in iter_layers(model) if isinstance(layer, BatchNorm)]
    for bn in norms:
        bn.cumulative = True
        bn.buffers["batches_seen"] = np.zeros(1)
    try:
        run()
    finally:
        for bn in norms:
            bn.cumulative = False
