"""Seeded model/input factories for finite-difference gradient checks.

Each factory maps a seed to ``(model, x)`` where ``model`` exposes
``forward(x, train)``, ``backward(grad)``, ``parameters()`` and
``gradients()``. Shapes vary with the seed so every draw is a distinct
configuration.
"""
import numpy as np

from lsavae.neural import (BLSTM, GRU, LSTM, BatchNorm, Conv1D, Conv1DTranspose, Dense, Flatten, GRUCell,
                           LeakyReLU, LSTMCell, ReLU, Reshape, Sequential, Sigmoid, Tanh)
from lsavae.predictors import KINDS, PredictorConfig, build_predictor
from lsavae.vae import Vae, VaeConfig


def _rng(seed):
    return np.random.default_rng([seed, 999])


def _dims(seed):
    r = _rng(seed)
    return r, int(r.integers(2, 5)), int(r.integers(2, 6))


class CellModel:
    """One cell step as a model: input is ``[x, h]`` (plus ``c`` for LSTM), output the new state."""

    def __init__(self, cell):
        self.cell = cell
        self.F, self.H = cell.input_size, cell.hidden_size
        self.lstm = isinstance(cell, LSTMCell)

    def forward(self, xin, train=False):
        x, h = xin[:, :self.F], xin[:, self.F:self.F + self.H]
        if self.lstm:
            c = xin[:, self.F + self.H:]
            h_new, c_new, self._cache = self.cell.step(x, h, c)
            return np.concatenate([h_new, c_new], axis=1)
        h_new, self._cache = self.cell.step(x, h)
        return h_new

    def backward(self, grad):
        self.cell.zero_grads()
        if self.lstm:
            dx, dh, dc = self.cell.step_backward(grad[:, :self.H], grad[:, self.H:], self._cache)
            return np.concatenate([dx, dh, dc], axis=1)
        dx, dh = self.cell.step_backward(grad, self._cache)
        return np.concatenate([dx, dh], axis=1)

    def parameters(self):
        return self.cell.params

    def gradients(self):
        return self.cell.grads


def dense(seed):
    r, a, b = _dims(seed)
    return Dense(a + 1, b, r), r.normal(size=(3, a + 1))


def conv1d(seed):
    r, ch, f = _dims(seed)
    k, s = int(r.integers(1, 4)), int(r.integers(1, 3))
    layer = Conv1D(ch, f, k, s, r)
    layer.params["b"][...] = r.normal(size=f)
    return layer, r.normal(size=(2, 7 + seed % 3, ch))


def conv1d_transpose(seed):
    r, ch, f = _dims(seed)
    k, s = int(r.integers(1, 4)), int(r.integers(1, 3))
    layer = Conv1DTranspose(ch, f, k, s, r)
    layer.params["b"][...] = r.normal(size=f)
    return layer, r.normal(size=(2, 3 + seed % 3, ch))


def batchnorm(seed):
    r, ch, _ = _dims(seed)
    layer = BatchNorm(ch)
    layer.params["gamma"][...] = r.uniform(0.5, 1.5, ch)
    layer.params["beta"][...] = r.normal(size=ch)
    shape = (6, ch) if seed % 2 else (3, 4, ch)
    return layer, r.normal(size=shape)


def leaky_relu(seed):
    r, a, b = _dims(seed)
    return LeakyReLU(0.2), r.normal(size=(a, b))


def relu(seed):
    r, a, b = _dims(seed)
    return ReLU(), r.normal(size=(a, b))


def tanh(seed):
    r, a, b = _dims(seed)
    return Tanh(), r.normal(size=(a, b))


def sigmoid(seed):
    r, a, b = _dims(seed)
    return Sigmoid(), 3 * r.normal(size=(a, b))


def flatten(seed):
    r, a, b = _dims(seed)
    return Sequential([Flatten(), Dense(a * b, 2, r)]), r.normal(size=(3, a, b))


def reshape(seed):
    r, a, b = _dims(seed)
    return Sequential([Reshape((b, a)), Flatten(), Dense(a * b, 2, r)]), r.normal(size=(3, a * b))


def gru_cell(seed):
    r, F, H = _dims(seed)
    cell = GRUCell(F, H, r)
    for g in "urh":
        cell.params[f"b_{g}"][...] = 0.3 * r.normal(size=H)
    return CellModel(cell), r.normal(size=(3, F + H))


def lstm_cell(seed):
    r, F, H = _dims(seed)
    cell = LSTMCell(F, H, r)
    cell.params["b"][...] = 0.3 * r.normal(size=4 * H)
    return CellModel(cell), r.normal(size=(3, F + 2 * H))


def gru_unrolled(seed):
    r, F, H = _dims(seed)
    return GRU(F, H, r), r.normal(size=(2, 5, F))


def lstm_unrolled(seed):
    r, F, H = _dims(seed)
    return LSTM(F, H, r), r.normal(size=(2, 5, F))


def blstm(seed):
    r, F, H = _dims(seed)
    return BLSTM(F, H, r), r.normal(size=(2, 5, F))


LAYER_CASES = {
    "Dense": dense, "Conv1D": conv1d, "Conv1DTranspose": conv1d_transpose, "BatchNorm": batchnorm,
    "LeakyReLU": leaky_relu, "ReLU": relu, "Tanh": tanh, "Sigmoid": sigmoid, "Flatten": flatten,
    "Reshape": reshape, "GRUCell": gru_cell, "LSTMCell": lstm_cell, "GRU(5 steps)": gru_unrolled,
    "LSTM(5 steps)": lstm_unrolled, "BLSTM": blstm,
}


def vae(seed):
    r = _rng(seed)
    d = (6, 12)[seed % 2]
    model = Vae(VaeConfig(input_dim=d, seed=seed))
    return model, r.normal(size=(8, d))


def predictor(kind):
    def factory(seed):
        r = _rng(seed)
        k, lookback = int(r.integers(2, 5)), int(r.integers(3, 7))
        cfg = PredictorConfig(kind=kind, hidden=(6, 5, 4, 3), lookback=lookback, seed=seed)
        return build_predictor(cfg, k), r.normal(size=(4, lookback, k))
    return factory


MODEL_CASES = {"VAE": vae, **{f"predictor {k}": predictor(k) for k in KINDS}}
