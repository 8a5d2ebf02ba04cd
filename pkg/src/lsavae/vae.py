"""Convolutional (V)AE over per-timestep feature vectors, and its two training phases.

Each row of ``d`` features is treated as a length-``d`` single-channel
sequence (right-padded with zeros when the stride algebra needs more room),
pushed through the Conv1D encoder stack and a Dense head to ``k`` latents.
The decoder mirrors it with transposed convolutions and ends in a linear
``Dense(d)`` so the reconstruction has the input's width.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .neural import (AdamState, BatchNorm, Conv1D, Conv1DTranspose, Dense, Flatten, LeakyReLU, Reshape,
                     Sequential, adam_step, load_container, recalibrate_batchnorm, save_container)
from .series import Frame
from .stationarizer import (LSAConfig, SeasonalStore, recombine, recombine_backward, stationarization_loss,
                            stationarize)


@dataclass
class VaeConfig:
    input_dim: int
    latent_dim: int = 4
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 30
    validation_split: float = 0.2
    kl_weight: float = 0.0
    leaky_slope: float = 0.2
    seed: int = 0
    encoder_filters: tuple = (32, 16, 8, 4)
    encoder_kernels: tuple = (2, 2, 2, 1)
    encoder_strides: tuple = (1, 2, 2, 1)
    decoder_units: int = 4
    decoder_filters: tuple = (8, 16, 1, 1)
    decoder_kernels: tuple = (2, 2, 2, 2)
    decoder_strides: tuple = (2, 1, 1, 1)

    def __post_init__(self):
        for name in ("encoder_filters", "encoder_kernels", "encoder_strides",
                     "decoder_filters", "decoder_kernels", "decoder_strides"):
            setattr(self, name, tuple(int(v) for v in getattr(self, name)))
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ValueError("input_dim and latent_dim must be positive")
        if self.latent_dim >= self.input_dim:
            raise ValueError(f"latent_dim ({self.latent_dim}) must be smaller than input_dim ({self.input_dim})")
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError(f"validation_split must be in (0, 1), got {self.validation_split}")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be non-negative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d) -> "VaeConfig":
        return cls(**d)


def padded_length(config: VaeConfig) -> int:
    """Smallest input length >= d for which every encoder convolution has output."""
    length = config.input_dim
    while True:
        cur = length
        for k, s in zip(config.encoder_kernels, config.encoder_strides):
            cur = (cur - k) // s + 1 if cur >= k else 0
        if cur >= 1:
            return length
        length += 1
        if length > 64 * config.input_dim + 64:
            raise ValueError("encoder stack cannot be closed for this input dimension")


class Vae:
    """Encoder/decoder pair; deterministic unless ``kl_weight > 0``."""

    def __init__(self, config: VaeConfig):
        self.config = config
        rng = np.random.default_rng([config.seed, 0])
        self.noise_rng = np.random.default_rng([config.seed, 2])
        slope = config.leaky_slope
        self.pad_to = padded_length(config)

        layers, ch, length = [], 1, self.pad_to
        for f, k, s in zip(config.encoder_filters, config.encoder_kernels, config.encoder_strides):
            # bias is redundant in front of BatchNorm
            conv = Conv1D(ch, f, k, s, rng, use_bias=False)
            layers += [conv, BatchNorm(f), LeakyReLU(slope)]
            ch, length = f, conv.output_length(length)
        layers.append(Flatten())
        self.encoder = Sequential(layers)
        flat = ch * length
        self.mean_head = Sequential([Dense(flat, config.latent_dim, rng), LeakyReLU(slope)])
        self.logvar_head = Sequential([Dense(flat, config.latent_dim, rng)]) if config.kl_weight > 0 else None

        m = config.decoder_units
        layers = [Dense(config.latent_dim, m, rng), Reshape((m, 1)), BatchNorm(1), LeakyReLU(slope)]
        ch, length = 1, m
        n = len(config.decoder_filters)
        for i, (f, k, s) in enumerate(zip(config.decoder_filters, config.decoder_kernels, config.decoder_strides)):
            conv = Conv1DTranspose(ch, f, k, s, rng, use_bias=i == n - 1)
            layers.append(conv)
            if i < n - 1:
                layers.append(BatchNorm(f))
            layers.append(LeakyReLU(slope))
            ch, length = f, conv.output_length(length)
        layers += [Flatten(), Dense(ch * length, config.input_dim, rng)]
        self.decoder = Sequential(layers)
        self._noise = self._logvar = None

    # -- parameter bookkeeping -------------------------------------------------
    def _parts(self):
        parts = {"encoder": self.encoder, "mean_head": self.mean_head, "decoder": self.decoder}
        if self.logvar_head is not None:
            parts["logvar_head"] = self.logvar_head
        return parts

    def parameters(self) -> dict:
        return {f"{p}.{k}": v for p, m in self._parts().items() for k, v in m.parameters().items()}

    def gradients(self) -> dict:
        return {f"{p}.{k}": v for p, m in self._parts().items() for k, v in m.gradients().items()}

    def state(self) -> dict:
        return {f"{p}.{k}": v for p, m in self._parts().items() for k, v in m.state().items()}

    def load_state(self, state: dict):
        for p, m in self._parts().items():
            m.load_state({k[len(p) + 1:]: v for k, v in state.items() if k.startswith(p + ".")})

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for v in self.state().values():
            h.update(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def describe(self) -> dict:
        return {p: m.describe() for p, m in self._parts().items()}

    # -- forward/backward ------------------------------------------------------
    def _pad(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ValueError(f"expected batch x {self.config.input_dim} input, got shape {x.shape}")
        out = np.zeros((x.shape[0], self.pad_to, 1))
        out[:, : x.shape[1], 0] = x
        return out

    def encode_train(self, x, train: bool = True):
        """Latent codes with the training-mode graph cached for :meth:`backward_encoder`.

        Returns ``(z, mu, logvar)``; ``logvar`` is ``None`` for the
        deterministic encoder.
        """
        h = self.encoder.forward(self._pad(x), train)
        mu = self.mean_head.forward(h, train)
        if self.logvar_head is None:
            self._noise = None
            return mu, mu, None
        logvar = self.logvar_head.forward(h, train)
        if train:
            self._noise = self.noise_rng.standard_normal(mu.shape)
            self._logvar = logvar
            return mu + np.exp(0.5 * logvar) * self._noise, mu, logvar
        self._noise = None
        return mu, mu, logvar

    def backward_encoder(self, grad_z, grad_mu=None, grad_logvar=None):
        gmu = grad_z if grad_mu is None else grad_z + grad_mu
        gh = self.mean_head.backward(gmu)
        if self.logvar_head is not None:
            glv = np.zeros_like(grad_z) if grad_logvar is None else grad_logvar.copy()
            if self._noise is not None:
                glv += grad_z * self._noise * 0.5 * np.exp(0.5 * self._logvar)
            gh = gh + self.logvar_head.backward(glv)
        return self.encoder.backward(gh)

    def forward(self, x, train: bool = False):
        """Reconstruction ``decode(encode(x))`` (lets gradient checks treat the AE as one model)."""
        z, _, _ = self.encode_train(x, train)
        return self.decoder.forward(z, train)

    def backward(self, grad):
        return self.backward_encoder(self.decoder.backward(grad))

    def train_mode_mean(self, x) -> np.ndarray:
        """Encoder mean under batch statistics, without sampling or caching for backward."""
        return self.mean_head.forward(self.encoder.forward(self._pad(x), True), True)

    def encode(self, x) -> np.ndarray:
        h = self.encoder.forward(self._pad(x), False)
        return self.mean_head.forward(h, False)

    def decode(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise ValueError(f"expected batch x {self.config.latent_dim} latents, got shape {z.shape}")
        return self.decoder.forward(z, False)

    def step(self, state: AdamState):
        adam_step(self.parameters(), self.gradients(), state)


def build_vae(config: VaeConfig) -> Vae:
    return Vae(config)


def kl_divergence(mu, logvar):
    """Mean over the batch of the analytic Gaussian KL to N(0, I), with its gradients."""
    b = mu.shape[0]
    kl = float(-0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar)) / b)
    return kl, mu / b, 0.5 * (np.exp(logvar) - 1.0) / b


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    recon: list = field(default_factory=list)
    stnry: list = field(default_factory=list)
    kl: list = field(default_factory=list)

    def rows(self):
        for i in range(len(self.train_loss)):
            yield {"epoch": i + 1, "train_loss": self.train_loss[i], "val_loss": self.val_loss[i],
                   "recon": self.recon[i], "stnry": self.stnry[i], "kl": self.kl[i]}


def _rows(data) -> np.ndarray:
    x = data.values if isinstance(data, Frame) else np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"training data must be a non-empty N x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("training data contains non-finite values")
    return x


def chronological_split(n: int, validation_split: float):
    n_val = int(round(n * validation_split))
    return n - n_val


def _check_loss(value, what):
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite {what} during training")


def train_phase1(config: VaeConfig, seasonal_data):
    """Fit an autoencoder to seasonal-component rows (shuffled mini-batches)."""
    x = _rows(seasonal_data)
    model = Vae(config)
    n_train = chronological_split(x.shape[0], config.validation_split)
    if n_train < 2:
        raise ValueError("not enough rows for training")
    train, val = x[:n_train], x[n_train:]
    opt = AdamState(lr=config.learning_rate)
    shuffle = np.random.default_rng([config.seed, 1])
    hist = TrainHistory()
    bs = config.batch_size
    for _ in range(config.epochs):
        order = shuffle.permutation(n_train)
        tot = {"recon": 0.0, "kl": 0.0, "loss": 0.0}
        for start in range(0, n_train, config.batch_size):
            xb = train[order[start:start + config.batch_size]]
            if xb.shape[0] < 2:
                continue
            z, mu, logvar = model.encode_train(xb, True)
            xhat = model.decoder.forward(z, True)
            diff = xhat - xb
            recon = float(np.mean(diff * diff))
            kl, gmu, glv = (0.0, None, None) if logvar is None else kl_divergence(mu, logvar)
            loss = recon + config.kl_weight * kl
            _check_loss(loss, "phase-1 loss")
            gz = model.decoder.backward(2.0 * diff / diff.size)
            if logvar is None:
                model.backward_encoder(gz)
            else:
                model.backward_encoder(gz, config.kl_weight * gmu, config.kl_weight * glv)
            model.step(opt)
            w = xb.shape[0] / n_train
            tot["recon"] += w * recon
            tot["kl"] += w * kl
            tot["loss"] += w * loss
        recalibrate_batchnorm(model, lambda: [model.decoder.forward(model.train_mode_mean(train[a:a + bs]), True)
                                              for a in range(0, n_train, bs)])
        hist.train_loss.append(tot["loss"])
        hist.recon.append(tot["recon"])
        hist.kl.append(tot["kl"])
        hist.stnry.append(0.0)
        hist.val_loss.append(float(np.mean((model.decode(model.encode(val)) - val) ** 2)) if len(val) else np.nan)
    return model, hist


def contiguous_chunks(n: int, size: int) -> list:
    """Split ``range(n)`` into consecutive blocks of ``size`` rows; the tail joins the last block."""
    count = max(1, n // size)
    bounds = [i * size for i in range(count)] + [n]
    return [(bounds[i], bounds[i + 1]) for i in range(count)]


def phase2_batch(model: Vae, xb, store: SeasonalStore, lsa: LSAConfig, diff_order: int = 1,
                 train: bool = True, backward: bool = True) -> dict:
    """One phase-2 pass over a contiguous block: loss components and (optionally) gradients."""
    cfg = model.config
    z, mu, logvar = model.encode_train(xb, train)
    dec = stationarize(z, store, store.period, diff_order)
    z_str = recombine(dec, lsa)
    xhat = model.decoder.forward(z_str, train)
    diff = xhat - xb
    recon = float(np.mean(diff * diff))
    stnry = stationarization_loss(z, dec.z_stnry)
    kl, gmu, glv = (0.0, None, None) if logvar is None else kl_divergence(mu, logvar)
    out = {"recon": recon, "stnry": stnry, "kl": kl, "loss": recon + stnry + cfg.kl_weight * kl}
    if backward:
        g_str = model.decoder.backward(2.0 * diff / diff.size)
        gz = recombine_backward(g_str, store.period, diff_order, lsa)
        # z_stnry is held fixed in the penalty's second argument
        gz = gz + 2.0 * (z - dec.z_stnry) / z.size
        if logvar is None:
            model.backward_encoder(gz)
        else:
            model.backward_encoder(gz, cfg.kl_weight * gmu, cfg.kl_weight * glv)
    return out


def _phase2_train_mode_forward(model: Vae, xb, store, lsa, diff_order):
    z = model.train_mode_mean(xb)
    return model.decoder.forward(recombine(stationarize(z, store, store.period, diff_order), lsa), True)


def train_phase2(config: VaeConfig, data, store: SeasonalStore, lsa: LSAConfig | None = None,
                 diff_order: int = 1):
    """Fit encoder/decoder with the stationarization step inside the graph.

    Batches are contiguous chronological blocks of ``max(batch_size, 2T)``
    rows (decomposition needs two full periods); block order is shuffled
    each epoch.
    """
    lsa = lsa or LSAConfig()
    x = _rows(data)
    if store.latent_dim != config.latent_dim:
        raise ValueError(f"store latent dim {store.latent_dim} != config latent_dim {config.latent_dim}")
    model = Vae(config)
    n_train = chronological_split(x.shape[0], config.validation_split)
    size = max(config.batch_size, 2 * store.period)
    if n_train < size:
        raise ValueError(f"training slice ({n_train} rows) shorter than one block ({size} rows)")
    chunks = contiguous_chunks(n_train, size)
    val = x[n_train:]
    val_chunks = contiguous_chunks(len(val), size) if len(val) >= 2 * store.period else []
    opt = AdamState(lr=config.learning_rate)
    shuffle = np.random.default_rng([config.seed, 1])
    hist = TrainHistory()
    for _ in range(config.epochs):
        tot = {"recon": 0.0, "stnry": 0.0, "kl": 0.0, "loss": 0.0}
        for ci in shuffle.permutation(len(chunks)):
            a, b = chunks[ci]
            res = phase2_batch(model, x[a:b], store, lsa, diff_order)
            _check_loss(res["loss"], "phase-2 loss")
            model.step(opt)
            w = (b - a) / n_train
            for key in tot:
                tot[key] += w * res[key]
        recalibrate_batchnorm(model, lambda: [_phase2_train_mode_forward(model, x[a:b], store, lsa, diff_order)
                                              for a, b in chunks])
        hist.train_loss.append(tot["loss"])
        hist.recon.append(tot["recon"])
        hist.stnry.append(tot["stnry"])
        hist.kl.append(tot["kl"])
        if val_chunks:
            vl = sum((b - a) * phase2_batch(model, val[a:b], store, lsa, diff_order, train=False,
                                            backward=False)["loss"] for a, b in val_chunks) / len(val)
        else:
            vl = np.nan
        hist.val_loss.append(float(vl))
    return model, hist


def save_checkpoint(model: Vae, path, meta: dict | None = None):
    header_meta = {"config": model.config.to_dict(), "layers": model.describe(),
                   "padded_length": model.pad_to, "seed": model.config.seed, **(meta or {})}
    return save_container(path, "vae", model.state(), header_meta)


def load_checkpoint(path):
    """Returns ``(model, meta)``."""
    header, arrays = load_container(path, "vae")
    meta = header["meta"]
    model = Vae(VaeConfig.from_dict(meta["config"]))
    expected = model.state()
    if list(expected) != list(arrays) or any(expected[k].shape != arrays[k].shape for k in arrays):
        raise ValueError(f"{path}: parameter layout does not match the recorded config")
    model.load_state(arrays)
    return model, meta
