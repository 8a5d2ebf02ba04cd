"""Central finite-difference gradient checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Norm-wise relative error ``|a - n| / max(|a| + |n|, floor)``.

    The floor keeps structurally zero gradients (a bias feeding a train-mode
    BatchNorm, say) from comparing rounding noise with rounding noise.
    """
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), floor))


def numerical_gradient(f, array: np.ndarray, eps: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``array`` (perturbed in place and restored)."""
    flat = array.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.empty(len(idx))
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        out[j] = (fp - fm) / (2.0 * eps)
    return out


def iter_layers(obj, _seen=None):
    """Yield every :class:`Layer` reachable from ``obj`` through attributes and lists."""
    from .layers import Layer

    seen = set() if _seen is None else _seen
    if id(obj) in seen:
        return
    seen.add(id(obj))
    if isinstance(obj, Layer):
        yield obj
    if isinstance(obj, (list, tuple)):
        children = obj
    elif hasattr(obj, "__dict__"):
        children = vars(obj).values()
    else:
        return
    for child in children:
        if isinstance(child, (Layer, list, tuple)) or type(child).__module__.startswith("lsavae"):
            yield from iter_layers(child, seen)


def kink_margin(model) -> float:
    """Smallest |pre-activation| seen by any (Leaky)ReLU in the last forward pass."""
    margins = [layer.kink_margin for layer in iter_layers(model) if hasattr(layer, "kink_margin")]
    return min(margins) if margins else np.inf


@dataclass
class GradCheckReport:
    """Per-block relative errors.

    ``kink_margin`` is the distance of the closest (Leaky)ReLU input to its
    kink at the base point; central differences are meaningless when it is
    comparable to the step size.
    """

    errors: dict
    tolerance: float
    kink_margin: float = np.inf

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def grad_check(model, x, tolerance: float = 1e-4, eps: float = 1e-5, train: bool = True,
               seed: int = 0, max_per_block: int | None = 40) -> GradCheckReport:
    """Compare ``model.backward`` against central differences.

    The scalar probed is ``sum(model.forward(x) * G)`` for a fixed random
    ``G``; at most ``max_per_block`` seeded entries per parameter block (and
    of the input) are perturbed.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    out = model.forward(x, train)
    margin = kink_margin(model)
    upstream = rng.normal(size=out.shape)
    gx = model.backward(upstream)
    analytic = {name: g.copy() for name, g in model.gradients().items()}

    def loss():
        return float(np.sum(model.forward(x, train) * upstream))

    def pick(size):
        if max_per_block is None or size <= max_per_block:
            return list(range(size))
        return sorted(rng.choice(size, max_per_block, replace=False).tolist())

    errors = {}
    for name, p in model.parameters().items():
        idx = pick(p.size)
        num = numerical_gradient(loss, p, eps, idx)
        errors[name] = relative_error(analytic[name].reshape(-1)[idx], num)
    idx = pick(x.size)
    errors["input"] = relative_error(gx.reshape(-1)[idx], numerical_gradient(loss, x, eps, idx))
    return GradCheckReport(errors, tolerance, margin)


def check_configurations(factory, count: int = 10, tolerance: float = 1e-4, min_margin: float = 1e-4,
                         max_draws: int = 200, **kwargs) -> list:
    """Grad-check ``count`` seeded configurations drawn from ``factory(seed) -> (model, x)``.

    Draws whose kink margin is below ``min_margin`` (ten times the default
    step) are skipped, since a central difference straddling a ReLU kink does
    not estimate the derivative. Returns the accepted reports.
    """
    reports = []
    for seed in range(max_draws):
        model, x = factory(seed)
        report = grad_check(model, x, tolerance=tolerance, seed=seed, **kwargs)
        if report.kink_margin < min_margin:
            continue
        reports.append(report)
        if len(reports) == count:
            return reports
    raise RuntimeError(f"only {len(reports)} of {count} configurations had kink margin >= {min_margin}")
