"""Small fully connected regressor trained by full-batch Adam.

The network is deliberately fixed: 1 -> 100 -> 100 -> 1 with tanh hidden
units and a linear output. Everything is plain numpy so that gradients can
be checked against finite differences and training is reproducible bit for
bit for a given seed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from keplaw.ephemeris import Scaling
from keplaw.errors import DataError, DivergenceError

CHECKPOINT_VERSION = 1
DEFAULT_WIDTHS = (1, 100, 100, 1)


@dataclass
class TrainConfig:
    epochs: int = 200_000
    seed: int = 0
    lr: float = 1e-3
    lr_final: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_val: int = 3
    log_every: int = 1000

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_val < 0:
            raise ValueError("n_val must be >= 0")


@dataclass
class NetworkModel:
    """Trained network plus the scalings that map physical units to [0, 1].

    ``predict`` works in normalized units; calling the model directly maps a
    physical input to a physical output.
    """

    widths: tuple
    weights: list
    biases: list
    activation: str = "tanh"
    input_scaling: Scaling = field(default_factory=Scaling)
    target_scaling: Scaling = field(default_factory=Scaling)
    input_name: str = "x"
    target_name: str = "y"

    def predict(self, x, physical=False):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        h = x.reshape(-1, 1)
        h = _forward(self.weights, self.biases, h)[-1]
        y = h[:, 0]
        if physical:
            y = self.target_scaling.inverse(y)
        return float(y[0]) if scalar else y

    def __call__(self, u):
        return self.predict(self.input_scaling.forward(u), physical=True)

    def extrapolating(self, x):
        x = np.asarray(x, dtype=float)
        return (x < 0.0) | (x > 1.0)

    def to_dict(self):
        return {
            "version": CHECKPOINT_VERSION,
            "widths": list(self.widths),
            "activation": self.activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_scaling": self.input_scaling.to_dict(),
            "target_scaling": self.target_scaling.to_dict(),
            "input_name": self.input_name,
            "target_name": self.target_name,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {d.get('version')!r}")
        if d.get("activation") != "tanh":
            raise DataError(f"unsupported activation {d.get('activation')!r}")
        return cls(
            widths=tuple(d["widths"]),
            weights=[np.array(w, dtype=float) for w in d["weights"]],
            biases=[np.array(b, dtype=float) for b in d["biases"]],
            activation=d["activation"],
            input_scaling=Scaling.from_dict(d["input_scaling"]),
            target_scaling=Scaling.from_dict(d["target_scaling"]),
            input_name=d.get("input_name", "x"),
            target_name=d.get("target_name", "y"),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_params(widths, rng):
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, x):
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return acts


def loss_and_grad(weights, biases, x, y):
    """Mean squared error and its gradient w.r.t. every weight and bias.

    ``x`` has shape (n, fan_in) and ``y`` shape (n, fan_out).
    """
    acts = _forward(weights, biases, x)
    resid = acts[-1] - y
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.mean(resid**2))
    delta = 2.0 * resid / resid.size
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (1.0 - acts[i] ** 2)
    return loss, gw, gb


def mse(model, x, y):
    if len(x) == 0:
        return float("nan")
    return float(np.mean((model.predict(x) - np.asarray(y, dtype=float)) ** 2))


def split(samples, n_val, seed):
    """Seeded random hold-out of ``n_val`` samples; returns (train, val)."""
    n = len(samples)
    if n_val >= n:
        raise DataError(f"validation size {n_val} must be smaller than dataset size {n}")
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = set(perm[:n_val].tolist())
    train = [s for i, s in enumerate(samples) if i not in val_idx]
    val = [s for i, s in enumerate(samples) if i in val_idx]
    return train, val


def train(train_set, val_set, config=None, widths=DEFAULT_WIDTHS, **model_kwargs):
    """Fit a network to ``(x, y)`` pairs; returns ``(model, trace)``.

    ``train_set`` and ``val_set`` are sequences of objects with ``x`` and
    ``y`` attributes (normalized samples). ``trace`` is a list of
    ``(epoch, train_mse, val_mse)`` rows logged every ``log_every`` epochs
    and at the final epoch.
    """
    config = config or TrainConfig()
    if not train_set:
        raise DataError("training set is empty")
    xt = np.array([[s.x] for s in train_set], dtype=float)
    yt = np.array([[s.y] for s in train_set], dtype=float)
    xv = np.array([[s.x] for s in val_set], dtype=float).reshape(-1, 1)
    yv = np.array([[s.y] for s in val_set], dtype=float).reshape(-1, 1)

    rng = np.random.default_rng(config.seed)
    weights, biases = init_params(widths, rng)
    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = config.beta1, config.beta2
    decay = (config.lr_final / config.lr) ** (1.0 / config.epochs)

    trace = []
    lr = config.lr
    for epoch in range(1, config.epochs + 1):
        loss, gw, gb = loss_and_grad(weights, biases, xt, yt)
        if not math.isfinite(loss):
            raise DivergenceError(epoch)
        grads = gw + gb
        c1 = 1.0 - b1**epoch
        c2 = 1.0 - b2**epoch
        step = lr * math.sqrt(c2) / c1
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= b1
            mi += (1.0 - b1) * g
            vi *= b2
            vi += (1.0 - b2) * (g * g)
            p -= step * mi / (np.sqrt(vi) + config.adam_eps)
        lr *= decay
        if epoch % config.log_every == 0 or epoch == config.epochs:
            final = _forward(weights, biases, xt)[-1]
            tr = float(np.mean((final - yt) ** 2))
            va = float(np.mean((_forward(weights, biases, xv)[-1] - yv) ** 2)) if len(xv) else float("nan")
            trace.append((epoch, tr, va))

    model = NetworkModel(
        widths=tuple(widths),
        weights=[w.copy() for w in weights],
        biases=[b.copy() for b in biases],
        **model_kwargs,
    )
    return model, trace


def write_trace(trace, path):
    with open(path, "w") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for epoch, tr, va in trace:
            fh.write(f"{epoch},{tr!r},{va!r}\n")
