"""Fully connected feedforward surrogate trained with backprop and Adam.

Hand-rolled on numpy: rectifier hidden layers, identity output, mean
squared error with L2 weight penalty, and amsgrad-capable Adam. The
network carries its training-set output standardization so predictions
come back in physical units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlowupError,
    ConfigError,
    FieldFormatError,
    MetricUndefinedError,
    NetworkError,
)
from .sampling import stream


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    amsgrad: bool = True
    eps: float = 1e-8
    l2_penalty: float = 0.0
    epochs: int = 100
    batch_size: int | None = 32  # None trains full-batch
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ConfigError("Adam betas must lie strictly inside (0, 1)")
        if self.l2_penalty < 0.0:
            raise ConfigError("l2_penalty must be >= 0")
        if self.learning_rate <= 0.0 or self.eps <= 0.0:
            raise ConfigError("learning_rate and eps must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1 or None")


@dataclass
class Dataset:
    """Sample matrix pair; out_mean/out_std standardize the targets."""

    inputs: np.ndarray   # (m, d_in)
    targets: np.ndarray  # (m, d_out), physical units
    out_mean: np.ndarray | None = None
    out_std: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise NetworkError(
                f"{self.inputs.shape[0]} input rows vs "
                f"{self.targets.shape[0]} target rows"
            )

    @classmethod
    def standardized(cls, inputs, targets) -> "Dataset":
        """Attach per-output mean/std computed from these targets."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        mean = targets.mean(axis=0)
        std = targets.std(axis=0)
        if np.any(std == 0.0):
            dead = int(np.argmin(std))
            raise NetworkError(f"target column {dead} is constant; "
                               "cannot standardize")
        return cls(inputs, targets, mean, std)

    @property
    def standard_targets(self) -> np.ndarray:
        if self.out_mean is None:
            return self.targets
        return (self.targets - self.out_mean) / self.out_std


def standardize(values, mean, std):
    return (np.asarray(values, dtype=float) - mean) / std


def destandardize(values, mean, std):
    return np.asarray(values, dtype=float) * std + mean


@dataclass
class MlpNetwork:
    """Dense feedforward net: weights[j] has shape (l_{j+1}, l_j)."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    out_mean: np.ndarray | None = None
    out_std: np.ndarray | None = None

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise NetworkError(f"bad layer sizes {self.sizes}")
        if len(self.weights) != len(self.sizes) - 1 or \
                len(self.biases) != len(self.sizes) - 1:
            raise NetworkError("one weight matrix and bias per layer edge")
        for j, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.sizes[j + 1], self.sizes[j])
            if w.shape != want or b.shape != (self.sizes[j + 1],):
                raise NetworkError(
                    f"layer {j + 2}: weight {w.shape} bias {b.shape}, "
                    f"expected {want} and ({self.sizes[j + 1]},)"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NetworkError(f"layer {j + 2} has non-finite parameters")

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            self.sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            None if self.out_mean is None else self.out_mean.copy(),
            None if self.out_std is None else self.out_std.copy(),
        )


def he_network(sizes, seed: int = 0) -> MlpNetwork:
    """Gaussian init with std sqrt(2/fan_in) (rectifier gain), zero biases."""
    rng = stream(seed, 0)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.standard_normal((fan_out, fan_in)) * scale)
        biases.append(np.zeros(fan_out))
    return MlpNetwork(tuple(sizes), weights, biases)


def _forward_batch(net: MlpNetwork, x: np.ndarray):
    """Layer activations for a (m, d_in) batch; last entry is the output."""
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise NetworkError(f"input shape {x.shape} does not feed "
                           f"{net.n_inputs} input neurons")
    acts = [x]
    last = len(net.weights) - 1
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = acts[-1] @ w.T + b
        acts.append(pre if j == last else np.maximum(0.0, pre))
    return acts


def forward(net: MlpNetwork, x):
    """Single-sample pass: returns (output vector, cached activations)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise NetworkError("forward takes one input vector; use predict "
                           "for batches")
    acts = _forward_batch(net, x[None, :])
    return acts[-1][0], [a[0] for a in acts]


def predict(net: MlpNetwork, x) -> np.ndarray:
    """Batch outputs in physical units (destandardized when trained so)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = _forward_batch(net, np.atleast_2d(x))[-1]
    if net.out_mean is not None:
        out = destandardize(out, net.out_mean, net.out_std)
    return out[0] if single else out


def loss(net: MlpNetwork, inputs, targets, l2_penalty: float = 0.0) -> float:
    """Per-sample mean of squared output error plus l2 * sum of W**2.

    Targets are compared against raw network outputs, so standardized
    training targets belong here, not physical ones.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    out = _forward_batch(net, inputs)[-1]
    if out.shape != targets.shape:
        raise NetworkError(f"targets {targets.shape} vs outputs {out.shape}")
    mse = float(((targets - out) ** 2).sum()) / inputs.shape[0]
    reg = l2_penalty * sum(float((w**2).sum()) for w in net.weights)
    return mse + reg


def backprop(net: MlpNetwork, inputs, targets):
    """Gradients of the data term of `loss` (no L2 part) per parameter.

    Returns (weight_grads, bias_grads) shaped like net.weights/biases.
    The rectifier subgradient at exactly zero is taken as zero.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    acts = _forward_batch(net, inputs)
    m = inputs.shape[0]
    delta = 2.0 * (acts[-1] - targets) / m
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for j in range(len(net.weights) - 1, -1, -1):
        gw[j] = delta.T @ acts[j]
        gb[j] = delta.sum(axis=0)
        if j > 0:
            # hidden activation > 0 iff its pre-activation was > 0
            delta = (delta @ net.weights[j]) * (acts[j] > 0.0)
    return gw, gb


@dataclass
class AdamState:
    """First/second moments per parameter tensor, in net parameter order."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    vmax: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def like(cls, params) -> "AdamState":
        return cls(
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
        )


def adam_step(state: AdamState, params, grads, cfg: TrainConfig):
    """One bias-corrected Adam update, in place on params."""
    state.t += 1
    b1t = 1.0 - cfg.beta1**state.t
    b2t = 1.0 - cfg.beta2**state.t
    for p, g, m, v, vmax in zip(params, grads, state.m, state.v, state.vmax):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g**2
        vhat = v / b2t
        if cfg.amsgrad:
            np.maximum(vmax, vhat, out=vmax)
            denom = np.sqrt(vmax) + cfg.eps
        else:
            denom = np.sqrt(vhat) + cfg.eps
        p -= cfg.learning_rate * (m / b1t) / denom
    return params


def train(net: MlpNetwork, train_set: Dataset, val_set: Dataset,
          cfg: TrainConfig):
    """Seeded mini-batch Adam training.

    Returns a trained copy of `net` (the input is untouched) and a
    history dict with per-epoch "train" and "val" losses. Validation
    targets are standardized with the training-set statistics. Inputs
    are standardized internally for conditioning (wall-temperature
    inputs vary by ~0.3% of their mean) and the affine map is folded
    into the first layer afterwards, so the returned network consumes
    raw physical inputs. Raises BlowupError naming the epoch if the
    loss goes non-finite.
    """
    net = net.copy()
    net.out_mean = None if train_set.out_mean is None \
        else train_set.out_mean.copy()
    net.out_std = None if train_set.out_std is None \
        else train_set.out_std.copy()

    in_mean = train_set.inputs.mean(axis=0)
    in_std = train_set.inputs.std(axis=0)
    in_std[in_std == 0.0] = 1.0  # constant columns pass through unscaled
    x_tr = standardize(train_set.inputs, in_mean, in_std)
    z_tr = train_set.standard_targets
    x_va = standardize(val_set.inputs, in_mean, in_std)
    z_va = val_set.targets if net.out_mean is None else \
        standardize(val_set.targets, net.out_mean, net.out_std)
    if z_tr.shape[1] != net.n_outputs or z_va.shape[1] != net.n_outputs:
        raise NetworkError("target width does not match the output layer")

    m = x_tr.shape[0]
    bs = m if cfg.batch_size is None else min(cfg.batch_size, m)
    params = net.weights + net.biases
    state = AdamState.like(params)
    rng = stream(cfg.seed, 1)
    history = {"train": [], "val": []}

    for epoch in range(cfg.epochs):
        perm = rng.permutation(m)
        for s in range(0, m, bs):
            idx = perm[s:s + bs]
            gw, gb = backprop(net, x_tr[idx], z_tr[idx])
            if cfg.l2_penalty > 0.0:
                for g, w in zip(gw, net.weights):
                    g += 2.0 * cfg.l2_penalty * w
            adam_step(state, params, gw + gb, cfg)
        tr = loss(net, x_tr, z_tr, cfg.l2_penalty)
        va = loss(net, x_va, z_va, cfg.l2_penalty)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise BlowupError(f"training loss became non-finite at epoch "
                              f"{epoch + 1}")
        history["train"].append(tr)
        history["val"].append(va)

    # fold x -> (x - mean)/std into the first layer: the saved format
    # stays plain weights/biases and predict() takes raw inputs
    net.weights[0] /= in_std
    net.biases[0] -= net.weights[0] @ in_mean
    return net, history


def relative_average_percent_error(true, predicted) -> float:
    """100 * mean absolute difference over max absolute true value."""
    true = np.asarray(true, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if true.shape != predicted.shape:
        raise NetworkError(f"shape mismatch {true.shape} vs {predicted.shape}")
    scale = np.abs(true).max()
    if scale == 0.0:
        raise MetricUndefinedError("all true values are zero; relative "
                                   "error is undefined")
    return float(100.0 * np.abs(true - predicted).mean() / scale)


@dataclass(frozen=True)
class NetworkPreset:
    hidden: tuple[int, ...]
    l2_penalty: float


PRESETS = {
    # production-scale settings, one per surrogate output family
    "nusselt-wall": NetworkPreset((300,) * 5, 1e-3),
    "temperature-midplane": NetworkPreset((300,) * 4, 1e-3),
    "x-velocity-midplane": NetworkPreset((300,) * 4, 1e-2),
    "y-velocity-midplane": NetworkPreset((300,) * 4, 1e-2),
    # desk-scale counterparts used by CI and the smoke pipelines
    "desk-nusselt-wall": NetworkPreset((32,) * 4, 1e-3),
    "desk-temperature-midplane": NetworkPreset((32,) * 4, 1e-3),
    "desk-x-velocity-midplane": NetworkPreset((32,) * 4, 1e-2),
    "desk-y-velocity-midplane": NetworkPreset((32,) * 4, 1e-2),
}


def preset(name: str) -> NetworkPreset:
    if name not in PRESETS:
        raise ConfigError(f"unknown network preset {name!r}; have "
                          + ", ".join(sorted(PRESETS)))
    return PRESETS[name]


MODEL_MAGIC = "mlp-model v1"


def save_mlp(path, net: MlpNetwork) -> None:
    """Versioned text dump, 17 significant digits, exact round trip."""
    lines = [MODEL_MAGIC]
    lines.append("sizes " + " ".join(str(s) for s in net.sizes))
    lines.append("hidden rectifier")
    lines.append("output identity")
    if net.out_mean is None:
        lines.append("standardized 0")
    else:
        lines.append("standardized 1")
        lines.append("out_mean " + " ".join(f"{v:.17g}" for v in net.out_mean))
        lines.append("out_std " + " ".join(f"{v:.17g}" for v in net.out_std))
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"weights {j + 2} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(f"biases {j + 2} {b.shape[0]}")
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_mlp(path) -> MlpNetwork:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != MODEL_MAGIC:
        raise FieldFormatError(f"{path}: not a {MODEL_MAGIC!r} file")
    try:
        pos = 1
        sizes = tuple(int(t) for t in lines[pos].split()[1:])
        pos += 3  # sizes, hidden, output lines
        out_mean = out_std = None
        flag = lines[pos].split()
        pos += 1
        if flag[1] == "1":
            out_mean = np.array([float(t) for t in lines[pos].split()[1:]])
            out_std = np.array([float(t) for t in lines[pos + 1].split()[1:]])
            pos += 2
        weights, biases = [], []
        for j in range(len(sizes) - 1):
            head = lines[pos].split()
            rows, cols = int(head[2]), int(head[3])
            pos += 1
            w = np.array([[float(t) for t in lines[pos + r].split()]
                          for r in range(rows)])
            pos += rows
            head = lines[pos].split()
            pos += 1
            b = np.array([float(t) for t in lines[pos].split()])
            pos += 1
            if w.shape != (rows, cols) or b.shape != (int(head[2]),):
                raise ValueError("block shape mismatch")
            weights.append(w)
            biases.append(b)
        return MlpNetwork(sizes, weights, biases, out_mean, out_std)
    except (ValueError, IndexError) as exc:
        raise FieldFormatError(f"{path}: truncated or malformed "
                               f"model file ({exc})") from exc
