"""From-scratch numpy engine for the interference-detection CNN.

Architecture (fixed topology, sizes configurable):

    input (I, 2) -> Conv1D (valid, stride 1) + ReLU -> MaxPool1D (2, stride 2)
    -> flatten -> Dense + ReLU -> Dropout -> Dense -> Softmax (M classes)

Training: Adam on mean categorical cross-entropy, mini-batches, early
stopping on validation loss with best-weight restore.  All math runs in
float64; checkpoints store weights as float32.  Every random choice
(init, shuffling, dropout) derives from the TrainConfig seed, so a
(seed, data) pair reproduces the exact same trajectory.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ModelConfig",
    "Model",
    "TrainConfig",
    "TrainReport",
    "ModelFormatError",
    "conv1d_forward",
    "maxpool1d",
    "maxpool1d_backward",
    "dense_forward",
    "dropout_apply",
    "softmax",
    "cce_loss",
    "forward",
    "backward",
    "loss_and_grads",
    "adam_init",
    "adam_step",
    "train",
    "iq_to_tensor",
    "save_model",
    "load_model",
    "peek_model_config",
]


class ModelFormatError(ValueError):
    """Raised for malformed or inconsistent model checkpoint files."""


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the network.

    conv_kernel defaults to 8: at the 10 MS/s channel rate a 3-tap kernel
    cannot resolve 156 kHz interferers against wideband traffic (accuracy
    saturates several points below the acceptance floor), while 8 taps can.
    """

    input_size: int
    num_classes: int
    conv_filters: int = 16
    conv_kernel: int = 8
    dense_units: int = 1000
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.input_size < 2 or self.num_classes < 2:
            raise ValueError("input_size and num_classes must be >= 2")
        if self.conv_filters < 1 or self.conv_kernel < 1 or self.dense_units < 1:
            raise ValueError("conv_filters, conv_kernel, dense_units must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.conv_out_len < 2:
            raise ValueError(
                f"conv output length {self.conv_out_len} too short for pooling "
                f"(input_size={self.input_size}, kernel={self.conv_kernel})")

    @property
    def conv_out_len(self) -> int:
        return self.input_size - self.conv_kernel + 1

    @property
    def pooled_len(self) -> int:
        return self.conv_out_len // 2

    @property
    def flat_len(self) -> int:
        return self.pooled_len * self.conv_filters


# parameter tensors in fixed order; shapes derive from ModelConfig
PARAM_NAMES = ("conv_w", "conv_b", "dense1_w", "dense1_b", "dense2_w", "dense2_b")


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {
        "conv_w": (config.conv_kernel, 2, config.conv_filters),
        "conv_b": (config.conv_filters,),
        "dense1_w": (config.flat_len, config.dense_units),
        "dense1_b": (config.dense_units,),
        "dense2_w": (config.dense_units, config.num_classes),
        "dense2_b": (config.num_classes,),
    }


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "Model":
        """He-uniform weights scaled by fan-in, zero biases."""
        rng = np.random.default_rng(seed)
        shapes = param_shapes(config)
        fan_in = {
            "conv_w": config.conv_kernel * 2,
            "dense1_w": config.flat_len,
            "dense2_w": config.dense_units,
        }
        params = {}
        for name, shape in shapes.items():
            if name.endswith("_b"):
                params[name] = np.zeros(shape)
            else:
                lim = np.sqrt(6.0 / fan_in[name])
                params[name] = rng.uniform(-lim, lim, shape)
        return cls(config=config, params=params)

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise FloatingPointError(f"non-finite values in {name}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 100
    early_stop_patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass
class TrainReport:
    epochs_run: int
    train_loss: list[float]
    train_acc: list[float]
    val_loss: list[float]
    val_acc: list[float]
    stopped_early: bool
    best_epoch: int


# ---------------------------------------------------------------------------
# layer ops
# ---------------------------------------------------------------------------

def iq_to_tensor(windows: np.ndarray) -> np.ndarray:
    """Complex windows (B, I) -> real input tensor (B, I, 2)."""
    w = np.asarray(windows)
    if w.ndim == 1:
        w = w[None, :]
    return np.stack([w.real, w.imag], axis=-1).astype(np.float64)


def conv1d_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray):
    """Valid-mode stride-1 Conv1D over (B, I, C_in) with ReLU.

    weights: (K, C_in, F).  Returns (activations, pre_activations, windows);
    output length is I - K + 1.
    """
    if x.ndim != 3 or weights.ndim != 3 or x.shape[2] != weights.shape[1]:
        raise ValueError(
            f"shape mismatch: input {x.shape} vs weights {weights.shape}")
    if x.shape[1] < weights.shape[0]:
        raise ValueError("input shorter than kernel")
    win = sliding_window_view(x, weights.shape[0], axis=1)  # (B, L, C, K)
    pre = np.einsum("blck,kcf->blf", win, weights) + biases
    return np.maximum(pre, 0.0), pre, win


def maxpool1d(x: np.ndarray):
    """Non-overlapping max pooling of size 2 / stride 2 over (B, L, F).

    Returns (pooled, argmax) with pooled length floor(L / 2); argmax
    records which element of each pair won (ties go to the first) for
    the backward pass.  A trailing odd element is dropped.
    """
    if x.shape[1] < 2:
        raise ValueError("maxpool1d needs input length >= 2")
    L2 = x.shape[1] // 2
    pairs = x[:, : 2 * L2].reshape(x.shape[0], L2, 2, x.shape[2])
    arg = pairs.argmax(axis=2)
    pooled = np.take_along_axis(pairs, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return pooled, arg


def maxpool1d_backward(grad_pooled: np.ndarray, arg: np.ndarray, in_len: int) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    B, L2, F = grad_pooled.shape
    dpairs = np.zeros((B, L2, 2, F))
    np.put_along_axis(dpairs, arg[:, :, None, :], grad_pooled[:, :, None, :], axis=2)
    out = np.zeros((B, in_len, F))
    out[:, : 2 * L2] = dpairs.reshape(B, 2 * L2, F)
    return out


def dense_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    return x @ weights + biases


def dropout_apply(x: np.ndarray, rate: float, rng: np.random.Generator):
    """Inverted dropout: zero with probability `rate`, scale survivors by
    1/(1-rate) so inference needs no rescaling.  Returns (output, mask)."""
    if rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; rejects non-finite logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cce_loss(probs: np.ndarray, one_hot: np.ndarray) -> float:
    """Mean categorical cross-entropy, log clamped at 1e-12."""
    p = np.sum(probs * one_hot, axis=-1)
    return float(np.mean(-np.log(np.maximum(p, 1e-12))))


# ---------------------------------------------------------------------------
# full network
# ---------------------------------------------------------------------------

def forward(model: Model, x: np.ndarray, training: bool = False,
            dropout_rng: np.random.Generator | None = None,
            dropout_mask: np.ndarray | None = None):
    """Run the network on (B, I, 2) input.

    Returns (probs, cache).  In training mode dropout is drawn from
    dropout_rng unless an explicit mask is supplied (gradient checking
    passes a frozen mask so analytic and numeric paths see one network).
    """
    p = model.params
    a_conv, pre_conv, win = conv1d_forward(x, p["conv_w"], p["conv_b"])
    pooled, arg = maxpool1d(a_conv)
    flat = pooled.reshape(x.shape[0], -1)
    h1 = dense_forward(flat, p["dense1_w"], p["dense1_b"])
    a1 = np.maximum(h1, 0.0)
    if training and dropout_mask is None:
        a1d, mask = dropout_apply(a1, model.config.dropout_rate, dropout_rng)
    elif training:
        mask = dropout_mask
        a1d = a1 * mask
    else:
        mask = None
        a1d = a1
    logits = dense_forward(a1d, p["dense2_w"], p["dense2_b"])
    probs = softmax(logits)
    cache = {"x": x, "win": win, "pre_conv": pre_conv, "arg": arg,
             "flat": flat, "h1": h1, "mask": mask, "a1d": a1d, "probs": probs}
    return probs, cache


def backward(model: Model, cache: dict, one_hot: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of mean CCE w.r.t. every parameter tensor."""
    p = model.params
    B = cache["x"].shape[0]
    dlogits = (cache["probs"] - one_hot) / B
    grads = {
        "dense2_w": cache["a1d"].T @ dlogits,
        "dense2_b": dlogits.sum(axis=0),
    }
    da1d = dlogits @ p["dense2_w"].T
    da1 = da1d * cache["mask"] if cache["mask"] is not None else da1d
    dh1 = da1 * (cache["h1"] > 0)
    grads["dense1_w"] = cache["flat"].T @ dh1
    grads["dense1_b"] = dh1.sum(axis=0)
    dflat = dh1 @ p["dense1_w"].T
    L2 = model.config.pooled_len
    dpooled = dflat.reshape(B, L2, model.config.conv_filters)
    da_conv = maxpool1d_backward(dpooled, cache["arg"], model.config.conv_out_len)
    dpre = da_conv * (cache["pre_conv"] > 0)
    grads["conv_w"] = np.einsum("blck,blf->kcf", cache["win"], dpre)
    grads["conv_b"] = dpre.sum(axis=(0, 1))
    return grads


def loss_and_grads(model: Model, x: np.ndarray, one_hot: np.ndarray,
                   dropout_mask: np.ndarray | None = None):
    """One training-mode forward/backward; used by training and the
    finite-difference gradient checker."""
    probs, cache = forward(model, x, training=dropout_mask is not None,
                           dropout_mask=dropout_mask)
    return cce_loss(probs, one_hot), backward(model, cache, one_hot), probs


# ---------------------------------------------------------------------------
# Adam + training loop
# ---------------------------------------------------------------------------

def adam_init(params: dict[str, np.ndarray]) -> dict[str, tuple]:
    return {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.items()}


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: dict[str, tuple], t: int, config: TrainConfig) -> None:
    """Standard Adam with bias correction; mutates params and state."""
    if t < 1:
        raise ValueError("Adam step counter t must be >= 1")
    b1, b2 = config.adam_beta1, config.adam_beta2
    for name, g in grads.items():
        m, v = state[name]
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state[name] = (m, v)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        params[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def _eval_split(model: Model, x: np.ndarray, labels: np.ndarray,
                batch: int = 512) -> tuple[float, float]:
    m = model.config.num_classes
    losses, correct = [], 0
    for s in range(0, len(x), batch):
        probs, _ = forward(model, x[s:s + batch])
        one_hot = np.eye(m)[labels[s:s + batch]]
        losses.append(cce_loss(probs, one_hot) * len(probs))
        correct += int((probs.argmax(axis=1) == labels[s:s + batch]).sum())
    return float(np.sum(losses) / len(x)), correct / len(x)


def train(model_config: ModelConfig, train_config: TrainConfig, dataset):
    """Train on a split LabeledDataset; returns (best Model, TrainReport).

    Stops when validation loss has not improved for `early_stop_patience`
    epochs (or at max_epochs) and restores the best-epoch weights.
    """
    if dataset.split is None:
        raise ValueError("dataset must be split before training")
    xtr_c, ytr = dataset.subset("train")
    xval_c, yval = dataset.subset("val")
    if len(xtr_c) == 0 or len(xval_c) == 0:
        raise ValueError("empty train or val split")
    xtr, xval = iq_to_tensor(xtr_c), iq_to_tensor(xval_c)
    ytr = ytr.astype(np.int64)
    yval = yval.astype(np.int64)

    root = np.random.SeedSequence(train_config.seed)
    init_ss, shuffle_ss, drop_ss = root.spawn(3)
    model = Model.init(model_config, seed=init_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)
    state = adam_init(model.params)
    eye = np.eye(model_config.num_classes)

    report = TrainReport(0, [], [], [], [], False, -1)
    best_loss = np.inf
    best_params = None
    bad_epochs = 0
    t = 0
    for epoch in range(train_config.max_epochs):
        order = shuffle_rng.permutation(len(xtr))
        epoch_loss = 0.0
        epoch_correct = 0
        for s in range(0, len(order), train_config.batch_size):
            idx = order[s:s + train_config.batch_size]
            probs, cache = forward(model, xtr[idx], training=True,
                                   dropout_rng=drop_rng)
            one_hot = eye[ytr[idx]]
            grads = backward(model, cache, one_hot)
            t += 1
            adam_step(model.params, grads, state, t, train_config)
            epoch_loss += cce_loss(probs, one_hot) * len(idx)
            epoch_correct += int((probs.argmax(axis=1) == ytr[idx]).sum())
        model.check_finite()
        val_loss, val_acc = _eval_split(model, xval, yval)
        report.epochs_run = epoch + 1
        report.train_loss.append(epoch_loss / len(xtr))
        report.train_acc.append(epoch_correct / len(xtr))
        report.val_loss.append(val_loss)
        report.val_acc.append(val_acc)
        if val_loss < best_loss:
            best_loss = val_loss
            report.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= train_config.early_stop_patience:
                report.stopped_early = True
                break
    model.params = best_params
    return model, report


# ---------------------------------------------------------------------------
# checkpoint format: text header (key = value lines plus per-tensor blob
# offsets), a "---" delimiter line, then one little-endian f32 blob
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = "NBWM1"
_DELIMITER = b"---\n"


def save_model(model: Model, path) -> None:
    cfg = model.config
    lines = [CHECKPOINT_MAGIC]
    for key in ("input_size", "num_classes", "conv_filters", "conv_kernel",
                "dense_units", "dropout_rate"):
        lines.append(f"{key} = {getattr(cfg, key)!r}")
    offset = 0
    blobs = []
    for name in PARAM_NAMES:
        tensor = np.ascontiguousarray(model.params[name], dtype="<f4")
        lines.append(f"tensor {name} {offset} {tensor.size}")
        blobs.append(tensor.tobytes())
        offset += tensor.size
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_DELIMITER)
        for blob in blobs:
            fh.write(blob)


def _parse_header(raw: bytes) -> tuple[ModelConfig, dict[str, tuple[int, int]]]:
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ModelFormatError("checkpoint header is not ASCII") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ModelFormatError(f"bad checkpoint magic {lines[:1]!r}")
    fields: dict[str, str] = {}
    tensors: dict[str, tuple[int, int]] = {}
    for ln in lines[1:]:
        if ln.startswith("tensor "):
            _, name, off, count = ln.split()
            tensors[name] = (int(off), int(count))
        elif "=" in ln:
            key, _, value = ln.partition("=")
            fields[key.strip()] = value.strip()
    try:
        config = ModelConfig(
            input_size=int(fields["input_size"]),
            num_classes=int(fields["num_classes"]),
            conv_filters=int(fields["conv_filters"]),
            conv_kernel=int(fields["conv_kernel"]),
            dense_units=int(fields["dense_units"]),
            dropout_rate=float(fields["dropout_rate"]),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad checkpoint config: {exc}") from exc
    return config, tensors


def _split_checkpoint(data: bytes) -> tuple[bytes, bytes]:
    pos = data.find(_DELIMITER)
    if pos < 0:
        raise ModelFormatError("missing header delimiter")
    return data[:pos], data[pos + len(_DELIMITER):]


def peek_model_config(path) -> ModelConfig:
    """Read only the checkpoint header and return its ModelConfig."""
    with open(path, "rb") as fh:
        head = fh.read(4096)
        while _DELIMITER not in head:
            more = fh.read(4096)
            if not more:
                raise ModelFormatError("missing header delimiter")
            head += more
    return _parse_header(_split_checkpoint(head)[0])[0]


def load_model(path, expect_input_size: int | None = None) -> Model:
    """Load a checkpoint, validating every tensor shape against the config.

    `expect_input_size` lets callers fail fast at load time when the
    checkpoint does not match the experiment's window size.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    header, blob = _split_checkpoint(data)
    config, tensors = _parse_header(header)
    if expect_input_size is not None and config.input_size != expect_input_size:
        raise ModelFormatError(
            f"checkpoint input_size={config.input_size}, "
            f"expected {expect_input_size}")
    shapes = param_shapes(config)
    if set(tensors) != set(PARAM_NAMES):
        raise ModelFormatError(f"tensor set mismatch: {sorted(tensors)}")
    floats = np.frombuffer(blob, dtype="<f4")
    params = {}
    for name in PARAM_NAMES:
        off, count = tensors[name]
        shape = shapes[name]
        if count != int(np.prod(shape)):
            raise ModelFormatError(
                f"tensor {name} has {count} values, config implies {shape}")
        if off + count > len(floats):
            raise ModelFormatError(f"tensor {name} overruns weight blob")
        params[name] = floats[off:off + count].astype(np.float64).reshape(shape)
    expected = sum(int(np.prod(s)) for s in shapes.values())
    if len(floats) != expected:
        raise ModelFormatError(
            f"weight blob has {len(floats)} floats, config implies {expected}")
    return Model(config=config, params=params)
