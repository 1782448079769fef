"""Victim-model abstraction and a small raw-waveform keyword classifier.

The classifier is conv (stride s) -> ReLU -> mean pool over time -> affine,
trained with softmax cross-entropy. Gradients with respect to both the
parameters and the input waveform are computed analytically.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import AudioBuffer, as_samples

CHECKPOINT_MAGIC = b"PSYADV-TOYKWS\n"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@runtime_checkable
class GradientOracle(Protocol):
    input_len: int
    sample_rate: int

    def classify(self, x) -> int: ...

    def loss(self, x, target: int) -> float: ...

    def grad(self, x, target: int) -> np.ndarray: ...


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass(frozen=True, eq=False)
class ToyKeywordModel:
    filters: np.ndarray   # (n_filters, width)
    conv_bias: np.ndarray  # (n_filters,)
    dense: np.ndarray      # (n_classes, n_filters)
    dense_bias: np.ndarray  # (n_classes,)
    stride: int
    input_len: int
    sample_rate: int = 16000

    def __post_init__(self):
        for name in ("filters", "conv_bias", "dense", "dense_bias"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        c, w = self.filters.shape
        if self.conv_bias.shape != (c,) or self.dense.shape[1] != c \
                or self.dense_bias.shape != (self.dense.shape[0],):
            raise ValueError("inconsistent parameter shapes")
        if self.input_len < w:
            raise ValueError("input_len shorter than the filter width")

    @property
    def n_classes(self) -> int:
        return self.dense.shape[0]

    @property
    def width(self) -> int:
        return self.filters.shape[1]

    def _input(self, x) -> np.ndarray:
        v = as_samples(x)
        if v.shape[0] != self.input_len:
            raise ValueError(f"expected {self.input_len} samples, got {v.shape[0]}")
        if isinstance(x, AudioBuffer) and x.sample_rate != self.sample_rate:
            raise ValueError(f"sample rate {x.sample_rate} != model rate {self.sample_rate}")
        return v

    def _patches(self, v: np.ndarray) -> np.ndarray:
        return sliding_window_view(v, self.width, axis=-1)[..., ::self.stride, :]

    def _check_target(self, target: int) -> int:
        if not 0 <= int(target) < self.n_classes:
            raise ValueError(f"target {target} outside [0, {self.n_classes})")
        return int(target)

    def forward(self, x) -> np.ndarray:
        """Logits for one input."""
        p = self._patches(self._input(x))
        h = np.maximum(p @ self.filters.T + self.conv_bias, 0.0).mean(axis=0)
        return self.dense @ h + self.dense_bias

    def classify(self, x) -> int:
        # argmax breaks ties toward the lower index
        return int(np.argmax(self.forward(x)))

    def loss(self, x, target: int) -> float:
        t = self._check_target(target)
        return float(-log_softmax(self.forward(x))[t])

    def grad(self, x, target: int) -> np.ndarray:
        """d loss / d x, same length as x."""
        t = self._check_target(target)
        v = self._input(x)
        p = self._patches(v)
        z = p @ self.filters.T + self.conv_bias
        h = np.maximum(z, 0.0).mean(axis=0)
        logits = self.dense @ h + self.dense_bias
        g = np.exp(log_softmax(logits))
        g[t] -= 1.0
        dz = (self.dense.T @ g / z.shape[0]) * (z > 0)
        dp = dz @ self.filters
        out = np.zeros_like(v)
        n_pos = dp.shape[0]
        span = (n_pos - 1) * self.stride + 1
        for j in range(self.width):
            out[j:j + span:self.stride] += dp[:, j]
        return out

    # ---- checkpoint -------------------------------------------------------

    def save(self, path) -> None:
        """Write a checkpoint.

        Layout: the magic line ``PSYADV-TOYKWS``, a uint32 little-endian byte
        count, a UTF-8 JSON header of that length (version, shapes, stride,
        input_len, sample_rate), then filters, conv_bias, dense and
        dense_bias as little-endian float64 in C order.
        """
        header = json.dumps({
            "version": CHECKPOINT_VERSION,
            "n_filters": int(self.filters.shape[0]),
            "width": int(self.width),
            "n_classes": int(self.n_classes),
            "stride": int(self.stride),
            "input_len": int(self.input_len),
            "sample_rate": int(self.sample_rate),
        }, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for a in (self.filters, self.conv_bias, self.dense, self.dense_bias):
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ToyKeywordModel":
        with open(os.fspath(path), "rb") as fh:
            blob = fh.read()
        if not blob.startswith(CHECKPOINT_MAGIC):
            raise ValueError(f"{path}: not a toy keyword checkpoint")
        pos = len(CHECKPOINT_MAGIC)
        (size,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        meta = json.loads(blob[pos:pos + size].decode("utf-8"))
        pos += size
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        c, w, k = meta["n_filters"], meta["width"], meta["n_classes"]
        arrays = []
        for shape in ((c, w), (c,), (k, c), (k,)):
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(blob, "<f8", count, pos).reshape(shape).copy())
            pos += 8 * count
        if pos != len(blob):
            raise ValueError(f"{path}: trailing or missing parameter bytes")
        return cls(*arrays, stride=meta["stride"], input_len=meta["input_len"],
                   sample_rate=meta["sample_rate"])


def forward(model: ToyKeywordModel, x) -> np.ndarray:
    return model.forward(x)


def loss(model: ToyKeywordModel, x, target: int) -> float:
    return model.loss(x, target)


def grad(model: ToyKeywordModel, x, target: int) -> np.ndarray:
    return model.grad(x, target)


def init_toy(n_classes: int, input_len: int, seed: int = 0, n_filters: int = 8,
             width: int = 64, stride: int = 8, sample_rate: int = 16000) -> ToyKeywordModel:
    rng = np.random.default_rng(seed)
    return ToyKeywordModel(
        filters=rng.standard_normal((n_filters, width)) / np.sqrt(width),
        conv_bias=np.zeros(n_filters),
        dense=rng.standard_normal((n_classes, n_filters)) / np.sqrt(n_filters),
        dense_bias=np.zeros(n_classes),
        stride=stride, input_len=input_len, sample_rate=sample_rate,
    )


def _batch_step(model: ToyKeywordModel, patches: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its parameter gradients.

    ``patches`` is (N, T, width) and contiguous.
    """
    n, t, w = patches.shape
    flat = patches.reshape(n * t, w)
    z = flat @ model.filters.T + model.conv_bias            # (N*T, c)
    h = np.maximum(z, 0.0).reshape(n, t, -1).mean(axis=1)   # (N, c)
    logits = h @ model.dense.T + model.dense_bias           # (N, K)
    logp = log_softmax(logits)
    rows = np.arange(n)
    loss_value = float(-logp[rows, labels].mean())
    g = np.exp(logp)
    g[rows, labels] -= 1.0
    g /= n
    d_dense = g.T @ h
    d_dense_bias = g.sum(axis=0)
    dz = np.repeat((g @ model.dense) / t, t, axis=0) * (z > 0)
    d_filters = dz.T @ flat
    d_conv_bias = dz.sum(axis=0)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss_value, accuracy, (d_filters, d_conv_bias, d_dense, d_dense_bias)


def accuracy(model: ToyKeywordModel, buffers, labels) -> float:
    preds = [model.classify(b) for b in buffers]
    return float(np.mean(np.asarray(preds) == np.asarray(labels)))


def train_toy(dataset, epochs: int = 150, lr: float = 2.0, seed: int = 0,
              n_filters: int = 8, width: int = 64, stride: int = 8,
              min_accuracy: float = 0.95, history: list | None = None) -> ToyKeywordModel:
    """Full-batch gradient descent on a ``(buffers, labels)`` dataset.

    Raises TrainingError when training accuracy is still below
    ``min_accuracy`` after ``epochs`` steps (pass ``min_accuracy=0`` to
    disable the check).
    """
    buffers, labels = dataset
    labels = np.asarray(labels, dtype=np.int64)
    x = np.stack([as_samples(b) for b in buffers])
    rate = buffers[0].sample_rate if isinstance(buffers[0], AudioBuffer) else 16000
    model = init_toy(int(labels.max()) + 1, x.shape[1], seed, n_filters, width, stride, rate)
    patches = np.ascontiguousarray(sliding_window_view(x, width, axis=1)[:, ::stride, :])
    params = [model.filters, model.conv_bias, model.dense, model.dense_bias]
    acc = 0.0
    for _ in range(epochs):
        loss_value, acc, grads = _batch_step(model, patches, labels)
        if history is not None:
            history.append((loss_value, acc))
        params = [p - lr * g for p, g in zip(params, grads)]
        model = ToyKeywordModel(*params, stride=stride, input_len=x.shape[1], sample_rate=rate)
    acc = accuracy(model, buffers, labels)
    if acc < min_accuracy:
        raise TrainingError(f"training accuracy {acc:.3f} below {min_accuracy} after {epochs} epochs")
    return model
