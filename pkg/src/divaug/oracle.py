"""Probability oracle: a small softmax classifier and cross-entropy calculus.

The classifier is either linear-softmax or a one-hidden-layer ReLU
perceptron over standardised pixels. Models are immutable in practice:
:func:`sgd_step` returns a new model, so a model object held by a scorer is
a valid snapshot for as long as it is referenced.

Checkpoint layout (all integers uint32, all reals float64, little-endian)::

    offset  size     field
    0       4        magic b"DVAG"
    4       4        format version (1)
    8       4        architecture (0 = linear, 1 = mlp)
    12      4        input height
    16      4        input width
    20      4        input channels C
    24      4        hidden units (0 for linear)
    28      4        number of classes D
    32      4        parameter count P
    36      8*C      per-channel mean of pixel/255
    ...     8*C      per-channel std of pixel/255
    ...     8*P      parameters: W1 (row-major, in x hidden), b1, W2, b2
                     (linear: W (in x D), b)
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAGIC = b"DVAG"
FORMAT_VERSION = 1
_ARCH_CODES = {"linear": 0, "mlp": 1}
_HEADER = struct.Struct("<4s8I")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class OracleModel:
    arch: str
    input_shape: tuple[int, int, int]
    num_classes: int
    hidden: int
    params: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    std: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.arch not in _ARCH_CODES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.params.shape != (param_count(self.arch, self.input_shape, self.hidden, self.num_classes),):
            raise ValueError("parameter vector has the wrong length")

    @property
    def n_inputs(self) -> int:
        h, w, c = self.input_shape
        return h * w * c

    def layers(self):
        """Views ``[(W, b), ...]`` into the flat parameter vector."""
        dims = [self.n_inputs, self.num_classes] if self.arch == "linear" else \
            [self.n_inputs, self.hidden, self.num_classes]
        out, offset = [], 0
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = self.params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.params[offset:offset + fan_out]
            offset += fan_out
            out.append((w, b))
        return out


def param_count(arch: str, input_shape, hidden: int, num_classes: int) -> int:
    n_in = int(np.prod(input_shape))
    if arch == "linear":
        return n_in * num_classes + num_classes
    return n_in * hidden + hidden + hidden * num_classes + num_classes


def channel_stats(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std of ``pixel / 255`` over an (N, H, W, C) stack."""
    x = np.asarray(images, dtype=np.float64) / 255.0
    mean = x.mean(axis=(0, 1, 2))
    std = x.std(axis=(0, 1, 2))
    std[std < 1e-12] = 1.0
    return mean, std


def init_model(input_shape, num_classes: int, rng: np.random.Generator, arch: str = "mlp",
               hidden: int = 64, mean=None, std=None) -> OracleModel:
    """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    input_shape = tuple(int(v) for v in input_shape)
    c = input_shape[2]
    if arch == "linear":
        hidden = 0
    n_in = int(np.prod(input_shape))
    dims = [n_in, num_classes] if arch == "linear" else [n_in, hidden, num_classes]
    chunks = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    mean = np.zeros(c) if mean is None else np.asarray(mean, dtype=np.float64)
    std = np.ones(c) if std is None else np.asarray(std, dtype=np.float64)
    return OracleModel(arch, input_shape, num_classes, hidden, np.concatenate(chunks), mean, std)


def with_params(model: OracleModel, params: np.ndarray) -> OracleModel:
    return replace(model, params=np.asarray(params, dtype=np.float64))


# -- forward -------------------------------------------------------------------------


def preprocess(model: OracleModel, images) -> np.ndarray:
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[None]
    if x.shape[1:] != model.input_shape:
        raise ValueError(f"images of shape {x.shape[1:]} do not match model input {model.input_shape}")
    x = (x.astype(np.float64) / 255.0 - model.mean) / model.std
    return x.reshape(len(x), -1)


def _forward(model: OracleModel, x: np.ndarray):
    layers = model.layers()
    if model.arch == "linear":
        (w, b), = layers
        return x @ w + b, None
    (w1, b1), (w2, b2) = layers
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    return a1 @ w2 + b2, (z1, a1)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def logits(model: OracleModel, images) -> np.ndarray:
    return _forward(model, preprocess(model, images))[0]


def predict_proba(model: OracleModel, images) -> np.ndarray:
    """Softmax probabilities, one row per image. Never touches the parameters."""
    return softmax(logits(model, images))


def predict(model: OracleModel, images) -> np.ndarray:
    # argmax ties resolve to the smallest class index
    return np.argmax(logits(model, images), axis=1)


def accuracy(model: OracleModel, images, labels) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean(predict(model, images) == labels))


def per_item_loss(model: OracleModel, images, labels) -> np.ndarray:
    labels = np.asarray(labels)
    logp = log_softmax(logits(model, images))
    return -logp[np.arange(len(labels)), labels]


# -- training ------------------------------------------------------------------------


def loss_and_grad(model: OracleModel, images, labels, weight_decay: float = 0.0):
    """Mean cross-entropy and its gradient (plus ``weight_decay * params``)."""
    labels = np.asarray(labels, dtype=np.int64)
    x = preprocess(model, images)
    n = len(x)
    if n == 0 or len(labels) != n:
        raise ValueError("images and labels must be non-empty and of equal length")
    out, cache = _forward(model, x)
    logp = log_softmax(out)
    loss = float(-logp[np.arange(n), labels].mean())
    dz = np.exp(logp)
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    if model.arch == "linear":
        grads = [x.T @ dz, dz.sum(axis=0)]
    else:
        (_, _), (w2, _) = model.layers()
        z1, a1 = cache
        da1 = dz @ w2.T
        dz1 = da1 * (z1 > 0.0)
        grads = [x.T @ dz1, dz1.sum(axis=0), a1.T @ dz, dz.sum(axis=0)]
    grad = np.concatenate([g.ravel() for g in grads])
    if weight_decay:
        grad = grad + weight_decay * model.params
    return loss, grad


def sgd_step(model: OracleModel, images, labels, lr: float, weight_decay: float = 0.0):
    """One plain SGD step on the mean cross-entropy.

    Returns ``(new_model, loss)`` where ``loss`` is measured before the step.

    Raises:
        DivergenceError: the loss is not finite.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    loss, grad = loss_and_grad(model, images, labels, weight_decay)
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite training loss {loss}")
    return with_params(model, model.params - lr * grad), loss


# -- cross-entropy calculus -----------------------------------------------------------


def ce_loss(p, y: int) -> float:
    """``-log p[y]``; raises on a zero (or negative) true-class probability."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < len(p):
        raise IndexError(f"class {y} out of range for D={len(p)}")
    if not p[y] > 0.0:
        raise ValueError(f"cross-entropy undefined: p[{y}] = {p[y]}")
    return -math.log(p[y])


def ce_hessian(p, y: int) -> np.ndarray:
    """Hessian of ``ce_loss`` w.r.t. the probability vector: only ``(y, y)`` is nonzero."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < len(p):
        raise IndexError(f"class {y} out of range for D={len(p)}")
    if not p[y] > 0.0:
        raise ValueError(f"Hessian undefined: p[{y}] = {p[y]}")
    hess = np.zeros((len(p), len(p)))
    hess[y, y] = 1.0 / p[y] ** 2
    return hess


def regularization_term(deltas, hessian) -> float:
    """``0.5 * mean_j delta_j^T H delta_j``."""
    deltas = np.atleast_2d(np.asarray(deltas, dtype=np.float64))
    return 0.5 * float(np.mean(np.einsum("ji,ik,jk->j", deltas, hessian, deltas)))


@dataclass(frozen=True)
class LossProbe:
    """Expansion point ``psi`` with centred perturbations ``deltas``."""

    psi: np.ndarray
    y: int
    deltas: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.float64)
        deltas = np.atleast_2d(np.asarray(self.deltas, dtype=np.float64))
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "deltas", deltas)
        if deltas.shape[1] != len(psi):
            raise ValueError("delta dimension differs from psi")
        if np.any(psi < 0) or abs(psi.sum() - 1.0) > 1e-9 or not psi[self.y] > 0:
            raise ValueError("psi must be a probability vector with psi[y] > 0")
        scale = max(1.0, float(np.abs(deltas).max()))
        if np.any(np.abs(deltas.mean(axis=0)) > 1e-12 * scale):
            raise ValueError("deltas must be centred (mean zero) so the first-order term cancels")

    @classmethod
    def from_vectors(cls, vectors, y: int) -> LossProbe:
        """Probe around the mean of ``vectors``, as in augmented-loss expansions."""
        vectors = np.asarray(vectors, dtype=np.float64)
        psi = vectors.mean(axis=0)
        return cls(psi, y, vectors - psi)


def taylor_residual(probe: LossProbe, h: float) -> float:
    """Error of the second-order expansion of the mean loss at step ``h``."""
    perturbed = probe.psi + h * probe.deltas
    if np.any(perturbed < 0) or np.any(perturbed > 1 + 1e-12) or \
            np.any(np.abs(perturbed.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError(f"psi + {h} * delta leaves the probability simplex")
    exact = math.fsum(ce_loss(q, probe.y) for q in perturbed) / len(perturbed)
    approx = ce_loss(probe.psi, probe.y) + regularization_term(h * probe.deltas,
                                                               ce_hessian(probe.psi, probe.y))
    return abs(exact - approx)


# -- checkpoints ----------------------------------------------------------------------


def to_bytes(model: OracleModel) -> bytes:
    h, w, c = model.input_shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, _ARCH_CODES[model.arch], h, w, c,
                          model.hidden, model.num_classes, len(model.params))
    body = np.concatenate([model.mean, model.std, model.params]).astype("<f8").tobytes()
    return header + body


def from_bytes(data: bytes) -> OracleModel:
    if len(data) < _HEADER.size:
        raise ValueError("checkpoint too short")
    magic, version, arch_code, h, w, c, hidden, n_classes, n_params = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    arch = {v: k for k, v in _ARCH_CODES.items()}.get(arch_code)
    if arch is None:
        raise ValueError(f"unknown architecture code {arch_code}")
    expected = _HEADER.size + 8 * (2 * c + n_params)
    if len(data) != expected:
        raise ValueError(f"checkpoint is {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return OracleModel(arch, (h, w, c), n_classes, hidden, body[2 * c:].copy(),
                       body[:c].copy(), body[c:2 * c].copy())


def save_checkpoint(model: OracleModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_checkpoint(path) -> OracleModel:
    return from_bytes(Path(path).read_bytes())
