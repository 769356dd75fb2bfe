"""Dense tanh network with exact reverse-mode gradients and Adam.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch of row
vectors goes through as ``x @ W + b``. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Mlp:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to every layer
    hidden: list[np.ndarray]  # tanh outputs of the hidden layers
    squeeze: bool


def init_params(layer_dims: Sequence[int], rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"bad layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != net.layer_dims[0]:
        raise ValueError(f"input width {h.shape[1]} != {net.layer_dims[0]}")
    inputs, hidden = [], []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        if i < last:
            h = np.tanh(z)
            hidden.append(h)
        else:
            h = z
    return (h[0] if squeeze else h), ForwardCache(inputs, hidden, squeeze)


def backward(net: Mlp, cache: ForwardCache, output_grad: np.ndarray) -> list[np.ndarray]:
    """Gradients of ``sum(output_grad * output)`` w.r.t. ``net.params``.

    Batch rows are summed. Returned list is ordered like ``net.params``.
    """
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != (cache.inputs[0].shape[0], net.layer_dims[-1]):
        raise ValueError(f"output grad shape {g.shape} does not match network output")
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    for i in range(len(net.weights) - 1, -1, -1):
        a_in = cache.inputs[i]
        grads[2 * i] = a_in.T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.weights[i].T) * (1.0 - cache.hidden[i - 1] ** 2)
    return grads


def grad_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    norm = grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        s = max_norm / (norm + 1e-12)
        for g in grads:
            g *= s
    return norm


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# --- checkpoints ---------------------------------------------------------

def _flat(arrays: Sequence[np.ndarray]) -> list[float]:
    return [float(x) for a in arrays for x in np.ravel(a, order="C")]


def _unflat(flat: Sequence[float], like: Sequence[np.ndarray]) -> list[np.ndarray]:
    out, k = [], 0
    for a in like:
        out.append(np.asarray(flat[k:k + a.size], dtype=np.float64).reshape(a.shape))
        k += a.size
    if k != len(flat):
        raise CheckpointError(f"expected {k} values, got {len(flat)}")
    return out


def adam_to_dict(state: AdamState) -> dict[str, Any]:
    return {"lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps,
            "step": state.step, "m": _flat(state.m), "v": _flat(state.v)}


def adam_from_dict(doc: dict[str, Any], like: Sequence[np.ndarray]) -> AdamState:
    st = AdamState(doc["lr"], doc["beta1"], doc["beta2"], doc["eps"], int(doc["step"]))
    if doc["m"]:
        st.m = _unflat(doc["m"], like)
        st.v = _unflat(doc["v"], like)
    return st


def mlp_to_dict(net: Mlp, optimizer: AdamState | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format_version": CHECKPOINT_VERSION,
        "layer_dims": list(net.layer_dims),
        "params": _flat(net.params),
    }
    if optimizer is not None:
        doc["optimizer"] = adam_to_dict(optimizer)
    return doc


def mlp_from_dict(doc: dict[str, Any]) -> tuple[Mlp, AdamState | None]:
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported network format {doc.get('format_version')!r}")
    dims = tuple(int(d) for d in doc["layer_dims"])
    shell = init_params(dims, np.random.default_rng(0))
    params = _unflat(doc["params"], shell.params)
    net = Mlp(dims, params[0::2], params[1::2])
    opt = adam_from_dict(doc["optimizer"], net.params) if "optimizer" in doc else None
    return net, opt
