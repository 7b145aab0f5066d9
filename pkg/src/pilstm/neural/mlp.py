"""Fully connected baseline on the flattened window: tanh hidden layers, linear output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pilstm.errors import ShapeMismatch


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # layer k: [out_k, in_k]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeMismatch("need one bias per weight matrix")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[0],):
                raise ShapeMismatch(f"layer {k}: bias {b.shape} vs weight {W.shape}")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeMismatch(f"layer {k} input width does not match previous layer")
        if self.weights[-1].shape[0] != 1:
            raise ShapeMismatch("output layer must have a single unit")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(W.shape[0] for W in self.weights[:-1])

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{k}"] = W
            out[f"b{k}"] = b
        return out

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "MlpParams":
        depth = sum(1 for k in arrays if k.startswith("W"))
        return cls(
            [np.asarray(arrays[f"W{k}"], dtype=np.float64) for k in range(depth)],
            [np.asarray(arrays[f"b{k}"], dtype=np.float64) for k in range(depth)],
        )

    @classmethod
    def init(cls, input_dim: int, widths: tuple[int, ...], rng: np.random.Generator) -> "MlpParams":
        dims = [input_dim, *widths, 1]
        Ws, bs = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            k = 1.0 / np.sqrt(fan_in)
            Ws.append(rng.uniform(-k, k, (fan_out, fan_in)))
            bs.append(np.zeros(fan_out))
        return cls(Ws, bs)

    @classmethod
    def zeros(cls, input_dim: int, widths: tuple[int, ...]) -> "MlpParams":
        dims = [input_dim, *widths, 1]
        return cls([np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])], [np.zeros(o) for o in dims[1:]])


def mlp_forward(X: np.ndarray, p: MlpParams) -> tuple[np.ndarray, list[np.ndarray]]:
    """``X`` is ``[B, n*d]`` (or ``[B, n, d]``, flattened here); returns ``[B]`` predictions."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    if X.ndim != 2 or X.shape[1] != p.input_dim:
        raise ShapeMismatch(f"input of shape {X.shape} does not fit width {p.input_dim}")
    acts = [X]
    a = X
    last = len(p.weights) - 1
    for k, (W, b) in enumerate(zip(p.weights, p.biases)):
        z = a @ W.T + b
        a = z if k == last else np.tanh(z)
        acts.append(a)
    return a[:, 0], acts


def mlp_backward(acts: list[np.ndarray], upstream, p: MlpParams) -> dict[str, np.ndarray]:
    """Gradient of ``sum_b upstream[b] * pred[b]``."""
    dy = np.atleast_1d(np.asarray(upstream, dtype=np.float64))
    if dy.shape != (acts[0].shape[0],) or len(acts) != len(p.weights) + 1:
        raise ShapeMismatch("upstream gradient does not match the forward cache")
    grads = {}
    delta = dy[:, None]
    for k in range(len(p.weights) - 1, -1, -1):
        a_in = acts[k]
        grads[f"W{k}"] = delta.T @ a_in
        grads[f"b{k}"] = delta.sum(axis=0)
        if k:
            delta = (delta @ p.weights[k]) * (1.0 - a_in * a_in)
    return grads
