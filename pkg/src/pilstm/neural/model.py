"""Uniform wrapper over the LSTM and MLP regressors used by training and inference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pilstm.data import TEMPERATURE, NormalizationParams
from pilstm.errors import ShapeMismatch
from pilstm.neural.lstm import LstmParams, lstm_backward, lstm_forward, lstm_predict
from pilstm.neural.mlp import MlpParams, mlp_backward, mlp_forward

KINDS = ("lstm", "mlp")


@dataclass
class SequenceModel:
    """A regressor from an ``[n, d]`` normalized window to the next normalized temperature."""

    kind: str
    params: LstmParams | MlpParams
    n: int
    d: int
    norm: NormalizationParams | None = None
    target_channel: int = TEMPERATURE

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        expected = self.d if self.kind == "lstm" else self.n * self.d
        if self.params.input_dim != expected:
            raise ShapeMismatch(f"{self.kind} params take width {self.params.input_dim}, windows give {expected}")

    @classmethod
    def create(
        cls, kind: str, n: int, d: int, rng: np.random.Generator, *, hidden: int = 32,
        mlp_widths: tuple[int, ...] = (64, 64), norm: NormalizationParams | None = None,
    ) -> "SequenceModel":
        if kind == "lstm":
            params = LstmParams.init(d, hidden, rng)
        elif kind == "mlp":
            params = MlpParams.init(n * d, tuple(mlp_widths), rng)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
        return cls(kind, params, n, d, norm)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (self.n, self.d):
            raise ShapeMismatch(f"expected windows of shape [B, {self.n}, {self.d}], got {X.shape}")
        return X

    def forward(self, X: np.ndarray):
        """Batched prediction ``[B]`` plus the cache needed by :meth:`backward`."""
        X = self._check(X)
        if self.kind == "lstm":
            return lstm_forward(X, self.params)
        return mlp_forward(X.reshape(X.shape[0], -1), self.params)

    def backward(self, cache, upstream) -> dict[str, np.ndarray]:
        if self.kind == "lstm":
            return lstm_backward(cache, upstream, self.params)
        return mlp_backward(cache, upstream, self.params)

    def predict(self, X: np.ndarray, batch: int = 512) -> np.ndarray:
        X = self._check(X)
        if self.kind == "lstm":
            run = lambda part: lstm_predict(part, self.params)
        else:
            run = lambda part: mlp_forward(part.reshape(part.shape[0], -1), self.params)[0]
        out = [run(X[k : k + batch]) for k in range(0, len(X), batch)]
        return np.concatenate(out) if out else np.zeros(0)

    def arrays(self) -> dict[str, np.ndarray]:
        return self.params.arrays()

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "SequenceModel":
        cls = LstmParams if self.kind == "lstm" else MlpParams
        return SequenceModel(self.kind, cls.from_arrays(arrays), self.n, self.d, self.norm, self.target_channel)

    def copy(self) -> "SequenceModel":
        return self.with_arrays({k: a.copy() for k, a in self.arrays().items()})


def forward_multi(window: np.ndarray, model: SequenceModel, H: int) -> np.ndarray:
    """Iterate single-step predictions ``H`` times without teacher forcing.

    Each prediction becomes the temperature entry of a new last row; the
    other channels repeat their last observed values.
    """
    if H < 1:
        raise ValueError("horizon must be at least 1")
    w = np.array(model._check(window)[0])
    out = np.empty(H)
    for k in range(H):
        y = float(model.forward(w)[0][0])
        out[k] = y
        nxt = w[-1].copy()
        nxt[model.target_channel] = y
        w = np.vstack([w[1:], nxt])
    return out
