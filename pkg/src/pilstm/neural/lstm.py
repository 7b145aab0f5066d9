"""Single-layer LSTM with an affine read-out and exact BPTT, in float64 numpy.

Gate weights are stored stacked in the order (input, forget, output,
candidate) so one matmul per step serves all four gates; per-gate matrices
are exposed as views.  Every function accepts a single window ``[n, d]`` or a
batch ``[B, n, d]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pilstm.errors import NonFiniteActivation, ShapeMismatch, TapeMismatch

GATES = ("i", "f", "o", "c")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    W: np.ndarray  # [4h, d]
    U: np.ndarray  # [4h, h]
    b: np.ndarray  # [4h]
    head_W: np.ndarray  # [1, h]
    head_b: np.ndarray  # [1]

    def __post_init__(self) -> None:
        h4, d = self.W.shape
        if h4 % 4:
            raise ShapeMismatch("stacked gate weights must have 4h rows")
        h = h4 // 4
        shapes = {"U": (h4, h), "b": (h4,), "head_W": (1, h), "head_b": (1,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ShapeMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def _gate(self, arr: np.ndarray, g: str) -> np.ndarray:
        h = self.hidden
        k = GATES.index(g)
        return arr[k * h : (k + 1) * h]

    # per-gate views
    W_i = property(lambda self: self._gate(self.W, "i"))
    W_f = property(lambda self: self._gate(self.W, "f"))
    W_o = property(lambda self: self._gate(self.W, "o"))
    W_c = property(lambda self: self._gate(self.W, "c"))
    U_i = property(lambda self: self._gate(self.U, "i"))
    U_f = property(lambda self: self._gate(self.U, "f"))
    U_o = property(lambda self: self._gate(self.U, "o"))
    U_c = property(lambda self: self._gate(self.U, "c"))
    b_i = property(lambda self: self._gate(self.b, "i"))
    b_f = property(lambda self: self._gate(self.b, "f"))
    b_o = property(lambda self: self._gate(self.b, "o"))
    b_c = property(lambda self: self._gate(self.b, "c"))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b, "head_W": self.head_W, "head_b": self.head_b}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "LstmParams":
        return cls(**{k: np.asarray(arrays[k], dtype=np.float64) for k in ("W", "U", "b", "head_W", "head_b")})

    @classmethod
    def zeros(cls, d: int, h: int) -> "LstmParams":
        return cls(np.zeros((4 * h, d)), np.zeros((4 * h, h)), np.zeros(4 * h), np.zeros((1, h)), np.zeros(1))

    @classmethod
    def init(cls, d: int, h: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmParams":
        """Uniform(-1/sqrt(h), 1/sqrt(h)) weights with the forget bias set to ``forget_bias``."""
        k = 1.0 / np.sqrt(h)
        p = cls(
            W=rng.uniform(-k, k, (4 * h, d)),
            U=rng.uniform(-k, k, (4 * h, h)),
            b=np.zeros(4 * h),
            head_W=rng.uniform(-k, k, (1, h)),
            head_b=np.zeros(1),
        )
        p.b[h : 2 * h] = forget_bias
        return p


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "LstmState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


def lstm_step(x_t: np.ndarray, state: LstmState, p: LstmParams) -> tuple[LstmState, dict[str, np.ndarray]]:
    """One recurrence step; returns the new state and the gate cache."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != p.input_dim or state.h.shape[-1] != p.hidden:
        raise ShapeMismatch(f"input width {x_t.shape[-1]} / hidden {state.h.shape[-1]} do not match params")
    h = p.hidden
    z = x_t @ p.W.T + state.h @ p.U.T + p.b
    i = sigmoid(z[..., :h])
    f = sigmoid(z[..., h : 2 * h])
    o = sigmoid(z[..., 2 * h : 3 * h])
    g = np.tanh(z[..., 3 * h :])
    c = f * state.c + i * g
    tc = np.tanh(c)
    h_new = o * tc
    if not np.all(np.isfinite(h_new)):
        raise NonFiniteActivation("non-finite hidden state")
    cache = {"x": x_t, "h_prev": state.h, "c_prev": state.c, "i": i, "f": f, "o": o, "g": g, "c": c, "tc": tc}
    return LstmState(h_new, c), cache


@dataclass
class ForwardTape:
    """Per-timestep activations of a batched forward pass."""

    x: np.ndarray  # [n, B, d]
    h: np.ndarray  # [n+1, B, h]; h[0] is the initial state
    c: np.ndarray  # [n+1, B, h]
    i: np.ndarray  # [n, B, h]
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tc: np.ndarray
    single: bool = False

    def __len__(self) -> int:
        return self.x.shape[0]


def lstm_forward(X: np.ndarray, p: LstmParams) -> tuple[np.ndarray, ForwardTape]:
    """Run the recurrence from a zero state over ``X`` and apply the head.

    Returns predictions of shape ``[B]`` (a scalar array for a single window)
    and the tape needed by :func:`lstm_backward`.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != p.input_dim:
        raise ShapeMismatch(f"window batch of shape {X.shape} does not fit input width {p.input_dim}")
    B, n, _ = X.shape
    H = p.hidden
    xs = np.ascontiguousarray(X.transpose(1, 0, 2))
    # sigmoid(z) = (1 + tanh(z / 2)) / 2, so the three sigmoid gates are
    # pre-scaled by 1/2 and a single tanh call serves all four gates
    scale = np.ones(4 * H)
    scale[: 3 * H] = 0.5
    Ws = p.W * scale[:, None]
    UT = (p.U * scale[:, None]).T
    zx = xs @ Ws.T + p.b * scale
    hs = np.zeros((n + 1, B, H))
    cs = np.zeros((n + 1, B, H))
    acts = np.empty((n, B, 4 * H))
    tcs = np.empty((n, B, H))
    for t in range(n):
        a = acts[t]
        np.tanh(zx[t] + hs[t] @ UT, out=a)
        a[:, : 3 * H] *= 0.5
        a[:, : 3 * H] += 0.5
        c = cs[t + 1]
        np.multiply(a[:, H : 2 * H], cs[t], out=c)
        c += a[:, :H] * a[:, 3 * H :]
        tc = tcs[t]
        np.tanh(c, out=tc)
        np.multiply(a[:, 2 * H : 3 * H], tc, out=hs[t + 1])
    pred = hs[n] @ p.head_W[0] + p.head_b[0]
    if not np.all(np.isfinite(pred)):
        raise NonFiniteActivation("non-finite prediction")
    tape = ForwardTape(
        xs, hs, cs, acts[:, :, :H], acts[:, :, H : 2 * H], acts[:, :, 2 * H : 3 * H], acts[:, :, 3 * H :], tcs, single
    )
    return (pred[0] if single else pred), tape


def lstm_predict(X: np.ndarray, p: LstmParams) -> np.ndarray:
    """Predictions for a batch ``[B, n, d]`` without recording a tape."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != p.input_dim:
        raise ShapeMismatch(f"window batch of shape {X.shape} does not fit input width {p.input_dim}")
    B, n, _ = X.shape
    H = p.hidden
    scale = np.ones(4 * H)
    scale[: 3 * H] = 0.5
    Ws = p.W * scale[:, None]
    UT = (p.U * scale[:, None]).T
    bs = p.b * scale
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    a = np.empty((B, 4 * H))
    for t in range(n):
        np.tanh(X[:, t] @ Ws.T + bs + h @ UT, out=a)
        a[:, : 3 * H] *= 0.5
        a[:, : 3 * H] += 0.5
        c *= a[:, H : 2 * H]
        c += a[:, :H] * a[:, 3 * H :]
        np.multiply(a[:, 2 * H : 3 * H], np.tanh(c), out=h)
    pred = h @ p.head_W[0] + p.head_b[0]
    if not np.all(np.isfinite(pred)):
        raise NonFiniteActivation("non-finite prediction")
    return pred


def lstm_backward(tape: ForwardTape, upstream, p: LstmParams) -> dict[str, np.ndarray]:
    """Exact gradient of ``sum_b upstream[b] * pred[b]`` w.r.t. every parameter."""
    dy = np.atleast_1d(np.asarray(upstream, dtype=np.float64))
    n, B, _ = tape.x.shape
    if dy.shape != (B,) or tape.h.shape[2] != p.hidden or tape.x.shape[2] != p.input_dim:
        raise TapeMismatch(f"upstream gradient {dy.shape} or params do not match tape (batch {B})")
    H = p.hidden
    i, f, o, g, tc = tape.i, tape.f, tape.o, tape.g, tape.tc
    # Local derivative factors for every step at once.  The three gates fed
    # by dL/dc are stacked as (i, f, c) so each step needs a single multiply;
    # the output gate, fed by dL/dh, is handled separately.
    by_c = np.stack([g * i * (1.0 - i), tape.c[:n] * f * (1.0 - f), i * (1.0 - g * g)], axis=2)  # [n, B, 3, H]
    by_h = tc * o * (1.0 - o)
    to_c = o * (1.0 - tc * tc)
    # recurrent matrix with rows reordered to (i, f, c, o)
    perm = np.r_[0 : 2 * H, 3 * H : 4 * H, 2 * H : 3 * H]
    Up = p.U[perm]
    dz_all = np.empty((n, B, 4 * H))
    dh = dy[:, None] * p.head_W[0][None, :]
    dc = np.zeros((B, H))
    for t in range(n - 1, -1, -1):
        dc += dh * to_c[t]
        dz = dz_all[t]
        np.multiply(dc[:, None, :], by_c[t], out=dz[:, : 3 * H].reshape(B, 3, H))
        np.multiply(dh, by_h[t], out=dz[:, 3 * H :])
        dc *= f[t]
        dh = dz @ Up
    flat_dz = dz_all.reshape(n * B, 4 * H)
    inv = np.argsort(perm)
    gW = (flat_dz.T @ tape.x.reshape(n * B, -1))[inv]
    gU = (flat_dz.T @ tape.h[:n].reshape(n * B, H))[inv]
    gb = flat_dz.sum(axis=0)[inv]
    return {
        "W": gW,
        "U": gU,
        "b": gb,
        "head_W": (dy @ tape.h[n])[None, :],
        "head_b": np.array([dy.sum()]),
    }


def forward_sequence(window: np.ndarray, p: LstmParams) -> tuple[float, ForwardTape]:
    """Prediction for one ``[n, d]`` window plus its tape."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeMismatch("forward_sequence expects a single [n, d] window")
    pred, tape = lstm_forward(window, p)
    return float(pred), tape


def backward_sequence(tape: ForwardTape, upstream, p: LstmParams) -> dict[str, np.ndarray]:
    return lstm_backward(tape, upstream, p)
