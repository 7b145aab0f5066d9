"""Mini-batch Adam training with early stopping for the three model kinds.

Batches are runs of consecutive windows from one source trace, so the
per-batch predictions form a time-ordered sequence on which the physics
residual is evaluated; residual stencils never cross trace boundaries.  The
order of the batches is reshuffled each epoch from the run seed.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pilstm.data import WindowedDataset, fmt_float
from pilstm.errors import Diverged, EmptySplit, NonFiniteActivation
from pilstm.neural.adam import AdamState, adam_step
from pilstm.neural.model import SequenceModel
from pilstm.physics import LossBreakdown, PhysicsConfig, total_loss_grad

MODEL_KINDS = ("pi-lstm", "lstm", "mlp")


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "pi-lstm"
    epochs_max: int = 500
    batch_size: int = 32
    lr: float = 1e-4
    patience: int = 20
    seed: int = 0
    lambda_weight: float = 0.1
    alpha_diff: float = 0.1
    dt_s: float = 0.2
    hidden: int = 32
    mlp_widths: tuple[int, ...] = (64, 64)

    def __post_init__(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        for name in ("epochs_max", "batch_size", "patience", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        object.__setattr__(self, "mlp_widths", tuple(int(w) for w in self.mlp_widths))

    @property
    def network(self) -> str:
        return "mlp" if self.model_kind == "mlp" else "lstm"

    @property
    def physics(self) -> PhysicsConfig:
        """Physics settings actually used; the baselines always train with zero weight."""
        lam = self.lambda_weight if self.model_kind == "pi-lstm" else 0.0
        return PhysicsConfig(alpha_diff=self.alpha_diff, dt_s=self.dt_s, lambda_weight=lam)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["mlp_widths"] = list(self.mlp_widths)
        return d


@dataclass(frozen=True)
class EpochLog:
    """Losses after ``epoch``.

    Epoch 0 is a full pass with the initial parameters; later training
    entries are the size-weighted mean of that epoch's mini-batch losses.
    Validation entries are always full passes with the end-of-epoch
    parameters.
    """

    epoch: int
    train: LossBreakdown
    val: LossBreakdown


@dataclass
class TrainResult:
    model: SequenceModel
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best(self) -> EpochLog:
        return self.log[self.best_epoch]


def chunk_segments(ds: WindowedDataset, size: int) -> list[np.ndarray]:
    """Index arrays of at most ``size`` time-consecutive windows from one trace."""
    out = []
    for sid in ds.scenarios():
        idx = np.flatnonzero(ds.scenario_ids == sid)
        idx = idx[np.argsort(ds.starts[idx], kind="stable")]
        # split further wherever the source rows are not contiguous
        breaks = np.flatnonzero(np.diff(ds.starts[idx]) != 1) + 1
        for run in np.split(idx, breaks):
            out.extend(run[k : k + size] for k in range(0, len(run), size))
    return out


def _segments_loss(model: SequenceModel, ds: WindowedDataset, chunks, cfg: PhysicsConfig) -> LossBreakdown:
    order = np.concatenate(chunks)
    pred = model.predict(ds.windows[order])
    bounds = np.cumsum([0] + [len(c) for c in chunks])
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    loss, _ = total_loss_grad(pred, ds.targets[order], slices, cfg)
    if not np.isfinite(loss.total):
        raise Diverged("non-finite loss")
    return loss


def train(train_set: WindowedDataset, val_set: WindowedDataset, cfg: TrainConfig, model: SequenceModel | None = None) -> TrainResult:
    """Minimize data MSE + lambda * physics loss; return the best-validation model."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise EmptySplit("training and validation sets must both be non-empty")
    if train_set.windows.shape[1:] != val_set.windows.shape[1:]:
        raise ValueError("train and validation windows differ in shape")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = SequenceModel.create(
            cfg.network, train_set.n, train_set.d, rng, hidden=cfg.hidden,
            mlp_widths=cfg.mlp_widths, norm=train_set.params,
        )
    phys = cfg.physics
    train_chunks = chunk_segments(train_set, cfg.batch_size)
    val_chunks = chunk_segments(val_set, cfg.batch_size)
    single = slice(0, None)

    params = {k: a.copy() for k, a in model.arrays().items()}
    state = AdamState.for_params(params, lr=cfg.lr)
    model = model.with_arrays(params)

    log = [EpochLog(0, _segments_loss(model, train_set, train_chunks, phys), _segments_loss(model, val_set, val_chunks, phys))]
    best_epoch, best_val, best_params = 0, log[0].val.total, params
    for epoch in range(1, cfg.epochs_max + 1):
        sums = np.zeros(3)
        n_res = 0
        for j in rng.permutation(len(train_chunks)):
            idx = train_chunks[j]
            try:
                pred, cache = model.forward(train_set.windows[idx])
            except NonFiniteActivation as exc:
                raise Diverged(f"epoch {epoch}: {exc}") from exc
            loss, g_pred = total_loss_grad(pred, train_set.targets[idx], [single], phys)
            if not np.isfinite(loss.total):
                raise Diverged(f"epoch {epoch}: non-finite loss")
            sums += len(idx) * np.array([loss.data_loss, loss.phys_loss, loss.total])
            n_res += loss.n_residuals
            grads = model.backward(cache, g_pred)
            params, state = adam_step(params, grads, state)
            model = model.with_arrays(params)
        data, ph, tot = sums / len(train_set)
        running = LossBreakdown(data, ph, tot, len(train_set), n_res, phys.lambda_weight, phys.alpha_diff)
        entry = EpochLog(epoch, running, _segments_loss(model, val_set, val_chunks, phys))
        log.append(entry)
        if entry.val.total < best_val:
            best_epoch, best_val, best_params = epoch, entry.val.total, params
        elif epoch - best_epoch >= cfg.patience:
            break
    return TrainResult(model.with_arrays(best_params), log, best_epoch)


LOG_HEADER = (
    "epoch", "data_loss", "phys_loss", "total", "lambda", "alpha",
    "val_data_loss", "val_phys_loss", "val_total",
)


def write_training_log(log: list[EpochLog], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for e in log:
            w.writerow([
                e.epoch, fmt_float(e.train.data_loss), fmt_float(e.train.phys_loss), fmt_float(e.train.total),
                fmt_float(e.train.lambda_weight), fmt_float(e.train.alpha_diff),
                fmt_float(e.val.data_loss), fmt_float(e.val.phys_loss), fmt_float(e.val.total),
            ])


def read_training_log(path: str | Path) -> list[dict[str, float]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
