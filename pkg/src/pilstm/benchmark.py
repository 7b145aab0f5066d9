"""Seeded synthetic benchmark: the preset catalog with noise, two held-out cells, three models, several seeds.

The data (traces, split, normalization) are fixed by ``data_seed`` and
``split_seed``; only the training seed varies between repetitions.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from pilstm.data import fit_normalization, fmt_float, windows_from_traces
from pilstm.evaluation import MetricsReport, check_no_leakage, evaluate, holdout_split
from pilstm.physics import PhysicsConfig, physics_loss
from pilstm.safety import WarnThresholds, warn, warn_predictive
from pilstm.sim import preset_catalog, synthesize_trace
from pilstm.training import TrainConfig, TrainResult, train

MODELS = ("pi-lstm", "lstm", "mlp")


@dataclass(frozen=True)
class BenchmarkConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    data_seed: int = 0
    noise_scale: float = 1.0
    holdout: tuple[str, ...] = ("Batt-9", "Batt-12")
    nail_trace: str = "Batt-12"
    val_frac: float = 0.2
    split_seed: int = 7
    n: int = 50
    epochs_max: int = 150
    batch_size: int = 32
    lr: float = 3e-3
    patience: int = 20
    hidden: int = 32
    lambda_weight: float = 0.1
    alpha_diff: float = 0.1

    def train_config(self, kind: str, seed: int) -> TrainConfig:
        return TrainConfig(
            model_kind=kind, epochs_max=self.epochs_max, batch_size=self.batch_size, lr=self.lr,
            patience=self.patience, seed=seed, lambda_weight=self.lambda_weight,
            alpha_diff=self.alpha_diff, hidden=self.hidden,
        )


@dataclass
class RunRecord:
    model: str
    seed: int
    best_epoch: int
    epochs_run: int
    seconds: float
    rmse: dict[str, float]
    reports: dict[str, MetricsReport]
    phys_loss: float  # mean over held-out cells of the physics loss of test predictions
    result: TrainResult | None = None


@dataclass
class WarnRecord:
    seed: int
    alarm_time_s: float | None
    lead_time_s: float | None
    measured_crossing_s: float | None

    @property
    def precedes(self) -> bool:
        """Did the predictive alarm fire strictly before the measured crossing?"""
        return (
            self.alarm_time_s is not None
            and self.measured_crossing_s is not None
            and self.alarm_time_s < self.measured_crossing_s
        )


@dataclass
class BenchmarkResult:
    cfg: BenchmarkConfig
    runs: list[RunRecord] = field(default_factory=list)
    warnings: list[WarnRecord] = field(default_factory=list)
    seconds: float = 0.0

    def rmse(self, model: str, cell: str) -> list[float]:
        return [r.rmse[cell] for r in self.runs if r.model == model]

    def median_rmse(self, model: str, cell: str) -> float:
        return float(np.median(self.rmse(model, cell)))

    def phys(self, model: str) -> dict[int, float]:
        return {r.seed: r.phys_loss for r in self.runs if r.model == model}


def run_benchmark(cfg: BenchmarkConfig | None = None, progress: Callable[[str], None] | None = None,
                  keep_models: bool = False) -> BenchmarkResult:
    cfg = cfg or BenchmarkConfig()
    say = progress or (lambda msg: None)
    t_start = time.perf_counter()
    traces = {s.id: synthesize_trace(s) for s in preset_catalog(noise_scale=cfg.noise_scale, seed=cfg.data_seed)}
    sp = holdout_split(list(traces), cfg.holdout, cfg.val_frac, cfg.split_seed)
    norm = fit_normalization([traces[k] for k in sp.train_ids])
    tr = windows_from_traces([traces[k] for k in sp.train_ids], norm, cfg.n)
    check_no_leakage(tr, cfg.holdout)
    va = windows_from_traces([traces[k] for k in sp.val_ids], norm, cfg.n)
    tests = {k: windows_from_traces([traces[k]], norm, cfg.n) for k in sp.test_ids}
    phys_cfg = PhysicsConfig(alpha_diff=cfg.alpha_diff, lambda_weight=cfg.lambda_weight)
    say(f"train {sp.train_ids} val {sp.val_ids} test {sp.test_ids}")

    nail = traces[cfg.nail_trace]
    measured = [e for e in warn(nail) if e.level == 3]
    crossing = measured[0].time_s if measured else None

    out = BenchmarkResult(cfg)
    for seed in cfg.seeds:
        for kind in MODELS:
            t0 = time.perf_counter()
            res = train(tr, va, cfg.train_config(kind, seed))
            reports = {k: evaluate(res.model, ds) for k, ds in tests.items()}
            phys = float(np.mean([physics_loss(res.model.predict(ds.windows), phys_cfg) for ds in tests.values()]))
            rec = RunRecord(
                kind, seed, res.best_epoch, len(res.log) - 1, time.perf_counter() - t0,
                {k: r.rmse_C for k, r in reports.items()}, reports, phys, res if keep_models else None,
            )
            out.runs.append(rec)
            say(f"seed {seed} {kind:<8} best epoch {rec.best_epoch:>3}/{rec.epochs_run:<3} "
                + " ".join(f"{k} RMSE {v:.3f}" for k, v in rec.rmse.items())
                + f" phys {phys:.3e} ({rec.seconds:.0f} s)")
            if kind == "pi-lstm":
                events = warn_predictive(res.model, nail, WarnThresholds())
                ev = events[0] if events else None
                out.warnings.append(WarnRecord(
                    seed, ev.time_s if ev else None, ev.lead_time_s if ev else None, crossing,
                ))
    out.seconds = time.perf_counter() - t_start
    return out


RESULT_HEADER = ("model", "seed", "cell", "rmse_C", "mae_C", "r2", "phys_loss", "best_epoch", "epochs_run", "seconds")


def write_benchmark(result: BenchmarkResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "benchmark_runs.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in result.runs:
            for cell, rep in r.reports.items():
                w.writerow([r.model, r.seed, cell, fmt_float(rep.rmse_C), fmt_float(rep.mae_C), fmt_float(rep.r2),
                            fmt_float(r.phys_loss), r.best_epoch, r.epochs_run, f"{r.seconds:.3f}"])
    with (out / "benchmark_warnings.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "alarm_time_s", "lead_time_s", "measured_crossing_s", "precedes"))
        for r in result.warnings:
            w.writerow([r.seed, r.alarm_time_s, r.lead_time_s, r.measured_crossing_s, int(r.precedes)])
    with (out / "benchmark_config.txt").open("w", encoding="utf-8") as fh:
        fh.write("# pilstm-benchmark v1\n")
        for k, v in asdict(result.cfg).items():
            fh.write(f"{k} = {v!r}\n")
