"""Regression metrics in degrees Celsius, model comparison tables and the held-out protocol."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from pilstm.data import Trace, WindowedDataset, denormalize_channel, fit_normalization, fmt_float, windows_from_traces
from pilstm.errors import ScenarioLeakage, ShapeMismatch
from pilstm.neural.model import SequenceModel
from pilstm.training import TrainConfig, TrainResult, train

MAPE_FLOOR = 1e-6


@dataclass(frozen=True)
class MetricsReport:
    mae_C: float
    rmse_C: float
    mape_pct: float
    r2: float
    n_samples: int
    r2_degenerate: bool = False
    mape_excluded: int = 0
    per_scenario: Mapping[str, "MetricsReport"] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # Cauchy-Schwarz, up to rounding of the two reductions
        if self.n_samples and self.mae_C > self.rmse_C * (1 + 1e-12) + 1e-15:
            raise ValueError("MAE exceeds RMSE")

    def row(self) -> dict[str, float | int | str]:
        return {
            "mae_C": self.mae_C, "rmse_C": self.rmse_C, "mape_pct": self.mape_pct,
            "r2": "degenerate" if self.r2_degenerate else self.r2,
            "n_samples": self.n_samples, "mape_excluded": self.mape_excluded,
        }


def compute_metrics(actual, predicted) -> MetricsReport:
    """MAE, RMSE, MAPE and R^2 of ``predicted`` against ``actual``.

    Points with ``|actual| < 1e-6`` are left out of the MAPE and counted.
    Constant targets leave R^2 undefined; it is then reported as NaN with
    ``r2_degenerate`` set.
    """
    y = np.asarray(actual, dtype=np.float64).ravel()
    yh = np.asarray(predicted, dtype=np.float64).ravel()
    if y.shape != yh.shape:
        raise ShapeMismatch(f"{len(y)} targets vs {len(yh)} predictions")
    if len(y) == 0:
        raise ValueError("no samples to evaluate")
    err = yh - y
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    ok = np.abs(y) >= MAPE_FLOOR
    mape = float(100.0 * np.mean(np.abs(err[ok] / y[ok]))) if ok.any() else math.nan
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    degenerate = ss_tot == 0.0
    r2 = math.nan if degenerate else 1.0 - float(np.sum(err * err)) / ss_tot
    return MetricsReport(mae, rmse, mape, r2, len(y), degenerate, int((~ok).sum()))


def predictions_C(model: SequenceModel, ds: WindowedDataset) -> tuple[np.ndarray, np.ndarray]:
    """(actual, predicted) temperatures in degrees Celsius."""
    if ds.windows.shape[1:] != (model.n, model.d):
        raise ShapeMismatch(f"checkpoint expects [{model.n}, {model.d}] windows, data has {ds.windows.shape[1:]}")
    norm = model.norm if model.norm is not None else ds.params
    pred = model.predict(ds.windows)
    if norm is None:
        return ds.targets.copy(), pred
    return denormalize_channel(ds.targets, norm), denormalize_channel(pred, norm)


def evaluate(model: SequenceModel, ds: WindowedDataset) -> MetricsReport:
    actual, pred = predictions_C(model, ds)
    overall = compute_metrics(actual, pred)
    per = {}
    for sid in ds.scenarios():
        mask = ds.scenario_ids == sid
        per[sid] = compute_metrics(actual[mask], pred[mask])
    return MetricsReport(
        overall.mae_C, overall.rmse_C, overall.mape_pct, overall.r2, overall.n_samples,
        overall.r2_degenerate, overall.mape_excluded, per,
    )


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    mae: float
    rmse: float
    r2: float
    best: tuple[str, ...]


def compare_models(reports: Mapping[str, MetricsReport]) -> list[ComparisonRow]:
    """Rows sorted by MAE (ties by name); ``best`` names the columns a row wins.

    Exactly one row wins each column; ties go to the row that sorts first.
    """
    if len(reports) < 2:
        raise ValueError("comparison needs at least two reports")
    names = sorted(reports, key=lambda k: (reports[k].mae_C, k))
    winners = {
        "MAE": min(names, key=lambda k: (reports[k].mae_C, names.index(k))),
        "RMSE": min(names, key=lambda k: (reports[k].rmse_C, names.index(k))),
    }
    valid = [k for k in names if not math.isnan(reports[k].r2)]
    if valid:
        winners["R2"] = min(valid, key=lambda k: (-reports[k].r2, names.index(k)))
    return [
        ComparisonRow(k, reports[k].mae_C, reports[k].rmse_C, reports[k].r2,
                      tuple(c for c, w in winners.items() if w == k))
        for k in names
    ]


COMPARISON_HEADER = ("Model", "MAE", "RMSE", "R2", "best")


def write_comparison(rows: Sequence[ComparisonRow], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_HEADER)
        for r in rows:
            w.writerow([r.model, fmt_float(r.mae), fmt_float(r.rmse), fmt_float(r.r2), ";".join(r.best)])


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    lines = [f"{'Model':<16}{'MAE':>12}{'RMSE':>12}{'R2':>12}"]
    for r in rows:
        mark = lambda col, v, fmt: (f"{v:{fmt}}" + ("*" if col in r.best else " "))
        lines.append(f"{r.model:<16}{mark('MAE', r.mae, '11.4f'):>12}{mark('RMSE', r.rmse, '11.4f'):>12}{mark('R2', r.r2, '11.6f'):>12}")
    return "\n".join(lines)


METRICS_HEADER = ("scope", "mae_C", "rmse_C", "mape_pct", "r2", "n_samples", "mape_excluded")


def write_metrics(report: MetricsReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for scope, rep in [("all", report), *report.per_scenario.items()]:
            row = rep.row()
            w.writerow([scope] + [fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in (row[k] for k in METRICS_HEADER[1:])])


def format_metrics(report: MetricsReport) -> str:
    r2 = "undefined (constant targets)" if report.r2_degenerate else f"{report.r2:.6f}"
    out = [
        f"samples  {report.n_samples}",
        f"MAE      {report.mae_C:.4f} C",
        f"RMSE     {report.rmse_C:.4f} C",
        f"MAPE     {report.mape_pct:.4f} %  ({report.mape_excluded} near-zero targets excluded)",
        f"R2       {r2}",
    ]
    for sid, rep in report.per_scenario.items():
        out.append(f"  {sid:<10} MAE {rep.mae_C:.4f}  RMSE {rep.rmse_C:.4f}  n {rep.n_samples}")
    return "\n".join(out)


def check_no_leakage(train_set: WindowedDataset, holdout: Sequence[str]) -> None:
    leaked = sorted(set(holdout) & set(train_set.scenarios()))
    if leaked:
        raise ScenarioLeakage(f"held-out scenarios present in training data: {leaked}")


@dataclass
class HoldoutSplit:
    train_ids: list[str]
    val_ids: list[str]
    test_ids: list[str]


def holdout_split(ids: Sequence[str], holdout: Sequence[str], val_frac: float = 0.2, seed: int = 0) -> HoldoutSplit:
    """Hold ``holdout`` out as test; split the rest into train/val by scenario."""
    missing = set(holdout) - set(ids)
    if missing:
        raise KeyError(f"held-out scenarios not found: {sorted(missing)}")
    rest = sorted(set(ids) - set(holdout))
    n_val = min(max(int(round(val_frac * len(rest))), 1), len(rest) - 1) if len(rest) > 1 else 0
    if n_val == 0:
        raise ValueError("need at least two non-held-out scenarios for train and validation")
    order = np.random.default_rng(seed).permutation(len(rest))
    val = sorted(rest[k] for k in order[:n_val])
    tr = sorted(rest[k] for k in order[n_val:])
    return HoldoutSplit(tr, val, sorted(holdout))


@dataclass
class HoldoutResult:
    split: HoldoutSplit
    runs: dict[str, TrainResult]
    reports: dict[str, dict[str, MetricsReport]]  # model name -> scenario -> report
    test_sets: dict[str, WindowedDataset]


def held_out_eval(
    traces: Mapping[str, Trace],
    configs: Mapping[str, TrainConfig],
    holdout: Sequence[str] = ("Batt-9", "Batt-12"),
    *,
    val_frac: float = 0.2,
    split_seed: int = 0,
    n: int = 50,
    train_set: WindowedDataset | None = None,
) -> HoldoutResult:
    """Train every configuration on the non-held-out scenarios and score each held-out one.

    ``train_set`` overrides the constructed training windows (it is still
    checked for leakage).
    """
    sp = holdout_split(list(traces), holdout, val_frac, split_seed)
    norm = fit_normalization([traces[k] for k in sp.train_ids])
    tr = train_set if train_set is not None else windows_from_traces([traces[k] for k in sp.train_ids], norm, n)
    check_no_leakage(tr, holdout)
    va = windows_from_traces([traces[k] for k in sp.val_ids], norm, n)
    tests = {k: windows_from_traces([traces[k]], norm, n) for k in sp.test_ids}
    runs, reports = {}, {}
    for name, cfg in configs.items():
        res = train(tr, va, cfg)
        runs[name] = res
        reports[name] = {k: evaluate(res.model, ds) for k, ds in tests.items()}
    return HoldoutResult(sp, runs, reports, tests)
