"""Command-line interface: simulate, train, evaluate, compare, warn, report, benchmark.

Exit status: 0 success, 1-3 highest warning level fired by ``warn``, and
10 or above for errors (see :data:`EXIT_CODES`).
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
from click.core import ParameterSource

from pilstm import errors
from pilstm.config import CONFIG_TAG, digest, parse_lines, read_config, write_config, write_manifest
from pilstm.data import (
    SplitSpec,
    Trace,
    fit_normalization,
    fmt_float,
    impute_forward_fill,
    load_trace_csv,
    save_window_index,
    split_ids,
    windows_from_traces,
    write_trace_csv,
)
from pilstm.evaluation import (
    check_no_leakage,
    compare_models,
    evaluate,
    format_comparison,
    format_metrics,
    held_out_eval,
    holdout_split,
    predictions_C,
    write_comparison,
    write_metrics,
)
from pilstm.neural.checkpoint import load_checkpoint, save_checkpoint
from pilstm.safety import WarnThresholds, warn as reactive_warn, warn_predictive, write_events
from pilstm.sim import preset_catalog, read_catalog, synthesize_trace
from pilstm.sim.scenarios import law_params_for
from pilstm.training import TrainConfig, read_training_log, train, write_training_log

EXIT_OK = 0
EXIT_USAGE = 10
EXIT_IO = 11
EXIT_DATA = 12
EXIT_CATALOG = 13
EXIT_MODEL = 14
EXIT_TRAINING = 15
EXIT_INTERNAL = 19

EXIT_CODES = {
    EXIT_OK: "success (warn: no event)",
    1: "warn: highest level fired is 1 (mechanical collision)",
    2: "warn: highest level fired is 2 (internal short circuit)",
    3: "warn: highest level fired is 3 (temperature threshold)",
    EXIT_USAGE: "bad command line or config file",
    EXIT_IO: "missing file or directory, or missing run artifacts",
    EXIT_DATA: "unreadable or invalid trace data",
    EXIT_CATALOG: "invalid scenario catalog",
    EXIT_MODEL: "checkpoint invalid or incompatible with the data",
    EXIT_TRAINING: "training failed (empty split, divergence, held-out leakage)",
    EXIT_INTERNAL: "unexpected internal error",
}

_ERROR_EXITS: list[tuple[type[BaseException], int]] = [
    (errors.BadConfig, EXIT_USAGE),
    (errors.BadCatalog, EXIT_CATALOG),
    (errors.MissingArtifacts, EXIT_IO),
    ((errors.CheckpointError, errors.ShapeMismatch, errors.TapeMismatch), EXIT_MODEL),
    ((errors.Diverged, errors.EmptySplit, errors.ScenarioLeakage, errors.InsufficientGroups), EXIT_TRAINING),
    (errors.PilstmError, EXIT_DATA),
    ((FileNotFoundError, NotADirectoryError, PermissionError), EXIT_IO),
    ((ValueError, KeyError), EXIT_DATA),
]


def exit_code_for(exc: BaseException) -> int:
    for kinds, code in _ERROR_EXITS:
        if isinstance(exc, kinds):
            return code
    return EXIT_INTERNAL


# -- config merging ---------------------------------------------------------

def _resolve(ctx: click.Context, config: str | None, required: tuple[str, ...] = (), skip: tuple[str, ...] = ("config",)) -> dict:
    """Merge defaults < config file < explicit flags; returns plain JSON-able values."""
    names = [p.name for p in ctx.command.params if p.name not in skip]
    from_file = read_config(config, names) if config else {}
    out = {}
    for name in names:
        value = ctx.params[name]
        if ctx.get_parameter_source(name) != ParameterSource.COMMANDLINE and name in from_file:
            value = from_file[name]
        if isinstance(value, tuple):
            value = list(value)
        out[name] = value
    missing = [f"--{k.replace('_', '-')}" for k in required if out.get(k) in (None, "")]
    if missing:
        raise errors.BadConfig(f"missing required option(s): {', '.join(missing)}")
    return out


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_traces(data_dir: str) -> dict[str, Trace]:
    d = Path(data_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"data directory not found: {d}")
    files = sorted(d.glob("*.csv"))
    if not files:
        raise errors.EmptyInput(f"no trace CSV files in {d}")
    return {f.stem: load_trace_csv(f, scenario_id=f.stem) for f in files}


def _ids(text: str | None) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def _select(traces: dict[str, Trace], ids: list[str]) -> list[Trace]:
    missing = [k for k in ids if k not in traces]
    if missing:
        raise KeyError(f"scenarios not found in data directory: {missing}")
    return [traces[k] for k in ids]


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def cli() -> None:
    """Physics-informed LSTM temperature forecasting for battery abuse tests."""


# -- simulate ---------------------------------------------------------------

@cli.command()
@click.option("--catalog", type=click.Path(), default=None, help="Scenario catalog file (default: the 13 presets).")
@click.option("--out", "out", type=click.Path(), default=None, help="Output directory for trace CSVs.")
@click.option("--seed", type=int, default=0, show_default=True, help="Noise seed; scenario k uses seed*1000+k.")
@click.option("--noise", type=float, default=1.0, show_default=True, help="Multiplier on per-channel noise.")
@click.option("--config", type=click.Path(), default=None, help="Config file with option defaults.")
@click.pass_context
def simulate(ctx: click.Context, catalog, out, seed, noise, config) -> None:
    """Synthesize one trace CSV per scenario plus a manifest."""
    opts = _resolve(ctx, config, required=("out",))
    if opts["noise"] < 0:
        raise errors.BadConfig("--noise must be non-negative")
    if opts["catalog"]:
        if not Path(opts["catalog"]).is_file():
            raise FileNotFoundError(f"catalog not found: {opts['catalog']}")
        scenarios = [
            replace(s, seed=opts["seed"] * 1000 + k, noise_std={c: v * opts["noise"] for c, v in s.noise_std.items()})
            for k, s in enumerate(read_catalog(opts["catalog"]), start=1)
        ]
    else:
        scenarios = preset_catalog(noise_scale=opts["noise"], seed=opts["seed"])
    dest = _out_dir(opts["out"])
    entries = []
    for s in scenarios:
        p = law_params_for(s.mode)
        write_trace_csv(synthesize_trace(s, p), dest / f"{s.id}.csv")
        entries.append({"id": s.id, "file": f"{s.id}.csv", "mode": s.mode.value, "seed": s.seed,
                        "law_params_digest": digest(p.as_dict())})
    write_manifest(dest / "manifest.txt", entries, {"count": len(entries), "noise": opts["noise"], "seed": opts["seed"]})
    write_config(dest / "resolved_config.txt", opts, "simulate")
    click.echo(f"wrote {len(entries)} traces to {dest}")


# -- train ------------------------------------------------------------------

def _split_traces(traces: dict[str, Trace], opts: dict) -> tuple[list[str], list[str], list[str]]:
    holdout = _ids(opts["holdout"])
    if holdout:
        sp = holdout_split(list(traces), holdout, opts["val_frac"], opts["split_seed"])
        return sp.train_ids, sp.val_ids, sp.test_ids
    fr = opts["split"]
    spec = SplitSpec(fr[0], fr[1], fr[2], seed=opts["split_seed"])
    return split_ids(list(traces), spec)


@cli.command("train")
@click.option("--data", "data", type=click.Path(), default=None, help="Directory of trace CSVs.")
@click.option("--out", "out", type=click.Path(), default=None, help="Run directory.")
@click.option("--model", "model", type=click.Choice(["pi-lstm", "lstm", "mlp"]), default="pi-lstm", show_default=True)
@click.option("--lambda", "lambda_weight", type=float, default=0.1, show_default=True, help="Physics weight (pi-lstm only).")
@click.option("--alpha", "alpha_diff", type=float, default=0.1, show_default=True, help="Lumped diffusion coefficient.")
@click.option("--epochs", type=int, default=500, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--lr", type=float, default=1e-4, show_default=True)
@click.option("--patience", type=int, default=20, show_default=True)
@click.option("--hidden", type=int, default=32, show_default=True)
@click.option("--window", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Training seed (initialization, batch order).")
@click.option("--holdout", type=str, default=None, help="Comma-separated test scenarios, e.g. Batt-9,Batt-12.")
@click.option("--val-frac", type=float, default=0.2, show_default=True, help="Validation share with --holdout.")
@click.option("--split", type=(float, float, float), default=(0.7, 0.2, 0.1), show_default=True)
@click.option("--split-seed", type=int, default=42, show_default=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def train_cmd(ctx: click.Context, **_) -> None:
    """Split by scenario, fit normalization on train, train and save the checkpoint."""
    opts = _resolve(ctx, ctx.params["config"], required=("data", "out"))
    traces = _load_traces(opts["data"])
    tr_ids, va_ids, te_ids = _split_traces(traces, opts)
    norm = fit_normalization(_select(traces, tr_ids))
    n = opts["window"]
    tr = windows_from_traces(_select(traces, tr_ids), norm, n)
    va = windows_from_traces(_select(traces, va_ids), norm, n)
    check_no_leakage(tr, _ids(opts["holdout"]))
    dt = next(iter(traces.values())).dt_s
    cfg = TrainConfig(
        model_kind=opts["model"], epochs_max=opts["epochs"], batch_size=opts["batch_size"], lr=opts["lr"],
        patience=opts["patience"], seed=opts["seed"], lambda_weight=opts["lambda_weight"],
        alpha_diff=opts["alpha_diff"], dt_s=dt, hidden=opts["hidden"],
    )
    res = train(tr, va, cfg)
    dest = _out_dir(opts["out"])
    save_checkpoint(res.model, dest / "model.ckpt")
    write_training_log(res.log, dest / "training_log.csv")
    write_config(dest / "resolved_config.txt", opts, "train")
    (dest / "split.txt").write_text(
        "# pilstm-split v1\n" + "".join(f"{k} = {json.dumps(v)}\n" for k, v in
                                        (("train", tr_ids), ("val", va_ids), ("test", te_ids))),
        encoding="utf-8",
    )
    save_window_index(tr, dest / "train_index.csv")
    best = res.best
    click.echo(
        f"trained {opts['model']} for {len(res.log) - 1} epochs; best epoch {res.best_epoch} "
        f"(val total {best.val.total:.4e}, train data {best.train.data_loss:.4e}, phys {best.train.phys_loss:.4e})"
    )


def _read_split(run: Path) -> dict[str, list[str]]:
    path = run / "split.txt"
    if not path.is_file():
        raise errors.MissingArtifacts(f"run directory lacks split.txt: {run}")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        if "=" in line:
            k, _, v = line.partition("=")
            out[k.strip()] = json.loads(v)
    return out


def _run_data_dir(run: Path) -> str:
    path = run / "resolved_config.txt"
    if not path.is_file():
        raise errors.MissingArtifacts(f"run directory lacks resolved_config.txt: {run}")
    return dict(parse_lines(path.read_text(encoding="utf-8"), CONFIG_TAG, source=str(path)))["data"]


# -- evaluate ---------------------------------------------------------------

PREDICTIONS_HEADER = ("time_s", "actual_C", "predicted_C", "scenario")


@cli.command("evaluate")
@click.option("--run", "run", type=click.Path(), default=None, help="Run directory from `train` (uses its test split).")
@click.option("--checkpoint", type=click.Path(), default=None, help="Checkpoint file (instead of --run).")
@click.option("--data", "data", type=click.Path(), default=None, help="Trace directory (default: the run's).")
@click.option("--scenarios", type=str, default=None, help="Comma-separated scenarios to score.")
@click.option("--out", "out", type=click.Path(), default=None, help="Output directory (default: the run directory).")
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def evaluate_cmd(ctx: click.Context, **_) -> None:
    """Score a checkpoint: metrics.csv, metrics.txt and predictions.csv."""
    opts = _resolve(ctx, ctx.params["config"])
    if not opts["run"] and not opts["checkpoint"]:
        raise errors.BadConfig("give --run or --checkpoint")
    run = Path(opts["run"]) if opts["run"] else None
    if run is not None and not run.is_dir():
        raise FileNotFoundError(f"run directory not found: {run}")
    ckpt = Path(opts["checkpoint"]) if opts["checkpoint"] else run / "model.ckpt"
    model = load_checkpoint(ckpt)
    data = opts["data"] or (_run_data_dir(run) if run else None)
    if not data:
        raise errors.BadConfig("give --data with --checkpoint")
    traces = _load_traces(data)
    ids = _ids(opts["scenarios"]) or (_read_split(run)["test"] if run else sorted(traces))
    ds = windows_from_traces(_select(traces, ids), model.norm, model.n)
    report = evaluate(model, ds)
    dest = _out_dir(opts["out"] or str(run))
    write_metrics(report, dest / "metrics.csv")
    (dest / "metrics.txt").write_text(format_metrics(report) + "\n", encoding="utf-8")
    actual, pred = predictions_C(model, ds)
    with (dest / "predictions.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTIONS_HEADER)
        for t, a, p, s in zip(ds.target_times, actual, pred, ds.scenario_ids):
            w.writerow([fmt_float(t), fmt_float(a), fmt_float(p), s])
    click.echo(format_metrics(report))


# -- compare ----------------------------------------------------------------

@cli.command("compare")
@click.option("--checkpoint", "checkpoints", multiple=True, type=click.Path(), help="Checkpoint to compare (repeatable).")
@click.option("--name", "names", multiple=True, type=str, help="Display name per checkpoint (default: file stem).")
@click.option("--data", "data", type=click.Path(), default=None, help="Trace directory.")
@click.option("--scenarios", type=str, default=None, help="Scenarios to score (default: all).")
@click.option("--holdout", type=str, default=None, help="Train pi-lstm, lstm and mlp without these cells and score each.")
@click.option("--epochs", type=int, default=200, show_default=True, help="Epoch cap for --holdout training.")
@click.option("--lr", type=float, default=3e-3, show_default=True, help="Learning rate for --holdout training.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--split-seed", type=int, default=7, show_default=True)
@click.option("--out", "out", type=click.Path(), default=None, help="Output directory for comparison CSVs.")
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def compare_cmd(ctx: click.Context, **_) -> None:
    """Comparison table (Model, MAE, RMSE, R2) sorted by MAE."""
    opts = _resolve(ctx, ctx.params["config"], required=("data", "out"))
    traces = _load_traces(opts["data"])
    dest = _out_dir(opts["out"])
    holdout = _ids(opts["holdout"])
    if holdout:
        configs = {
            kind: TrainConfig(model_kind=kind, epochs_max=opts["epochs"], lr=opts["lr"], seed=opts["seed"],
                              dt_s=next(iter(traces.values())).dt_s)
            for kind in ("pi-lstm", "lstm", "mlp")
        }
        res = held_out_eval(traces, configs, holdout, split_seed=opts["split_seed"])
        for cell in res.split.test_ids:
            rows = compare_models({name: reps[cell] for name, reps in res.reports.items()})
            write_comparison(rows, dest / f"comparison_{cell}.csv")
            click.echo(f"{cell}\n{format_comparison(rows)}\n")
        for name, run in res.runs.items():
            save_checkpoint(run.model, dest / f"{name}.ckpt")
    else:
        if len(opts["checkpoints"]) < 2:
            raise errors.BadConfig("compare needs at least two --checkpoint files (or --holdout)")
        names = list(opts["names"]) or [Path(c).stem for c in opts["checkpoints"]]
        if len(names) != len(opts["checkpoints"]) or len(set(names)) != len(names):
            raise errors.BadConfig("give one distinct --name per --checkpoint")
        reports = {}
        for name, path in zip(names, opts["checkpoints"]):
            model = load_checkpoint(path)
            ids = _ids(opts["scenarios"]) or sorted(traces)
            reports[name] = evaluate(model, windows_from_traces(_select(traces, ids), model.norm, model.n))
        rows = compare_models(reports)
        write_comparison(rows, dest / "comparison.csv")
        click.echo(format_comparison(rows))
    write_config(dest / "resolved_config.txt", opts, "compare")


# -- warn -------------------------------------------------------------------

@cli.command("warn")
@click.option("--trace", "trace", type=click.Path(), default=None, help="Trace CSV.")
@click.option("--checkpoint", type=click.Path(), default=None, help="Checkpoint for predictive alarms.")
@click.option("--predict", is_flag=True, help="Add predictive level-3 events and a lead-time column.")
@click.option("--out", "out", type=click.Path(), default=None, help="Event CSV (default: stdout).")
@click.option("--collision-kn", type=float, default=0.5, show_default=True)
@click.option("--voltage-step", type=float, default=-0.5, show_default=True)
@click.option("--temperature", type=float, default=130.0, show_default=True)
@click.option("--horizon", type=int, default=30, show_default=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def warn_cmd(ctx: click.Context, **_) -> None:
    """Run the warning ladder; the exit status is the highest level fired."""
    opts = _resolve(ctx, ctx.params["config"], required=("trace",))
    if opts["predict"] and not opts["checkpoint"]:
        raise errors.BadConfig("--predict needs --checkpoint")
    trace = impute_forward_fill(load_trace_csv(opts["trace"]))
    th = WarnThresholds(collision_kN=opts["collision_kn"], voltage_step_V=opts["voltage_step"],
                        temperature_C=opts["temperature"], horizon=opts["horizon"])
    events = reactive_warn(trace, th)
    if opts["checkpoint"]:
        model = load_checkpoint(opts["checkpoint"])
        events = sorted(events + warn_predictive(model, trace, th), key=lambda e: (e.time_s, e.level, e.source))
    lead = bool(opts["predict"])
    if opts["out"]:
        write_events(events, opts["out"], lead_time=lead)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        for e in events:
            row = [e.level, fmt_float(e.time_s), fmt_float(e.trigger_value), e.cause.value, e.source]
            if lead:
                row.append("" if e.lead_time_s is None else fmt_float(e.lead_time_s))
            w.writerow(row)
        sys.stdout.flush()
    ctx.exit(max((e.level for e in events), default=0))


# -- report -----------------------------------------------------------------

@cli.command("report")
@click.option("--run", "run", type=click.Path(), required=True, help="Run directory.")
@click.option("--out", "out", type=click.Path(), default=None, help="Output directory (default: <run>/report).")
def report_cmd(run, out) -> None:
    """Plot-ready long-format CSVs: loss curves, actual vs predicted, warning timeline."""
    run = Path(run)
    log_path = run / "training_log.csv"
    if not log_path.is_file():
        raise errors.MissingArtifacts(f"no training log in {run}")
    dest = _out_dir(out or str(run / "report"))
    with (dest / "loss_curves.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "split", "component", "value"))
        for row in read_training_log(log_path):
            e = int(row["epoch"])
            for comp in ("data_loss", "phys_loss", "total"):
                w.writerow((e, "train", comp, fmt_float(row[comp])))
                w.writerow((e, "val", comp, fmt_float(row[f"val_{comp}"])))
    pred_path = run / "predictions.csv"
    if not pred_path.is_file():
        click.echo(f"warning: {run} has no evaluation (predictions.csv); wrote loss curves only", err=True)
        return
    rows = list(csv.DictReader(pred_path.open(newline="", encoding="utf-8")))
    with (dest / "actual_vs_predicted.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTIONS_HEADER)
        for r in rows:
            w.writerow([r[k] for k in PREDICTIONS_HEADER])
    traces = _load_traces(_run_data_dir(run))
    scenarios = sorted({r["scenario"] for r in rows})
    model_path = run / "model.ckpt"
    model = load_checkpoint(model_path) if model_path.is_file() else None
    with (dest / "warning_timeline.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "level", "time_s", "trigger_value", "cause", "source", "lead_time_s"))
        for sid in scenarios:
            events = reactive_warn(traces[sid])
            if model is not None:
                events += warn_predictive(model, traces[sid])
            for e in sorted(events, key=lambda e: (e.time_s, e.level, e.source)):
                w.writerow((sid, e.level, fmt_float(e.time_s), fmt_float(e.trigger_value), e.cause.value, e.source,
                            "" if e.lead_time_s is None else fmt_float(e.lead_time_s)))
    click.echo(f"wrote report CSVs to {dest}")


# -- benchmark --------------------------------------------------------------

@cli.command("benchmark")
@click.option("--out", "out", type=click.Path(), required=True)
@click.option("--seeds", type=str, default="0,1,2,3,4", show_default=True)
@click.option("--epochs", type=int, default=None, help="Override the benchmark epoch cap.")
def benchmark_cmd(out, seeds, epochs) -> None:
    """Run the seeded synthetic benchmark (three models, held-out Batt-9 and Batt-12)."""
    from pilstm.benchmark import BenchmarkConfig, run_benchmark, write_benchmark

    cfg = BenchmarkConfig(seeds=tuple(int(s) for s in _ids(seeds)))
    if epochs is not None:
        cfg = replace(cfg, epochs_max=epochs)
    res = run_benchmark(cfg, progress=click.echo)
    write_benchmark(res, out)
    for cell in cfg.holdout:
        med = {m: res.median_rmse(m, cell) for m in ("pi-lstm", "lstm", "mlp")}
        click.echo(f"{cell} median RMSE " + "  ".join(f"{m} {v:.3f}" for m, v in med.items()))
    click.echo(f"total {res.seconds:.0f} s")


def main(argv: list[str] | None = None) -> int:
    """Console entry point; maps exceptions to the documented exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="pilstm", standalone_mode=False)
        return int(rv or 0)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every failure becomes an exit code
        click.echo(f"error: {exc}", err=True)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
