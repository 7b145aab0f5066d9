"""Trace model, CSV ingestion, imputation, min-max scaling, windowing and splits.

The feature vector order is fixed to :data:`FEATURES` so that model weights
stay portable between runs: (SOC, speed, force, voltage, temperature,
short-circuit flag).  The short-circuit flag is carried as a 0/1 float.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from pilstm.errors import (
    ChannelMismatch,
    EmptyFile,
    EmptyInput,
    InsufficientGroups,
    LeadingMissing,
    MissingColumn,
    NonUniformSampling,
    TooShort,
)

FEATURES: tuple[str, ...] = (
    "soc_frac",
    "speed_mm_min",
    "force_kN",
    "voltage_V",
    "temperature_C",
    "short_circuit",
)
TEMPERATURE = FEATURES.index("temperature_C")

# Trace field -> CSV column.
DEFAULT_SCHEMA: dict[str, str] = {
    "time_s": "time_s",
    "soc_frac": "soc",
    "speed_mm_min": "speed_mm_min",
    "force_kN": "force_kN",
    "voltage_V": "voltage_V",
    "temperature_C": "temperature_C",
    "short_circuit": "short_circuit",
}

SAMPLING_RTOL = 1e-6


def fmt_float(x) -> str:
    """Shortest round-trip text form of a real number (numpy scalars included)."""
    return repr(float(x))


def _as_float(values) -> np.ndarray:
    return np.array(values, dtype=np.float64)


@dataclass
class Trace:
    """Synchronised abuse-test channels for one scenario.

    Missing cells are NaN until :func:`impute_forward_fill` is applied.
    ``dt_s`` is NaN for single-sample traces.
    """

    time_s: np.ndarray
    force_kN: np.ndarray
    voltage_V: np.ndarray
    temperature_C: np.ndarray
    soc_frac: np.ndarray
    speed_mm_min: np.ndarray
    short_circuit: np.ndarray
    dt_s: float = float("nan")
    scenario_id: str = ""

    def __post_init__(self) -> None:
        for name in ("time_s", *FEATURES):
            setattr(self, name, _as_float(getattr(self, name)))
        n = len(self.time_s)
        if n < 1:
            raise EmptyInput("trace must contain at least one sample")
        for name in FEATURES:
            if getattr(self, name).shape != (n,):
                raise ValueError(f"channel {name} has length {len(getattr(self, name))}, expected {n}")
        sc = self.short_circuit[np.isfinite(self.short_circuit)]
        if np.any(np.diff(sc) < 0):
            raise ValueError("short_circuit flag must be monotone within a trace")
        self.dt_s = float(self.dt_s)

    def __len__(self) -> int:
        return len(self.time_s)

    def channel(self, name: str) -> np.ndarray:
        if name not in FEATURES and name != "time_s":
            raise ChannelMismatch(f"unknown channel {name!r}")
        return getattr(self, name)

    def feature_matrix(self) -> np.ndarray:
        """Raw ``[rows, len(FEATURES)]`` matrix in canonical order."""
        return np.column_stack([getattr(self, name) for name in FEATURES])

    def head(self, rows: int) -> "Trace":
        """First ``rows`` samples (used to replay a trace causally)."""
        kw = {name: getattr(self, name)[:rows] for name in ("time_s", *FEATURES)}
        return Trace(dt_s=self.dt_s, scenario_id=self.scenario_id, **kw)

    def check_sampling(self) -> None:
        """Raise :class:`NonUniformSampling` unless samples are evenly spaced."""
        if len(self) < 2 or not np.isfinite(self.dt_s) or self.dt_s <= 0:
            raise NonUniformSampling(f"trace {self.scenario_id!r}: sample interval undefined")
        gaps = np.diff(self.time_s)
        if np.any(np.abs(gaps - self.dt_s) > SAMPLING_RTOL * self.dt_s):
            raise NonUniformSampling(f"trace {self.scenario_id!r}: non-uniform time stamps")


def load_trace_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    scenario_id: str | None = None,
) -> Trace:
    """Read one trace CSV; empty cells become NaN for later imputation."""
    path = Path(path)
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    cols: dict[str, np.ndarray] = {}
    for field_name in ("time_s", *FEATURES):
        col = schema.get(field_name, field_name)
        if col not in header:
            raise MissingColumn(f"{path}: missing column {col!r}")
        j = header.index(col)
        cols[field_name] = np.array(
            [float(r[j]) if j < len(r) and r[j].strip() else np.nan for r in rows]
        )
    t = cols["time_s"]
    if np.any(np.isnan(t)):
        raise NonUniformSampling(f"{path}: missing time stamps")
    dt = float(t[1] - t[0]) if len(t) > 1 else float("nan")
    trace = Trace(dt_s=dt, scenario_id=scenario_id if scenario_id is not None else path.stem, **cols)
    if len(trace) > 1:
        trace.check_sampling()
    return trace


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    path = Path(path)
    cols = list(DEFAULT_SCHEMA)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([DEFAULT_SCHEMA[c] for c in cols])
        data = [getattr(trace, c) for c in cols]
        for k in range(len(trace)):
            row = []
            for c, arr in zip(cols, data):
                v = arr[k]
                if np.isnan(v):
                    row.append("")
                elif c == "short_circuit":
                    row.append(str(int(v)))
                else:
                    row.append(fmt_float(v))
            w.writerow(row)


def impute_forward_fill(trace: Trace) -> Trace:
    """Replace each NaN by the latest preceding finite value of its channel."""
    filled = {}
    for name in FEATURES:
        x = getattr(trace, name)
        if np.isnan(x[0]):
            raise LeadingMissing(f"channel {name} starts with a missing value")
        idx = np.where(np.isnan(x), 0, np.arange(len(x)))
        np.maximum.accumulate(idx, out=idx)
        filled[name] = x[idx]
    return Trace(time_s=trace.time_s.copy(), dt_s=trace.dt_s, scenario_id=trace.scenario_id, **filled)


@dataclass(frozen=True)
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray
    channels: tuple[str, ...] = FEATURES

    def __post_init__(self) -> None:
        if self.mins.shape != self.maxs.shape or self.mins.shape != (len(self.channels),):
            raise ChannelMismatch("min/max vectors must match the channel list")
        if np.any(self.maxs < self.mins):
            raise ValueError("max must be >= min for every channel")

    @property
    def constant(self) -> np.ndarray:
        return self.maxs == self.mins

    @property
    def span(self) -> np.ndarray:
        return np.where(self.constant, 1.0, self.maxs - self.mins)

    def index(self, channel: str) -> int:
        return self.channels.index(channel)


def fit_normalization(traces: Sequence[Trace]) -> NormalizationParams:
    """Per-channel min/max over the union of ``traces`` (training data only)."""
    if not traces:
        raise EmptyInput("fit_normalization needs at least one trace")
    stacked = np.vstack([t.feature_matrix() for t in traces])
    finite = np.isfinite(stacked)
    if not np.all(finite.any(axis=0)):
        bad = [FEATURES[j] for j in np.flatnonzero(~finite.any(axis=0))]
        raise EmptyInput(f"channels without finite values: {bad}")
    return NormalizationParams(np.nanmin(stacked, axis=0), np.nanmax(stacked, axis=0))


def normalize_matrix(matrix: np.ndarray, params: NormalizationParams) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[-1] != len(params.channels):
        raise ChannelMismatch(f"matrix has {matrix.shape[-1]} channels, params have {len(params.channels)}")
    out = (matrix - params.mins) / params.span
    return np.where(params.constant, 0.0, out)


def normalize(trace: Trace, params: NormalizationParams) -> np.ndarray:
    """Min-max scale ``trace`` with previously fitted params.

    Values outside the fitted range are allowed to leave [0, 1].
    """
    if tuple(params.channels) != FEATURES:
        raise ChannelMismatch(f"params fitted on {params.channels}, trace has {FEATURES}")
    return normalize_matrix(trace.feature_matrix(), params)


def denormalize(matrix: np.ndarray, params: NormalizationParams) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[-1] != len(params.channels):
        raise ChannelMismatch("channel count differs from params")
    return np.where(params.constant, params.mins, matrix * params.span + params.mins)


def denormalize_channel(values, params: NormalizationParams, channel: str = "temperature_C") -> np.ndarray:
    j = params.index(channel)
    values = np.asarray(values, dtype=np.float64)
    if params.constant[j]:
        return np.full_like(values, params.mins[j])
    return values * (params.maxs[j] - params.mins[j]) + params.mins[j]


def normalize_channel(values, params: NormalizationParams, channel: str = "temperature_C") -> np.ndarray:
    j = params.index(channel)
    values = np.asarray(values, dtype=np.float64)
    if params.constant[j]:
        return np.zeros_like(values)
    return (values - params.mins[j]) / (params.maxs[j] - params.mins[j])


@dataclass
class WindowedDataset:
    """Fixed-length input windows with next-step targets.

    ``windows[i]`` covers source rows ``starts[i] .. starts[i]+n-1`` of trace
    ``scenario_ids[i]``; ``targets[i]`` is the target channel at row
    ``starts[i]+n``.
    """

    windows: np.ndarray
    targets: np.ndarray
    n: int
    params: NormalizationParams | None = None
    scenario_ids: np.ndarray = field(default_factory=lambda: np.array([], dtype=object))
    starts: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    target_times: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self) -> None:
        m = len(self.targets)
        if self.windows.ndim != 3 or self.windows.shape[0] != m or self.windows.shape[1] != self.n:
            raise ValueError(f"windows shape {self.windows.shape} inconsistent with {m} targets of length {self.n}")
        if len(self.scenario_ids) != m:
            self.scenario_ids = np.full(m, "", dtype=object)
        if len(self.starts) != m:
            self.starts = np.arange(m, dtype=np.int64)
        if len(self.target_times) != m:
            self.target_times = np.full(m, np.nan)

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def d(self) -> int:
        return self.windows.shape[2]

    def subset(self, index) -> "WindowedDataset":
        index = np.asarray(index)
        return WindowedDataset(
            windows=self.windows[index],
            targets=self.targets[index],
            n=self.n,
            params=self.params,
            scenario_ids=self.scenario_ids[index],
            starts=self.starts[index],
            target_times=self.target_times[index],
        )

    def for_scenarios(self, ids: Iterable[str]) -> "WindowedDataset":
        return self.subset(np.flatnonzero(np.isin(self.scenario_ids, list(ids))))

    def scenarios(self) -> list[str]:
        return sorted(set(self.scenario_ids.tolist()))

    @staticmethod
    def concat(parts: Sequence["WindowedDataset"]) -> "WindowedDataset":
        if not parts:
            raise EmptyInput("nothing to concatenate")
        n, d = parts[0].n, parts[0].d
        if any(p.n != n or p.d != d for p in parts):
            raise ChannelMismatch("window shapes differ between datasets")
        return WindowedDataset(
            windows=np.concatenate([p.windows for p in parts]),
            targets=np.concatenate([p.targets for p in parts]),
            n=n,
            params=parts[0].params,
            scenario_ids=np.concatenate([p.scenario_ids for p in parts]),
            starts=np.concatenate([p.starts for p in parts]),
            target_times=np.concatenate([p.target_times for p in parts]),
        )


def make_windows(
    matrix: np.ndarray,
    target_channel: int = TEMPERATURE,
    n: int = 50,
    *,
    scenario_id: str = "",
    times: np.ndarray | None = None,
    params: NormalizationParams | None = None,
) -> WindowedDataset:
    """Sliding windows of ``n`` rows; sample ``i`` targets row ``i + n``."""
    matrix = np.asarray(matrix, dtype=np.float64)
    rows = matrix.shape[0]
    if n < 1:
        raise ValueError("window length must be positive")
    if rows <= n:
        raise TooShort(f"{rows} rows cannot form a window of {n} plus a target")
    count = rows - n
    windows = np.lib.stride_tricks.sliding_window_view(matrix[: rows - 1], n, axis=0)
    windows = np.ascontiguousarray(windows.transpose(0, 2, 1))
    starts = np.arange(count, dtype=np.int64)
    return WindowedDataset(
        windows=windows,
        targets=matrix[n:, target_channel].copy(),
        n=n,
        params=params,
        scenario_ids=np.full(count, scenario_id, dtype=object),
        starts=starts,
        target_times=np.asarray(times, dtype=np.float64)[n:].copy() if times is not None else np.full(count, np.nan),
    )


def windows_from_traces(
    traces: Sequence[Trace], params: NormalizationParams, n: int = 50
) -> WindowedDataset:
    """Impute, check sampling, normalize and window every trace, then concatenate."""
    parts = []
    for tr in traces:
        tr = impute_forward_fill(tr)
        tr.check_sampling()
        parts.append(
            make_windows(normalize(tr, params), TEMPERATURE, n, scenario_id=tr.scenario_id, times=tr.time_s, params=params)
        )
    return WindowedDataset.concat(parts)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    val_frac: float = 0.2
    test_frac: float = 0.1
    seed: int = 42
    by_scenario: bool = True

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise ValueError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


def split_counts(total: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = int(round(spec.train_frac * total))
    n_val = int(round(spec.val_frac * total))
    n_train = min(max(n_train, 1), total - 2)
    n_val = min(max(n_val, 1), total - n_train - 1)
    return n_train, n_val, total - n_train - n_val


def split_ids(ids: Sequence[str], spec: SplitSpec) -> tuple[list[str], list[str], list[str]]:
    """Seeded partition of group ids into (train, val, test)."""
    ids = sorted(set(ids))
    if len(ids) < 3:
        raise InsufficientGroups(f"need at least 3 scenarios to split, got {len(ids)}")
    order = np.random.default_rng(spec.seed).permutation(len(ids))
    shuffled = [ids[k] for k in order]
    a, b, _ = split_counts(len(ids), spec)
    return sorted(shuffled[:a]), sorted(shuffled[a : a + b]), sorted(shuffled[a + b :])


def split(dataset: WindowedDataset, spec: SplitSpec) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset]:
    if spec.by_scenario:
        tr, va, te = split_ids(dataset.scenario_ids.tolist(), spec)
        return dataset.for_scenarios(tr), dataset.for_scenarios(va), dataset.for_scenarios(te)
    m = len(dataset)
    if m < 3:
        raise InsufficientGroups("need at least 3 samples to split")
    order = np.random.default_rng(spec.seed).permutation(m)
    a, b, _ = split_counts(m, spec)
    return (
        dataset.subset(np.sort(order[:a])),
        dataset.subset(np.sort(order[a : a + b])),
        dataset.subset(np.sort(order[a + b :])),
    )


WINDOW_INDEX_HEADER = ("sample", "scenario_id", "start", "target_time_s", "target")


def save_window_index(dataset: WindowedDataset, path: str | Path) -> None:
    """Write the flat per-sample index (windows are rebuilt from the source traces)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WINDOW_INDEX_HEADER)
        for i in range(len(dataset)):
            w.writerow([i, dataset.scenario_ids[i], int(dataset.starts[i]), fmt_float(dataset.target_times[i]), fmt_float(dataset.targets[i])])


def load_window_index(path: str | Path) -> list[tuple[str, int, float, float]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(r["scenario_id"], int(r["start"]), float(r["target_time_s"]), float(r["target"])) for r in reader]
