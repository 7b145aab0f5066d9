"""Abuse-test scenarios, the 13-cell preset catalog and its text format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from pilstm.errors import BadCatalog
from pilstm.sim.laws import LawParams

CELL_HEIGHT_MM = 65.0


class Mode(str, Enum):
    CYL_INDENT = "CylIndent"
    SPH_INDENT = "SphIndent"
    RADIAL = "RadialCompress"
    AXIAL = "AxialCompress"
    NAIL = "NailPenetration"

    @property
    def localized(self) -> bool:
        """Indenter modes whose response depends on axial position and radius."""
        return self in (Mode.CYL_INDENT, Mode.SPH_INDENT, Mode.NAIL)


DEFAULT_NOISE: dict[str, float] = {
    "force_kN": 0.02,
    "voltage_V": 0.005,
    "temperature_C": 0.5,
}


@dataclass(frozen=True)
class AbuseScenario:
    id: str
    mode: Mode
    soc_frac: float
    velocity_mm_min: float
    depth_mm: float
    radius_mm: float
    position_mm: float | None = None
    duration_s: float = 60.0
    dt_s: float = 0.2
    noise_std: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE))
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0.0 <= self.soc_frac <= 1.0:
            raise ValueError(f"{self.id}: soc_frac must lie in [0, 1]")
        for name in ("velocity_mm_min", "depth_mm", "radius_mm", "duration_s", "dt_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{self.id}: {name} must be positive")
        if self.position_mm is not None and self.position_mm < 0:
            raise ValueError(f"{self.id}: position_mm must be non-negative")
        if any(v < 0 for v in self.noise_std.values()):
            raise ValueError(f"{self.id}: noise standard deviations must be non-negative")

    @property
    def x_star(self) -> float:
        """Normalized axial distance from mid-height (0 for compression modes)."""
        if self.position_mm is None or not self.mode.localized:
            return 0.0
        half = CELL_HEIGHT_MM / 2
        return abs(self.position_mm - half) / half

    def with_noise(self, scale: float) -> "AbuseScenario":
        return replace(self, noise_std={k: v * scale for k, v in DEFAULT_NOISE.items()})


# Per-mode coefficients.  None of these are measured values; they are chosen
# so the synthetic traces respect the observed ranges (force <= 10 kN,
# 2.5-4.2 V, 25-140 C outside nail penetration, > 350 C under needling).
MODE_LAWS: dict[Mode, LawParams] = {
    Mode.CYL_INDENT: LawParams(alpha_W=7.5, dV_per_soc=1.6),
    Mode.SPH_INDENT: LawParams(F_max=4.2, F0=4.2, alpha_W=9.0, dV_per_soc=1.6),
    Mode.RADIAL: LawParams(
        F_max=7.0, F0=7.0, v0=2.0, t0_s=60.0, C_s=10.0, a_u=30.0, b_u=0.0, c_u=0.0,
        alpha_W=9.5, k_soc=20.0, dV_per_soc=1.5, rise_s=30.0, tau_soften_s=8.0,
    ),
    Mode.AXIAL: LawParams(
        F_max=10.0, F0=10.0, t0_s=40.0, C_s=5.0, a_u=9.0, b_u=0.0, c_u=0.0,
        alpha_W=3.05, k_soc=20.0, dV_per_soc=2.0, rise_s=20.0, tau_soften_s=6.0,
    ),
    Mode.NAIL: LawParams(
        F_max=1.5, F0=1.5, lambda_pos=0.3, v0=20.0, t0_s=14.0, C_s=1.0, lambda_pos_t=0.3,
        lambda_r=-0.02, r_ref_mm=2.5, a_u=6.0, b_u=0.0, c_u=0.0, t_collapse_base=20.0,
        beta_r=0.5, alpha_W=5.0, k_soc=480.0, dV_per_soc=3.0, rise_s=6.0, tau_soften_s=1.5,
    ),
}

PRESET_DURATION_S: dict[Mode, float] = {
    Mode.CYL_INDENT: 60.0,
    Mode.SPH_INDENT: 60.0,
    Mode.RADIAL: 120.0,
    Mode.AXIAL: 80.0,
    Mode.NAIL: 40.0,
}


def law_params_for(mode: Mode | str, overrides: Mapping[Mode, Mapping[str, object]] | None = None) -> LawParams:
    mode = Mode(mode)
    p = MODE_LAWS[mode]
    if overrides and mode in overrides:
        p = replace(p, **dict(overrides[mode]))
    return p


# (id, mode, soc, velocity mm/min, depth mm, position mm or None, radius mm)
_TABLE = [
    ("Batt-1", Mode.CYL_INDENT, 0.7, 10, 13, 30, 5),
    ("Batt-2", Mode.CYL_INDENT, 1.0, 10, 13, 30, 5),
    ("Batt-3", Mode.CYL_INDENT, 0.4, 20, 13, 30, 5),
    ("Batt-4", Mode.CYL_INDENT, 0.2, 10, 13, 10, 5),
    ("Batt-5", Mode.CYL_INDENT, 0.2, 10, 13, 55, 10),
    ("Batt-6", Mode.CYL_INDENT, 0.3, 10, 13, 30, 5),  # indenter tilted 45 deg
    ("Batt-7", Mode.SPH_INDENT, 0.5, 10, 13, 30, 5),
    ("Batt-8", Mode.RADIAL, 0.2, 2, 15, None, 100),
    ("Batt-9", Mode.AXIAL, 0.5, 10, 20, None, 100),
    ("Batt-10", Mode.NAIL, 0.4, 20, 13, 10, 2.5),
    ("Batt-11", Mode.NAIL, 0.4, 20, 13, 55, 2.5),
    ("Batt-12", Mode.NAIL, 0.4, 20, 16, 30, 2.5),
    ("Batt-13", Mode.NAIL, 0.3, 20, 13, 30, 2.5),
]


def preset_catalog(noise_scale: float = 1.0, seed: int = 0, dt_s: float = 0.2) -> list[AbuseScenario]:
    """The thirteen test cells; scenario ``k`` gets seed ``seed * 1000 + k``."""
    out = []
    for k, (sid, mode, soc, v, depth, pos, r) in enumerate(_TABLE, start=1):
        out.append(
            AbuseScenario(
                id=sid, mode=mode, soc_frac=soc, velocity_mm_min=float(v), depth_mm=float(depth),
                radius_mm=float(r), position_mm=None if pos is None else float(pos),
                duration_s=PRESET_DURATION_S[mode], dt_s=dt_s,
                noise_std={c: s * noise_scale for c, s in DEFAULT_NOISE.items()},
                seed=seed * 1000 + k,
            )
        )
    return out


def preset(scenario_id: str, **kw) -> AbuseScenario:
    for s in preset_catalog(**kw):
        if s.id == scenario_id:
            return s
    raise KeyError(scenario_id)


CATALOG_FIELDS = (
    "id", "mode", "soc_frac", "velocity_mm_min", "depth_mm", "position_mm", "radius_mm",
    "duration_s", "dt_s", "seed", "noise_force_kN", "noise_voltage_V", "noise_temperature_C",
)
CATALOG_TAG = "# pilstm-catalog v1"


def write_catalog(scenarios: Iterable[AbuseScenario], path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CATALOG_FIELDS)
    for s in scenarios:
        w.writerow([
            s.id, s.mode.value, s.soc_frac, s.velocity_mm_min, s.depth_mm,
            "" if s.position_mm is None else s.position_mm, s.radius_mm, s.duration_s, s.dt_s, s.seed,
            s.noise_std.get("force_kN", 0.0), s.noise_std.get("voltage_V", 0.0), s.noise_std.get("temperature_C", 0.0),
        ])
    Path(path).write_text(CATALOG_TAG + "\n" + buf.getvalue(), encoding="utf-8")


def read_catalog(path: str | Path) -> list[AbuseScenario]:
    """Parse a catalog file: a format-tag line, a CSV header, one scenario per row."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        return []
    reader = csv.DictReader(body)
    missing = {"id", "mode", "soc_frac", "velocity_mm_min", "depth_mm", "radius_mm"} - set(reader.fieldnames or ())
    if missing:
        raise BadCatalog(f"{path}: missing fields {sorted(missing)}")
    unknown = set(reader.fieldnames or ()) - set(CATALOG_FIELDS)
    if unknown:
        raise BadCatalog(f"{path}: unknown fields {sorted(unknown)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            mode = Mode(row["mode"])
            noise = {
                c: float(row.get(f"noise_{c}") or DEFAULT_NOISE[c]) for c in DEFAULT_NOISE
            }
            out.append(
                AbuseScenario(
                    id=row["id"], mode=mode, soc_frac=float(row["soc_frac"]),
                    velocity_mm_min=float(row["velocity_mm_min"]), depth_mm=float(row["depth_mm"]),
                    radius_mm=float(row["radius_mm"]),
                    position_mm=float(row["position_mm"]) if row.get("position_mm") else None,
                    duration_s=float(row.get("duration_s") or PRESET_DURATION_S[mode]),
                    dt_s=float(row.get("dt_s") or 0.2),
                    noise_std=noise, seed=int(row.get("seed") or 0),
                )
            )
        except (ValueError, TypeError) as exc:
            raise BadCatalog(f"{path}: record {lineno}: {exc}") from exc
    ids = [s.id for s in out]
    if len(set(ids)) != len(ids):
        raise BadCatalog(f"{path}: duplicate scenario ids")
    return out
