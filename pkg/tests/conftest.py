from __future__ import annotations

import numpy as np
import pytest

from pilstm.data import Trace


def make_trace(n: int = 80, *, dt: float = 0.2, scenario_id: str = "S", seed: int = 0, temp=None) -> Trace:
    rng = np.random.default_rng(seed)
    t = np.arange(n) * dt
    return Trace(
        time_s=t,
        force_kN=np.linspace(0.2, 4.0, n) + 0.01 * rng.standard_normal(n),
        voltage_V=np.full(n, 3.9) - 0.001 * np.arange(n),
        temperature_C=np.linspace(25.0, 60.0, n) if temp is None else np.asarray(temp, dtype=float),
        soc_frac=np.full(n, 0.5),
        speed_mm_min=np.full(n, 10.0),
        short_circuit=(np.arange(n) >= n // 2).astype(float),
        dt_s=dt,
        scenario_id=scenario_id,
    )


@pytest.fixture
def trace_factory():
    return make_trace


# --- acceptance summary ------------------------------------------------------

_ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE.setdefault(int(mark.args[0]), []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[n]
        ok = all(p for _, p in parts)
        failed = [name for name, p in parts if not p]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  [{len(parts)} checks]{tail}")
