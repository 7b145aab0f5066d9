"""Synthetic abuse-test generator built from phenomenological response laws."""

from pilstm.sim.laws import LawParams
from pilstm.sim.scenarios import AbuseScenario, Mode, preset, preset_catalog, read_catalog, write_catalog
from pilstm.sim.synth import ScenarioResponse, scenario_response, synthesize_trace

__all__ = [
    "AbuseScenario",
    "LawParams",
    "Mode",
    "ScenarioResponse",
    "preset",
    "preset_catalog",
    "read_catalog",
    "scenario_response",
    "synthesize_trace",
    "write_catalog",
]
