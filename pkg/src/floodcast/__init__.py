"""Surrogate modeling toolkit for coastal flood prediction.

Replaces hours-long hydrodynamic simulations with a lightweight attention
CNN that maps shoreline-protection scenarios and a sea-level-rise depth to
peak-water-level grids, plus the preprocessing, augmentation, training,
evaluation, uncertainty, and serving stack around it.
"""

from floodcast.core import (
    GridSpec,
    InundationPoint,
    InundationTable,
    ProtectionScenario,
    RegionSpec,
    Sample,
    ScenarioFormatError,
    decode_scenario,
    encode_scenario,
    load_fixture_scenarios,
)

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "InundationPoint",
    "InundationTable",
    "ProtectionScenario",
    "RegionSpec",
    "Sample",
    "ScenarioFormatError",
    "decode_scenario",
    "encode_scenario",
    "load_fixture_scenarios",
    "__version__",
]
