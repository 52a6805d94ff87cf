"""Domain types, scenario string codec, and fixture scenario loaders.

A protection scenario is a binary vector over the region's operational
landscape units (OLUs, 1 = seawall built) paired with a sea-level-rise
depth in meters. Scenarios are serialized as ``<bits>_<slr>`` strings,
e.g. ``10101010101010101_0.5``, which also name the raw simulator files.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources

import numpy as np

EARTH_RADIUS_KM = 6367.0

_SLR_RE = re.compile(r"\d+(\.\d+)?")


class ScenarioFormatError(ValueError):
    """Scenario string does not match the ``[01]+_<decimal>`` convention."""

    def __init__(self, name: str, position: int, reason: str):
        self.position = position
        super().__init__(f"invalid scenario string {name!r} at position {position}: {reason}")


class ScenarioLengthError(ValueError):
    """Scenario bit vector has the wrong length for the region."""


class FixtureError(RuntimeError):
    """A packaged scenario fixture is missing or unreadable."""


@dataclass(frozen=True)
class ProtectionScenario:
    """Binary protection vector over OLUs plus an SLR depth in meters."""

    bits: tuple[int, ...]
    slr_m: float

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if not self.bits:
            raise ValueError("scenario needs at least one OLU bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("scenario bits must be 0 or 1")
        if not math.isfinite(self.slr_m) or self.slr_m < 0:
            raise ValueError(f"slr_m must be finite and >= 0, got {self.slr_m}")

    @property
    def olu_count(self) -> int:
        return len(self.bits)

    def protected_indices(self) -> tuple[int, ...]:
        """0-based indices of protected OLUs."""
        return tuple(i for i, b in enumerate(self.bits) if b == 1)

    def unprotected_indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b == 0)


@dataclass(frozen=True)
class InundationPoint:
    """One simulator output point: location plus peak water level (m)."""

    x: float
    y: float
    pwl: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("inundation point coordinates must be finite")
        if not math.isfinite(self.pwl) or self.pwl < 0:
            raise ValueError(f"pwl must be finite and >= 0, got {self.pwl}")


@dataclass(frozen=True)
class InundationTable:
    """Raw simulator output for one scenario."""

    scenario: ProtectionScenario
    points: tuple[InundationPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class RegionSpec:
    """OLU boundary geometry for one study region.

    Boundaries are polylines of (lat, lon) pairs in degrees, indexed in
    OLU order (bit k of a scenario refers to olu_boundaries[k]).
    """

    name: str
    olu_boundaries: tuple[tuple[tuple[float, float], ...], ...]
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        frozen = tuple(tuple((float(a), float(b)) for a, b in poly) for poly in self.olu_boundaries)
        object.__setattr__(self, "olu_boundaries", frozen)
        if not self.olu_boundaries:
            raise ValueError("region needs at least one OLU boundary")
        if any(len(poly) == 0 for poly in self.olu_boundaries):
            raise ValueError("every OLU boundary needs at least one vertex")
        if self.earth_radius_km != EARTH_RADIUS_KM:
            raise ValueError(f"earth_radius_km is fixed at {EARTH_RADIUS_KM}")

    @property
    def olu_count(self) -> int:
        return len(self.olu_boundaries)


@dataclass(frozen=True)
class GridSpec:
    """The n x n rasterization frame over a region's spatial extent."""

    n: int = 1024
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid resolution must be >= 2, got {self.n}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid bounds must have positive extent")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            n=int(d["n"]),
            x_min=float(d["x_min"]),
            x_max=float(d["x_max"]),
            y_min=float(d["y_min"]),
            y_max=float(d["y_max"]),
        )


@dataclass
class Sample:
    """One training pair: protection-context grid, SLR, and PWL grid.

    input_grid values are in {-1, 0, +1}. Freshly preprocessed samples
    satisfy support(output) subset-of support(input) -- see
    sample_support_ok; cutout augmentation breaks that pairing on purpose,
    so it is not enforced here.
    """

    input_grid: np.ndarray
    slr_m: float
    output_grid: np.ndarray
    scenario_id: str = ""

    def __post_init__(self):
        self.input_grid = np.asarray(self.input_grid, dtype=np.float32)
        self.output_grid = np.asarray(self.output_grid, dtype=np.float32)
        if self.input_grid.shape != self.output_grid.shape or self.input_grid.ndim != 2:
            raise ValueError("input and output grids must be equal-shape 2-D arrays")
        values = np.unique(self.input_grid)
        if not np.isin(values, (-1.0, 0.0, 1.0)).all():
            raise ValueError("input grid values must be in {-1, 0, +1}")
        if (self.output_grid < 0).any():
            raise ValueError("output grid (PWL) must be nonnegative")


def sample_support_ok(sample: Sample) -> bool:
    """True when every nonzero output cell has a nonzero input cell."""
    return bool((sample.output_grid[sample.input_grid == 0] == 0).all())


def _format_slr(slr_m: float) -> str:
    """Shortest decimal form with at least one fractional digit.

    Values whose repr needs scientific notation are expanded exactly via
    Decimal, so encode/decode round-trips for any nonnegative float.
    """
    text = repr(float(slr_m))
    if "e" in text or "E" in text:
        text = format(Decimal(text), "f")
    if "." not in text:
        text += ".0"
    return text


def encode_scenario(scenario: ProtectionScenario) -> str:
    """Serialize a scenario to its ``<bits>_<slr>`` string."""
    bits = "".join(str(b) for b in scenario.bits)
    return f"{bits}_{_format_slr(scenario.slr_m)}"


def decode_scenario(name: str, olu_count: int) -> ProtectionScenario:
    """Parse a ``<bits>_<slr>`` string into a scenario.

    Raises ScenarioFormatError (with the offending character position) on
    malformed input and ScenarioLengthError when the bit count does not
    match olu_count.
    """
    sep = name.find("_")
    if sep < 0:
        raise ScenarioFormatError(name, len(name), "missing '_' separator")
    bits_part, slr_part = name[:sep], name[sep + 1 :]
    for pos, ch in enumerate(bits_part):
        if ch not in "01":
            raise ScenarioFormatError(name, pos, f"expected '0' or '1', found {ch!r}")
    if len(bits_part) != olu_count:
        raise ScenarioLengthError(
            f"scenario {name!r} has {len(bits_part)} bits, expected {olu_count}"
        )
    match = _SLR_RE.fullmatch(slr_part)
    if match is None:
        partial = _SLR_RE.match(slr_part)
        bad = sep + 1 + (partial.end() if partial else 0)
        found = name[bad] if bad < len(name) else "end of string"
        raise ScenarioFormatError(name, bad, f"invalid SLR literal, found {found!r}")
    return ProtectionScenario(bits=tuple(int(c) for c in bits_part), slr_m=float(slr_part))


# set name -> (fixture file, OLU count, canonical SLR depth in meters)
_FIXTURE_SETS = {
    "ad_holdout": ("ad_holdout.txt", 17, 0.5),
    "sf_holdout": ("sf_holdout.txt", 30, 1.0),
    "sf_generalizability": ("sf_generalizability.txt", 30, 0.5),
}


def load_fixture_scenarios(set_name: str, slr_m: float | None = None) -> list[ProtectionScenario]:
    """Load one of the packaged scenario sets.

    slr_m overrides the set's canonical depth (0.5 m for ad_holdout and
    sf_generalizability, 1.0 m for sf_holdout).
    """
    try:
        fname, olu_count, default_slr = _FIXTURE_SETS[set_name]
    except KeyError:
        raise ValueError(
            f"unknown fixture set {set_name!r}; valid: {sorted(_FIXTURE_SETS)}"
        ) from None
    depth = default_slr if slr_m is None else float(slr_m)
    try:
        text = resources.files("floodcast.fixtures").joinpath(fname).read_text()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise FixtureError(f"fixture file {fname!r} is not installed: {exc}") from exc
    scenarios = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        bits = decode_scenario(f"{line}_{_format_slr(depth)}", olu_count).bits
        scenarios.append(ProtectionScenario(bits=bits, slr_m=depth))
    if not scenarios:
        raise FixtureError(f"fixture file {fname!r} contains no scenarios")
    return scenarios
