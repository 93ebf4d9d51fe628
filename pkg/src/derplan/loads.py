"""Electric load profile construction.

Loads come from built-in normalized reference shapes (scaled to annual or
monthly energy targets), a user-supplied series, or a weighted blend of
reference shapes.  Real metered data can be dropped in as a CSV fixture
(one kW value per line) and passed through UserSeries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timegrid import KW, TimeGrid, TimeSeries

REFERENCE = "reference"
REFERENCE_SCALED = "reference_scaled"
USER_SERIES = "user_series"
HYBRID = "hybrid"


class UnknownBuildingType(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class FractionOutOfRange(ValueError):
    pass


# Hour-of-day base shapes in kW: (weekday, weekend).  These are synthetic
# stand-ins for typical commercial profiles, not measured data.
_OFFICE_WEEKDAY = [
    28, 26, 25, 25, 26, 32, 48, 72, 90, 97, 100, 96,
    88, 94, 98, 95, 88, 74, 56, 44, 38, 34, 31, 29,
]
_OFFICE_WEEKEND = [
    26, 25, 24, 24, 24, 26, 30, 34, 38, 41, 43, 43,
    42, 41, 40, 38, 36, 33, 31, 29, 28, 27, 26, 26,
]
_RETAIL_WEEKDAY = [
    18, 16, 15, 15, 16, 20, 28, 40, 52, 60, 64, 66,
    66, 65, 64, 62, 60, 58, 54, 46, 36, 28, 22, 19,
]
_RETAIL_WEEKEND = [
    18, 16, 15, 15, 16, 22, 32, 46, 58, 66, 70, 72,
    72, 70, 68, 66, 62, 58, 52, 44, 34, 26, 21, 18,
]

_SHAPES = {
    "flat": (np.full(24, 10.0), np.full(24, 10.0)),
    "office": (np.array(_OFFICE_WEEKDAY, dtype=float),
               np.array(_OFFICE_WEEKEND, dtype=float)),
    "retail": (np.array(_RETAIL_WEEKDAY, dtype=float),
               np.array(_RETAIL_WEEKEND, dtype=float)),
}

BUILDING_TYPES = tuple(sorted(_SHAPES))


@dataclass(frozen=True)
class LoadSpec:
    """How to construct the site load and its critical fraction.

    Exactly the fields relevant to ``mode`` are consulted; ``city`` is a
    label only (no climate lookup).  ``critical_series`` overrides
    ``critical_fraction`` when present.
    """

    mode: str = REFERENCE
    building_type: str = "flat"
    city: str = ""
    annual_kwh: float | None = None
    monthly_kwh: tuple | None = None
    series: TimeSeries | None = None
    components: tuple = ()          # Hybrid: ((building_type, weight), ...)
    critical_fraction: float = 0.5
    critical_series: TimeSeries | None = None

    def __post_init__(self):
        # invariants are reported by scenario validation, not raised here
        if self.mode not in (REFERENCE, REFERENCE_SCALED, USER_SERIES, HYBRID):
            raise ValueError(f"unknown load mode {self.mode!r}")
        if self.monthly_kwh is not None:
            object.__setattr__(self, "monthly_kwh",
                               tuple(float(x) for x in self.monthly_kwh))
        if self.components:
            object.__setattr__(self, "components",
                               tuple((str(b), float(w)) for b, w in self.components))


def reference_shape(building_type: str, grid: TimeGrid) -> np.ndarray:
    """Expand a built-in hour-of-day shape onto the grid, in kW."""
    try:
        weekday, weekend = _SHAPES[building_type]
    except KeyError:
        raise UnknownBuildingType(
            f"unknown building type {building_type!r}; "
            f"known: {', '.join(BUILDING_TYPES)}") from None
    hod = grid.hour_of_day
    return np.where(grid.is_weekend, weekend[hod], weekday[hod])


def _scaled_to_annual(vals: np.ndarray, grid: TimeGrid, annual_kwh: float) -> np.ndarray:
    energy = vals.sum() * grid.delta_hours
    if energy <= 0:
        raise ValueError("shape has zero energy; cannot scale")
    return vals * (annual_kwh / energy)


def _scaled_to_monthly(vals: np.ndarray, grid: TimeGrid, monthly_kwh) -> np.ndarray:
    out = vals.copy()
    for m in grid.months_present():
        steps = grid.steps_in_month(m)
        energy = vals[steps].sum() * grid.delta_hours
        if energy <= 0:
            raise ValueError(f"shape has zero energy in month {m + 1}")
        out[steps] = vals[steps] * (monthly_kwh[m] / energy)
    return out


def build_load(spec: LoadSpec, grid: TimeGrid) -> TimeSeries:
    if spec.mode == USER_SERIES:
        if spec.series is None:
            raise ValueError("user_series mode needs a series")
        if spec.series.grid != grid:
            raise LengthMismatch(
                f"user series has {len(spec.series)} steps, grid has "
                f"{grid.horizon_steps}")
        if spec.series.unit != KW:
            raise ValueError("load series must be tagged kW")
        return spec.series

    if spec.mode == REFERENCE:
        return TimeSeries(grid, reference_shape(spec.building_type, grid), KW)

    if spec.mode == REFERENCE_SCALED:
        vals = reference_shape(spec.building_type, grid)
        if spec.monthly_kwh is not None:
            vals = _scaled_to_monthly(vals, grid, spec.monthly_kwh)
        elif spec.annual_kwh is not None:
            vals = _scaled_to_annual(vals, grid, spec.annual_kwh)
        else:
            raise ValueError("reference_scaled needs annual_kwh or monthly_kwh")
        return TimeSeries(grid, vals, KW)

    # hybrid: blend unit-energy-normalized shapes, then scale
    if not spec.components:
        raise ValueError("hybrid mode needs components")
    weights = [w for _, w in spec.components]
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("hybrid weights must be >= 0 and sum to 1")
    blend = np.zeros(grid.horizon_steps)
    native = 0.0
    for building_type, weight in spec.components:
        vals = reference_shape(building_type, grid)
        energy = vals.sum() * grid.delta_hours
        blend += weight * vals / energy
        native += weight * energy
    target = spec.annual_kwh if spec.annual_kwh is not None else native
    return TimeSeries(grid, blend * target, KW)


def critical_load(load: TimeSeries, spec: LoadSpec) -> TimeSeries:
    """Portion of load that must be served during an outage."""
    if spec.critical_series is not None:
        s = spec.critical_series
        if s.grid != load.grid:
            raise LengthMismatch("critical series is on a different grid")
        if s.unit != KW:
            raise ValueError("critical series must be tagged kW")
        return s
    if not 0.0 <= spec.critical_fraction <= 1.0:
        raise FractionOutOfRange(
            f"critical_fraction {spec.critical_fraction} outside [0, 1]")
    return load.with_values(load.values * spec.critical_fraction)


def load_fixture_csv(path, grid: TimeGrid) -> TimeSeries:
    """Read a kW-per-line CSV into a series on ``grid``."""
    vals = np.loadtxt(path, dtype=float, ndmin=1)
    if vals.shape[0] != grid.horizon_steps:
        raise LengthMismatch(
            f"fixture has {vals.shape[0]} rows, grid has {grid.horizon_steps}")
    return TimeSeries(grid, vals, KW)
