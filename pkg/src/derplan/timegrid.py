"""Time discretization and unit-tagged series shared by every module.

All series live on a TimeGrid: ``horizon_steps`` intervals of ``delta_hours``
each, anchored at midnight January 1 of a non-leap year whose January 1 is a
Monday.  Billing months are calendar months of that year.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# unit tags carried by TimeSeries
KW = "kW"
KWH = "kWh"
USD_PER_KWH = "$/kWh"
FRACTION = "fraction"
KG_PER_KWH = "kg/kWh"

KNOWN_UNITS = frozenset({KW, KWH, USD_PER_KWH, FRACTION, KG_PER_KWH})

VALID_STEPS_PER_HOUR = (1, 2, 4)

MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
_MONTH_START_DAY = np.concatenate([[0], np.cumsum(MONTH_DAYS)])  # day index each month starts
HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class TimeGrid:
    """Uniform step grid: ``horizon_steps`` intervals of ``1/steps_per_hour`` hours."""

    steps_per_hour: int
    horizon_steps: int

    def __post_init__(self):
        if self.steps_per_hour not in VALID_STEPS_PER_HOUR:
            raise ValueError(
                f"steps_per_hour must be one of {VALID_STEPS_PER_HOUR}")
        if not isinstance(self.horizon_steps, int) or self.horizon_steps <= 0:
            raise ValueError("horizon_steps must be a positive integer")

    @property
    def delta_hours(self) -> float:
        return 1.0 / self.steps_per_hour

    @property
    def horizon_hours(self) -> float:
        return self.horizon_steps * self.delta_hours

    def whole_days(self) -> bool:
        return (self.horizon_steps % (24 * self.steps_per_hour)) == 0

    @cached_property
    def hour_of_year(self) -> np.ndarray:
        """Integer hour of year for each step (0..8759)."""
        hoy = np.arange(self.horizon_steps) // self.steps_per_hour
        hoy.flags.writeable = False
        return hoy

    @cached_property
    def hour_of_day(self) -> np.ndarray:
        arr = self.hour_of_year % 24
        arr.flags.writeable = False
        return arr

    @cached_property
    def day_of_year(self) -> np.ndarray:
        arr = self.hour_of_year // 24
        arr.flags.writeable = False
        return arr

    @cached_property
    def month_of_step(self) -> np.ndarray:
        """Calendar month index (0..11) of each step, non-leap year."""
        arr = np.searchsorted(_MONTH_START_DAY, self.day_of_year, side="right") - 1
        arr = np.minimum(arr, 11)
        arr.flags.writeable = False
        return arr

    @cached_property
    def is_weekend(self) -> np.ndarray:
        """Weekend mask per step; January 1 is a Monday."""
        arr = (self.day_of_year % 7) >= 5
        arr.flags.writeable = False
        return arr

    def months_present(self) -> list[int]:
        return sorted(set(int(m) for m in np.unique(self.month_of_step)))

    def steps_in_month(self, month: int) -> np.ndarray:
        return np.flatnonzero(self.month_of_step == month)


class TimeSeries:
    """Fixed-length array of per-step values with an immutable unit tag."""

    __slots__ = ("grid", "values", "unit")

    def __init__(self, grid: TimeGrid, values, unit: str):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != grid.horizon_steps:
            raise ValueError(
                f"series length {arr.shape[0] if arr.ndim == 1 else arr.shape} "
                f"does not match grid horizon {grid.horizon_steps}"
            )
        if unit not in KNOWN_UNITS:
            raise ValueError(f"unknown unit tag {unit!r}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", unit)

    def __setattr__(self, name, value):
        raise AttributeError("TimeSeries is immutable")

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.unit == other.unit
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid, self.unit, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"TimeSeries(n={len(self)}, unit={self.unit!r})"

    def energy_kwh(self) -> float:
        """Integral of a kW series over the horizon, in kWh."""
        if self.unit != KW:
            raise ValueError(f"energy_kwh needs a kW series, got {self.unit!r}")
        return float(self.values.sum() * self.grid.delta_hours)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.grid, values, self.unit)


def constant_series(grid: TimeGrid, value: float, unit: str) -> TimeSeries:
    return TimeSeries(grid, np.full(grid.horizon_steps, float(value)), unit)
