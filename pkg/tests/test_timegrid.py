import numpy as np
import pytest

from derplan.timegrid import (
    KW,
    USD_PER_KWH,
    MONTH_DAYS,
    TimeGrid,
    TimeSeries,
    constant_series,
)


def test_delta_hours():
    assert TimeGrid(1, 8760).delta_hours == 1.0
    assert TimeGrid(2, 48).delta_hours == 0.5
    assert TimeGrid(4, 96).delta_hours == 0.25


def test_bad_grid_params():
    with pytest.raises(ValueError):
        TimeGrid(0, 24)
    with pytest.raises(ValueError):
        TimeGrid(3, 24)  # only 1, 2, 4 steps per hour supported
    with pytest.raises(ValueError):
        TimeGrid(1, 0)
    with pytest.raises(ValueError):
        TimeGrid(1, -5)


def test_hour_of_day_wraps():
    g = TimeGrid(1, 49)
    assert g.hour_of_day[0] == 0
    assert g.hour_of_day[23] == 23
    assert g.hour_of_day[24] == 0
    assert g.hour_of_day[48] == 0


def test_subhourly_hour_of_day():
    g = TimeGrid(4, 96)
    # four quarter-hour steps share each hour label
    assert list(g.hour_of_day[:8]) == [0, 0, 0, 0, 1, 1, 1, 1]


def test_month_boundaries_full_year():
    g = TimeGrid(1, 8760)
    counts = np.bincount(g.month_of_step, minlength=12)
    assert list(counts) == [d * 24 for d in MONTH_DAYS]
    # first step of February is hour 31*24
    assert g.month_of_step[31 * 24 - 1] == 0
    assert g.month_of_step[31 * 24] == 1
    assert g.month_of_step[-1] == 11


def test_weekday_anchor_is_monday():
    g = TimeGrid(1, 24 * 14)
    # days 0-4 weekdays, 5-6 weekend, repeating
    assert not g.is_weekend[0]          # Mon Jan 1
    assert not g.is_weekend[4 * 24]     # Fri Jan 5
    assert g.is_weekend[5 * 24]         # Sat Jan 6
    assert g.is_weekend[6 * 24]         # Sun Jan 7
    assert not g.is_weekend[7 * 24]     # Mon Jan 8


def test_series_length_checked():
    g = TimeGrid(1, 24)
    with pytest.raises(ValueError):
        TimeSeries(g, np.zeros(23), KW)


def test_series_unit_checked():
    g = TimeGrid(1, 24)
    with pytest.raises(ValueError):
        TimeSeries(g, np.zeros(24), "parsecs")


def test_series_immutable():
    g = TimeGrid(1, 24)
    ts = TimeSeries(g, np.arange(24.0), KW)
    with pytest.raises(ValueError):
        ts.values[0] = 99.0
    with pytest.raises(AttributeError):
        ts.unit = USD_PER_KWH


def test_series_equality_includes_unit():
    g = TimeGrid(1, 24)
    a = TimeSeries(g, np.ones(24), KW)
    b = TimeSeries(g, np.ones(24), KW)
    c = TimeSeries(g, np.ones(24), USD_PER_KWH)
    assert a == b
    assert a != c


def test_energy_integral_respects_step():
    g = TimeGrid(4, 96)
    ts = constant_series(g, 10.0, KW)
    # 10 kW for 24 hours
    assert ts.energy_kwh() == pytest.approx(240.0)


def test_energy_rejects_non_power():
    g = TimeGrid(1, 24)
    ts = constant_series(g, 1.0, USD_PER_KWH)
    with pytest.raises(ValueError):
        ts.energy_kwh()


def test_months_present_partial_horizon():
    g = TimeGrid(1, 24 * 40)  # Jan + some of Feb
    assert g.months_present() == [0, 1]
    assert len(g.steps_in_month(0)) == 31 * 24
    assert len(g.steps_in_month(1)) == 9 * 24
