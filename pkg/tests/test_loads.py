import numpy as np
import pytest

from derplan.loads import (
    HYBRID,
    REFERENCE,
    REFERENCE_SCALED,
    USER_SERIES,
    FractionOutOfRange,
    LengthMismatch,
    LoadSpec,
    UnknownBuildingType,
    build_load,
    critical_load,
    load_fixture_csv,
    reference_shape,
)
from derplan.timegrid import KW, TimeGrid, TimeSeries


def test_user_series_identity():
    g = TimeGrid(1, 24)
    s = TimeSeries(g, np.ones(24), KW)
    out = build_load(LoadSpec(mode=USER_SERIES, series=s), g)
    assert out == s


def test_user_series_length_mismatch():
    g = TimeGrid(1, 24)
    s = TimeSeries(TimeGrid(1, 48), np.ones(48), KW)
    with pytest.raises(LengthMismatch):
        build_load(LoadSpec(mode=USER_SERIES, series=s), g)


def test_reference_scaled_flat_unit_average():
    g = TimeGrid(1, 8760)
    spec = LoadSpec(mode=REFERENCE_SCALED, building_type="flat", annual_kwh=8760.0)
    out = build_load(spec, g)
    assert np.allclose(out.values, 1.0)


def test_reference_scaled_hits_annual_target():
    g = TimeGrid(4, 4 * 8760)
    spec = LoadSpec(mode=REFERENCE_SCALED, building_type="office",
                    annual_kwh=123456.0)
    out = build_load(spec, g)
    assert out.energy_kwh() == pytest.approx(123456.0, rel=1e-9)


def test_reference_scaled_homogeneous():
    g = TimeGrid(1, 168)
    a = build_load(LoadSpec(mode=REFERENCE_SCALED, building_type="retail",
                            annual_kwh=1000.0), g)
    b = build_load(LoadSpec(mode=REFERENCE_SCALED, building_type="retail",
                            annual_kwh=3000.0), g)
    assert np.allclose(b.values, 3.0 * a.values)


def test_reference_scaled_monthly_targets():
    g = TimeGrid(1, 8760)
    monthly = tuple(float(100 * (m + 1)) for m in range(12))
    spec = LoadSpec(mode=REFERENCE_SCALED, building_type="office",
                    monthly_kwh=monthly)
    out = build_load(spec, g)
    for m in range(12):
        steps = g.steps_in_month(m)
        assert out.values[steps].sum() * g.delta_hours == pytest.approx(
            monthly[m], rel=1e-9)


def test_hybrid_is_weighted_average_of_normalized():
    g = TimeGrid(1, 168)
    a = reference_shape("office", g)
    b = reference_shape("retail", g)
    na = a / (a.sum() * g.delta_hours)
    nb = b / (b.sum() * g.delta_hours)
    spec = LoadSpec(mode=HYBRID, components=(("office", 0.5), ("retail", 0.5)),
                    annual_kwh=1.0)
    out = build_load(spec, g)
    assert np.allclose(out.values, 0.5 * na + 0.5 * nb)


def test_hybrid_weights_validated():
    g = TimeGrid(1, 24)
    with pytest.raises(ValueError):
        build_load(LoadSpec(mode=HYBRID,
                            components=(("office", 0.7), ("retail", 0.7))), g)
    with pytest.raises(ValueError):
        build_load(LoadSpec(mode=HYBRID,
                            components=(("office", -0.5), ("retail", 1.5))), g)


def test_unknown_building_type():
    g = TimeGrid(1, 24)
    with pytest.raises(UnknownBuildingType):
        build_load(LoadSpec(mode=REFERENCE, building_type="casino"), g)


def test_office_shape_is_daytime_heavy():
    g = TimeGrid(1, 24)
    out = build_load(LoadSpec(mode=REFERENCE, building_type="office"), g)
    assert out.values[10] > 2 * out.values[3]


def test_critical_fraction_pointwise():
    g = TimeGrid(1, 3)
    load = TimeSeries(g, [2.0, 4.0, 6.0], KW)
    out = critical_load(load, LoadSpec(critical_fraction=0.5))
    assert list(out.values) == [1.0, 2.0, 3.0]


def test_critical_fraction_zero():
    g = TimeGrid(1, 3)
    load = TimeSeries(g, [2.0, 4.0, 6.0], KW)
    out = critical_load(load, LoadSpec(critical_fraction=0.0))
    assert list(out.values) == [0.0, 0.0, 0.0]


def test_critical_series_verbatim():
    g = TimeGrid(1, 3)
    load = TimeSeries(g, [2.0, 4.0, 6.0], KW)
    crit = TimeSeries(g, [1.0, 1.0, 1.0], KW)
    out = critical_load(load, LoadSpec(critical_series=crit))
    assert out == crit


def test_critical_fraction_range_checked():
    g = TimeGrid(1, 3)
    load = TimeSeries(g, [2.0, 4.0, 6.0], KW)
    with pytest.raises(FractionOutOfRange):
        critical_load(load, LoadSpec(critical_fraction=1.5))
    with pytest.raises(FractionOutOfRange):
        critical_load(load, LoadSpec(critical_fraction=-0.1))


def test_load_fixture_roundtrip(tmp_path):
    g = TimeGrid(1, 24)
    vals = np.linspace(5, 50, 24)
    path = tmp_path / "load.csv"
    np.savetxt(path, vals)
    out = load_fixture_csv(path, g)
    assert np.allclose(out.values, vals)
    with pytest.raises(LengthMismatch):
        load_fixture_csv(path, TimeGrid(1, 48))
