"""Shared generators for model-level and acceptance tests.

Random tariffs here always have non-decreasing tier rates so the model
builder accepts them; billing-only tests that need declining blocks
construct those by hand.
"""

import math

import numpy as np

from derplan.scenario import FinancialSpec, LoadSpec, Scenario
from derplan.tariff import RateTier, Tariff
from derplan.loads import USER_SERIES
from derplan.timegrid import KW, TimeGrid, TimeSeries

INF = math.inf


def increasing_tiers(rng, n_tiers, base_rate, limit_scale):
    """Tier list with non-decreasing rates and increasing cumulative limits."""
    limits = np.sort(rng.uniform(0.2, 1.0, size=n_tiers - 1)).cumsum() * limit_scale
    rates = base_rate * (1.0 + np.sort(rng.uniform(0.0, 1.5, size=n_tiers)))
    tiers = [RateTier(float(limits[k]), float(rates[k]))
             for k in range(n_tiers - 1)]
    tiers.append(RateTier(INF, float(rates[-1])))
    return tuple(tiers)


def random_billing_tariff(rng, grid: TimeGrid, *, wholesale_rate=0.0,
                          net_metering_limit_kw=0.0) -> Tariff:
    """Randomized tariff exercising periods, tiers, demand, and minimums."""
    n_eperiods = int(rng.integers(1, 4))
    energy_tiers = tuple(
        increasing_tiers(rng, int(rng.integers(1, 4)), rng.uniform(0.05, 0.3),
                         limit_scale=rng.uniform(50, 2000))
        for _ in range(n_eperiods))
    # periods follow hour-of-day bands so schedules look like real TOU
    splits = np.sort(rng.integers(0, 24, size=max(0, n_eperiods - 1)))
    eperiod = np.searchsorted(splits, grid.hour_of_day, side="right")
    eperiod = np.minimum(eperiod, n_eperiods - 1).astype(int)

    demand_flat = tuple(
        increasing_tiers(rng, int(rng.integers(1, 3)), rng.uniform(2, 20),
                         limit_scale=rng.uniform(10, 200))
        if rng.random() < 0.5 else ()
        for _ in range(12))

    if rng.random() < 0.4:
        demand_tou = (increasing_tiers(rng, 1, rng.uniform(1, 15), 1.0),)
        start, stop = sorted(rng.integers(0, 24, size=2))
        dperiod = np.where((grid.hour_of_day >= start)
                           & (grid.hour_of_day < stop), 0, -1).astype(int)
        if not (dperiod == 0).any():
            dperiod[:] = 0
    else:
        demand_tou = ()
        dperiod = np.full(grid.horizon_steps, -1, dtype=int)

    return Tariff(
        grid=grid,
        energy_period_of_step=eperiod,
        energy_tiers=energy_tiers,
        demand_flat=demand_flat,
        demand_tou=demand_tou,
        demand_period_of_step=dperiod,
        fixed_monthly_charge=float(rng.choice([0.0, rng.uniform(1, 30)])),
        fixed_charge_is_daily=bool(rng.random() < 0.2),
        annual_min_charge=float(rng.choice([0.0, rng.uniform(5, 100)])),
        monthly_min_charge=float(rng.choice([0.0, rng.uniform(1, 40)])),
        net_metering_limit_kw=net_metering_limit_kw,
        wholesale_rate=wholesale_rate,
    )


def random_load_values(rng, grid: TimeGrid) -> np.ndarray:
    """Positive load with a daily rhythm and noise."""
    hod = grid.hour_of_day
    base = rng.uniform(2, 30)
    swing = rng.uniform(0, base)
    vals = base + swing * np.sin(np.pi * (hod - 6) / 12.0) ** 2
    vals = vals + rng.uniform(0, 0.3 * base, size=grid.horizon_steps)
    return np.maximum(vals, 0.0)


def user_load(grid: TimeGrid, values) -> LoadSpec:
    return LoadSpec(mode=USER_SERIES,
                    series=TimeSeries(grid, np.asarray(values, float), KW))


def flat_financial(years: int = 1) -> FinancialSpec:
    """No discounting or escalation: present-worth factors equal ``years``."""
    return FinancialSpec(analysis_years=years, discount_rate=0.0,
                         inflation_rate=0.0, electricity_escalation=0.0)


def scenario_for(grid, tariff, load_values, **kw) -> Scenario:
    kw.setdefault("financial", flat_financial())
    return Scenario(grid=grid, tariff=tariff,
                    load=user_load(grid, load_values), **kw)


def urdb_flat_doc(rate=0.10, **extra) -> dict:
    """Minimal flat-rate URDB document for scenario-file tests."""
    sched = [[0] * 24 for _ in range(12)]
    doc = {"energyratestructure": [[{"rate": rate}]],
           "energyweekdayschedule": sched,
           "energyweekendschedule": sched}
    doc.update(extra)
    return doc


def scenario_doc(horizon=24, load_kw=None, rate=0.10, **sections) -> dict:
    """Grid-only scenario document; extra sections merge over the base."""
    if load_kw is None:
        load_kw = [5.0 + (h % 4) for h in range(horizon)]
    doc = {
        "Site": {"time_steps_per_hour": 1, "horizon_steps": horizon},
        "LoadProfile": {"mode": "user_series", "series_kw": list(load_kw)},
        "ElectricTariff": {"urdb_response": urdb_flat_doc(rate)},
    }
    for key, section in sections.items():
        if key in doc and isinstance(section, dict):
            doc[key] = {**doc[key], **section}
        else:
            doc[key] = section
    return doc


def period_tariff(grid: TimeGrid, rates_by_step, **kw) -> Tariff:
    """One flat-rate energy period per distinct step rate."""
    rates_by_step = np.asarray(rates_by_step, dtype=float)
    rates = sorted(set(rates_by_step.tolist()))
    period_of = np.array([rates.index(r) for r in rates_by_step], dtype=int)
    return Tariff(
        grid=grid,
        energy_period_of_step=period_of,
        energy_tiers=tuple((RateTier(INF, r),) for r in rates),
        demand_flat=((),) * 12,
        demand_tou=(),
        demand_period_of_step=np.full(grid.horizon_steps, -1, dtype=int),
        **kw,
    )
