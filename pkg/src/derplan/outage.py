"""Survival sweep: how long the chosen design rides out an outage.

For every possible start step the year is marched forward (wrapping at the
horizon) until the critical load cannot be met.  Dispatch inside the outage
is greedy: free renewable production first, then the battery, then any
fuel-burning unit.  Renewable surplus recharges the battery; surplus forced
by a generator's turndown floor is curtailed.  Each start is an independent
event: the fuel tank is full again
and the battery holds whatever the optimized dispatch left in it at that
step.  Sizes are taken as given; nothing here re-optimizes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .timegrid import TimeGrid, TimeSeries

STORAGE_KW = "storage:kw"
STORAGE_KWH = "storage:kwh"

_TOL = 1e-9


class MissingSoc(ValueError):
    """Storage is sized but no state-of-charge trajectory was supplied."""


@dataclass(frozen=True)
class FuelParams:
    """Fuel curve of a dispatchable unit: affine in output while running."""

    slope: float = 0.0           # fuel units per kWh delivered
    intercept: float = 0.0       # fuel units per hour while running
    available: float = math.inf  # tank size, refilled for every outage
    min_turndown: float = 0.0    # fraction of rated output


@dataclass(frozen=True)
class OutageSimResult:
    survived_steps: np.ndarray      # length H, steps survived per start
    prob_annual: float
    prob_by_month: np.ndarray       # length 12
    prob_by_hour: np.ndarray        # length 24
    duration_steps: int

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("start_step,survived_steps\n")
        for s, n in enumerate(self.survived_steps):
            out.write(f"{s},{int(n)}\n")
        return out.getvalue()

    def aggregate_block(self) -> dict:
        return {
            "duration_steps": self.duration_steps,
            "prob_annual": self.prob_annual,
            "prob_by_month": self.prob_by_month.tolist(),
            "prob_by_hour": self.prob_by_hour.tolist(),
            "min_survived_steps": int(self.survived_steps.min()),
            "mean_survived_steps": float(self.survived_steps.mean()),
        }


def _march(start: int, H: int, dt: float, crit, ren_kw,
           kw: float, kwh: float, soc0: float, eta_c: float, eta_d: float,
           gens: list) -> int:
    """Steps survived for one start; ``gens`` is [(size, FuelParams), ...]."""
    soc = min(max(soc0, 0.0), kwh)
    tank = [fp.available for _, fp in gens]
    for d in range(H):
        idx = (start + d) % H
        need = crit[idx]
        ren = ren_kw[idx]
        serve = min(need, ren)
        rem = need - serve
        surplus = ren - serve

        if surplus > 0.0 and kwh > 0.0:
            charge = min(surplus, kw, (kwh - soc) / (eta_c * dt))
            soc += eta_c * charge * dt
        if rem > _TOL and kwh > 0.0:
            dis = min(rem, kw, soc * eta_d / dt)
            soc -= dis * dt / eta_d
            rem -= dis

        for i, (size, fp) in enumerate(gens):
            if rem <= _TOL or size <= 0.0:
                continue
            floor = fp.min_turndown * size
            want = min(max(rem, floor), size)
            if fp.slope > 0.0:
                fuel_cap = (tank[i] / dt - fp.intercept) / fp.slope
            elif tank[i] >= fp.intercept * dt - _TOL:
                fuel_cap = math.inf
            else:
                fuel_cap = -math.inf
            out = min(want, fuel_cap)
            if out <= 0.0 or out < floor - _TOL:
                continue
            # output above the need is curtailed, not banked: recharging
            # from forced turndown surplus would let a smaller battery
            # outlast a larger one, breaking resource monotonicity
            rem -= min(out, rem)
            tank[i] -= (fp.slope * out + fp.intercept) * dt

        if rem > _TOL:
            return d
    return H


def simulate_outages(sizes: dict, soc: TimeSeries | None,
                     critical: TimeSeries, pf: dict,
                     fuel: dict | None = None, *,
                     duration_steps: int = 1,
                     round_trip_efficiency: float = 1.0) -> OutageSimResult:
    """Survival statistics for an outage starting at every step.

    ``sizes`` maps tech name to kW, with battery ratings under
    ``storage:kw`` / ``storage:kwh``.  ``pf`` maps each non-storage tech to
    its production-factor series; techs listed in ``fuel`` run last and
    respect tank size and turndown floor.  ``soc`` gives the kWh in the
    battery at each step of the optimized dispatch, the starting charge
    for an outage beginning there.
    """
    grid = critical.grid
    H = grid.horizon_steps
    dt = grid.delta_hours

    kw = float(sizes.get(STORAGE_KW, 0.0))
    kwh = float(sizes.get(STORAGE_KWH, 0.0))
    if kwh > 0.0 and soc is None:
        raise MissingSoc("storage is sized but no state of charge was given")
    if soc is not None and soc.grid != grid:
        raise ValueError("soc series is on a different grid")
    eta = math.sqrt(round_trip_efficiency)

    fuel = dict(fuel or {})
    ren_kw = np.zeros(H)
    gens = []
    for name, size in sizes.items():
        if name in (STORAGE_KW, STORAGE_KWH) or size <= 0.0:
            continue
        if name in fuel:
            gens.append((float(size), fuel[name]))
            continue
        series = pf.get(name)
        if series is None:
            raise ValueError(f"no production factors for tech {name!r}")
        if series.grid != grid:
            raise ValueError(f"production factors for {name!r} on wrong grid")
        ren_kw += float(size) * series.values

    crit = critical.values
    soc_start = soc.values if soc is not None else np.zeros(H)
    survived = np.array([
        _march(s, H, dt, crit, ren_kw, kw, kwh, soc_start[s], eta, eta, gens)
        for s in range(H)
    ])

    ok = survived >= duration_steps
    by_month = np.zeros(12)
    for m in range(12):
        mask = grid.month_of_step == m
        if mask.any():
            by_month[m] = ok[mask].mean()
    by_hour = np.zeros(24)
    for hh in range(24):
        mask = grid.hour_of_day == hh
        if mask.any():
            by_hour[hh] = ok[mask].mean()

    return OutageSimResult(
        survived_steps=survived,
        prob_annual=float(ok.mean()),
        prob_by_month=by_month,
        prob_by_hour=by_hour,
        duration_steps=duration_steps,
    )
