"""Utility rate parsing and deterministic bill computation.

Handles a URDB-v7 subset: time-of-use and tiered energy rates, seasonal
(flat) and time-of-use demand charges, fixed monthly charges, and
monthly/annual minimum charges.  ``compute_bill`` is the reference
implementation the optimizer's utility-cost terms are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timegrid import KW, TimeGrid, TimeSeries

# export credit classes
NET_METERED = "net_metered"
WHOLESALE = "wholesale"

_CREDIT_ORDER = (NET_METERED, WHOLESALE)


class TariffError(ValueError):
    """Rate document cannot be represented by this engine."""


class MissingSchedule(TariffError):
    """A rate structure was given without its hour-by-month schedule."""


class UnitMismatch(ValueError):
    """Series passed to billing carry the wrong unit tag."""


@dataclass(frozen=True)
class RateTier:
    """One block of a tiered rate: usage up to ``limit`` billed at ``rate``.

    ``limit`` is cumulative kWh for energy tiers and kW for demand tiers;
    the final tier of a period is unbounded (``inf``).
    """

    limit: float
    rate: float


# URDB metadata we accept silently; everything else unknown draws a warning.
_METADATA_FIELDS = frozenset({
    "label", "uri", "name", "utility", "sector", "description", "source",
    "sourceparent", "startdate", "enddate", "approved", "is_default",
    "eiaid", "country", "revisions", "dgrules", "energycomments",
    "demandcomments", "basicinformationcomments", "demandrateunit",
    "flatdemandunit", "demandunits", "supersedes", "voltagecategory",
    "phasewiring", "peakkwcapacitymin", "peakkwcapacitymax",
    "peakkwcapacityhistory", "peakkwhusagemin", "peakkwhusagemax",
    "peakkwhusagehistory", "voltageminimum", "voltagemaximum",
    "fixedmonthlycharge", "annualmincharge", "minmonthlycharge",
})

_STRUCTURAL_FIELDS = frozenset({
    "energyratestructure", "energyweekdayschedule", "energyweekendschedule",
    "demandratestructure", "demandweekdayschedule", "demandweekendschedule",
    "flatdemandstructure", "flatdemandmonths",
    "fixedchargefirstmeter", "fixedchargeunits",
    "mincharge", "minchargeunits",
})

_LOOKBACK_FIELDS = frozenset({
    "lookbackmonths", "lookbackpercent", "lookbackrange", "lookbackperiods",
})


@dataclass(frozen=True, eq=False)
class Tariff:
    """A rate structure expanded onto a specific TimeGrid.

    ``energy_period_of_step`` maps every step to one energy period;
    ``demand_period_of_step`` maps to a TOU demand period or -1 when the
    tariff has no TOU demand charges.  ``demand_flat`` holds one tier
    list per calendar month (empty tuple = no flat demand charge that
    month).
    """

    grid: TimeGrid
    energy_period_of_step: np.ndarray
    energy_tiers: tuple
    demand_flat: tuple
    demand_tou: tuple
    demand_period_of_step: np.ndarray
    fixed_monthly_charge: float = 0.0
    fixed_charge_is_daily: bool = False
    annual_min_charge: float = 0.0
    monthly_min_charge: float = 0.0
    net_metering_limit_kw: float = 0.0
    wholesale_rate: float = 0.0
    warnings: tuple = ()

    def __post_init__(self):
        for name in ("energy_period_of_step", "demand_period_of_step"):
            arr = np.asarray(getattr(self, name), dtype=int)
            if arr.shape != (self.grid.horizon_steps,):
                raise TariffError(f"{name} must have one entry per step")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __eq__(self, other) -> bool:
        """Structural equality; parse warnings are provenance and excluded."""
        if not isinstance(other, Tariff):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.energy_period_of_step, other.energy_period_of_step)
            and np.array_equal(self.demand_period_of_step, other.demand_period_of_step)
            and self.energy_tiers == other.energy_tiers
            and self.demand_flat == other.demand_flat
            and self.demand_tou == other.demand_tou
            and self.fixed_monthly_charge == other.fixed_monthly_charge
            and self.fixed_charge_is_daily == other.fixed_charge_is_daily
            and self.annual_min_charge == other.annual_min_charge
            and self.monthly_min_charge == other.monthly_min_charge
            and self.net_metering_limit_kw == other.net_metering_limit_kw
            and self.wholesale_rate == other.wholesale_rate
        )

    def __hash__(self):
        return hash((self.grid, self.energy_tiers, self.demand_flat, self.demand_tou))

    def has_declining_rates(self) -> bool:
        """True when any tier sequence has a rate below its predecessor."""
        groups = list(self.energy_tiers) + list(self.demand_flat) + list(self.demand_tou)
        for tiers in groups:
            rates = [t.rate for t in tiers]
            if any(b < a for a, b in zip(rates, rates[1:])):
                return True
        return False

    def nm_export_rate(self) -> np.ndarray:
        """Per-step net-metering credit rate: tier-1 energy rate of the step's period."""
        first = np.array([tiers[0].rate for tiers in self.energy_tiers])
        out = first[self.energy_period_of_step]
        out.flags.writeable = False
        return out


@dataclass(frozen=True)
class BillBreakdown:
    """Bill components by calendar month (length-12 arrays, zero when absent)."""

    energy_cost: np.ndarray
    demand_cost_flat: np.ndarray
    demand_cost_tou: np.ndarray
    fixed_cost: np.ndarray
    min_charge_adder: np.ndarray
    export_credit: np.ndarray
    annual_min_charge_adder: float
    months: tuple

    def __post_init__(self):
        for name in ("energy_cost", "demand_cost_flat", "demand_cost_tou",
                     "fixed_cost", "min_charge_adder", "export_credit"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (12,):
                raise ValueError(f"{name} must be a 12-vector")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def annual(self) -> dict:
        out = {
            "energy_cost": float(self.energy_cost.sum()),
            "demand_cost_flat": float(self.demand_cost_flat.sum()),
            "demand_cost_tou": float(self.demand_cost_tou.sum()),
            "fixed_cost": float(self.fixed_cost.sum()),
            "min_charge_adder": float(self.min_charge_adder.sum())
            + self.annual_min_charge_adder,
            "export_credit": float(self.export_credit.sum()),
        }
        out["total"] = sum(out.values())
        return out

    @property
    def total(self) -> float:
        return self.annual["total"]


def _parse_tier_list(period, kind, where, warnings) -> tuple:
    tiers = []
    prev = 0.0
    for i, raw in enumerate(period):
        rate = float(raw.get("rate", 0.0)) + float(raw.get("adj", 0.0))
        if rate < 0:
            raise TariffError(f"{where}: negative rate in tier {i}")
        limit = raw.get("max")
        limit = float(limit) if limit is not None else np.inf
        if limit <= prev:
            raise TariffError(f"{where}: tier bounds must be strictly increasing")
        tiers.append(RateTier(limit, rate))
        prev = limit
    if not tiers:
        raise TariffError(f"{where}: empty tier list")
    if np.isfinite(tiers[-1].limit):
        # usage past the last stated block keeps its rate
        warnings.append(f"{where}: final tier bounded; extended at its rate")
        tiers.append(RateTier(np.inf, tiers[-1].rate))
    return tuple(tiers)


def _parse_structure(structure, kind, warnings) -> tuple:
    return tuple(
        _parse_tier_list(period, kind, f"{kind} period {p}", warnings)
        for p, period in enumerate(structure)
    )


def _expand_schedule(weekday, weekend, grid: TimeGrid, n_periods: int, what: str) -> np.ndarray:
    wd = np.asarray(weekday, dtype=int)
    we = np.asarray(weekend, dtype=int)
    if wd.shape != (12, 24) or we.shape != (12, 24):
        raise TariffError(f"{what} schedules must be 12 months x 24 hours")
    for sched, label in ((wd, "weekday"), (we, "weekend")):
        if sched.min() < 0 or sched.max() >= n_periods:
            raise TariffError(f"{what} {label} schedule indexes a missing period")
    month = grid.month_of_step
    hod = grid.hour_of_day
    return np.where(grid.is_weekend, we[month, hod], wd[month, hod]).astype(int)


def parse_urdb(doc: dict, grid: TimeGrid, *,
               net_metering_limit_kw: float = 0.0,
               wholesale_rate: float = 0.0) -> Tariff:
    """Expand a URDB-v7-subset rate document onto ``grid``.

    Unsupported fields are ignored and listed in ``Tariff.warnings``;
    demand lookback fields in particular are recognized and dropped.
    Declining-block rates parse fine here (billing handles them) but are
    rejected later when building an optimization model.
    """
    warnings: list = []
    for key in doc:
        if key in _STRUCTURAL_FIELDS or key in _METADATA_FIELDS:
            continue
        if key in _LOOKBACK_FIELDS:
            warnings.append(f"demand lookback field {key!r} ignored (unsupported)")
        else:
            warnings.append(f"unrecognized field {key!r} ignored")

    # energy
    if "energyratestructure" in doc:
        energy_tiers = _parse_structure(doc["energyratestructure"], "energy", warnings)
        if "energyweekdayschedule" not in doc or "energyweekendschedule" not in doc:
            raise MissingSchedule("energyratestructure requires weekday and weekend schedules")
        energy_period = _expand_schedule(
            doc["energyweekdayschedule"], doc["energyweekendschedule"],
            grid, len(energy_tiers), "energy")
    else:
        warnings.append("no energy rate structure; energy billed at $0")
        energy_tiers = ((RateTier(np.inf, 0.0),),)
        energy_period = np.zeros(grid.horizon_steps, dtype=int)

    # TOU demand
    if "demandratestructure" in doc:
        demand_tou = _parse_structure(doc["demandratestructure"], "demand", warnings)
        if "demandweekdayschedule" not in doc or "demandweekendschedule" not in doc:
            raise MissingSchedule("demandratestructure requires weekday and weekend schedules")
        demand_period = _expand_schedule(
            doc["demandweekdayschedule"], doc["demandweekendschedule"],
            grid, len(demand_tou), "demand")
    else:
        demand_tou = ()
        demand_period = np.full(grid.horizon_steps, -1, dtype=int)

    # flat (seasonal) demand
    demand_flat = [()] * 12
    if "flatdemandstructure" in doc:
        flat_struct = _parse_structure(doc["flatdemandstructure"], "flat demand", warnings)
        months_map = doc.get("flatdemandmonths")
        if months_map is None:
            raise MissingSchedule("flatdemandstructure requires flatdemandmonths")
        months_map = list(months_map)
        if len(months_map) != 12:
            raise TariffError("flatdemandmonths must have 12 entries")
        for m, p in enumerate(months_map):
            p = int(p)
            if p < 0 or p >= len(flat_struct):
                raise TariffError("flatdemandmonths indexes a missing period")
            tiers = flat_struct[p]
            # a lone zero-rate block is "no charge this month"
            if len(tiers) == 1 and tiers[0].rate == 0.0:
                tiers = ()
            demand_flat[m] = tiers

    # fixed charge, normalized to $/month
    fixed = float(doc.get("fixedchargefirstmeter", 0.0))
    fixed_units = doc.get("fixedchargeunits", "$/month")
    if fixed_units == "$/year":
        fixed = fixed / 12.0
    elif fixed_units == "$/day":
        pass  # handled per month at billing time via per-day flag
    elif fixed_units != "$/month":
        raise TariffError(f"unsupported fixedchargeunits {fixed_units!r}")
    fixed_is_daily = fixed_units == "$/day"

    min_charge = float(doc.get("mincharge", 0.0))
    min_units = doc.get("minchargeunits", "$/month")
    monthly_min = annual_min = 0.0
    if min_charge:
        if min_units == "$/month":
            monthly_min = min_charge
        elif min_units == "$/year":
            annual_min = min_charge
        else:
            raise TariffError(f"unsupported minchargeunits {min_units!r}")

    return Tariff(
        grid=grid,
        energy_period_of_step=energy_period,
        energy_tiers=energy_tiers,
        demand_flat=tuple(demand_flat),
        demand_tou=demand_tou,
        demand_period_of_step=demand_period,
        fixed_monthly_charge=fixed,
        fixed_charge_is_daily=fixed_is_daily,
        annual_min_charge=annual_min,
        monthly_min_charge=monthly_min,
        net_metering_limit_kw=net_metering_limit_kw,
        wholesale_rate=wholesale_rate,
        warnings=tuple(warnings),
    )


def tier_charge(tiers, quantity: float) -> float:
    """Charge for ``quantity`` filled through ordered blocks."""
    cost = 0.0
    prev = 0.0
    for tier in tiers:
        take = min(quantity, tier.limit) - prev
        if take <= 0:
            break
        cost += take * tier.rate
        prev = tier.limit
    return cost


def _check_series(t: Tariff, s: TimeSeries, what: str):
    if s.unit != KW:
        raise UnitMismatch(f"{what} must be a kW series, got {s.unit!r}")
    if s.grid != t.grid:
        raise UnitMismatch(f"{what} is on a different grid than the tariff")


def fixed_charge_for_month(t: Tariff, month: int) -> float:
    if t.fixed_charge_is_daily:
        steps = t.grid.steps_in_month(month)
        days = len(np.unique(t.grid.day_of_year[steps]))
        return t.fixed_monthly_charge * days
    return t.fixed_monthly_charge


def compute_bill(t: Tariff, grid_purchase: TimeSeries,
                 export_by_class: dict | None = None,
                 annual_load_kwh: float = 0.0) -> BillBreakdown:
    """Bill ``grid_purchase`` under tariff ``t`` with optional export credits.

    Energy tiers fill in order within each (month, period) bucket.  Flat
    demand bills the monthly peak; TOU demand bills the monthly peak within
    each demand period.  Exports credit at the tier-1 retail rate of the
    step's energy period (net-metered class) or at the wholesale rate, with
    cumulative credited energy capped at ``annual_load_kwh`` in time order;
    energy exported past the cap earns nothing.  Minimum-charge adders are
    computed on the purchase-side bill, before export credits.
    """
    export_by_class = dict(export_by_class or {})
    _check_series(t, grid_purchase, "grid_purchase")
    for cls, s in export_by_class.items():
        _check_series(t, s, f"export[{cls}]")

    grid = t.grid
    dt = grid.delta_hours
    month_of = grid.month_of_step
    purchase = grid_purchase.values
    months = grid.months_present()

    energy_cost = np.zeros(12)
    eperiod = t.energy_period_of_step
    for m in months:
        in_month = month_of == m
        for p in np.unique(eperiod[in_month]):
            kwh = purchase[in_month & (eperiod == p)].sum() * dt
            energy_cost[m] += tier_charge(t.energy_tiers[p], kwh)

    demand_flat_cost = np.zeros(12)
    for m in months:
        if t.demand_flat[m]:
            peak = purchase[month_of == m].max()
            demand_flat_cost[m] = tier_charge(t.demand_flat[m], peak)

    demand_tou_cost = np.zeros(12)
    dperiod = t.demand_period_of_step
    for m in months:
        in_month = month_of == m
        for d in np.unique(dperiod[in_month]):
            if d < 0:
                continue
            peak = purchase[in_month & (dperiod == d)].max()
            demand_tou_cost[m] += tier_charge(t.demand_tou[d], peak)

    fixed_cost = np.zeros(12)
    for m in months:
        fixed_cost[m] = fixed_charge_for_month(t, m)

    # export credits, capped at the annual site load in time order
    export_credit = np.zeros(12)
    if export_by_class:
        nm_rate = t.nm_export_rate()
        ordered = [c for c in _CREDIT_ORDER if c in export_by_class]
        ordered += sorted(set(export_by_class) - set(ordered))
        remaining = float(annual_load_kwh)
        for h in range(grid.horizon_steps):
            if remaining <= 0:
                break
            for cls in ordered:
                kwh = export_by_class[cls].values[h] * dt
                if kwh <= 0:
                    continue
                credited = min(kwh, remaining)
                remaining -= credited
                rate = nm_rate[h] if cls == NET_METERED else t.wholesale_rate
                export_credit[month_of[h]] -= credited * rate
                if remaining <= 0:
                    break

    # minimum-charge floors on the purchase-side bill
    purchase_side = energy_cost + demand_flat_cost + demand_tou_cost + fixed_cost
    min_adder = np.zeros(12)
    if t.monthly_min_charge > 0:
        for m in months:
            min_adder[m] = max(0.0, t.monthly_min_charge - purchase_side[m])
    annual_adder = 0.0
    if t.annual_min_charge > 0:
        annual_adder = max(0.0, t.annual_min_charge
                           - float((purchase_side + min_adder).sum()))

    return BillBreakdown(
        energy_cost=energy_cost,
        demand_cost_flat=demand_flat_cost,
        demand_cost_tou=demand_tou_cost,
        fixed_cost=fixed_cost,
        min_charge_adder=min_adder,
        export_credit=export_credit,
        annual_min_charge_adder=annual_adder,
        months=tuple(months),
    )


def _tiers_to_doc(tiers) -> list:
    out = []
    for tier in tiers:
        entry = {"rate": tier.rate}
        if np.isfinite(tier.limit):
            entry["max"] = tier.limit
        out.append(entry)
    return out


def _schedules_from_map(grid: TimeGrid, period_of_step: np.ndarray):
    """Recover 12x24 weekday/weekend schedules from a per-step period map.

    Month-hour cells the grid never visits fall back to period 0; they
    cannot affect billing on this grid.
    """
    wd = [[0] * 24 for _ in range(12)]
    we = [[0] * 24 for _ in range(12)]
    month = grid.month_of_step
    hod = grid.hour_of_day
    wkend = grid.is_weekend
    seen_wd = set()
    seen_we = set()
    for h in range(grid.horizon_steps):
        cell = (int(month[h]), int(hod[h]))
        if wkend[h]:
            if cell not in seen_we:
                we[cell[0]][cell[1]] = int(period_of_step[h])
                seen_we.add(cell)
        elif cell not in seen_wd:
            wd[cell[0]][cell[1]] = int(period_of_step[h])
            seen_wd.add(cell)
    return wd, we


def urdb_to_doc(t: Tariff) -> dict:
    """Serialize a Tariff back into the rate-document subset.

    ``parse_urdb(urdb_to_doc(t), t.grid)`` equals ``t`` on the same grid.
    """
    doc: dict = {}
    wd, we = _schedules_from_map(t.grid, t.energy_period_of_step)
    doc["energyratestructure"] = [_tiers_to_doc(p) for p in t.energy_tiers]
    doc["energyweekdayschedule"] = wd
    doc["energyweekendschedule"] = we
    if t.demand_tou:
        dwd, dwe = _schedules_from_map(t.grid, np.maximum(t.demand_period_of_step, 0))
        doc["demandratestructure"] = [_tiers_to_doc(p) for p in t.demand_tou]
        doc["demandweekdayschedule"] = dwd
        doc["demandweekendschedule"] = dwe
    if any(t.demand_flat):
        structure = []
        index = {}
        months = []
        for tiers in t.demand_flat:
            if tiers not in index:
                index[tiers] = len(structure)
                structure.append(_tiers_to_doc(tiers) if tiers else [{"rate": 0.0}])
            months.append(index[tiers])
        doc["flatdemandstructure"] = structure
        doc["flatdemandmonths"] = months
    if t.fixed_monthly_charge:
        doc["fixedchargefirstmeter"] = t.fixed_monthly_charge
        doc["fixedchargeunits"] = "$/day" if t.fixed_charge_is_daily else "$/month"
    if t.monthly_min_charge:
        doc["mincharge"] = t.monthly_min_charge
        doc["minchargeunits"] = "$/month"
    elif t.annual_min_charge:
        doc["mincharge"] = t.annual_min_charge
        doc["minchargeunits"] = "$/year"
    return doc


def flat_tariff(grid: TimeGrid, rate: float, *, demand_rate: float = 0.0,
                fixed_monthly: float = 0.0, wholesale_rate: float = 0.0,
                net_metering_limit_kw: float = 0.0) -> Tariff:
    """Convenience constructor: one energy period, single tier, optional flat demand."""
    demand_flat = tuple(
        (RateTier(np.inf, demand_rate),) if demand_rate else () for _ in range(12)
    )
    return Tariff(
        grid=grid,
        energy_period_of_step=np.zeros(grid.horizon_steps, dtype=int),
        energy_tiers=((RateTier(np.inf, rate),),),
        demand_flat=demand_flat,
        demand_tou=(),
        demand_period_of_step=np.full(grid.horizon_steps, -1, dtype=int),
        fixed_monthly_charge=fixed_monthly,
        net_metering_limit_kw=net_metering_limit_kw,
        wholesale_rate=wholesale_rate,
    )
