"""Scenario to MILP assembly.

Turns a validated Scenario into the sparse MilpModel the solver
consumes: sizing and dispatch variables, per-step energy balance,
storage dynamics, the tariff's billing structure (tiered energy, flat
and time-of-use demand, minimum charges), incentive and net-metering
policy rows, islanding during outage windows, and a life-cycle-cost
objective weighted by present-worth factors.  A spinning-reserve
extension bolts headroom requirements onto a built model.

Conventions.  The grid is an implicit always-available technology whose
per-step production is the metered purchase that the billing rows price
out.  Production variables carry rated output: delivered power is
production_factor * prod, the capacity bound is prod <= size (or the
committed-capacity variable for dispatchables), and balance rows scale
by the factor.  Variables are only created at steps where a tech is
available (factor > 0); absent names mean a fixed zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .economics import PresentWorthFactors
from .loads import build_load, critical_load
from .lp import EQ, GE, LE, MilpModel, ModelError
from .production import production_factor, provider_for
from .scenario import GRID_NAME, Scenario
from .tariff import fixed_charge_for_month
from .timegrid import TimeSeries

INF = math.inf

# stand-in bound (kW) when a size, rating, or purchase is unbounded
CAP_KW = 1e7

NET_METERED_SEG = "nm"
STANDARD_SEG = "std"


class DecliningBlockUnsupported(ModelError):
    """Tier rates that decrease cannot be filled correctly by an LP."""


class InfeasibleBoundsDetected(ModelError):
    """A lower size bound exceeds its upper bound."""


class ReserveWithoutCapability(ModelError):
    """Spinning reserve requested with no dispatchable tech and no storage."""


@dataclass(frozen=True)
class TechInstance:
    """One sizing choice of a tech: the net-metered or standard segment."""

    base: object            # TechSpec
    segment: str
    production_factor: TimeSeries

    def __post_init__(self):
        if self.segment == NET_METERED_SEG and not self.base.can_net_meter:
            raise ModelError(
                f"{self.base.name} cannot have a net-metered segment")

    @property
    def name(self) -> str:
        if self.segment == NET_METERED_SEG:
            return f"{self.base.name}:nm"
        return self.base.name

    @property
    def net_metered(self) -> bool:
        return self.segment == NET_METERED_SEG

    @property
    def exports(self) -> bool:
        return self.net_metered or self.base.can_export


def expand_techs(s: Scenario) -> list:
    """Tech instances for the model: net-meterable techs appear twice."""
    out = []
    for t in s.techs:
        pf = production_factor(provider_for(t.production_source), s.grid,
                               s.outage)
        if t.can_net_meter:
            out.append(TechInstance(t, NET_METERED_SEG, pf))
        out.append(TechInstance(t, STANDARD_SEG, pf))
    return out


def effective_load(s: Scenario) -> TimeSeries:
    """Site load with the outage window replaced by the critical load."""
    load = build_load(s.load, s.grid)
    o = s.outage
    if o is None:
        return load
    vals = load.values.copy()
    window = slice(o.start_step, o.end_step)
    if o.critical_load is None:
        vals[window] = critical_load(load, s.load).values[window]
    elif isinstance(o.critical_load, TimeSeries):
        vals[window] = o.critical_load.values[window]
    else:
        vals[window] = float(o.critical_load) * load.values[window]
    return load.with_values(vals)


def _tier_widths(tiers):
    """(width, rate) per block from cumulative limits."""
    out = []
    prev = 0.0
    for tier in tiers:
        width = tier.limit - prev if math.isfinite(tier.limit) else INF
        out.append((width, tier.rate))
        prev = tier.limit
    return out


class _Builder:
    def __init__(self, s: Scenario):
        self.s = s
        self.grid = s.grid
        self.tariff = s.tariff
        self.dt = s.grid.delta_hours
        self.H = s.grid.horizon_steps
        self.m = MilpModel()
        self.pwf = PresentWorthFactors.from_financial(s.financial)
        self.load = effective_load(s)
        self.annual_load_kwh = float(self.load.values.sum() * self.dt)
        self.insts = expand_techs(s)
        self.reserve = s.spinning_reserve is not None

        # per-step balance coefficients, filled as variables appear
        self.balance = [dict() for _ in range(self.H)]
        self.grid_prod = {}             # step -> var id
        self.prod = {}                  # (inst name, step) -> var id
        self.on = {}
        self.committed = {}
        self.export = {}
        self.size = {}                  # inst name -> var id
        self.soc = []
        self.charge = []
        self.discharge = []

        # year-one utility bill, kept separate so tests and postproc can
        # price a solution without dividing out the present-worth factor
        self.utility_terms = {}         # var id -> $
        self.utility_const = 0.0
        self.month_terms = {}           # month -> {var id: $}

    # ------------------------------------------------------------ pieces

    def check_preconditions(self):
        if self.tariff.has_declining_rates():
            raise DecliningBlockUnsupported(
                "tariff has a tier priced below its predecessor")
        for t in self.s.techs:
            if t.min_kw > t.max_kw:
                raise InfeasibleBoundsDetected(
                    f"{t.name}: min_kw {t.min_kw} > max_kw {t.max_kw}")
        st = self.s.storage
        if st is not None:
            if st.min_kw > st.max_kw or st.min_kwh > st.max_kwh:
                raise InfeasibleBoundsDetected("storage bounds are inverted")

    def add_grid(self):
        fg = production_factor(GRID_NAME, self.grid, self.s.outage).values
        for h in range(self.H):
            if fg[h] == 0.0:
                continue
            j = self.m.add_var(name=f"prod[grid,{h}]", upper=CAP_KW)
            self.grid_prod[h] = j
            self.balance[h][j] = fg[h]

    def _needs_commitment(self, base) -> bool:
        return base.dispatchable and (base.min_turndown > 0.0
                                      or base.fuel_intercept > 0.0
                                      or self.reserve)

    def add_instance(self, inst: TechInstance):
        m = self.m
        b = inst.base
        ub = b.max_kw if math.isfinite(b.max_kw) else CAP_KW
        size = m.add_var(name=f"size[{inst.name}]", upper=ub)
        self.size[inst.name] = size
        m.add_obj(size, (1.0 - b.itc_fraction) * b.cost_per_kw
                  + self.pwf.pwf_om * b.om_fixed)

        if b.min_kw > 0.0:
            z = m.add_var(name=f"built[{inst.name}]", binary=True)
            m.add_row({size: 1.0, z: -ub}, LE, 0.0)
            m.add_row({z: b.min_kw, size: -1.0}, LE, 0.0)

        f = inst.production_factor.values
        commit = self._needs_commitment(b)
        for h in range(self.H):
            if f[h] == 0.0:
                continue
            p = m.add_var(name=f"prod[{inst.name},{h}]", upper=ub)
            self.prod[(inst.name, h)] = p
            self.balance[h][p] = f[h]
            if b.om_variable:
                m.add_obj(p, self.pwf.pwf_om * b.om_variable * f[h] * self.dt)
            if commit:
                on = m.add_var(name=f"on[{inst.name},{h}]", binary=True)
                y = m.add_var(name=f"online_kw[{inst.name},{h}]", upper=ub)
                self.on[(inst.name, h)] = on
                self.committed[(inst.name, h)] = y
                m.add_row({y: 1.0, size: -1.0}, LE, 0.0)
                m.add_row({y: 1.0, on: -ub}, LE, 0.0)
                m.add_row({size: 1.0, on: ub, y: -1.0}, LE, ub)
                m.add_row({p: 1.0, y: -1.0}, LE, 0.0)
                if b.min_turndown > 0.0:
                    m.add_row({y: b.min_turndown, p: -1.0}, LE, 0.0)
            else:
                m.add_row({p: 1.0, size: -1.0}, LE, 0.0)

        if inst.exports:
            rate = (self.tariff.nm_export_rate() if inst.net_metered
                    else np.full(self.H, self.tariff.wholesale_rate))
            outage = self.s.outage
            for h in range(self.H):
                if f[h] == 0.0:
                    continue
                if outage and outage.start_step <= h < outage.end_step:
                    continue    # islanded: nothing crosses the meter
                e = m.add_var(name=f"export[{inst.name},{h}]")
                self.export[(inst.name, h)] = e
                self.balance[h][e] = -1.0
                m.add_row({e: 1.0, self.prod[(inst.name, h)]: -f[h]}, LE, 0.0)
                self.utility_terms[e] = (self.utility_terms.get(e, 0.0)
                                         - rate[h] * self.dt)

    def add_base_rows(self):
        m = self.m
        groups = {}
        for inst in self.insts:
            groups.setdefault(inst.base.name, []).append(inst)
        for name, group in groups.items():
            b = group[0].base
            sizes = [self.size[i.name] for i in group]
            if len(group) > 1 and math.isfinite(b.max_kw):
                m.add_row({j: 1.0 for j in sizes}, LE, b.max_kw)

            if b.rebate_per_kw > 0.0:
                cap = b.rebate_cap if math.isfinite(b.rebate_cap) else INF
                c = m.add_var(name=f"rebate[{name}]", upper=cap, obj=-1.0)
                coefs = {c: 1.0}
                for j in sizes:
                    coefs[j] = -b.rebate_per_kw
                m.add_row(coefs, LE, 0.0)

            production = {}      # var id -> delivered kWh per unit prod
            for inst in group:
                f = inst.production_factor.values
                for h in range(self.H):
                    p = self.prod.get((inst.name, h))
                    if p is not None:
                        production[p] = f[h] * self.dt

            if b.pbi_per_kwh > 0.0:
                cap = b.pbi_cap if math.isfinite(b.pbi_cap) else INF
                c = m.add_var(name=f"pbi[{name}]", upper=cap,
                              obj=-self.pwf.pwf_om)
                coefs = {c: 1.0}
                for p, kwh in production.items():
                    coefs[p] = -b.pbi_per_kwh * kwh
                m.add_row(coefs, LE, 0.0)

            if math.isfinite(b.fuel_available) and (
                    b.fuel_slope > 0.0 or b.fuel_intercept > 0.0):
                coefs = {}
                for p, kwh in production.items():
                    if b.fuel_slope:
                        coefs[p] = b.fuel_slope * kwh
                if b.fuel_intercept > 0.0:
                    for inst in group:
                        for h in range(self.H):
                            on = self.on.get((inst.name, h))
                            if on is not None:
                                coefs[on] = b.fuel_intercept * self.dt
                if coefs:
                    m.add_row(coefs, LE, b.fuel_available)

    def add_storage(self):
        st = self.s.storage
        if st is None:
            return
        m = self.m
        eta = math.sqrt(st.round_trip_efficiency)
        kw_ub = st.max_kw if math.isfinite(st.max_kw) else CAP_KW
        kwh_ub = st.max_kwh if math.isfinite(st.max_kwh) else CAP_KW
        bkw = m.add_var(name="size[storage:kw]", lower=st.min_kw,
                        upper=kw_ub, obj=st.cost_per_kw)
        bkwh = m.add_var(name="size[storage:kwh]", lower=st.min_kwh,
                         upper=kwh_ub, obj=st.cost_per_kwh)
        self.storage_kw, self.storage_kwh = bkw, bkwh

        self.soc = [m.add_var(name=f"soc[{k}]", upper=kwh_ub)
                    for k in range(self.H + 1)]
        m.add_row({self.soc[0]: 1.0, bkwh: -st.soc_init}, EQ, 0.0)
        m.add_row({self.soc[self.H]: 1.0, bkwh: -st.soc_init}, GE, 0.0)

        for h in range(self.H):
            c = m.add_var(name=f"charge[{h}]", upper=kw_ub)
            d = m.add_var(name=f"discharge[{h}]", upper=kw_ub)
            self.charge.append(c)
            self.discharge.append(d)
            self.balance[h][c] = -1.0
            self.balance[h][d] = 1.0
            m.add_row({c: 1.0, bkw: -1.0}, LE, 0.0)
            m.add_row({d: 1.0, bkw: -1.0}, LE, 0.0)
            m.add_row({self.soc[h + 1]: 1.0, self.soc[h]: -1.0,
                       c: -eta * self.dt, d: self.dt / eta}, EQ, 0.0)
            m.add_row({self.soc[h + 1]: 1.0, bkwh: -1.0}, LE, 0.0)
            m.add_row({bkwh: st.soc_min, self.soc[h + 1]: -1.0}, LE, 0.0)

        if not st.charger_allowed(GRID_NAME):
            for h in range(self.H):
                coefs = {self.charge[h]: 1.0}
                for inst in self.insts:
                    if not st.charger_allowed(inst.base.name):
                        continue
                    p = self.prod.get((inst.name, h))
                    if p is None:
                        continue
                    coefs[p] = coefs.get(p, 0.0) - inst.production_factor.values[h]
                    e = self.export.get((inst.name, h))
                    if e is not None:
                        coefs[e] = coefs.get(e, 0.0) + 1.0
                m.add_row(coefs, LE, 0.0)

    def add_balance_rows(self):
        vals = self.load.values
        for h in range(self.H):
            coefs = self.balance[h]
            if not coefs and vals[h] == 0.0:
                continue
            self.m.add_row(coefs, EQ, float(vals[h]))

    def _tier_block(self, prefix, widths, month):
        """Tier fill variables; returns their ids after pricing them in."""
        ids = []
        for k, (width, rate) in enumerate(widths):
            v = self.m.add_var(name=f"{prefix},{k}]", upper=width)
            self.utility_terms[v] = self.utility_terms.get(v, 0.0) + rate
            self.month_terms[month][v] = rate
            ids.append(v)
        return ids

    def add_tariff_rows(self):
        m = self.m
        t = self.tariff
        months = self.grid.months_present()
        eperiod = t.energy_period_of_step
        dperiod = t.demand_period_of_step

        for month in months:
            self.month_terms[month] = {}
            steps = self.grid.steps_in_month(month)

            # monthly energy purchases fill tiers within each TOU period
            for p in sorted(set(int(x) for x in eperiod[steps])):
                ids = self._tier_block(f"energy_tier[{month},{p}",
                                       _tier_widths(t.energy_tiers[p]), month)
                coefs = {v: 1.0 for v in ids}
                for h in steps:
                    if eperiod[h] == p and int(h) in self.grid_prod:
                        coefs[self.grid_prod[int(h)]] = -self.dt
                m.add_row(coefs, EQ, 0.0)

            # flat demand: tiered charge on the monthly purchase peak
            if t.demand_flat[month]:
                peak = m.add_var(name=f"peak_kw[{month}]")
                for h in steps:
                    j = self.grid_prod.get(int(h))
                    if j is not None:
                        m.add_row({peak: 1.0, j: -1.0}, GE, 0.0)
                ids = self._tier_block(f"peak_tier[{month}",
                                       _tier_widths(t.demand_flat[month]),
                                       month)
                coefs = {v: 1.0 for v in ids}
                coefs[peak] = -1.0
                m.add_row(coefs, EQ, 0.0)

            # time-of-use demand: one tiered peak per demand period
            for p in sorted(set(int(x) for x in dperiod[steps])):
                if p < 0:
                    continue
                peak = m.add_var(name=f"tou_peak_kw[{month},{p}]")
                for h in steps:
                    if dperiod[h] != p:
                        continue
                    j = self.grid_prod.get(int(h))
                    if j is not None:
                        m.add_row({peak: 1.0, j: -1.0}, GE, 0.0)
                ids = self._tier_block(f"tou_peak_tier[{month},{p}",
                                       _tier_widths(t.demand_tou[p]), month)
                coefs = {v: 1.0 for v in ids}
                coefs[peak] = -1.0
                m.add_row(coefs, EQ, 0.0)

        fixed = {month: fixed_charge_for_month(t, month) for month in months}
        self.utility_const += sum(fixed.values())

        # minimum charges floor the purchase-side bill before export credits
        adders = []
        if t.monthly_min_charge > 0.0:
            for month in months:
                a = m.add_var(name=f"min_charge_adder[{month}]")
                self.utility_terms[a] = 1.0
                coefs = {a: 1.0}
                coefs.update(self.month_terms[month])
                m.add_row(coefs, GE, t.monthly_min_charge - fixed[month])
                adders.append(a)
        if t.annual_min_charge > 0.0:
            a = m.add_var(name="annual_min_charge_adder")
            self.utility_terms[a] = 1.0
            coefs = {a: 1.0}
            for month in months:
                coefs.update(self.month_terms[month])
            for j in adders:
                coefs[j] = 1.0
            m.add_row(coefs, GE, t.annual_min_charge - sum(fixed.values()))

    def add_policy_rows(self):
        m = self.m
        nm = [i for i in self.insts if i.net_metered]
        if nm:
            m.add_row({self.size[i.name]: 1.0 for i in nm}, LE,
                      self.tariff.net_metering_limit_kw)
            # net-metered fleet cannot out-generate the site's annual use
            coefs = {}
            for inst in nm:
                f = inst.production_factor.values
                for h in range(self.H):
                    p = self.prod.get((inst.name, h))
                    if p is not None:
                        coefs[p] = f[h] * self.dt
            if coefs:
                m.add_row(coefs, LE, self.annual_load_kwh)

        if self.export:
            m.add_row({e: self.dt for e in self.export.values()}, LE,
                      self.annual_load_kwh)

    def finish(self) -> MilpModel:
        m = self.m
        for j, c in self.utility_terms.items():
            m.add_obj(j, self.pwf.pwf_e * c)
        m.offset += self.pwf.pwf_e * self.utility_const
        m.meta = {
            "pwf_e": self.pwf.pwf_e,
            "pwf_om": self.pwf.pwf_om,
            "utility_terms": dict(self.utility_terms),
            "utility_const": self.utility_const,
            "annual_load_kwh": self.annual_load_kwh,
            "instance_names": [i.name for i in self.insts],
        }
        m.check_well_formed()
        return m


def build_model(s: Scenario) -> MilpModel:
    """Assemble the sizing-and-dispatch MILP for a validated scenario.

    Spinning-reserve rows are not included; callers layer them on with
    add_spinning_reserve when the scenario asks for them.  Commitment
    variables for dispatchables are created here whenever the reserve
    extension will need them.
    """
    b = _Builder(s)
    b.check_preconditions()
    b.add_grid()
    for inst in b.insts:
        b.add_instance(inst)
    b.add_base_rows()
    b.add_storage()
    b.add_balance_rows()
    b.add_tariff_rows()
    b.add_policy_rows()
    return b.finish()


def add_spinning_reserve(m: MilpModel, s: Scenario) -> MilpModel:
    """Require downward and upward headroom each step.

    Dispatchable techs contribute their curtailable output (down) and
    their committed-but-unused capacity (up); storage contributes via
    headroom variables limited by its power rating and by the energy
    room left in (down) or stored in (up) the bank.
    """
    if s.spinning_reserve is None:
        raise ModelError("scenario has no spinning-reserve requirement")
    sr = s.spinning_reserve
    H = s.grid.horizon_steps
    delta = (sr.values if isinstance(sr, TimeSeries)
             else np.full(H, float(sr)))
    dt = s.grid.delta_hours

    dispatchables = [i for i in expand_techs(s) if i.base.dispatchable]
    has_storage = s.storage is not None
    if not dispatchables and not has_storage:
        raise ReserveWithoutCapability(
            "no dispatchable tech and no storage to hold reserve")

    idx = m.var_index
    for h in range(H):
        down = {}
        up = {}
        for inst in dispatchables:
            p = idx.get(f"prod[{inst.name},{h}]")
            if p is None:
                continue
            f = inst.production_factor.values[h]
            y = idx[f"online_kw[{inst.name},{h}]"]
            down[p] = down.get(p, 0.0) + f
            up[y] = 1.0
            up[p] = up.get(p, 0.0) - f
        if has_storage:
            bkw = idx["size[storage:kw]"]
            bkwh = idx["size[storage:kwh]"]
            soc = idx[f"soc[{h + 1}]"]
            mdn = m.add_var(name=f"reserve_down_kw[{h}]")
            mup = m.add_var(name=f"reserve_up_kw[{h}]")
            m.add_row({mdn: 1.0, bkw: -1.0}, LE, 0.0)
            m.add_row({mdn: dt, soc: 1.0, bkwh: -1.0}, LE, 0.0)
            m.add_row({mup: 1.0, bkw: -1.0}, LE, 0.0)
            m.add_row({mup: dt, soc: -1.0}, LE, 0.0)
            down[mdn] = 1.0
            up[mup] = 1.0
        need = float(delta[h])
        if down or need > 0.0:
            m.add_row(down, GE, need)
            m.add_row(up, GE, need)
    return m


def year_one_utility_cost(model: MilpModel, values) -> float:
    """Price a solution's utility bill before present-worth scaling."""
    terms = model.meta["utility_terms"]
    return (sum(c * float(values[j]) for j, c in terms.items())
            + model.meta["utility_const"])
