"""Life-cycle cash-flow arithmetic and result assembly.

Costs that recur annually are escalated at their own growth rate and
discounted back at the nominal discount rate; the resulting multiplier
on a year-one cash flow is a present-worth factor.  Utility-bill terms
escalate with electricity prices, O&M and production incentives with
general inflation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import FinancialSpec, Scenario, bau_scenario
from .tariff import NET_METERED, WHOLESALE, compute_bill
from .timegrid import KW, TimeSeries


def present_worth(rate_growth: float, discount: float, years: int) -> float:
    """Multiplier turning a year-one cash flow into an N-year present value.

    Sum over years 1..N of ((1 + g) / (1 + d)) ** y; exactly N when the
    growth and discount rates coincide.
    """
    if years < 1:
        raise ValueError("years must be >= 1")
    ratio = (1.0 + rate_growth) / (1.0 + discount)
    if ratio == 1.0:
        return float(years)
    # geometric series: ratio * (1 - ratio**N) / (1 - ratio)
    return ratio * (1.0 - ratio ** years) / (1.0 - ratio)


@dataclass(frozen=True)
class PresentWorthFactors:
    pwf_e: float    # electricity-bill terms
    pwf_om: float   # O&M and production incentives

    @classmethod
    def from_financial(cls, fin: FinancialSpec) -> "PresentWorthFactors":
        return cls(
            pwf_e=present_worth(fin.electricity_escalation,
                                fin.discount_rate, fin.analysis_years),
            pwf_om=present_worth(fin.inflation_rate,
                                 fin.discount_rate, fin.analysis_years),
        )


class StatusMismatch(ValueError):
    """A solve did not end in a usable state."""


_USABLE = ("optimal", "feasible")

# result section for the conventional tech names; anything else keys by name
_SECTION_FOR = {"pv": "PV", "wind": "Wind", "generator": "Generator",
                "gen": "Generator"}


def _vals(sol, m, names, default=0.0):
    idx = m.var_index
    return [float(sol.values[idx[n]]) if n in idx else default for n in names]


def _tech_block(sol, m, s, insts):
    H = s.grid.horizon_steps
    base = insts[0].base
    size = sum(_vals(sol, m, [f"size[{i.name}]" for i in insts]))
    prod = np.zeros(H)
    export = np.zeros(H)
    for inst in insts:
        f = inst.production_factor.values
        p = np.array(_vals(sol, m, [f"prod[{inst.name},{h}]" for h in range(H)]))
        e = np.array(_vals(sol, m, [f"export[{inst.name},{h}]" for h in range(H)]))
        prod += f * p
        export += e
    block = {
        "size_kw": size,
        "production_series_kw": prod.tolist(),
        "export_series_kw": export.tolist(),
        "annual_energy_produced_kwh": float(prod.sum() * s.grid.delta_hours),
    }
    if base.fuel_slope > 0.0 or base.fuel_intercept > 0.0:
        on = np.zeros(H)
        for inst in insts:
            on += np.array(_vals(sol, m, [f"on[{inst.name},{h}]" for h in range(H)]))
        dt = s.grid.delta_hours
        block["annual_fuel_used"] = float(
            base.fuel_slope * prod.sum() * dt + base.fuel_intercept * dt * on.sum())
    return block


def _export_series(sol, m, s, insts, net_metered: bool):
    H = s.grid.horizon_steps
    total = np.zeros(H)
    for inst in insts:
        if inst.net_metered != net_metered:
            continue
        total += np.array(_vals(sol, m,
                                [f"export[{inst.name},{h}]" for h in range(H)]))
    return total


def _emissions_kg(s: Scenario, purchase: np.ndarray):
    if s.emission_factors is None:
        return None
    return float((purchase * s.emission_factors.values).sum()
                 * s.grid.delta_hours)


def assemble_results(bau, opt, s: Scenario) -> dict:
    """Combine the BAU and optimized solves into one nested result object.

    Rebuilds both models deterministically from the scenario to recover
    variable positions, so the inputs are just the two Solutions and the
    Scenario they came from.
    """
    # model depends on this module for present-worth factors
    from .model import add_spinning_reserve, build_model, expand_techs

    for label, sol in (("bau", bau), ("optimized", opt)):
        if sol.status not in _USABLE:
            raise StatusMismatch(f"{label} solve ended {sol.status}")

    mb = build_model(bau_scenario(s))
    mo = build_model(s)
    if s.spinning_reserve is not None:
        # candidate model carries the reserve rows, the baseline never does
        add_spinning_reserve(mo, s)
    if len(bau.values) != mb.n_vars or len(opt.values) != mo.n_vars:
        raise StatusMismatch("solution does not match the scenario's model")

    H = s.grid.horizon_steps
    grid_names = [f"prod[grid,{h}]" for h in range(H)]
    purchase_bau = np.array(_vals(bau, mb, grid_names))
    purchase_opt = np.array(_vals(opt, mo, grid_names))

    insts = expand_techs(s)
    annual_load = mo.meta["annual_load_kwh"]
    exports = {}
    if any(i.exports for i in insts):
        for cls, flag in ((NET_METERED, True), (WHOLESALE, False)):
            series = _export_series(opt, mo, s, insts, flag)
            if series.any():
                exports[cls] = TimeSeries(s.grid, series, KW)
    bill_opt = compute_bill(s.tariff, TimeSeries(s.grid, purchase_opt, KW),
                            exports, annual_load)
    bill_bau = compute_bill(s.tariff, TimeSeries(s.grid, purchase_bau, KW))

    lcc_bau = float(bau.objective)
    lcc_opt = float(opt.objective)
    doc = {
        "Financial": {
            "lcc_us_dollars": lcc_opt,
            "lcc_bau_us_dollars": lcc_bau,
            "npv_us_dollars": lcc_bau - lcc_opt,
            "analysis_years": s.financial.analysis_years,
            "pwf_e": mo.meta["pwf_e"],
            "pwf_om": mo.meta["pwf_om"],
        },
        "ElectricTariff": {
            "year_one_bill_us_dollars": bill_opt.total,
            "year_one_bill_bau_us_dollars": bill_bau.total,
            "year_one_export_credit_us_dollars": bill_opt.annual["export_credit"],
            "year_one_energy_cost_us_dollars": bill_opt.annual["energy_cost"],
            "year_one_demand_cost_us_dollars": (
                bill_opt.annual["demand_cost_flat"]
                + bill_opt.annual["demand_cost_tou"]),
            "year_one_fixed_cost_us_dollars": bill_opt.annual["fixed_cost"],
            "year_one_min_charge_adder_us_dollars": (
                bill_opt.annual["min_charge_adder"]),
            "year_one_emissions_kg": _emissions_kg(s, purchase_opt),
            "year_one_emissions_bau_kg": _emissions_kg(s, purchase_bau),
            "grid_purchase_series_kw": purchase_opt.tolist(),
            "grid_purchase_series_bau_kw": purchase_bau.tolist(),
        },
        "Storage": {},
        "Outage": {},
    }

    groups = {}
    for inst in insts:
        groups.setdefault(inst.base.name, []).append(inst)
    for name, group in groups.items():
        key = _SECTION_FOR.get(name.lower(), name)
        if key in doc:
            key = name
        doc[key] = _tech_block(opt, mo, s, group)

    if s.storage is not None:
        doc["Storage"] = {
            "size_kw": _vals(opt, mo, ["size[storage:kw]"])[0],
            "size_kwh": _vals(opt, mo, ["size[storage:kwh]"])[0],
            "charge_series_kw": _vals(opt, mo,
                                      [f"charge[{h}]" for h in range(H)]),
            "discharge_series_kw": _vals(opt, mo,
                                         [f"discharge[{h}]" for h in range(H)]),
            "soc_series_kwh": _vals(opt, mo,
                                    [f"soc[{k}]" for k in range(H + 1)]),
        }

    if s.outage is not None:
        doc["Outage"] = {
            "start_step": s.outage.start_step,
            "end_step": s.outage.end_step,
            "steps": s.outage.end_step - s.outage.start_step,
        }
    return doc
