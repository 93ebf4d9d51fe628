"""One scenario in, one result document out.

The run order mirrors the service: validate, build the business-as-usual
and candidate models, solve the two concurrently, post-process, and (when
an outage window is declared) sweep outage survival over every start step.
Both the command-line runner and the HTTP service call ``run_scenario`` so
their outputs are the same bytes for the same inputs.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .economics import assemble_results
from .loads import build_load, critical_load
from .milp import SolveConfig, solve_milp
from .model import add_spinning_reserve, build_model, expand_techs
from .outage import STORAGE_KW, STORAGE_KWH, FuelParams, simulate_outages
from .production import production_factor
from .scenario import Scenario, bau_scenario, validate_scenario
from .timegrid import KWH, TimeSeries

_USABLE = ("optimal", "feasible")


class ValidationFailed(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class SolveFailed(RuntimeError):
    def __init__(self, which: str, status: str):
        self.which = which
        self.status = status
        super().__init__(f"{which} solve ended {status}")


def _solve(model, cfg: SolveConfig):
    return solve_milp(model, cfg)


def _outage_block(s: Scenario, opt, mo) -> dict:
    sizes = {}
    for inst in expand_techs(s):
        j = mo.var_index.get(f"size[{inst.name}]")
        if j is not None:
            base = inst.base.name
            sizes[base] = sizes.get(base, 0.0) + float(opt.values[j])

    rt = 1.0
    soc = None
    if s.storage is not None:
        idx = mo.var_index
        sizes[STORAGE_KW] = float(opt.values[idx["size[storage:kw]"]])
        sizes[STORAGE_KWH] = float(opt.values[idx["size[storage:kwh]"]])
        rt = s.storage.round_trip_efficiency
        H = s.grid.horizon_steps
        soc = TimeSeries(
            s.grid, [float(opt.values[idx[f"soc[{k}]"]]) for k in range(H)],
            KWH)

    pf = {}
    fuel = {}
    for t in s.techs:
        if t.dispatchable:
            fuel[t.name] = FuelParams(
                slope=t.fuel_slope, intercept=t.fuel_intercept,
                available=t.fuel_available, min_turndown=t.min_turndown)
        else:
            pf[t.name] = production_factor(t.production_source, s.grid)

    crit = critical_load(build_load(s.load, s.grid), s.load)
    duration = s.outage.end_step - s.outage.start_step
    sim = simulate_outages(sizes, soc, crit, pf, fuel,
                           duration_steps=max(duration, 1),
                           round_trip_efficiency=rt)
    block = sim.aggregate_block()
    block["survived_steps"] = sim.survived_steps.tolist()
    return block


def candidate_model(s: Scenario):
    """The model actually solved for the candidate design: the base model
    plus reserve rows when the scenario requires them.  The business-as-
    usual baseline never carries reserve rows; a bare grid has nothing to
    hold in reserve and stays a pure bill."""
    m = build_model(s)
    if s.spinning_reserve is not None:
        add_spinning_reserve(m, s)
    return m


def solve_pair(s: Scenario, cfg: SolveConfig):
    """Solve baseline and candidate concurrently; returns (bau, opt, model)."""
    mb = build_model(bau_scenario(s))
    mo = candidate_model(s)
    with ThreadPoolExecutor(max_workers=2) as pool:
        fb = pool.submit(_solve, mb, cfg)
        fo = pool.submit(_solve, mo, cfg)
        bau, opt = fb.result(), fo.result()
    if bau.status not in _USABLE:
        raise SolveFailed("business-as-usual", bau.status)
    if opt.status not in _USABLE:
        raise SolveFailed("optimized", opt.status)
    return bau, opt, mo


def finalize(s: Scenario, bau, opt, mo) -> dict:
    doc = assemble_results(bau, opt, s)
    if s.outage is not None:
        doc["Outage"].update(_outage_block(s, opt, mo))
    return doc


def run_scenario(s: Scenario, cfg: SolveConfig | None = None) -> dict:
    """Full pipeline for one scenario; returns the nested result document.

    Raises ValidationFailed with the violation list, or SolveFailed when
    either solve ends without a usable solution.
    """
    violations = validate_scenario(s)
    if violations:
        raise ValidationFailed(violations)
    cfg = cfg or SolveConfig()
    bau, opt, mo = solve_pair(s, cfg)
    return finalize(s, bau, opt, mo)


def results_json(doc: dict) -> str:
    """Canonical serialization shared by the CLI and the HTTP service."""
    return json.dumps(doc, sort_keys=True, indent=2,
                      allow_nan=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)!r}")
