"""Scenario document: candidate techs, storage, tariff, load, financials, outage.

A Scenario is the complete analysis request.  It can be built directly or
parsed from a nested JSON document with top-level keys Site, LoadProfile,
PV, Wind, Generator, Storage, ElectricTariff, Financial (see
docs/scenario_schema.json).  ``validate_scenario`` returns violations with
field paths rather than raising, so services can report them all at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .loads import (
    HYBRID,
    REFERENCE,
    REFERENCE_SCALED,
    USER_SERIES,
    BUILDING_TYPES,
    LoadSpec,
)
from .production import ProviderError, provider_for
from .tariff import Tariff, parse_urdb, urdb_to_doc
from .timegrid import KG_PER_KWH, KW, VALID_STEPS_PER_HOUR, TimeGrid, TimeSeries

FINANCIAL = "financial"
RESILIENCE = "resilience"

GRID_NAME = "grid"

UNBOUNDED = math.inf


@dataclass(frozen=True)
class TechSpec:
    """One candidate generation technology.

    ``production_source`` names where per-kW production factors come from
    (see production module).  Fuel use is affine in output when the unit
    is on: slope × kWh + intercept × hours-on; PV and wind leave both 0.
    """

    name: str
    class_name: str = ""
    dispatchable: bool = False
    cost_per_kw: float = 0.0
    om_fixed: float = 0.0          # $/kW/yr
    om_variable: float = 0.0       # $/kWh produced
    fuel_slope: float = 0.0        # fuel units per kWh
    fuel_intercept: float = 0.0    # fuel units per hour while on
    fuel_available: float = UNBOUNDED
    min_kw: float = 0.0
    max_kw: float = UNBOUNDED
    min_turndown: float = 0.0      # fraction of rated output
    production_source: str = "synthetic:ones"
    can_net_meter: bool = False
    can_export: bool = False
    can_charge_storage: bool = True
    itc_fraction: float = 0.0
    rebate_per_kw: float = 0.0
    rebate_cap: float = UNBOUNDED
    pbi_per_kwh: float = 0.0
    pbi_cap: float = UNBOUNDED     # $/yr

    @property
    def tech_class(self) -> str:
        return self.class_name or self.name


@dataclass(frozen=True)
class StorageSpec:
    """Electric battery: power and energy sized independently."""

    cost_per_kw: float = 0.0
    cost_per_kwh: float = 0.0
    round_trip_efficiency: float = 0.9
    soc_min: float = 0.0
    soc_init: float = 0.5
    min_kw: float = 0.0
    max_kw: float = UNBOUNDED
    min_kwh: float = 0.0
    max_kwh: float = UNBOUNDED
    allowed_chargers: tuple | str = "all"

    def __post_init__(self):
        if self.allowed_chargers != "all":
            object.__setattr__(self, "allowed_chargers",
                               tuple(str(c) for c in self.allowed_chargers))

    def charger_allowed(self, name: str) -> bool:
        return self.allowed_chargers == "all" or name in self.allowed_chargers


@dataclass(frozen=True)
class FinancialSpec:
    analysis_years: int = 25
    discount_rate: float = 0.083
    inflation_rate: float = 0.025          # O&M escalation
    electricity_escalation: float = 0.023


@dataclass(frozen=True)
class OutageSpec:
    """Grid outage window, half-open in steps: [start_step, end_step).

    ``critical_load`` overrides the load spec's critical definition for
    the window: a kW series or a fraction of load; None falls back to the
    load spec.
    """

    start_step: int
    end_step: int
    critical_load: TimeSeries | float | None = None


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class Scenario:
    grid: TimeGrid
    tariff: Tariff
    load: LoadSpec
    techs: tuple = ()
    storage: StorageSpec | None = None
    financial: FinancialSpec = field(default_factory=FinancialSpec)
    outage: OutageSpec | None = None
    spinning_reserve: TimeSeries | None = None
    emission_factors: TimeSeries | None = None
    analysis_type: str = FINANCIAL

    def __post_init__(self):
        object.__setattr__(self, "techs", tuple(self.techs))

    def tech_by_name(self, name: str) -> TechSpec | None:
        for t in self.techs:
            if t.name == name:
                return t
        return None


def bau_scenario(s: Scenario) -> Scenario:
    """Business-as-usual twin: no candidate techs, no storage.

    The outage window is kept but with zero critical load, because a bare
    grid cannot serve anything while islanded; BAU costs then reflect the
    same billing horizon minus the outage steps.
    """
    outage = s.outage
    if outage is not None:
        outage = replace(outage, critical_load=0.0)
    return replace(s, techs=(), storage=None, outage=outage)


# ---------------------------------------------------------------- validation


def _check(violations, path, ok, message):
    if not ok:
        violations.append(Violation(path, message))


def _series_ok(violations, path, series, grid, unit):
    if series.grid != grid:
        violations.append(Violation(path, "series is on a different grid"))
    elif series.unit != unit:
        violations.append(Violation(path, f"series must be tagged {unit}"))
    elif np.any(series.values < 0):
        violations.append(Violation(path, "series values must be >= 0"))


def _validate_tech(v, i, t: TechSpec):
    p = f"techs[{i}]({t.name})"
    _check(v, f"{p}.name", bool(t.name) and t.name != GRID_NAME,
           "tech name must be nonempty and not 'grid'")
    _check(v, f"{p}.min_kw", 0 <= t.min_kw <= t.max_kw,
           "need 0 <= min_kw <= max_kw")
    _check(v, f"{p}.min_turndown", 0 <= t.min_turndown <= 1,
           "min_turndown must be in [0, 1]")
    for fld in ("cost_per_kw", "om_fixed", "om_variable", "fuel_slope",
                "fuel_intercept", "fuel_available", "rebate_per_kw",
                "rebate_cap", "pbi_per_kwh", "pbi_cap"):
        _check(v, f"{p}.{fld}", getattr(t, fld) >= 0, f"{fld} must be >= 0")
    _check(v, f"{p}.itc_fraction", 0 <= t.itc_fraction <= 1,
           "itc_fraction must be in [0, 1]")
    if not t.dispatchable:
        _check(v, f"{p}.min_turndown", t.min_turndown == 0,
               "min_turndown requires a dispatchable tech")
    try:
        provider_for(t.production_source)
    except ProviderError as exc:
        v.append(Violation(f"{p}.production_source", str(exc)))


def _validate_storage(v, b: StorageSpec, tech_names):
    _check(v, "storage.round_trip_efficiency",
           0 < b.round_trip_efficiency <= 1,
           "round_trip_efficiency must be in (0, 1]")
    _check(v, "storage.soc_min", 0 <= b.soc_min <= 1, "soc_min must be in [0, 1]")
    _check(v, "storage.soc_init", b.soc_min <= b.soc_init <= 1,
           "need soc_min <= soc_init <= 1")
    _check(v, "storage.min_kw", 0 <= b.min_kw <= b.max_kw,
           "need 0 <= min_kw <= max_kw")
    _check(v, "storage.min_kwh", 0 <= b.min_kwh <= b.max_kwh,
           "need 0 <= min_kwh <= max_kwh")
    for fld in ("cost_per_kw", "cost_per_kwh"):
        _check(v, f"storage.{fld}", getattr(b, fld) >= 0, f"{fld} must be >= 0")
    if b.allowed_chargers != "all":
        known = set(tech_names) | {GRID_NAME}
        for name in b.allowed_chargers:
            _check(v, "storage.allowed_chargers", name in known,
                   f"unknown charger {name!r}")


def _validate_load(v, spec: LoadSpec, grid: TimeGrid):
    p = "load"
    if spec.mode == USER_SERIES:
        if spec.series is None:
            v.append(Violation(f"{p}.series", "user_series mode needs a series"))
        else:
            _series_ok(v, f"{p}.series", spec.series, grid, KW)
    elif spec.mode in (REFERENCE, REFERENCE_SCALED):
        _check(v, f"{p}.building_type", spec.building_type in BUILDING_TYPES,
               f"unknown building type {spec.building_type!r}")
        if spec.mode == REFERENCE_SCALED:
            if spec.annual_kwh is None and spec.monthly_kwh is None:
                v.append(Violation(f"{p}.annual_kwh",
                                   "reference_scaled needs annual_kwh or monthly_kwh"))
            if spec.annual_kwh is not None:
                _check(v, f"{p}.annual_kwh", spec.annual_kwh >= 0,
                       "annual_kwh must be >= 0")
    elif spec.mode == HYBRID:
        if not spec.components:
            v.append(Violation(f"{p}.components", "hybrid mode needs components"))
        else:
            weights = [w for _, w in spec.components]
            _check(v, f"{p}.components", all(w >= 0 for w in weights),
                   "hybrid weights must be >= 0")
            _check(v, f"{p}.components", abs(sum(weights) - 1.0) <= 1e-9,
                   "hybrid weights must sum to 1")
            for b, _ in spec.components:
                _check(v, f"{p}.components", b in BUILDING_TYPES,
                       f"unknown building type {b!r}")
    if spec.monthly_kwh is not None:
        _check(v, f"{p}.monthly_kwh",
               len(spec.monthly_kwh) == 12 and all(x >= 0 for x in spec.monthly_kwh),
               "monthly_kwh needs 12 entries >= 0")
    if spec.critical_series is not None:
        _series_ok(v, f"{p}.critical_series", spec.critical_series, grid, KW)
    else:
        _check(v, f"{p}.critical_fraction", 0 <= spec.critical_fraction <= 1,
               "critical_fraction must be in [0, 1]")


def validate_scenario(s: Scenario) -> list:
    """All invariant violations, each with a field path; empty means valid."""
    v: list = []
    grid = s.grid

    names = [t.name for t in s.techs]
    _check(v, "techs", len(set(names)) == len(names), "tech names must be unique")
    for i, t in enumerate(s.techs):
        _validate_tech(v, i, t)

    if s.storage is not None:
        _validate_storage(v, s.storage, names)

    _validate_load(v, s.load, grid)

    f = s.financial
    _check(v, "financial.analysis_years",
           isinstance(f.analysis_years, int) and f.analysis_years >= 1,
           "analysis_years must be an integer >= 1")
    for fld in ("discount_rate", "inflation_rate", "electricity_escalation"):
        _check(v, f"financial.{fld}", -0.5 <= getattr(f, fld) <= 1.0,
               f"{fld} must be in [-0.5, 1]")

    if s.tariff.grid != grid:
        v.append(Violation("tariff", "tariff expanded on a different grid"))

    if s.outage is not None:
        o = s.outage
        _check(v, "outage.start_step",
               0 <= o.start_step < o.end_step <= grid.horizon_steps,
               "need 0 <= start_step < end_step <= horizon_steps")
        if isinstance(o.critical_load, TimeSeries):
            _series_ok(v, "outage.critical_load", o.critical_load, grid, KW)
        elif o.critical_load is not None:
            _check(v, "outage.critical_load", 0 <= o.critical_load <= 1,
                   "critical load fraction must be in [0, 1]")

    if s.spinning_reserve is not None:
        _series_ok(v, "spinning_reserve", s.spinning_reserve, grid, KW)
    if s.emission_factors is not None:
        _series_ok(v, "emission_factors", s.emission_factors, grid, KG_PER_KWH)

    _check(v, "analysis_type", s.analysis_type in (FINANCIAL, RESILIENCE),
           f"unknown analysis_type {s.analysis_type!r}")
    if s.analysis_type == RESILIENCE:
        _check(v, "analysis_type", s.outage is not None,
               "resilience analysis requires an outage")
    return v


# ---------------------------------------------------------- JSON round-trip


class ScenarioParseError(ValueError):
    """Structural problems found while reading a scenario document."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


_TECH_SECTIONS = {
    # section key -> per-kind defaults
    "PV": dict(dispatchable=False, production_source="synthetic:solar",
               can_net_meter=True, can_export=True),
    "Wind": dict(dispatchable=False, production_source="synthetic:wind",
                 can_net_meter=True, can_export=True),
    "Generator": dict(dispatchable=True, production_source="generator",
                      can_net_meter=False, can_export=False),
}

_TECH_FIELDS = (
    "class_name", "dispatchable", "cost_per_kw", "om_fixed", "om_variable",
    "fuel_slope", "fuel_intercept", "fuel_available", "min_kw", "max_kw",
    "min_turndown", "production_source", "can_net_meter", "can_export",
    "can_charge_storage", "itc_fraction", "rebate_per_kw", "rebate_cap",
    "pbi_per_kwh", "pbi_cap",
)

_STORAGE_FIELDS = (
    "cost_per_kw", "cost_per_kwh", "round_trip_efficiency", "soc_min",
    "soc_init", "min_kw", "max_kw", "min_kwh", "max_kwh", "allowed_chargers",
)

_FINANCIAL_FIELDS = (
    "analysis_years", "discount_rate", "inflation_rate", "electricity_escalation",
)

_SITE_FIELDS = (
    "time_steps_per_hour", "horizon_steps", "analysis_type",
    "spinning_reserve_kw", "emission_factors_kg_per_kwh",
)

_LOAD_FIELDS = (
    "mode", "building_type", "city", "annual_kwh", "monthly_kwh", "series_kw",
    "components", "critical_load_fraction", "critical_series_kw",
    "outage_start_time_step", "outage_end_time_step",
    "outage_critical_load_fraction", "outage_critical_series_kw",
)

_TARIFF_FIELDS = ("urdb_response", "net_metering_limit_kw", "wholesale_rate")

_SECTION_KEYS = ("Site", "LoadProfile", "PV", "Wind", "Generator",
                 "Storage", "ElectricTariff", "Financial")


def _get(section: dict, key: str, default=None):
    return section[key] if key in section else default


def _unknown_fields(errs, section, known, label):
    for u in sorted(set(section) - set(known)):
        errs.append(Violation(f"{label}.{u}", "unknown field"))


def parse_scenario(doc: dict) -> Scenario:
    """Build a Scenario from a nested document; structural errors raise
    ScenarioParseError with per-field paths."""
    errs: list = []
    if not isinstance(doc, dict):
        raise ScenarioParseError([Violation("$", "document must be an object")])

    for key in sorted(set(doc) - set(_SECTION_KEYS)):
        errs.append(Violation(key, "unknown section"))

    def section_dict(key):
        sec = doc.get(key)
        if sec is None or isinstance(sec, dict):
            return sec
        errs.append(Violation(key, "section must be an object"))
        return {}

    site = section_dict("Site") or {}
    _unknown_fields(errs, site, _SITE_FIELDS, "Site")
    try:
        steps_per_hour = int(_get(site, "time_steps_per_hour", 1))
    except (TypeError, ValueError):
        steps_per_hour = -1
    if steps_per_hour not in VALID_STEPS_PER_HOUR:
        raise ScenarioParseError(errs + [Violation(
            "Site.time_steps_per_hour",
            f"must be one of {VALID_STEPS_PER_HOUR}")])
    try:
        horizon = int(_get(site, "horizon_steps", 8760 * steps_per_hour))
    except (TypeError, ValueError):
        horizon = 0
    if horizon <= 0:
        raise ScenarioParseError(
            errs + [Violation("Site.horizon_steps", "must be > 0")])
    grid = TimeGrid(steps_per_hour, horizon)

    def series(path, values, unit):
        try:
            return TimeSeries(grid, values, unit)
        except ValueError as exc:
            errs.append(Violation(path, str(exc)))
            return None

    # load profile
    lp = section_dict("LoadProfile")
    if lp is None:
        errs.append(Violation("LoadProfile", "section is required"))
        lp = {}
    _unknown_fields(errs, lp, _LOAD_FIELDS, "LoadProfile")
    load_kwargs = dict(
        mode=_get(lp, "mode", REFERENCE),
        building_type=_get(lp, "building_type", "flat"),
        city=_get(lp, "city", ""),
        annual_kwh=_get(lp, "annual_kwh"),
        monthly_kwh=tuple(lp["monthly_kwh"]) if _get(lp, "monthly_kwh") else None,
        critical_fraction=float(_get(lp, "critical_load_fraction", 0.5)),
    )
    if _get(lp, "series_kw") is not None:
        load_kwargs["series"] = series("LoadProfile.series_kw", lp["series_kw"], KW)
    if _get(lp, "components") is not None:
        load_kwargs["components"] = tuple(
            (str(b), float(w)) for b, w in lp["components"])
    if _get(lp, "critical_series_kw") is not None:
        load_kwargs["critical_series"] = series(
            "LoadProfile.critical_series_kw", lp["critical_series_kw"], KW)
    try:
        load = LoadSpec(**load_kwargs)
    except ValueError as exc:
        errs.append(Violation("LoadProfile", str(exc)))
        load = LoadSpec()

    # outage lives with the load profile
    outage = None
    if _get(lp, "outage_start_time_step") is not None:
        crit = None
        if _get(lp, "outage_critical_series_kw") is not None:
            crit = series("LoadProfile.outage_critical_series_kw",
                          lp["outage_critical_series_kw"], KW)
        elif _get(lp, "outage_critical_load_fraction") is not None:
            crit = float(lp["outage_critical_load_fraction"])
        outage = OutageSpec(
            start_step=int(lp["outage_start_time_step"]),
            end_step=int(_get(lp, "outage_end_time_step", -1)),
            critical_load=crit,
        )

    # techs
    techs = []
    for key, defaults in _TECH_SECTIONS.items():
        section = section_dict(key)
        if section is None:
            continue
        kwargs = dict(defaults)
        for fld in _TECH_FIELDS:
            if fld in section:
                kwargs[fld] = section[fld]
        kwargs.setdefault("class_name", key)
        unknown = set(section) - set(_TECH_FIELDS)
        for u in sorted(unknown):
            errs.append(Violation(f"{key}.{u}", "unknown field"))
        try:
            techs.append(TechSpec(name=key.lower(), **kwargs))
        except (TypeError, ValueError) as exc:
            errs.append(Violation(key, str(exc)))

    storage = None
    if "Storage" in doc:
        section = section_dict("Storage") or {}
        kwargs = {f: section[f] for f in _STORAGE_FIELDS if f in section}
        if isinstance(kwargs.get("allowed_chargers"), list):
            kwargs["allowed_chargers"] = tuple(kwargs["allowed_chargers"])
        unknown = set(section) - set(_STORAGE_FIELDS)
        for u in sorted(unknown):
            errs.append(Violation(f"Storage.{u}", "unknown field"))
        try:
            storage = StorageSpec(**kwargs)
        except (TypeError, ValueError) as exc:
            errs.append(Violation("Storage", str(exc)))

    # tariff
    et = section_dict("ElectricTariff")
    if et is not None:
        _unknown_fields(errs, et, _TARIFF_FIELDS, "ElectricTariff")
    tariff = None
    if et is None or "urdb_response" not in et:
        errs.append(Violation("ElectricTariff.urdb_response",
                              "a rate document is required"))
    else:
        try:
            tariff = parse_urdb(
                et["urdb_response"], grid,
                net_metering_limit_kw=float(_get(et, "net_metering_limit_kw", 0.0)),
                wholesale_rate=float(_get(et, "wholesale_rate", 0.0)),
            )
        except ValueError as exc:
            errs.append(Violation("ElectricTariff.urdb_response", str(exc)))

    fin = section_dict("Financial") or {}
    _unknown_fields(errs, fin, _FINANCIAL_FIELDS, "Financial")
    kwargs = {f: fin[f] for f in _FINANCIAL_FIELDS if f in fin}
    try:
        if "analysis_years" in kwargs:
            kwargs["analysis_years"] = int(kwargs["analysis_years"])
        financial = FinancialSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        errs.append(Violation("Financial", str(exc)))
        financial = FinancialSpec()

    spinning = None
    if _get(site, "spinning_reserve_kw") is not None:
        spinning = series("Site.spinning_reserve_kw",
                          site["spinning_reserve_kw"], KW)
    emissions = None
    if _get(site, "emission_factors_kg_per_kwh") is not None:
        emissions = series("Site.emission_factors_kg_per_kwh",
                           site["emission_factors_kg_per_kwh"], KG_PER_KWH)

    if errs or tariff is None:
        raise ScenarioParseError(errs)

    return Scenario(
        grid=grid,
        tariff=tariff,
        load=load,
        techs=tuple(techs),
        storage=storage,
        financial=financial,
        outage=outage,
        spinning_reserve=spinning,
        emission_factors=emissions,
        analysis_type=str(_get(site, "analysis_type", FINANCIAL)),
    )


def _tech_to_section(t: TechSpec):
    key = "PV" if t.name == "pv" else t.name.capitalize()
    defaults = _TECH_SECTIONS.get(key, {})
    blank = TechSpec(name=t.name)
    out = {}
    for fld in _TECH_FIELDS:
        val = getattr(t, fld)
        base = key if fld == "class_name" else defaults.get(fld, getattr(blank, fld))
        if val != base:
            out[fld] = val
    return key, out


def scenario_to_doc(s: Scenario) -> dict:
    """Serialize a Scenario to its document form.

    ``parse_scenario(scenario_to_doc(s))`` equals ``s`` for any scenario
    whose techs are the document kinds (pv, wind, generator).
    """
    site: dict = {
        "time_steps_per_hour": s.grid.steps_per_hour,
        "horizon_steps": s.grid.horizon_steps,
    }
    if s.analysis_type != FINANCIAL:
        site["analysis_type"] = s.analysis_type
    if s.spinning_reserve is not None:
        site["spinning_reserve_kw"] = [float(x) for x in s.spinning_reserve.values]
    if s.emission_factors is not None:
        site["emission_factors_kg_per_kwh"] = [
            float(x) for x in s.emission_factors.values]

    lp: dict = {"mode": s.load.mode}
    if s.load.building_type != "flat":
        lp["building_type"] = s.load.building_type
    if s.load.city:
        lp["city"] = s.load.city
    if s.load.annual_kwh is not None:
        lp["annual_kwh"] = s.load.annual_kwh
    if s.load.monthly_kwh is not None:
        lp["monthly_kwh"] = list(s.load.monthly_kwh)
    if s.load.series is not None:
        lp["series_kw"] = [float(x) for x in s.load.series.values]
    if s.load.components:
        lp["components"] = [[b, w] for b, w in s.load.components]
    lp["critical_load_fraction"] = s.load.critical_fraction
    if s.load.critical_series is not None:
        lp["critical_series_kw"] = [float(x) for x in s.load.critical_series.values]
    if s.outage is not None:
        lp["outage_start_time_step"] = s.outage.start_step
        lp["outage_end_time_step"] = s.outage.end_step
        if isinstance(s.outage.critical_load, TimeSeries):
            lp["outage_critical_series_kw"] = [
                float(x) for x in s.outage.critical_load.values]
        elif s.outage.critical_load is not None:
            lp["outage_critical_load_fraction"] = s.outage.critical_load

    doc: dict = {"Site": site, "LoadProfile": lp}

    for t in s.techs:
        key, section = _tech_to_section(t)
        doc[key] = section

    if s.storage is not None:
        blank = StorageSpec()
        section = {}
        for fld in _STORAGE_FIELDS:
            val = getattr(s.storage, fld)
            if val != getattr(blank, fld):
                section[fld] = list(val) if isinstance(val, tuple) else val
        doc["Storage"] = section

    doc["ElectricTariff"] = {"urdb_response": urdb_to_doc(s.tariff)}
    if s.tariff.net_metering_limit_kw:
        doc["ElectricTariff"]["net_metering_limit_kw"] = s.tariff.net_metering_limit_kw
    if s.tariff.wholesale_rate:
        doc["ElectricTariff"]["wholesale_rate"] = s.tariff.wholesale_rate

    blank_fin = FinancialSpec()
    fin = {f: getattr(s.financial, f) for f in _FINANCIAL_FIELDS
           if getattr(s.financial, f) != getattr(blank_fin, f)}
    if fin:
        doc["Financial"] = fin
    return doc
