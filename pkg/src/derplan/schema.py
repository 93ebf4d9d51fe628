"""Machine-readable description of the scenario document.

Served by the HTTP help endpoint and checked in under docs/ so clients can
validate requests offline.  The shape mirrors what ``parse_scenario``
accepts; the rate document under ElectricTariff.urdb_response follows the
URDB v7 subset the tariff parser understands.
"""

from __future__ import annotations

_number = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_fraction = {"type": "number", "minimum": 0, "maximum": 1}
_series = {"type": "array", "items": {"type": "number"}}

_TECH_PROPERTIES = {
    "class_name": {"type": "string"},
    "dispatchable": {"type": "boolean"},
    "cost_per_kw": _nonneg,
    "om_fixed": _nonneg,
    "om_variable": _nonneg,
    "fuel_slope": _nonneg,
    "fuel_intercept": _nonneg,
    "fuel_available": _nonneg,
    "min_kw": _nonneg,
    "max_kw": _nonneg,
    "min_turndown": _fraction,
    "production_source": {
        "type": "string",
        "description": "grid | generator | synthetic:<name> | "
                       "fixture:<path> | remote:<url>",
    },
    "can_net_meter": {"type": "boolean"},
    "can_export": {"type": "boolean"},
    "can_charge_storage": {"type": "boolean"},
    "itc_fraction": _fraction,
    "rebate_per_kw": _nonneg,
    "rebate_cap": _nonneg,
    "pbi_per_kwh": _nonneg,
    "pbi_cap": _nonneg,
}

SCENARIO_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "Scenario",
    "type": "object",
    "required": ["LoadProfile", "ElectricTariff"],
    "additionalProperties": False,
    "properties": {
        "Site": {
            "type": "object",
            "properties": {
                "time_steps_per_hour": {"enum": [1, 2, 4]},
                "horizon_steps": {"type": "integer", "minimum": 1},
                "analysis_type": {"enum": ["financial", "resilience"]},
                "spinning_reserve_kw": _series,
                "emission_factors_kg_per_kwh": _series,
            },
        },
        "LoadProfile": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["reference", "reference_scaled",
                                  "user_series", "hybrid"]},
                "building_type": {"enum": ["flat", "office", "retail"]},
                "city": {"type": "string"},
                "annual_kwh": _nonneg,
                "monthly_kwh": {"type": "array", "minItems": 12,
                                "maxItems": 12, "items": _nonneg},
                "series_kw": _series,
                "components": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 2, "maxItems": 2},
                },
                "critical_load_fraction": _fraction,
                "critical_series_kw": _series,
                "outage_start_time_step": {"type": "integer", "minimum": 0},
                "outage_end_time_step": {"type": "integer", "minimum": 0},
                "outage_critical_load_fraction": _fraction,
                "outage_critical_series_kw": _series,
            },
        },
        "PV": {"type": "object", "properties": _TECH_PROPERTIES},
        "Wind": {"type": "object", "properties": _TECH_PROPERTIES},
        "Generator": {"type": "object", "properties": _TECH_PROPERTIES},
        "Storage": {
            "type": "object",
            "properties": {
                "cost_per_kw": _nonneg,
                "cost_per_kwh": _nonneg,
                "round_trip_efficiency": _fraction,
                "soc_min": _fraction,
                "soc_init": _fraction,
                "min_kw": _nonneg,
                "max_kw": _nonneg,
                "min_kwh": _nonneg,
                "max_kwh": _nonneg,
                "allowed_chargers": {
                    "anyOf": [
                        {"const": "all"},
                        {"type": "array", "items": {"type": "string"}},
                    ],
                },
            },
        },
        "ElectricTariff": {
            "type": "object",
            "required": ["urdb_response"],
            "properties": {
                "urdb_response": {
                    "type": "object",
                    "description": "URDB v7 subset: energyratestructure, "
                                   "energyweekday/weekendschedule, "
                                   "demandratestructure + schedules, "
                                   "flatdemandstructure + flatdemandmonths, "
                                   "fixedchargefirstmeter, fixedchargeunits, "
                                   "mincharge, minchargeunits",
                },
                "net_metering_limit_kw": _nonneg,
                "wholesale_rate": _nonneg,
            },
        },
        "Financial": {
            "type": "object",
            "properties": {
                "analysis_years": {"type": "integer", "minimum": 1},
                "discount_rate": _number,
                "inflation_rate": _number,
                "electricity_escalation": _number,
            },
        },
    },
}
