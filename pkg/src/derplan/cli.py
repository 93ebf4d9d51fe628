"""Single-shot local runner: scenario file in, artifacts out.

Exit codes: 0 artifacts written, 2 bad scenario (violations on stderr),
3 solver failure (status recorded in results.json when requested).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .lpformat import write_lp
from .milp import SolveConfig
from .model import effective_load
from .pipeline import (
    SolveFailed,
    ValidationFailed,
    candidate_model,
    results_json,
    run_scenario,
)
from .scenario import ScenarioParseError, parse_scenario

EMITS = ("results-json", "dispatch-csv", "outage-csv", "lp-dump")

_META_KEYS = ("Financial", "ElectricTariff", "Storage", "Outage")


def _parse_args(argv):
    p = argparse.ArgumentParser(
        prog="derplan",
        description="Run one sizing-and-dispatch analysis from a scenario file.")
    p.add_argument("--scenario", required=True, help="scenario JSON document")
    p.add_argument("--out", default=".", help="directory for artifacts")
    p.add_argument("--emit", action="append", choices=EMITS, metavar="KIND",
                   help=f"artifact to write, repeatable; one of {', '.join(EMITS)}"
                        " (default: results-json)")
    p.add_argument("--mip-gap", type=float, default=None,
                   help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=None,
                   help="solver time limit in seconds")
    return p.parse_args(argv)


def _solver_config(args) -> SolveConfig:
    kw = {}
    if args.mip_gap is not None:
        kw["mip_gap_rel"] = args.mip_gap
    if args.time_limit is not None:
        kw["time_limit_s"] = args.time_limit
    return SolveConfig(**kw)


def dispatch_csv(doc: dict, s) -> str:
    H = s.grid.horizon_steps
    load = effective_load(s).values
    tech_keys = sorted(k for k in doc if k not in _META_KEYS)
    et = doc["ElectricTariff"]
    st = doc.get("Storage") or {}
    charge = st.get("charge_series_kw", [0.0] * H)
    discharge = st.get("discharge_series_kw", [0.0] * H)
    soc = st.get("soc_series_kwh", [0.0] * (H + 1))
    purchase = et["grid_purchase_series_kw"]
    exports = [0.0] * H
    for k in tech_keys:
        for h, v in enumerate(doc[k]["export_series_kw"]):
            exports[h] += v

    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["step", "load_kw",
                *(f"{k.lower()}_production_kw" for k in tech_keys),
                "charge_kw", "discharge_kw", "soc_kwh",
                "grid_purchase_kw", "export_kw"])
    for h in range(H):
        w.writerow([h, load[h],
                    *(doc[k]["production_series_kw"][h] for k in tech_keys),
                    charge[h], discharge[h], soc[h + 1],
                    purchase[h], exports[h]])
    return out.getvalue()


def outage_csv(doc: dict) -> str | None:
    survived = doc.get("Outage", {}).get("survived_steps")
    if survived is None:
        return None
    out = io.StringIO()
    out.write("start_step,survived_steps\n")
    for start, n in enumerate(survived):
        out.write(f"{start},{int(n)}\n")
    return out.getvalue()


def main(argv=None) -> int:
    args = _parse_args(argv)
    emits = args.emit or ["results-json"]
    outdir = Path(args.out)

    try:
        raw = json.loads(Path(args.scenario).read_text())
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"scenario is not valid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        s = parse_scenario(raw)
    except ScenarioParseError as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        return 2
    except (TypeError, ValueError) as exc:
        # a field with a hopeless type, e.g. a string where a list belongs
        print(f"malformed scenario value: {exc}", file=sys.stderr)
        return 2

    outdir.mkdir(parents=True, exist_ok=True)
    try:
        doc = run_scenario(s, _solver_config(args))
    except ValidationFailed as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        return 2
    except SolveFailed as exc:
        print(str(exc), file=sys.stderr)
        if "results-json" in emits:
            failure = {"status": exc.status, "stage": exc.which}
            (outdir / "results.json").write_text(
                json.dumps(failure, sort_keys=True, indent=2) + "\n")
        return 3

    if "results-json" in emits:
        (outdir / "results.json").write_text(results_json(doc))
    if "dispatch-csv" in emits:
        (outdir / "dispatch.csv").write_text(dispatch_csv(doc, s))
    if "outage-csv" in emits:
        text = outage_csv(doc)
        if text is None:
            print("no outage window in scenario; outage.csv not written",
                  file=sys.stderr)
        else:
            (outdir / "outage.csv").write_text(text)
    if "lp-dump" in emits:
        write_lp(candidate_model(s), outdir / "model.lp")
    return 0


if __name__ == "__main__":
    sys.exit(main())
