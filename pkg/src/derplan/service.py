"""HTTP job service: submit a scenario, poll for results.

POST /v1/job validates the document up front (400 with the violation
list, nothing persisted) and queues it; worker threads claim jobs in
submission order and walk them Queued -> Validating -> Solving ->
Postprocessing -> Complete or Error.  Transitions are forward-only and a
job's results row is written in the same transaction that marks it
Complete, so a Complete job always has a readable document and a crash
mid-run leaves Error, never a half-written row.

The results body is the byte-for-byte output of pipeline.results_json,
identical to what the command-line runner writes for the same scenario.
"""

from __future__ import annotations

import argparse
import json
import os
import sqlite3
import threading
import time
import uuid
from contextlib import asynccontextmanager, closing

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .loads import BUILDING_TYPES, REFERENCE, REFERENCE_SCALED, LoadSpec, build_load
from .milp import SolveConfig
from .pipeline import SolveFailed, finalize, results_json, solve_pair
from .production import set_fixture_dir
from .scenario import (ScenarioParseError, Violation, parse_scenario,
                       validate_scenario)
from .schema import SCENARIO_SCHEMA
from .timegrid import TimeGrid

QUEUED = "Queued"
VALIDATING = "Validating"
SOLVING = "Solving"
POSTPROCESSING = "Postprocessing"
COMPLETE = "Complete"
ERROR = "Error"

# Complete and Error share the top rank: both terminal, neither reachable
# from the other.
_STATE_RANK = {QUEUED: 0, VALIDATING: 1, SOLVING: 2, POSTPROCESSING: 3,
               COMPLETE: 4, ERROR: 4}

_NOT_IMPLEMENTED = ("/v1/job/{run_uuid}/proforma", "/v1/generator_efficiency",
                    "/v1/annual_kwh", "/v1/user/{user_uuid}/summary")


class JobStore:
    """Jobs and result blobs in one embedded sqlite database.

    Every method opens its own connection, so instances can be shared
    freely across worker threads; claim() serializes on the database
    write lock, which is what makes at-most-once pickup hold across
    workers (and across processes pointed at the same file).
    """

    def __init__(self, path):
        self._path = str(path)
        with closing(self._connect()) as cx, cx:
            cx.execute("""
                CREATE TABLE IF NOT EXISTS jobs (
                    seq        INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_uuid   TEXT NOT NULL UNIQUE,
                    state      TEXT NOT NULL,
                    message    TEXT NOT NULL DEFAULT '',
                    scenario   TEXT NOT NULL,
                    created_at REAL NOT NULL,
                    updated_at REAL NOT NULL)""")
            cx.execute("""
                CREATE TABLE IF NOT EXISTS results (
                    run_uuid TEXT PRIMARY KEY REFERENCES jobs(run_uuid),
                    body     TEXT NOT NULL)""")

    def _connect(self):
        return sqlite3.connect(self._path, timeout=30.0)

    def create(self, doc: dict) -> str:
        run_uuid = str(uuid.uuid4())
        now = time.time()
        with closing(self._connect()) as cx, cx:
            cx.execute(
                "INSERT INTO jobs (run_uuid, state, scenario, created_at,"
                " updated_at) VALUES (?, ?, ?, ?, ?)",
                (run_uuid, QUEUED, json.dumps(doc), now, now))
        return run_uuid

    def claim(self):
        """Oldest queued job -> Validating, atomically; None when idle."""
        with closing(self._connect()) as cx:
            try:
                cx.execute("BEGIN IMMEDIATE")
                row = cx.execute(
                    "SELECT seq, run_uuid, scenario FROM jobs WHERE state = ?"
                    " ORDER BY seq LIMIT 1", (QUEUED,)).fetchone()
                if row is not None:
                    cx.execute(
                        "UPDATE jobs SET state = ?, updated_at = ?"
                        " WHERE seq = ?",
                        (VALIDATING, time.time(), row[0]))
                cx.commit()
            except BaseException:
                cx.rollback()
                raise
        if row is None:
            return None
        return row[1], json.loads(row[2])

    def _transition(self, cx, run_uuid, state, message):
        row = cx.execute("SELECT state FROM jobs WHERE run_uuid = ?",
                         (run_uuid,)).fetchone()
        if row is None:
            raise KeyError(run_uuid)
        if _STATE_RANK[state] <= _STATE_RANK[row[0]]:
            raise ValueError(f"job is {row[0]}; cannot move back to {state}")
        cx.execute(
            "UPDATE jobs SET state = ?, message = ?, updated_at = ?"
            " WHERE run_uuid = ?", (state, message, time.time(), run_uuid))

    def advance(self, run_uuid: str, state: str, message: str = ""):
        with closing(self._connect()) as cx, cx:
            self._transition(cx, run_uuid, state, message)

    def complete(self, run_uuid: str, body: str):
        with closing(self._connect()) as cx, cx:
            cx.execute("INSERT INTO results (run_uuid, body) VALUES (?, ?)",
                       (run_uuid, body))
            self._transition(cx, run_uuid, COMPLETE, "")

    def fail(self, run_uuid: str, message: str):
        with closing(self._connect()) as cx, cx:
            self._transition(cx, run_uuid, ERROR, message)

    def status(self, run_uuid: str):
        """(state, message) or None when the uuid was never seen."""
        with closing(self._connect()) as cx:
            return cx.execute(
                "SELECT state, message FROM jobs WHERE run_uuid = ?",
                (run_uuid,)).fetchone()

    def result_body(self, run_uuid: str):
        with closing(self._connect()) as cx:
            row = cx.execute("SELECT body FROM results WHERE run_uuid = ?",
                             (run_uuid,)).fetchone()
        return None if row is None else row[0]


def run_job(store: JobStore, run_uuid: str, doc: dict, cfg: SolveConfig):
    """Drive one claimed job to Complete or Error."""
    try:
        s = parse_scenario(doc)
        violations = validate_scenario(s)
        if violations:
            store.fail(run_uuid, "; ".join(str(v) for v in violations))
            return
        store.advance(run_uuid, SOLVING)
        bau, opt, mo = solve_pair(s, cfg)
        store.advance(run_uuid, POSTPROCESSING)
        body = results_json(finalize(s, bau, opt, mo))
        store.complete(run_uuid, body)
    except SolveFailed as exc:
        store.fail(run_uuid, str(exc))
    except Exception as exc:  # job errors must never kill the worker
        store.fail(run_uuid, f"{type(exc).__name__}: {exc}")


def _worker_loop(store, cfg, stop: threading.Event):
    while not stop.is_set():
        claimed = store.claim()
        if claimed is None:
            stop.wait(0.05)
            continue
        run_uuid, doc = claimed
        run_job(store, run_uuid, doc, cfg)


def _violations_response(violations):
    return JSONResponse(status_code=400, content={
        "violations": [{"path": v.path, "message": v.message}
                       for v in violations]})


def create_app(db_path, workers: int = 2,
               solve_config: SolveConfig | None = None,
               fixture_dir: str | None = None) -> FastAPI:
    if fixture_dir is not None:
        set_fixture_dir(fixture_dir)
    store = JobStore(db_path)
    cfg = solve_config or SolveConfig()

    @asynccontextmanager
    async def lifespan(app):
        stop = threading.Event()
        threads = [
            threading.Thread(target=_worker_loop, args=(store, cfg, stop),
                             name=f"derplan-worker-{i}", daemon=True)
            for i in range(workers)]
        for t in threads:
            t.start()
        yield
        stop.set()
        for t in threads:
            t.join(timeout=10)

    app = FastAPI(title="derplan", lifespan=lifespan)
    app.state.store = store

    @app.post("/v1/job", status_code=201)
    async def post_job(request: Request):
        try:
            doc = await request.json()
        except ValueError:
            return JSONResponse(status_code=400, content={
                "violations": [{"path": "$",
                                "message": "body must be a JSON object"}]})
        try:
            s = parse_scenario(doc)
        except ScenarioParseError as exc:
            return _violations_response(exc.violations)
        except (TypeError, ValueError) as exc:
            return _violations_response(
                [Violation("$", f"malformed scenario value: {exc}")])
        violations = validate_scenario(s)
        if violations:
            return _violations_response(violations)
        return {"run_uuid": store.create(doc)}

    @app.get("/v1/job/{run_uuid}/results")
    def get_results(run_uuid: str):
        row = store.status(run_uuid)
        if row is None:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown run_uuid {run_uuid}"})
        state, message = row
        if state == COMPLETE:
            return Response(content=store.result_body(run_uuid),
                            media_type="application/json")
        out = {"run_uuid": run_uuid, "status": state}
        if state == ERROR and message:
            out["message"] = message
        return out

    @app.get("/v1/help")
    def get_help():
        return SCENARIO_SCHEMA

    @app.get("/v1/simulated_load")
    def simulated_load(doe_reference_name: str = "",
                       annual_kwh: float | None = None):
        if not doe_reference_name:
            return JSONResponse(status_code=400, content={
                "error": "doe_reference_name is required;"
                         f" expected one of {', '.join(BUILDING_TYPES)}"})
        if doe_reference_name not in BUILDING_TYPES:
            return JSONResponse(status_code=400, content={
                "error": f"unknown doe_reference_name {doe_reference_name!r};"
                         f" expected one of {', '.join(BUILDING_TYPES)}"})
        grid = TimeGrid(1, 8760)
        spec = LoadSpec(
            mode=REFERENCE if annual_kwh is None else REFERENCE_SCALED,
            building_type=doe_reference_name, annual_kwh=annual_kwh)
        values = build_load(spec, grid).values
        return {
            "doe_reference_name": doe_reference_name,
            "annual_kwh": float(values.sum() * grid.delta_hours),
            "min_kw": float(values.min()),
            "max_kw": float(values.max()),
            "mean_kw": float(values.mean()),
        }

    def not_implemented():
        return JSONResponse(status_code=501, content={
            "error": "endpoint not implemented; see /v1/help"})

    for path in _NOT_IMPLEMENTED:
        app.get(path)(not_implemented)

    return app


def _parse_args(argv):
    env = os.environ.get
    p = argparse.ArgumentParser(
        prog="derplan-service",
        description="HTTP job service for sizing-and-dispatch analyses.")
    p.add_argument("--host", default=env("DERPLAN_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(env("DERPLAN_PORT", "8000")))
    p.add_argument("--workers", type=int,
                   default=int(env("DERPLAN_WORKERS", "2")),
                   help="job worker threads")
    p.add_argument("--db", default=env("DERPLAN_DB", "derplan_jobs.sqlite3"),
                   help="job store path")
    p.add_argument("--time-limit", type=float,
                   default=float(env("DERPLAN_TIME_LIMIT", "0")) or None,
                   help="solver time limit in seconds per model")
    p.add_argument("--fixture-dir", default=env("DERPLAN_FIXTURE_DIR"),
                   help="base directory for fixture: production sources")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    cfg = SolveConfig(time_limit_s=args.time_limit) \
        if args.time_limit else SolveConfig()
    app = create_app(args.db, workers=args.workers, solve_config=cfg,
                     fixture_dir=args.fixture_dir)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
