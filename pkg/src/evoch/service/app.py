"""FastAPI wrapper around the solver.

Each submitted run gets its own worker thread; status and diagnostics are
kept in memory for the lifetime of the process.
"""

from __future__ import annotations

import math
import threading
import uuid

from fastapi import FastAPI, HTTPException

from ..config import load_config, output_directory
from ..errors import ConfigurationError, EvochError
from ..io import CSV_COLUMNS
from .. import scenario
from .schemas import (
    AdmissibilityResponse,
    DiagnosticsRow,
    ParseRequest,
    ParseResponse,
    RunConfig,
    RunRequest,
    RunStatus,
    VerifyResponse,
    VerifyRequest,
)

app = FastAPI(title="evoch", version="0.1.0")

_runs = {}
_lock = threading.Lock()


def _json_float(x):
    # nan/inf are not valid JSON
    return x if math.isfinite(x) else None


def _execute(run_id, cfg, out_dir):
    with _lock:
        _runs[run_id]["status"].state = "running"
    try:
        result = scenario.run(cfg, out_dir)
    except (ConfigurationError, EvochError) as exc:
        with _lock:
            st = _runs[run_id]["status"]
            st.state, st.exit_status, st.error = "failed", 1, str(exc)
        return
    with _lock:
        entry = _runs[run_id]
        entry["records"] = result.records
        st = entry["status"]
        st.state = "finished" if result.status == 0 else "failed"
        st.exit_status = result.status
        st.steps_completed = max(len(result.records) - 1, 0)
        st.error = result.error


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/parse", response_model=ParseResponse)
def parse(req: ParseRequest):
    try:
        cfg = load_config(req.config)
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return ParseResponse(resolved=cfg.resolved())


@app.post("/runs", response_model=RunStatus, status_code=202)
def submit_run(req: RunRequest):
    # the run goes to a worker thread so the request returns immediately
    cfg = req.config
    if req.out_dir is not None:
        cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"directory": req.out_dir})})
    out = output_directory(cfg)
    run_id = uuid.uuid4().hex[:12]
    status = RunStatus(run_id=run_id, state="queued", out_dir=str(out))
    with _lock:
        _runs[run_id] = {"status": status, "records": []}
    threading.Thread(target=_execute, args=(run_id, cfg, out), daemon=True).start()
    return status


def _entry(run_id):
    with _lock:
        entry = _runs.get(run_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
    return entry


@app.get("/runs/{run_id}", response_model=RunStatus)
def run_status(run_id: str):
    return _entry(run_id)["status"]


@app.get("/runs/{run_id}/diagnostics", response_model=list[DiagnosticsRow])
def run_diagnostics(run_id: str):
    entry = _entry(run_id)
    rows = []
    for n, rec in enumerate(entry["records"]):
        d = {c: _json_float(getattr(rec, c)) for c in CSV_COLUMNS[1:]}
        rows.append(DiagnosticsRow(step=n, **d))
    return rows


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest):
    try:
        rows, status = scenario.verify(req.config, tuple(req.which))
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return VerifyResponse(rows=rows, exit_status=status, table=scenario.format_verify_table(rows))


@app.post("/admissibility", response_model=AdmissibilityResponse)
def admissibility(cfg: RunConfig):
    try:
        rep = scenario.admissibility(cfg)
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return AdmissibilityResponse(**rep.as_dict())
