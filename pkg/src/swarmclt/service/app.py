"""HTTP service exposing runs, Monte Carlo experiments, and analyses.

The command line talks to this app either in-process (ASGI transport) or over
the network; everything the CLI can do maps to one endpoint here. Relative
output paths resolve under the SWARMCLT_OUT root (default: the working
directory). Monte Carlo jobs can run synchronously or in a background thread
pool polled via /jobs/{job_id}.
"""

import csv
import dataclasses
import io
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import serialize
from .._version import VERSION
from ..clt_stats import constraint_grid
from ..diagnostics import qq_data
from ..experiments import (
    EmptyCohortError,
    SpecError,
    analyze_trajectory,
    run_experiment,
    spec_from_dict,
)
from ..objectives import UnknownObjectiveError, lookup
from ..regime import detect_stagnation, classify, label_to_dict
from ..swarm_core import ParamsError, StepError, run
from .schemas import (
    AnalyzeRequest,
    JobStatus,
    McRequest,
    QQRequest,
    QQResponse,
    RunRequest,
    RunResponse,
)

OUT_ENV = "SWARMCLT_OUT"


def out_root() -> str:
    return os.environ.get(OUT_ENV, ".")


def resolve_out(path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(out_root(), path)


def create_app() -> FastAPI:
    app = FastAPI(title="swarm inference service", version=VERSION)
    app.state.jobs = {}
    app.state.jobs_lock = threading.Lock()
    app.state.executor = ThreadPoolExecutor(max_workers=int(os.environ.get(
        "SWARMCLT_JOB_WORKERS", "2")))

    def _job_set(job_id: str, **fields) -> None:
        with app.state.jobs_lock:
            app.state.jobs[job_id].update(fields)

    @app.exception_handler(ParamsError)
    @app.exception_handler(SpecError)
    @app.exception_handler(UnknownObjectiveError)
    async def _validation_error(_, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": VERSION}

    @app.post("/run", response_model=RunResponse)
    def run_endpoint(req: RunRequest) -> RunResponse:
        try:
            params = req.params.to_params()
            f = lookup(req.objective)
        except (ParamsError, UnknownObjectiveError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            traj = run(params, f, run_id=req.run_id)
        except (ParamsError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except StepError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        # the swarm-wide best is the best personal best, not the best position
        pb_vals = f(traj.pbest[-1])
        best_i = int(np.argmin(pb_vals))
        path = None
        if req.out:
            path = resolve_out(req.out)
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            if req.format == "binary":
                serialize.write_trajectory_binary(traj, path)
            else:
                serialize.write_trajectory_csv(traj, path)
        classification = None
        if req.classify:
            classification = []
            for i in range(traj.swarm_size):
                label = classify(traj, i, burn_in=min(500, max(1, traj.n_iters - 1)))
                rep = detect_stagnation(traj, i)
                classification.append(label_to_dict(i, label, rep.stagnant_since))
        return RunResponse(
            run_id=traj.run_id, objective=traj.objective,
            swarm_size=traj.swarm_size, iterations=traj.n_iters,
            exit_count=traj.exit_count,
            best=[float(v) for v in traj.pbest[-1, best_i]],
            best_value=float(pb_vals[best_i]),
            trajectory_path=path, digest=serialize.trajectory_digest(traj),
            classification=classification,
        )

    def _run_job(job_id: str, spec, threads: int) -> None:
        _job_set(job_id, status="running")
        try:
            result = run_experiment(spec, threads=threads)
            _job_set(job_id, status="done", result=result.to_dict())
        except EmptyCohortError as exc:
            _job_set(job_id, status="error",
                     error=f"{exc} (diagnostics: {exc.diagnostics})")
        except Exception as exc:
            _job_set(job_id, status="error", error=str(exc))

    @app.post("/mc", response_model=JobStatus)
    def mc_endpoint(req: McRequest) -> JobStatus:
        try:
            spec = spec_from_dict(req.spec.to_spec_dict())
        except SpecError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if spec.output_dir:
            spec = dataclasses.replace(spec, output_dir=resolve_out(spec.output_dir))
        job_id = uuid.uuid4().hex
        with app.state.jobs_lock:
            app.state.jobs[job_id] = {"status": "queued", "error": None, "result": None}
        if req.wait:
            _run_job(job_id, spec, req.threads)
        else:
            app.state.executor.submit(_run_job, job_id, spec, req.threads)
        with app.state.jobs_lock:
            snap = dict(app.state.jobs[job_id])
        if req.wait and snap["status"] == "error":
            raise HTTPException(status_code=500, detail=snap["error"])
        return JobStatus(job_id=job_id, **snap)

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_endpoint(job_id: str) -> JobStatus:
        with app.state.jobs_lock:
            snap = app.state.jobs.get(job_id)
            if snap is None:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
            snap = dict(snap)
        return JobStatus(job_id=job_id, **snap)

    @app.post("/analyze")
    def analyze_endpoint(req: AnalyzeRequest) -> dict:
        path = resolve_out(req.trajectory_path)
        if not os.path.exists(path):
            raise HTTPException(status_code=422, detail=f"no trajectory at {path}")
        try:
            traj = serialize.load_trajectory(path)
        except serialize.FormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            return analyze_trajectory(traj, req.analysis, req.analysis_params)
        except (SpecError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/regions", response_class=PlainTextResponse)
    def regions_endpoint(grid: int = Query(default=200, ge=1, le=2000)) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["omega", "c", "a3_ok", "b2_ok"])
        for omega, c, a3_ok, b2_ok in constraint_grid(grid):
            w.writerow([repr(omega), repr(c),
                        "true" if a3_ok else "false",
                        "true" if b2_ok else "false"])
        return buf.getvalue()

    @app.post("/qqplot", response_model=QQResponse)
    def qqplot_endpoint(req: QQRequest) -> QQResponse:
        if req.values is not None:
            values = [float(v) for v in req.values]
        elif req.csv_path:
            path = resolve_out(req.csv_path)
            if not os.path.exists(path):
                raise HTTPException(status_code=422, detail=f"no CSV at {path}")
            values = _statistic_column(path, req.statistic)
        else:
            raise HTTPException(status_code=422, detail="provide values or csv_path")
        try:
            qq = qq_data(values)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return QQResponse(
            qq_corr=qq.qq_corr,
            theoretical=[float(t) for t in qq.theoretical],
            sample=[float(s) for s in qq.sample],
            svg=serialize.qq_svg(qq) if req.svg else None,
        )

    return app


def _statistic_column(path: str, statistic) -> list:
    """Pull one statistic's values out of an h_stats.csv-style file.

    Accepts either the three-column layout (statistic, index, value) or any
    CSV with a numeric column named by `statistic` (default: last column).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise HTTPException(status_code=422, detail=f"{path} has no data rows")
    header, data = rows[0], rows[1:]
    if header[:2] == ["statistic", "index"]:
        names = sorted({r[0] for r in data})
        if statistic is None:
            if len(names) > 1:
                raise HTTPException(
                    status_code=422,
                    detail=f"multiple statistics in {path}: {names}; pick one")
            statistic = names[0]
        vals = [float(r[2]) for r in data if r[0] == statistic]
        if not vals:
            raise HTTPException(
                status_code=422,
                detail=f"statistic {statistic!r} not in {path}; have {names}")
        return vals
    col = len(header) - 1
    if statistic is not None:
        if statistic not in header:
            raise HTTPException(
                status_code=422,
                detail=f"column {statistic!r} not in {path}; have {header}")
        col = header.index(statistic)
    try:
        return [float(r[col]) for r in data]
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=f"non-numeric column: {exc}")


app = create_app()
