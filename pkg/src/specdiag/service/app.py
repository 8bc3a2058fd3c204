"""HTTP face of the diagnosis engine.

Run it with ``uvicorn specdiag.service:app``.  The CLI talks to these
endpoints too, by default through an in-process transport, so command
line and service behavior cannot drift apart.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bench import (
    BenchInputError,
    MaxGccPolicy,
    aggregate,
    render_aggregate_csv,
    render_records_csv,
    resolve_workers,
    run_bench_tasks,
)
from ..diagcore import InconsistentBackgroundError, SequentialProvider, run_diagnosis
from ..ingest import IngestError, gen_requirements, parse_dimacs, parse_kb, parse_requirements
from ..model import ConstraintSet, DiagnosisTask, VariableTable
from ..oracle import (
    OracleGuardError,
    all_minimal_conflicts,
    all_minimal_diagnoses,
    preferred_diagnosis,
)
from ..sat import SolverError, check_union
from ..speculate import SpeculativeProvider
from . import schemas

_INPUT_ERRORS = (
    IngestError,
    OracleGuardError,
    BenchInputError,
    InconsistentBackgroundError,
    SolverError,
    ValueError,
)


def _load_kb(kb: str, kb_format: str) -> tuple[VariableTable, ConstraintSet]:
    if kb_format == "dimacs":
        return parse_dimacs(kb)
    return parse_kb(kb)


def create_app() -> FastAPI:
    app = FastAPI(title="specdiag", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/check", response_model=schemas.CheckResponse)
    def check(request: schemas.CheckRequest) -> schemas.CheckResponse:
        try:
            table, background = _load_kb(request.kb, request.kb_format)
            parts = [background]
            if request.requirements is not None:
                parts.append(parse_requirements(request.requirements, table))
            verdict = check_union(parts)
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.CheckResponse(consistent=verdict.consistent)

    @app.post("/diagnose", response_model=schemas.DiagnoseResponse)
    def diagnose(request: schemas.DiagnoseRequest) -> schemas.DiagnoseResponse:
        trace_lines: list[str] = []
        sink = trace_lines.append if request.trace else None
        try:
            table, background = _load_kb(request.kb, request.kb_format)
            requirements = parse_requirements(request.requirements, table)
            task = DiagnosisTask(requirements=requirements, background=background)
            if request.parallel:
                cores = request.cores or (os.cpu_count() or 1)
                max_gcc = request.max_gcc if request.max_gcc is not None else max(cores - 1, 0)
                provider = SpeculativeProvider(
                    workers=resolve_workers(cores),
                    max_gcc=max_gcc,
                    diagnostics=sink,
                )
            else:
                provider = SequentialProvider()
            try:
                diagnosis, stats = run_diagnosis(task, provider)
            finally:
                close = getattr(provider, "close", None)
                if close is not None:
                    close()
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.DiagnoseResponse(
            consistent=diagnosis.empty,
            diagnosis=list(diagnosis.removed.ids()),
            retained=list(diagnosis.retained.ids()),
            solver_calls=stats.solver_calls,
            lookup_hits=stats.lookup_hits,
            wall_s=stats.wall_s,
            trace=trace_lines,
        )

    @app.post("/oracle", response_model=schemas.OracleResponse)
    def oracle(request: schemas.OracleRequest) -> schemas.OracleResponse:
        try:
            table, background = _load_kb(request.kb, request.kb_format)
            requirements = parse_requirements(request.requirements, table)
            task = DiagnosisTask(requirements=requirements, background=background)
            conflicts = all_minimal_conflicts(task, request.max_n)
            diagnoses = all_minimal_diagnoses(task, request.max_n)
            preferred = preferred_diagnosis(task, request.max_n)
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.OracleResponse(
            conflicts=[list(c.ids()) for c in conflicts],
            diagnoses=[list(d.ids()) for d in diagnoses],
            preferred=list(preferred.ids()),
        )

    @app.post("/gen-reqs", response_model=schemas.GenReqsResponse)
    def gen_reqs(request: schemas.GenReqsRequest) -> schemas.GenReqsResponse:
        try:
            table, background = _load_kb(request.kb, request.kb_format)
            specs = gen_requirements(
                table,
                background,
                request.count,
                (request.card_min, request.card_max),
                request.seed,
            )
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        files = [
            schemas.GeneratedFile(
                name=f"req_{i}.txt", cardinality=spec.cardinality, content=spec.to_text()
            )
            for i, spec in enumerate(specs, start=1)
        ]
        return schemas.GenReqsResponse(files=files)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(request: schemas.BenchRequest) -> schemas.BenchResponse:
        try:
            table, background = _load_kb(request.kb, request.kb_format)
            policy = MaxGccPolicy.parse(request.maxgcc)
            tasks = []
            parse_errors = []
            for item in request.tasks:
                try:
                    tasks.append((item.name, parse_requirements(item.content, table)))
                except IngestError as exc:
                    parse_errors.append(schemas.BenchErrorModel(task=item.name, message=str(exc)))
            result = run_bench_tasks(
                table,
                background,
                tasks,
                request.cores,
                policy,
                request.repetitions,
                request.latency_s,
            )
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        records = [
            schemas.BenchRecordModel(
                task=r.task,
                card=r.card,
                cores=r.cores,
                maxgcc=r.maxgcc,
                run=r.run,
                wall_s=r.wall_s,
                solver_calls=r.solver_calls,
                lookup_hits=r.lookup_hits,
                diagnosis=list(r.diagnosis),
            )
            for r in result.records
        ]
        rows = [
            schemas.AggregateRowModel(
                card=row.card,
                cores=row.cores,
                r_mean=row.r_mean,
                speedup=row.speedup,
                efficiency=row.efficiency,
                efficiency_alt=row.efficiency_alt,
            )
            for row in (aggregate(result.records) if result.records else [])
        ]
        return schemas.BenchResponse(
            records=records,
            aggregate=rows,
            raw_csv=render_records_csv(result.records) if result.records else "",
            aggregate_csv=render_aggregate_csv(result.records) if result.records else "",
            errors=parse_errors
            + [schemas.BenchErrorModel(task=e.task, message=e.message) for e in result.errors],
        )

    return app


app = create_app()
