"""Request and response bodies for the diagnosis service.

The service is stateless: every request carries the KB and requirement
texts it wants processed, so one instance can serve many clients and
never touches the server's file system.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

KbFormat = Literal["kb", "dimacs"]


class CheckRequest(BaseModel):
    kb: str
    kb_format: KbFormat = "kb"
    requirements: str | None = None


class CheckResponse(BaseModel):
    consistent: bool


class DiagnoseRequest(BaseModel):
    kb: str
    kb_format: KbFormat = "kb"
    requirements: str
    parallel: bool = False
    cores: int | None = Field(default=None, ge=1)
    max_gcc: int | None = Field(default=None, ge=0)
    trace: bool = False


class DiagnoseResponse(BaseModel):
    consistent: bool
    diagnosis: list[str]
    retained: list[str]
    solver_calls: int
    lookup_hits: int
    wall_s: float
    trace: list[str] = []


class OracleRequest(BaseModel):
    kb: str
    kb_format: KbFormat = "kb"
    requirements: str
    max_n: int = Field(default=20, ge=1)


class OracleResponse(BaseModel):
    conflicts: list[list[str]]
    diagnoses: list[list[str]]
    preferred: list[str]


class GenReqsRequest(BaseModel):
    kb: str
    kb_format: KbFormat = "kb"
    count: int = Field(ge=0)
    card_min: int = Field(ge=1)
    card_max: int = Field(ge=1)
    seed: int


class GeneratedFile(BaseModel):
    name: str
    cardinality: int
    content: str


class GenReqsResponse(BaseModel):
    files: list[GeneratedFile]


class BenchTask(BaseModel):
    name: str
    content: str


class BenchRequest(BaseModel):
    kb: str
    kb_format: KbFormat = "kb"
    tasks: list[BenchTask]
    cores: list[int] = [1]
    maxgcc: str = "cores-1"
    repetitions: int = Field(default=3, ge=1)
    latency_s: float = Field(default=0.0, ge=0.0)


class BenchRecordModel(BaseModel):
    task: str
    card: int
    cores: int
    maxgcc: int
    run: int
    wall_s: float
    solver_calls: int
    lookup_hits: int
    diagnosis: list[str]


class BenchErrorModel(BaseModel):
    task: str
    message: str


class AggregateRowModel(BaseModel):
    card: int
    cores: int
    r_mean: float
    speedup: float | None
    efficiency: float | None
    efficiency_alt: float | None


class BenchResponse(BaseModel):
    records: list[BenchRecordModel]
    aggregate: list[AggregateRowModel]
    raw_csv: str
    aggregate_csv: str
    errors: list[BenchErrorModel]


class HealthResponse(BaseModel):
    status: str
    version: str
