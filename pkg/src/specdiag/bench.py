"""Benchmark harness comparing sequential and speculative diagnosis.

Runtime R is the wall time of one diagnosis run, speedup S the ratio of
the single-core mean to a run's mean, and efficiency E the speedup per
core.  Because a second definition of efficiency (speedup per worker,
S/(p-1)) matches some published tables better, the aggregate carries it
as an extra column; S/p stays the authoritative one.

Per-check latency injection models an expensive solver: each check
sleeps for the configured time inside the provider, which is what makes
speedup observable at desk scale.
"""

from __future__ import annotations

import csv
import io
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .diagcore import CheckProvider, SequentialProvider, run_diagnosis
from .ingest import load_kb, parse_requirements
from .model import ConstraintSet, DiagnosisTask, VariableTable
from .speculate import SpeculativeProvider

RAW_COLUMNS = (
    "task",
    "card",
    "cores",
    "maxgcc",
    "run",
    "wall_s",
    "solver_calls",
    "lookup_hits",
    "diagnosis",
)

AGGREGATE_COLUMNS = ("card", "cores", "r_mean", "speedup", "efficiency", "efficiency_alt")

THREADS_ENV_VAR = "SPECDIAG_THREADS"


class BenchInputError(Exception):
    """The benchmark configuration cannot be run at all."""


@dataclass(frozen=True)
class MaxGccPolicy:
    """Speculation budget per run: one less than the core count, or fixed."""

    kind: str
    value: int | None = None

    @classmethod
    def parse(cls, text: str) -> "MaxGccPolicy":
        if text == "cores-1":
            return cls("cores-1")
        if text.startswith("fixed:"):
            try:
                value = int(text.split(":", 1)[1])
            except ValueError:
                raise BenchInputError(f"bad maxgcc policy {text!r}") from None
            if value < 0:
                raise BenchInputError("fixed maxgcc must be non-negative")
            return cls("fixed", value)
        raise BenchInputError(f"unknown maxgcc policy {text!r}; use 'cores-1' or 'fixed:<k>'")

    def resolve(self, cores: int) -> int:
        if self.kind == "fixed":
            assert self.value is not None
            return self.value
        return max(cores - 1, 0)

    def __str__(self) -> str:
        return self.kind if self.kind == "cores-1" else f"fixed:{self.value}"


def resolve_workers(cores: int) -> int:
    """Worker-pool size for a core count; SPECDIAG_THREADS overrides it."""
    override = os.environ.get(THREADS_ENV_VAR)
    if override:
        try:
            workers = int(override)
        except ValueError:
            raise BenchInputError(f"{THREADS_ENV_VAR} must be an integer, got {override!r}") from None
        if workers < 1:
            raise BenchInputError(f"{THREADS_ENV_VAR} must be at least 1")
        return workers
    return max(cores - 1, 1)


def provider_for_cores(
    cores: int,
    policy: MaxGccPolicy,
    per_check_latency: float = 0.0,
    diagnostics=None,
) -> CheckProvider:
    """Fresh provider for one run: sequential at one core, else speculative."""
    if cores < 1:
        raise BenchInputError("cores must be at least 1")
    if cores == 1:
        return SequentialProvider(per_check_latency=per_check_latency)
    return SpeculativeProvider(
        workers=resolve_workers(cores),
        max_gcc=policy.resolve(cores),
        per_check_latency=per_check_latency,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class BenchConfig:
    kb_path: str
    requirements_dir: str
    cores: tuple[int, ...] = (1,)
    maxgcc: MaxGccPolicy = field(default_factory=lambda: MaxGccPolicy("cores-1"))
    repetitions: int = 3
    output_path: str | None = None
    per_check_latency: float = 0.0


@dataclass(frozen=True)
class BenchRecord:
    task: str
    card: int
    cores: int
    maxgcc: int
    run: int
    wall_s: float
    solver_calls: int
    lookup_hits: int
    diagnosis: tuple[str, ...]


@dataclass(frozen=True)
class BenchError:
    task: str
    message: str


@dataclass(frozen=True)
class BenchResult:
    records: tuple[BenchRecord, ...]
    errors: tuple[BenchError, ...]


def run_bench_tasks(
    table: VariableTable,
    background: ConstraintSet,
    tasks: Sequence[tuple[str, ConstraintSet]],
    cores: Sequence[int],
    policy: MaxGccPolicy,
    repetitions: int,
    per_check_latency: float = 0.0,
) -> BenchResult:
    """Benchmark prepared tasks; each run owns a fresh provider.

    Broken inputs (background inconsistent, requirements already fitting
    the KB) become per-task error records and the run moves on.
    """
    if repetitions < 1:
        raise BenchInputError("repetitions must be at least 1")
    if not cores:
        raise BenchInputError("need at least one core count")
    records: list[BenchRecord] = []
    errors: list[BenchError] = []
    for name, requirements in tasks:
        try:
            task = DiagnosisTask(requirements=requirements, background=background)
        except ValueError as exc:
            errors.append(BenchError(name, str(exc)))
            continue
        probe = SequentialProvider()
        if probe.is_consistent(requirements, background, ConstraintSet()):
            errors.append(BenchError(name, "requirements are consistent with the KB; nothing to diagnose"))
            continue
        for core_count in cores:
            maxgcc = 0 if core_count == 1 else policy.resolve(core_count)
            for run_index in range(1, repetitions + 1):
                provider = provider_for_cores(core_count, policy, per_check_latency)
                try:
                    diagnosis, stats = run_diagnosis(task, provider)
                finally:
                    close = getattr(provider, "close", None)
                    if close is not None:
                        close()
                records.append(
                    BenchRecord(
                        task=name,
                        card=diagnosis.cardinality,
                        cores=core_count,
                        maxgcc=maxgcc,
                        run=run_index,
                        wall_s=stats.wall_s,
                        solver_calls=stats.solver_calls,
                        lookup_hits=stats.lookup_hits,
                        diagnosis=diagnosis.removed.ids(),
                    )
                )
    return BenchResult(tuple(records), tuple(errors))


def run_bench(config: BenchConfig) -> BenchResult:
    """Load KB and requirement files (sorted by name), benchmark them all.

    When an output path is configured the raw and aggregate CSV files
    are written as a side effect.
    """
    table, background = load_kb(config.kb_path)
    reqs_dir = Path(config.requirements_dir)
    if not reqs_dir.is_dir():
        raise BenchInputError(f"requirements dir not found: {reqs_dir}")
    tasks: list[tuple[str, ConstraintSet]] = []
    errors: list[BenchError] = []
    for path in sorted(p for p in reqs_dir.iterdir() if p.is_file()):
        try:
            requirements = parse_requirements(path.read_text(encoding="utf-8"), table)
        except Exception as exc:
            errors.append(BenchError(path.name, str(exc)))
            continue
        tasks.append((path.name, requirements))
    if not tasks and not errors:
        raise BenchInputError(f"no requirement files in {reqs_dir}")
    result = run_bench_tasks(
        table,
        background,
        tasks,
        config.cores,
        config.maxgcc,
        config.repetitions,
        config.per_check_latency,
    )
    result = BenchResult(result.records, tuple(errors) + result.errors)
    if config.output_path is not None and result.records:
        emit_csv(result.records, config.output_path)
    return result


def speedup(t1: float, tp: float) -> float:
    """Speedup of a run against the single-core reference time."""
    if t1 <= 0 or tp <= 0:
        raise ValueError("times must be positive")
    return t1 / tp


def efficiency(s: float, p: int) -> float:
    """Speedup per core."""
    if p < 1:
        raise ValueError("core count must be at least 1")
    return s / p


@dataclass(frozen=True)
class AggregateRow:
    card: int
    cores: int
    r_mean: float
    speedup: float | None
    efficiency: float | None
    efficiency_alt: float | None


def aggregate(records: Sequence[BenchRecord]) -> list[AggregateRow]:
    """Mean R per (card, cores) plus S and E against the 1-core mean."""
    groups: dict[tuple[int, int], list[float]] = {}
    for record in records:
        groups.setdefault((record.card, record.cores), []).append(record.wall_s)
    means = {key: statistics.fmean(values) for key, values in groups.items()}
    rows: list[AggregateRow] = []
    for (card, cores) in sorted(means):
        r_mean = means[(card, cores)]
        base = means.get((card, 1))
        if cores > 1 and base is not None:
            s = speedup(base, r_mean)
            rows.append(
                AggregateRow(
                    card,
                    cores,
                    r_mean,
                    s,
                    efficiency(s, cores),
                    s / (cores - 1),
                )
            )
        else:
            rows.append(AggregateRow(card, cores, r_mean, None, None, None))
    return rows


def _fmt(value: float | None, digits: int) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def render_records_csv(records: Sequence[BenchRecord]) -> str:
    if not records:
        raise ValueError("no records to render")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(RAW_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.task,
                r.card,
                r.cores,
                r.maxgcc,
                r.run,
                f"{r.wall_s:.6f}",
                r.solver_calls,
                r.lookup_hits,
                " ".join(r.diagnosis),
            ]
        )
    return out.getvalue()


def render_aggregate_csv(records: Sequence[BenchRecord]) -> str:
    if not records:
        raise ValueError("no records to render")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(AGGREGATE_COLUMNS)
    for row in aggregate(records):
        writer.writerow(
            [
                row.card,
                row.cores,
                f"{row.r_mean:.6f}",
                _fmt(row.speedup, 4),
                _fmt(row.efficiency, 4),
                _fmt(row.efficiency_alt, 4),
            ]
        )
    return out.getvalue()


def emit_csv(records: Sequence[BenchRecord], path: str) -> tuple[str, str]:
    """Write raw rows to path and the aggregate next to it; returns both paths."""
    if not records:
        raise ValueError("refusing to write an empty benchmark CSV")
    raw_path = Path(path)
    aggregate_path = raw_path.with_name(raw_path.stem + "_aggregate" + (raw_path.suffix or ".csv"))
    raw_path.write_text(render_records_csv(records), encoding="utf-8")
    aggregate_path.write_text(render_aggregate_csv(records), encoding="utf-8")
    return str(raw_path), str(aggregate_path)
