"""Preferred minimal diagnosis by divide and conquer.

``fastdiag`` removes a minimal, preference-respecting set of
requirements so that the rest fits the background KB.  It never asks
for conflicts explicitly; it narrows the kept set with pairwise
consistency checks, handing each check to a provider so the same search
runs over a plain solver or over a speculative look-ahead table.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from .model import (
    EMPTY_SET,
    ConstraintSet,
    Diagnosis,
    DiagnosisTask,
    split,
)
from .sat import check_union


class InconsistentBackgroundError(Exception):
    """The background KB is unsatisfiable by itself; nothing to remove."""


@runtime_checkable
class CheckProvider(Protocol):
    """Answers consistency questions for the diagnosis search.

    ``deferred`` holds constraints the caller will consider next; a
    provider may use them to schedule work early, and must answer
    exactly as a direct solver call on background plus candidates would.
    """

    @property
    def solver_calls(self) -> int: ...

    @property
    def lookup_hits(self) -> int: ...

    def is_consistent(
        self,
        candidates: ConstraintSet,
        background: ConstraintSet,
        deferred: ConstraintSet,
    ) -> bool: ...


class SequentialProvider:
    """One synchronous solver call per question."""

    def __init__(self, per_check_latency: float = 0.0):
        self.per_check_latency = per_check_latency
        self._solver_calls = 0

    @property
    def solver_calls(self) -> int:
        return self._solver_calls

    @property
    def lookup_hits(self) -> int:
        return 0

    def is_consistent(
        self,
        candidates: ConstraintSet,
        background: ConstraintSet,
        deferred: ConstraintSet,
    ) -> bool:
        self._solver_calls += 1
        if self.per_check_latency > 0:
            time.sleep(self.per_check_latency)
        return check_union([background, candidates]).consistent

    def close(self) -> None:
        pass

    def __enter__(self) -> "SequentialProvider":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


@dataclass(frozen=True)
class FdStats:
    """Counters for one diagnosis run."""

    solver_calls: int
    lookup_hits: int
    recursion_depth: int
    wall_s: float


class _DepthMeter:
    __slots__ = ("current", "peak")

    def __init__(self) -> None:
        self.current = 0
        self.peak = 0

    def __enter__(self) -> None:
        self.current += 1
        self.peak = max(self.peak, self.current)

    def __exit__(self, *exc_info: object) -> None:
        self.current -= 1


def fastdiag(
    candidates: ConstraintSet,
    background: ConstraintSet,
    provider: CheckProvider,
) -> Diagnosis:
    """Preferred minimal removal set for candidates against background.

    Empty candidates or an already-consistent union yield an empty
    diagnosis.  When every candidate would have to go, the background
    itself is checked and rejected if it is the real culprit.
    """
    return _diagnose(candidates, background, provider, _DepthMeter())


def _diagnose(
    candidates: ConstraintSet,
    background: ConstraintSet,
    provider: CheckProvider,
    depth: _DepthMeter,
) -> Diagnosis:
    if len(candidates) == 0 or provider.is_consistent(candidates, background, EMPTY_SET):
        return Diagnosis(removed=EMPTY_SET, retained=candidates)
    retained = _fd(candidates, background, EMPTY_SET, provider, depth)
    if len(retained) == 0 and not check_union([background]).consistent:
        raise InconsistentBackgroundError(
            "background knowledge base is inconsistent on its own"
        )
    return Diagnosis(removed=candidates.minus(retained), retained=retained)


def _fd(
    candidates: ConstraintSet,
    background: ConstraintSet,
    deferred: ConstraintSet,
    provider: CheckProvider,
    depth: _DepthMeter,
) -> ConstraintSet:
    """Largest keepable subset of candidates, later members preferred out.

    The ``deferred`` guard skips the consistency probe exactly when the
    caller already knows the outcome for this union, so no check is
    issued twice for the same question.  Recursion depth stays within
    ceil(log2 n) + 1.
    """
    with depth:
        if len(deferred) > 0 and provider.is_consistent(candidates, background, deferred):
            return candidates
        if len(candidates) == 1:
            return EMPTY_SET
        left, right = split(candidates)
        kept_left = _fd(left, background, right, provider, depth)
        kept_right = _fd(
            right,
            background.union(kept_left),
            left.minus(kept_left),
            provider,
            depth,
        )
        return kept_left.union(kept_right)


def run_diagnosis(task: DiagnosisTask, provider: CheckProvider) -> tuple[Diagnosis, FdStats]:
    """Diagnose a task and report timing plus provider counters."""
    calls_before = provider.solver_calls
    hits_before = provider.lookup_hits
    depth = _DepthMeter()
    started = time.perf_counter()
    diagnosis = _diagnose(task.requirements, task.background, provider, depth)
    wall = time.perf_counter() - started
    stats = FdStats(
        solver_calls=provider.solver_calls - calls_before,
        lookup_hits=provider.lookup_hits - hits_before,
        recursion_depth=depth.peak,
        wall_s=wall,
    )
    return diagnosis, stats


def verify_minimal(task: DiagnosisTask, diagnosis: Diagnosis, provider: CheckProvider) -> bool:
    """Check the two minimality conditions directly.

    Removing the diagnosed set must restore consistency, and putting any
    single removed requirement back must break it again.
    """
    kept = task.requirements.minus(diagnosis.removed)
    if not provider.is_consistent(kept, task.background, EMPTY_SET):
        return False
    for constraint in diagnosis.removed:
        readded = task.requirements.minus(
            diagnosis.removed.minus(ConstraintSet([constraint]))
        )
        if provider.is_consistent(readded, task.background, EMPTY_SET):
            return False
    return True
