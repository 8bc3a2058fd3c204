"""Sequential diagnosis: the divide-and-conquer search and its accounting."""
from __future__ import annotations

import math

import pytest

import helpers
from specdiag.diagcore import (
    InconsistentBackgroundError,
    SequentialProvider,
    fastdiag,
    run_diagnosis,
    verify_minimal,
)
from specdiag.model import (
    Constraint,
    ConstraintSet,
    DiagnosisTask,
    VariableTable,
    canonical_key,
)
from specdiag.oracle import worst_case_checks
from specdiag.sat import SolverError


class RecordingProvider(SequentialProvider):
    """Sequential provider that remembers the key of every real check."""

    def __init__(self):
        super().__init__()
        self.requested: list[str] = []

    def is_consistent(self, candidates, background, deferred):
        self.requested.append(canonical_key(background, candidates))
        return super().is_consistent(candidates, background, deferred)


def test_smartwatch_diagnosis(smartwatch_task):
    provider = SequentialProvider()
    diagnosis, stats = run_diagnosis(smartwatch_task, provider)
    assert diagnosis.removed.ids() == ("c11", "c13")
    assert diagnosis.retained.ids() == ("c10", "c12")
    assert diagnosis.cardinality == 2
    assert stats.solver_calls == 5
    assert stats.lookup_hits == 0
    assert stats.wall_s < 1.0


def test_smartwatch_check_sequence_is_the_documented_one(smartwatch_task):
    # guard, then the four search probes, in exact order
    provider = RecordingProvider()
    run_diagnosis(smartwatch_task, provider)
    background = smartwatch_task.background
    reqs = smartwatch_task.requirements
    expected = [
        canonical_key(background, reqs),
        canonical_key(background, reqs.take(["c10", "c11"])),
        canonical_key(background, reqs.take(["c10"])),
        canonical_key(background, reqs.take(["c10", "c12", "c13"])),
        canonical_key(background, reqs.take(["c10", "c12"])),
    ]
    assert provider.requested == expected


def test_reversed_priorities_flip_the_diagnosis(reversed_smartwatch_task):
    diagnosis, _ = run_diagnosis(reversed_smartwatch_task, SequentialProvider())
    assert set(diagnosis.removed.ids()) == {"c10", "c12"}
    assert set(diagnosis.retained.ids()) == {"c11", "c13"}


def test_consistent_task_yields_empty_diagnosis(smartwatch_task):
    background = smartwatch_task.background
    harmless = smartwatch_task.requirements.take(["c10", "c12"])
    task = DiagnosisTask(requirements=harmless, background=background)
    provider = SequentialProvider()
    diagnosis, stats = run_diagnosis(task, provider)
    assert diagnosis.empty
    assert diagnosis.retained.ids() == ("c10", "c12")
    assert stats.solver_calls == 1  # just the guard


def test_empty_candidates_skip_the_solver(smartwatch_task):
    provider = SequentialProvider()
    diagnosis = fastdiag(ConstraintSet(), smartwatch_task.background, provider)
    assert diagnosis.empty
    assert provider.solver_calls == 0


def test_background_inconsistency_is_reported():
    table = VariableTable(["A"])
    # fastdiag is the entry point here: DiagnosisTask would refuse this
    background = ConstraintSet([
        Constraint("k1", ((1,),), table),
        Constraint("k2", ((-1,),), table),
    ])
    candidates = ConstraintSet([Constraint("r1", ((1,),), table)])
    with pytest.raises(InconsistentBackgroundError):
        fastdiag(candidates, background, SequentialProvider())


def test_verify_minimal(smartwatch_task):
    provider = SequentialProvider()
    diagnosis, _ = run_diagnosis(smartwatch_task, provider)
    assert verify_minimal(smartwatch_task, diagnosis, SequentialProvider())

    from specdiag.model import Diagnosis

    superset = smartwatch_task.requirements.take(["c10", "c11", "c13"])
    rest = smartwatch_task.requirements.minus(superset)
    bloated = Diagnosis(removed=superset, retained=rest)
    assert not verify_minimal(smartwatch_task, bloated, SequentialProvider())


def test_verify_minimal_accepts_empty_on_consistent_task(smartwatch_task):
    from specdiag.model import Diagnosis

    background = smartwatch_task.background
    harmless = smartwatch_task.requirements.take(["c10"])
    task = DiagnosisTask(requirements=harmless, background=background)
    empty = Diagnosis(removed=ConstraintSet(), retained=harmless)
    assert verify_minimal(task, empty, SequentialProvider())


def test_check_count_bound_on_smartwatch(smartwatch_task):
    _, stats = run_diagnosis(smartwatch_task, SequentialProvider())
    n, d = 4, 2
    assert stats.solver_calls - 1 <= worst_case_checks(n, d)


def test_recursion_depth_stays_logarithmic():
    for task in helpers.make_random_tasks(30, seed=606):
        _, stats = run_diagnosis(task, SequentialProvider())
        n = len(task.requirements)
        assert stats.recursion_depth <= math.ceil(math.log2(n)) + 1


def test_random_tasks_minimal_and_bounded():
    tasks = helpers.make_random_tasks(60, seed=1234)
    for task in tasks:
        provider = SequentialProvider()
        diagnosis, stats = run_diagnosis(task, provider)
        assert not diagnosis.empty
        assert verify_minimal(task, diagnosis, SequentialProvider())
        n, d = len(task.requirements), diagnosis.cardinality
        assert stats.solver_calls - 1 <= worst_case_checks(n, d)
        # removal and retention partition the requirements in order
        merged = sorted(diagnosis.removed.ids() + diagnosis.retained.ids())
        assert merged == sorted(task.requirements.ids())


def test_provider_failures_propagate(smartwatch_task):
    class FailingProvider(SequentialProvider):
        def is_consistent(self, candidates, background, deferred):
            if self.solver_calls >= 2:
                raise SolverError("injected failure")
            return super().is_consistent(candidates, background, deferred)

    with pytest.raises(SolverError, match="injected"):
        run_diagnosis(smartwatch_task, FailingProvider())


def test_sequential_provider_latency_and_context_manager(smartwatch_task):
    with SequentialProvider(per_check_latency=0.001) as provider:
        _, stats = run_diagnosis(smartwatch_task, provider)
    assert stats.solver_calls == 5
    assert stats.wall_s >= 0.005
