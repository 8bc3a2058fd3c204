"""Exhaustive ground truth for small diagnosis tasks.

Everything here enumerates subsets outright, so results are trustworthy
independent of the search in diagcore; that is the point.  A size guard
keeps accidental exponential blowups from hanging a session.
"""

from __future__ import annotations

import itertools

from .model import ConstraintSet, DiagnosisTask, antilex_precedes
from .sat import check_union


class OracleGuardError(Exception):
    """Requirement set too large for exhaustive enumeration."""


DEFAULT_MAX_N = 20


class _Checker:
    """Memoized consistency of background plus requirement subsets."""

    def __init__(self, task: DiagnosisTask):
        self.task = task
        self._cache: dict[frozenset[int], bool] = {}

    def consistent(self, positions: tuple[int, ...]) -> bool:
        key = frozenset(positions)
        cached = self._cache.get(key)
        if cached is None:
            subset = ConstraintSet(self.task.requirements[i] for i in sorted(key))
            cached = check_union([self.task.background, subset]).consistent
            self._cache[key] = cached
        return cached


def _guard(task: DiagnosisTask, max_n: int) -> None:
    n = len(task.requirements)
    if n > max_n:
        raise OracleGuardError(
            f"{n} requirements exceed the enumeration guard of {max_n}; "
            f"raise it explicitly (--max-n) if you really want this"
        )


def all_minimal_conflicts(task: DiagnosisTask, max_n: int = DEFAULT_MAX_N) -> list[ConstraintSet]:
    """Every inclusion-minimal requirement subset that clashes with the KB.

    Listed by ascending cardinality, then by requirement order.  A
    consistent task has none.
    """
    _guard(task, max_n)
    n = len(task.requirements)
    checker = _Checker(task)
    found_positions: list[frozenset[int]] = []
    found: list[ConstraintSet] = []
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            combo_set = frozenset(combo)
            if any(smaller <= combo_set for smaller in found_positions):
                continue  # contains a known conflict, cannot be minimal
            if not checker.consistent(combo):
                found_positions.append(combo_set)
                found.append(ConstraintSet(task.requirements[i] for i in combo))
    return found


def all_minimal_diagnoses(task: DiagnosisTask, max_n: int = DEFAULT_MAX_N) -> list[ConstraintSet]:
    """Every inclusion-minimal removal set restoring consistency.

    Listed by ascending cardinality, then by requirement order.  A
    consistent task yields exactly the empty removal set.
    """
    _guard(task, max_n)
    n = len(task.requirements)
    checker = _Checker(task)
    all_positions = frozenset(range(n))
    found_positions: list[frozenset[int]] = []
    found: list[ConstraintSet] = []
    for size in range(0, n + 1):
        for combo in itertools.combinations(range(n), size):
            removal = frozenset(combo)
            if any(smaller <= removal for smaller in found_positions):
                continue  # a subset already works, so this is not minimal
            if checker.consistent(tuple(all_positions - removal)):
                found_positions.append(removal)
                found.append(ConstraintSet(task.requirements[i] for i in combo))
    return found


def preferred_diagnosis(task: DiagnosisTask, max_n: int = DEFAULT_MAX_N) -> ConstraintSet:
    """The minimal diagnosis every other one precedes anti-lexicographically.

    With requirement order as the strict preference this maximum is
    unique.  A consistent task yields the empty set.
    """
    diagnoses = all_minimal_diagnoses(task, max_n)
    best = diagnoses[0]
    for candidate in diagnoses[1:]:
        if antilex_precedes(best, candidate, task.requirements):
            best = candidate
    return best


def worst_case_checks(n: int, d: int) -> int:
    """Upper bound on search consistency checks: 2d*ceil(log2(n/d)) + 2d.

    ``n`` is the requirement count, ``d`` the diagnosis cardinality,
    with 1 <= d <= n.  Computed in exact integer arithmetic.
    """
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got n={n}, d={d}")
    ceil_log = 0
    while d << ceil_log < n:
        ceil_log += 1
    return 2 * d * ceil_log + 2 * d
