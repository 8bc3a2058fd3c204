"""Clause-level satisfiability checking.

A small DPLL solver with unit propagation drives every consistency
check.  Branching is deterministic (lowest unassigned variable index,
false tried first), so identical inputs always produce identical
verdicts and models, no matter which thread runs the check.
"""

from __future__ import annotations

import subprocess
import time
from dataclasses import dataclass, field
from typing import Sequence

from .model import Clause, ConstraintSet


class SolverError(Exception):
    """The check itself failed; distinct from an inconsistent verdict."""


class SolveTimeout(SolverError):
    """The solver exceeded its wall-clock budget."""


@dataclass(frozen=True)
class CnfFormula:
    """CNF over variables 1..variable_count; clauses are literal tuples."""

    variable_count: int
    clauses: tuple[Clause, ...]

    def __post_init__(self) -> None:
        if self.variable_count < 0:
            raise ValueError("variable_count must be non-negative")
        for clause in self.clauses:
            if len(clause) == 0:
                raise ValueError("empty clause in formula")
            for lit in clause:
                if not isinstance(lit, int) or lit == 0:
                    raise ValueError(f"bad literal {lit!r}")
                if abs(lit) > self.variable_count:
                    raise ValueError(
                        f"literal {lit} exceeds variable count {self.variable_count}"
                    )


@dataclass(frozen=True)
class Verdict:
    """Outcome of one satisfiability check."""

    consistent: bool
    model: dict[int, bool] | None = field(default=None, compare=False)


def solve(formula: CnfFormula, timeout_s: float | None = None) -> Verdict:
    """Decide satisfiability; on success the model covers every variable.

    Deterministic: unit propagation to fixpoint, then branch on the
    lowest-indexed unassigned variable still occurring in an unsatisfied
    clause, trying false before true.  Variables left unconstrained once
    all clauses are satisfied default to false.
    """
    n = formula.variable_count
    clauses = [tuple(c) for c in formula.clauses]
    if not clauses:
        return Verdict(True, {i: False for i in range(1, n + 1)})

    deadline = None if timeout_s is None else time.monotonic() + timeout_s
    assign: list[bool | None] = [None] * (n + 1)
    trail: list[int] = []
    # (variable, value currently tried, trail length before the decision)
    decisions: list[tuple[int, bool, int]] = []

    def lit_value(lit: int) -> bool | None:
        v = assign[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def assign_lit(lit: int) -> None:
        assign[abs(lit)] = lit > 0
        trail.append(abs(lit))

    def propagate() -> bool:
        """Unit propagation to fixpoint; False signals a conflict."""
        changed = True
        while changed:
            if deadline is not None and time.monotonic() > deadline:
                raise SolveTimeout(f"solve exceeded {timeout_s} s")
            changed = False
            for clause in clauses:
                unassigned = None
                pending = 0
                satisfied = False
                for lit in clause:
                    v = lit_value(lit)
                    if v is True:
                        satisfied = True
                        break
                    if v is None:
                        pending += 1
                        unassigned = lit
                if satisfied:
                    continue
                if pending == 0:
                    return False
                if pending == 1:
                    assign_lit(unassigned)  # type: ignore[arg-type]
                    changed = True
        return True

    def branch_variable() -> int | None:
        """Lowest unassigned variable among still-unsatisfied clauses."""
        best: int | None = None
        for clause in clauses:
            if any(lit_value(lit) is True for lit in clause):
                continue
            for lit in clause:
                var = abs(lit)
                if assign[var] is None and (best is None or var < best):
                    best = var
        return best

    while True:
        if propagate():
            var = branch_variable()
            if var is None:
                model = {i: bool(assign[i]) for i in range(1, n + 1)}
                return Verdict(True, model)
            decisions.append((var, False, len(trail)))
            assign_lit(-var)
        else:
            while decisions:
                var, tried, mark = decisions.pop()
                while len(trail) > mark:
                    assign[trail.pop()] = None
                if not tried:
                    decisions.append((var, True, mark))
                    assign_lit(var)
                    break
            else:
                return Verdict(False)


def check_union(parts: Sequence[ConstraintSet], timeout_s: float | None = None) -> Verdict:
    """Satisfiability of the union of all constraints in all parts.

    Duplicated ids contribute once.  An empty union is trivially
    consistent.  A contradiction constraint anywhere makes the union
    inconsistent without running the solver.
    """
    table = None
    seen: set[str] = set()
    clauses: list[Clause] = []
    width = 0
    for part in parts:
        for constraint in part:
            if constraint.id in seen:
                continue
            seen.add(constraint.id)
            if table is None:
                table = constraint.table
            elif constraint.table is not table:
                raise SolverError(
                    f"constraint {constraint.id!r} uses a different variable table"
                )
            if constraint.contradiction:
                return Verdict(False)
            clauses.extend(constraint.clauses)
            width = max(width, constraint.width)
    if not clauses:
        return Verdict(True, {})
    variable_count = max(width, len(table) if table is not None else 0)
    return solve(CnfFormula(variable_count, tuple(clauses)), timeout_s=timeout_s)


def to_dimacs(formula: CnfFormula) -> str:
    """Render in DIMACS CNF: 'p cnf <vars> <clauses>' then 0-terminated rows."""
    lines = [f"p cnf {formula.variable_count} {len(formula.clauses)}"]
    for clause in formula.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"


class ExternalSolver:
    """Adapter running an external DIMACS solver over a subprocess pipe.

    The command receives the formula on stdin and must answer in the
    usual competition format: an 's SATISFIABLE'/'s UNSATISFIABLE' line,
    plus 'v' literal lines when satisfiable.
    """

    def __init__(self, command: Sequence[str], timeout_s: float | None = None):
        if not command:
            raise ValueError("external solver command must be non-empty")
        self.command = list(command)
        self.timeout_s = timeout_s

    def solve(self, formula: CnfFormula) -> Verdict:
        try:
            proc = subprocess.run(
                self.command,
                input=to_dimacs(formula),
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise SolveTimeout(f"external solver exceeded {self.timeout_s} s") from exc
        except OSError as exc:
            raise SolverError(f"cannot run {self.command[0]!r}: {exc}") from exc

        status: bool | None = None
        literals: list[int] = []
        for line in proc.stdout.splitlines():
            line = line.strip()
            if line.startswith("s "):
                answer = line[2:].strip().upper()
                if answer == "SATISFIABLE":
                    status = True
                elif answer == "UNSATISFIABLE":
                    status = False
            elif line.startswith("v "):
                literals.extend(int(tok) for tok in line[2:].split())
        if status is None:
            raise SolverError(
                f"external solver gave no verdict (exit {proc.returncode})"
            )
        if not status:
            return Verdict(False)
        model = {i: False for i in range(1, formula.variable_count + 1)}
        for lit in literals:
            if lit != 0 and abs(lit) <= formula.variable_count:
                model[abs(lit)] = lit > 0
        return Verdict(True, model)
