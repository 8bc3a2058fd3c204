"""Shared test utilities: brute-force references and random instance makers.

Everything here is intentionally naive.  The test suite trusts these
enumeration-based implementations as ground truth and holds the real
package to them.
"""
from __future__ import annotations

import random
from itertools import product

from specdiag.model import Constraint, ConstraintSet, DiagnosisTask, VariableTable
from specdiag.sat import check_union


def truth_table_satisfiable(variable_count: int, clauses) -> bool:
    """Reference satisfiability by full enumeration; keep instances small."""
    for bits in product((False, True), repeat=variable_count):
        if all(any(bits[abs(lit) - 1] == (lit > 0) for lit in clause) for clause in clauses):
            return True
    return False


def satisfies(bits, clauses) -> bool:
    return all(any(bits[abs(lit) - 1] == (lit > 0) for lit in clause) for clause in clauses)


def eval_formula(node, assignment: dict[str, bool]) -> bool:
    """Evaluate a formula AST under a name -> bool assignment."""
    kind = node.kind
    if kind == "var":
        return assignment[node.name]
    if kind == "not":
        return not eval_formula(node.children[0], assignment)
    if kind == "and":
        return all(eval_formula(child, assignment) for child in node.children)
    if kind == "or":
        return any(eval_formula(child, assignment) for child in node.children)
    if kind == "implies":
        head, tail = node.children
        return (not eval_formula(head, assignment)) or eval_formula(tail, assignment)
    if kind == "iff":
        head, tail = node.children
        return eval_formula(head, assignment) == eval_formula(tail, assignment)
    if kind == "xor":
        # exactly-one semantics
        return sum(eval_formula(child, assignment) for child in node.children) == 1
    raise AssertionError(f"unknown formula kind {kind!r}")


def cnf_matches_formula(formula, clauses, table: VariableTable) -> bool:
    """Projection equivalence: the CNF, restricted to the named variables,
    accepts exactly the assignments that satisfy the formula.

    Auxiliary variables introduced by the encoding get indices above
    len(table); for each assignment of the named variables the CNF must
    be extendable to the auxiliaries iff the formula holds.
    """
    named = len(table)
    total = max([named] + [abs(lit) for clause in clauses for lit in clause])
    aux = total - named
    for bits in product((False, True), repeat=named):
        assignment = {table.name_of(i + 1): bits[i] for i in range(named)}
        expected = eval_formula(formula, assignment)
        extendable = any(
            satisfies(bits + tail, clauses)
            for tail in product((False, True), repeat=aux)
        )
        if expected != extendable:
            return False
    return True


def random_clauses(rng: random.Random, variable_count: int, clause_count: int, max_width: int = 3):
    clauses = []
    for _ in range(clause_count):
        width = min(rng.randint(1, max_width), variable_count)
        chosen = rng.sample(range(1, variable_count + 1), width)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in chosen))
    return clauses


def make_random_tasks(count: int, seed: int, max_vars: int = 12,
                      max_kb_clauses: int = 25, max_reqs: int = 10) -> list[DiagnosisTask]:
    """Seeded rejection sampling of inconsistent diagnosis tasks.

    The knowledge base must be self-consistent and the requirements,
    mostly unit with some binary clauses, must break it.
    """
    rng = random.Random(seed)
    tasks: list[DiagnosisTask] = []
    while len(tasks) < count:
        nv = rng.randint(4, max_vars)
        table = VariableTable(f"x{i}" for i in range(1, nv + 1))
        kb_members = []
        for j in range(1, rng.randint(3, max_kb_clauses) + 1):
            width = min(rng.randint(1, 3), nv)
            chosen = rng.sample(range(1, nv + 1), width)
            clause = tuple(v if rng.random() < 0.5 else -v for v in chosen)
            kb_members.append(Constraint(f"kb{j}", (clause,), table))
        background = ConstraintSet(kb_members)
        if not check_union([background]).consistent:
            continue
        req_members = []
        for j in range(1, rng.randint(2, max_reqs) + 1):
            if rng.random() < 0.8:
                v = rng.randint(1, nv)
                clause = (v if rng.random() < 0.5 else -v,)
            else:
                chosen = rng.sample(range(1, nv + 1), 2)
                clause = tuple(v if rng.random() < 0.5 else -v for v in chosen)
            req_members.append(Constraint(f"r{j}", (clause,), table))
        requirements = ConstraintSet(req_members)
        if check_union([background, requirements]).consistent:
            continue
        tasks.append(DiagnosisTask(requirements=requirements, background=background))
    return tasks


def random_formula(rng: random.Random, names, depth: int):
    """Random connective tree over the given variable names."""
    from specdiag.ingest import iff, implies, land, lnot, lor, var, xor

    if depth == 0 or rng.random() < 0.3:
        return var(rng.choice(names))
    kind = rng.choice(("not", "and", "or", "implies", "iff", "xor"))
    if kind == "not":
        return lnot(random_formula(rng, names, depth - 1))
    if kind in ("implies", "iff"):
        head = random_formula(rng, names, depth - 1)
        tail = random_formula(rng, names, depth - 1)
        return implies(head, tail) if kind == "implies" else iff(head, tail)
    arity = rng.randint(2, 3)
    parts = [random_formula(rng, names, depth - 1) for _ in range(arity)]
    return {"and": land, "or": lor, "xor": xor}[kind](*parts)


def pair_exclusion_bench(pairs: int = 8):
    """KB of pairwise exclusions !(a_i & b_i) used for speedup runs.

    Returns (table, background, make_task) where make_task(conflicted)
    builds a 2*pairs requirement set whose preferred diagnosis removes
    exactly the b member of each conflicted pair.
    """
    names = [f"{prefix}{i}" for i in range(1, pairs + 1) for prefix in ("a", "b")]
    table = VariableTable(names)
    background = ConstraintSet(
        Constraint(
            f"k{i}",
            ((-table.index_of(f"a{i}"), -table.index_of(f"b{i}")),),
            table,
        )
        for i in range(1, pairs + 1)
    )

    def make_task(conflicted: set[int]) -> ConstraintSet:
        members = []
        for pair in range(1, pairs + 1):
            a_idx = table.index_of(f"a{pair}")
            b_idx = table.index_of(f"b{pair}")
            members.append(Constraint(f"r{len(members) + 1:02d}", ((a_idx,),), table))
            b_lit = b_idx if pair in conflicted else -b_idx
            members.append(Constraint(f"r{len(members) + 1:02d}", ((b_lit,),), table))
        return ConstraintSet(members)

    return table, background, make_task
