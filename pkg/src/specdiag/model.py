"""Core types for diagnosis tasks over clausal constraints.

A constraint is a named bundle of CNF clauses over a shared variable
table.  Constraint sets are ordered: position encodes importance, and
later members are preferred for removal when a conflict must be
resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

Clause = tuple[int, ...]


@dataclass(frozen=True)
class Variable:
    """A named boolean variable with a 1-based solver index."""

    name: str
    index: int


class VariableTable:
    """Immutable registry of named variables with contiguous 1-based indices."""

    def __init__(self, names: Iterable[str]):
        variables = []
        by_name: dict[str, int] = {}
        for position, name in enumerate(names, start=1):
            if not name:
                raise ValueError("variable name must be non-empty")
            if name in by_name:
                raise ValueError(f"duplicate variable name: {name!r}")
            by_name[name] = position
            variables.append(Variable(name, position))
        self._variables: tuple[Variable, ...] = tuple(variables)
        self._by_name = by_name

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self._variables

    def __len__(self) -> int:
        return len(self._variables)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def index_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"undeclared variable: {name!r}") from None

    def name_of(self, index: int) -> str:
        if not 1 <= index <= len(self._variables):
            raise IndexError(f"variable index out of range: {index}")
        return self._variables[index - 1].name

    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self._variables)


@dataclass(frozen=True)
class Constraint:
    """A named constraint: CNF clauses over a variable table.

    ``clauses`` may reference auxiliary indices above the named range
    (encoding artifacts).  An empty clause is rejected: a constraint
    that denotes plain falsity must be built with ``contradiction=True``
    and no clauses, so that downstream code sees the intent explicitly.
    """

    id: str
    clauses: tuple[Clause, ...]
    table: VariableTable = field(compare=False, hash=False, repr=False)
    label: str | None = field(default=None, compare=False)
    contradiction: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("constraint id must be non-empty")
        if self.contradiction and self.clauses:
            raise ValueError("a contradiction constraint carries no clauses")
        for clause in self.clauses:
            if len(clause) == 0:
                raise ValueError(
                    f"constraint {self.id!r}: empty clause; use contradiction=True"
                )
            for lit in clause:
                if not isinstance(lit, int) or lit == 0:
                    raise ValueError(f"constraint {self.id!r}: bad literal {lit!r}")

    @property
    def width(self) -> int:
        """Highest variable index referenced, named or auxiliary."""
        return max((abs(lit) for clause in self.clauses for lit in clause), default=0)


class ConstraintSet:
    """An ordered, id-unique collection of constraints."""

    __slots__ = ("_members", "_positions")

    def __init__(self, members: Iterable[Constraint] = ()):
        self._members: tuple[Constraint, ...] = tuple(members)
        positions: dict[str, int] = {}
        for pos, c in enumerate(self._members):
            if c.id in positions:
                raise ValueError(f"duplicate constraint id: {c.id!r}")
            positions[c.id] = pos
        self._positions = positions

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self._members)

    def __bool__(self) -> bool:
        return bool(self._members)

    def __getitem__(self, index: int) -> Constraint:
        return self._members[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConstraintSet):
            return NotImplemented
        return self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __repr__(self) -> str:
        return f"ConstraintSet([{', '.join(self.ids())}])"

    @property
    def members(self) -> tuple[Constraint, ...]:
        return self._members

    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self._members)

    def contains_id(self, constraint_id: str) -> bool:
        return constraint_id in self._positions

    def union(self, other: "ConstraintSet") -> "ConstraintSet":
        """Members of self followed by members of other not already present."""
        extra = [c for c in other if c.id not in self._positions]
        return ConstraintSet(self._members + tuple(extra))

    def minus(self, other: "ConstraintSet") -> "ConstraintSet":
        """Members of self whose ids do not occur in other, order kept."""
        return ConstraintSet(c for c in self._members if not other.contains_id(c.id))

    def take(self, ids: Iterable[str]) -> "ConstraintSet":
        """Members of self with the given ids, in self's order."""
        wanted = set(ids)
        return ConstraintSet(c for c in self._members if c.id in wanted)


EMPTY_SET = ConstraintSet()


def split(constraints: ConstraintSet) -> tuple[ConstraintSet, ConstraintSet]:
    """Split into the first floor(n/2) members and the rest.

    Requires at least two members; halving a singleton would produce an
    empty part, which no caller can use.
    """
    n = len(constraints)
    if n < 2:
        raise ValueError(f"cannot split a set of {n} constraints")
    k = n // 2
    return ConstraintSet(constraints.members[:k]), ConstraintSet(constraints.members[k:])


def antilex_precedes(x: ConstraintSet, y: ConstraintSet, order: ConstraintSet) -> bool:
    """True when x comes strictly before y in the anti-lexicographic order.

    Membership is compared walking ``order`` from its most important
    (first) member toward its least important; at the first position
    where exactly one side holds the constraint, the side holding it
    sacrifices the more important constraint and therefore precedes the
    other.  The maximum of this order over all minimal diagnoses is the
    preferred diagnosis: it gives up only constraints that every rival
    also gives up, until the rivals start spending more important ones.
    Equal sets compare False.  Both arguments must be subsets of
    ``order``.
    """
    xs = set(x.ids())
    ys = set(y.ids())
    known = set(order.ids())
    for unknown in (xs | ys) - known:
        raise ValueError(f"constraint {unknown!r} not in the ordering set")
    for c in order.members:
        in_x = c.id in xs
        in_y = c.id in ys
        if in_x != in_y:
            return in_x
    return False


def canonical_key(*parts: ConstraintSet) -> str:
    """Order-independent identity of a union of constraint sets.

    Equal unions yield identical keys: ids are deduplicated, sorted and
    joined with '|'.
    """
    ids = {c.id for part in parts for c in part}
    return "|".join(sorted(ids))


@dataclass(frozen=True)
class DiagnosisTask:
    """A prioritized requirement set to reconcile with a background KB.

    The background must be self-consistent: diagnosis only ever removes
    requirements, so a broken background could never be repaired.
    """

    requirements: ConstraintSet
    background: ConstraintSet

    def __post_init__(self) -> None:
        overlap = set(self.requirements.ids()) & set(self.background.ids())
        if overlap:
            raise ValueError(f"requirement ids collide with background: {sorted(overlap)}")
        from .sat import check_union  # late import: sat depends on these types

        if not check_union([self.background]).consistent:
            raise ValueError("background knowledge base is inconsistent on its own")


@dataclass(frozen=True)
class Diagnosis:
    """A set of removed requirements plus the retained remainder.

    Both parts keep the requirement order.  ``retained`` is the maximal
    satisfiable subset the search kept; ``removed`` is its complement.
    """

    removed: ConstraintSet
    retained: ConstraintSet

    def __post_init__(self) -> None:
        overlap = set(self.removed.ids()) & set(self.retained.ids())
        if overlap:
            raise ValueError(f"diagnosis parts overlap: {sorted(overlap)}")

    @property
    def cardinality(self) -> int:
        return len(self.removed)

    @property
    def empty(self) -> bool:
        return len(self.removed) == 0
