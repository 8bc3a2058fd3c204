"""Reading knowledge bases and requirement sets.

KB grammar, one item per line, '#' starts a comment:

    vars: Name1 Name2 ...     declare variables; order fixes priority
    <id>: <formula>           one constraint per line

Operators, tightest binding first: ``!``  ``&``  ``|``  ``->``  ``<->``,
plus the n-ary form ``xor(f1, ..., fk)`` which holds when exactly one
argument holds.  Requirement files assign one variable per line:
``<id>: <Name>=t`` or ``=f``; line order is the removal preference.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .model import Clause, Constraint, ConstraintSet, VariableTable
from .sat import check_union


class IngestError(Exception):
    """Input could not be turned into constraints."""


class KbSyntaxError(IngestError):
    def __init__(self, message: str, line: int, column: int | None = None):
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


# --------------------------------------------------------------------------
# formula AST


@dataclass(frozen=True)
class Formula:
    """AST node; kind is one of var/not/and/or/implies/iff/xor."""

    kind: str
    children: tuple["Formula", ...] = ()
    name: str | None = None


def var(name: str) -> Formula:
    return Formula("var", name=name)


def lnot(f: Formula) -> Formula:
    return Formula("not", (f,))


def land(*fs: Formula) -> Formula:
    return Formula("and", tuple(fs))


def lor(*fs: Formula) -> Formula:
    return Formula("or", tuple(fs))


def implies(a: Formula, b: Formula) -> Formula:
    return Formula("implies", (a, b))


def iff(a: Formula, b: Formula) -> Formula:
    return Formula("iff", (a, b))


def xor(*fs: Formula) -> Formula:
    """Exactly one of the arguments holds."""
    return Formula("xor", tuple(fs))


_PRECEDENCE = {"iff": 1, "implies": 2, "or": 3, "and": 4, "not": 5, "var": 6, "xor": 6}


def format_formula(node: Formula) -> str:
    """Render with the grammar's operators and minimal parentheses."""
    return _format(node, 0)


def _format(node: Formula, parent_level: int) -> str:
    kind = node.kind
    if kind == "var":
        text = node.name or ""
    elif kind == "xor":
        text = "xor(" + ", ".join(_format(c, 0) for c in node.children) + ")"
    elif kind == "not":
        text = "!" + _format(node.children[0], _PRECEDENCE["not"])
    elif kind == "and":
        text = " & ".join(_format(c, _PRECEDENCE["and"]) for c in node.children)
    elif kind == "or":
        text = " | ".join(_format(c, _PRECEDENCE["or"]) for c in node.children)
    elif kind == "implies":
        a, b = node.children
        # right-associative: the consequent may chain without parentheses
        text = _format(a, _PRECEDENCE["implies"] + 1) + " -> " + _format(b, _PRECEDENCE["implies"])
    elif kind == "iff":
        a, b = node.children
        text = _format(a, _PRECEDENCE["iff"] + 1) + " <-> " + _format(b, _PRECEDENCE["iff"])
    else:
        raise ValueError(f"unknown formula kind {kind!r}")
    if _PRECEDENCE[kind] < parent_level:
        return f"({text})"
    return text


# --------------------------------------------------------------------------
# tokenizing and parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<iff><->)|(?P<implies>->)"
    r"|(?P<op>[!&|(),]))"
)

_RESERVED = {"xor", "vars"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    column: int


def _tokenize(text: str, line: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].isspace():
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise KbSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
        if m.group("name"):
            tokens.append(_Token("name", m.group("name"), m.start("name") + 1))
        elif m.group("iff"):
            tokens.append(_Token("<->", "<->", m.start("iff") + 1))
        elif m.group("implies"):
            tokens.append(_Token("->", "->", m.start("implies") + 1))
        else:
            op = m.group("op")
            tokens.append(_Token(op, op, m.start("op") + 1))
        pos = m.end()
    return tokens


class _FormulaParser:
    def __init__(self, tokens: list[_Token], line: int):
        self.tokens = tokens
        self.line = line
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str | None = None) -> _Token:
        tok = self.peek()
        if tok is None:
            raise KbSyntaxError("unexpected end of formula", self.line)
        if kind is not None and tok.kind != kind:
            raise KbSyntaxError(f"expected {kind!r}, found {tok.text!r}", self.line, tok.column)
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        node = self.parse_iff()
        tok = self.peek()
        if tok is not None:
            raise KbSyntaxError(f"trailing input {tok.text!r}", self.line, tok.column)
        return node

    def parse_iff(self) -> Formula:
        node = self.parse_implies()
        while (tok := self.peek()) is not None and tok.kind == "<->":
            self.take()
            node = iff(node, self.parse_implies())
        return node

    def parse_implies(self) -> Formula:
        node = self.parse_or()
        if (tok := self.peek()) is not None and tok.kind == "->":
            self.take()
            return implies(node, self.parse_implies())
        return node

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while (tok := self.peek()) is not None and tok.kind == "|":
            self.take()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else lor(*parts)

    def parse_and(self) -> Formula:
        parts = [self.parse_unary()]
        while (tok := self.peek()) is not None and tok.kind == "&":
            self.take()
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else land(*parts)

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok is not None and tok.kind == "!":
            self.take()
            return lnot(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        tok = self.take()
        if tok.kind == "(":
            node = self.parse_iff()
            self.take(")")
            return node
        if tok.kind == "name":
            if tok.text == "xor":
                self.take("(")
                args = [self.parse_iff()]
                while (nxt := self.peek()) is not None and nxt.kind == ",":
                    self.take()
                    args.append(self.parse_iff())
                self.take(")")
                if len(args) < 2:
                    raise KbSyntaxError("xor needs at least two arguments", self.line, tok.column)
                return xor(*args)
            return var(tok.text)
        raise KbSyntaxError(f"unexpected {tok.text!r}", self.line, tok.column)


# --------------------------------------------------------------------------
# CNF compilation

class _CnfCompiler:
    """Turns one formula into clauses, allocating auxiliary variables.

    Auxiliary indices start above the named range and keep counting
    across constraints of the same file, so any union of the resulting
    constraints stays collision-free.  Subformulas that need a
    definition get the full two-sided encoding: a satisfying assignment
    of the clauses, restricted to named variables, is always a model of
    the formula and vice versa.
    """

    def __init__(self, table: VariableTable, next_aux: int):
        self.table = table
        self.next_aux = next_aux
        self._defined: dict[Formula, int] = {}
        self._clauses: list[Clause] = []
        self.line = 0  # for error reporting, set by the caller

    def _index(self, node: Formula) -> int:
        assert node.name is not None
        if node.name not in self.table:
            raise KbSyntaxError(f"undeclared variable: {node.name!r}", self.line)
        return self.table.index_of(node.name)

    def assert_true(self, node: Formula) -> list[Clause]:
        kind = node.kind
        if kind == "var":
            return [(self._index(node),)]
        if kind == "not":
            return self._assert_negation(node.children[0])
        if kind == "and":
            clauses: list[Clause] = []
            for child in _flatten(node, "and"):
                clauses.extend(self.assert_true(child))
            return clauses
        if kind == "or":
            return [tuple(self.literal(child) for child in _flatten(node, "or"))]
        if kind == "implies":
            a, b = node.children
            if a.kind == "or":  # (x | y) -> b  becomes  (x -> b) & (y -> b)
                return self.assert_true(land(*(implies(x, b) for x in _flatten(a, "or"))))
            if b.kind == "and":  # a -> (x & y)  becomes  (a -> x) & (a -> y)
                return self.assert_true(land(*(implies(a, y) for y in _flatten(b, "and"))))
            return self.assert_true(lor(lnot(a), b))
        if kind == "iff":
            a, b = node.children
            return self.assert_true(land(implies(a, b), implies(b, a)))
        if kind == "xor":
            lits = [self.literal(child) for child in node.children]
            clauses = [tuple(lits)]
            for i in range(len(lits)):
                for j in range(i + 1, len(lits)):
                    clauses.append((-lits[i], -lits[j]))
            return clauses
        raise ValueError(f"unknown formula kind {kind!r}")

    def _assert_negation(self, node: Formula) -> list[Clause]:
        kind = node.kind
        if kind == "var":
            return [(-self._index(node),)]
        if kind == "not":
            return self.assert_true(node.children[0])
        if kind == "and":
            return self.assert_true(lor(*(lnot(c) for c in _flatten(node, "and"))))
        if kind == "or":
            return self.assert_true(land(*(lnot(c) for c in _flatten(node, "or"))))
        if kind == "implies":
            a, b = node.children
            return self.assert_true(land(a, lnot(b)))
        if kind == "iff":
            a, b = node.children
            return self.assert_true(iff(a, lnot(b)))
        # negated exactly-one has no flat clausal form; define and deny it
        return [(-self.define(node),)]

    def literal(self, node: Formula) -> int:
        negated = False
        while node.kind == "not":
            negated = not negated
            node = node.children[0]
        if node.kind == "var":
            lit = self._index(node)
        else:
            lit = self.define(node)
        return -lit if negated else lit

    def define(self, node: Formula) -> int:
        """Auxiliary variable equivalent to the subformula."""
        cached = self._defined.get(node)
        if cached is not None:
            return cached
        kind = node.kind
        if kind == "implies":
            a, b = node.children
            return self.define(lor(lnot(a), b))
        aux = self.next_aux
        self.next_aux += 1
        self._defined[node] = aux
        if kind == "and":
            lits = [self.literal(c) for c in _flatten(node, "and")]
            for lit in lits:
                self._clauses.append((-aux, lit))
            self._clauses.append(tuple([aux] + [-lit for lit in lits]))
        elif kind == "or":
            lits = [self.literal(c) for c in _flatten(node, "or")]
            self._clauses.append(tuple([-aux] + lits))
            for lit in lits:
                self._clauses.append((aux, -lit))
        elif kind == "iff":
            la = self.literal(node.children[0])
            lb = self.literal(node.children[1])
            self._clauses.extend(
                [(-aux, -la, lb), (-aux, la, -lb), (aux, la, lb), (aux, -la, -lb)]
            )
        elif kind == "xor":
            lits = [self.literal(c) for c in node.children]
            self._clauses.append(tuple([-aux] + lits))
            for i in range(len(lits)):
                for j in range(i + 1, len(lits)):
                    self._clauses.append((-aux, -lits[i], -lits[j]))
            for i, lit in enumerate(lits):
                rest = [other for k, other in enumerate(lits) if k != i]
                self._clauses.append(tuple([aux, -lit] + rest))
        else:
            raise ValueError(f"cannot define formula kind {kind!r}")
        return aux

    def compile(self, node: Formula, line: int = 0) -> tuple[Clause, ...]:
        self.line = line
        # every constraint must be self-contained: shared subformulas get
        # fresh definitions so each clause bundle stands alone in a union
        self._defined = {}
        self._clauses = []
        asserted = self.assert_true(node)
        # definition clauses first, then the asserted shape
        return tuple(self._clauses + asserted)


def _flatten(node: Formula, kind: str) -> Iterator[Formula]:
    for child in node.children:
        if child.kind == kind:
            yield from _flatten(child, kind)
        else:
            yield child


def to_cnf(formula: Formula, table: VariableTable, aux_start: int | None = None) -> tuple[Clause, ...]:
    """Equisatisfiable clauses for one formula.

    Auxiliary variables are numbered from ``aux_start`` (defaults to
    just past the named range).
    """
    compiler = _CnfCompiler(table, aux_start if aux_start is not None else len(table) + 1)
    return compiler.compile(formula)


# --------------------------------------------------------------------------
# KB and requirement files

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line


def parse_kb(text: str) -> tuple[VariableTable, ConstraintSet]:
    """Parse KB text into a variable table and one constraint per line."""
    names: list[str] = []
    entries: list[tuple[int, str, str]] = []
    for number, line in _content_lines(text):
        if line.startswith("vars:"):
            if entries:
                raise KbSyntaxError("vars: must precede all constraints", number)
            for name in line[len("vars:"):].split():
                if name in _RESERVED:
                    raise KbSyntaxError(f"reserved word cannot name a variable: {name!r}", number)
                if not _ID_RE.fullmatch(name):
                    raise KbSyntaxError(f"bad variable name: {name!r}", number)
                names.append(name)
            continue
        if ":" not in line:
            raise KbSyntaxError("expected '<id>: <formula>'", number)
        cid, body = line.split(":", 1)
        cid = cid.strip()
        if not _ID_RE.fullmatch(cid):
            raise KbSyntaxError(f"bad constraint id: {cid!r}", number)
        entries.append((number, cid, body.strip()))

    try:
        table = VariableTable(names)
    except ValueError as exc:
        raise IngestError(str(exc)) from None

    compiler = _CnfCompiler(table, len(table) + 1)
    constraints: list[Constraint] = []
    seen: set[str] = set()
    for number, cid, body in entries:
        if cid in seen:
            raise KbSyntaxError(f"duplicate constraint id: {cid!r}", number)
        seen.add(cid)
        ast = _FormulaParser(_tokenize(body, number), number).parse()
        clauses = compiler.compile(ast, line=number)
        constraints.append(Constraint(cid, clauses, table, label=format_formula(ast)))
    return table, ConstraintSet(constraints)


def format_kb(table: VariableTable, constraints: ConstraintSet) -> str:
    """Render a KB back into the grammar; reparsing gives equal constraints."""
    lines = []
    if len(table):
        lines.append("vars: " + " ".join(table.names()))
    for c in constraints:
        if c.label is None:
            raise IngestError(f"constraint {c.id!r} has no formula text to format")
        lines.append(f"{c.id}: {c.label}")
    return "\n".join(lines) + "\n"


_REQ_RE = re.compile(
    r"(?P<id>[A-Za-z_][A-Za-z0-9_]*)\s*:\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>[tf])$"
)


def parse_requirements(text: str, table: VariableTable) -> ConstraintSet:
    """Parse '<id>: <Name>=t|f' lines into unit constraints, order kept."""
    constraints: list[Constraint] = []
    seen: set[str] = set()
    for number, line in _content_lines(text):
        m = _REQ_RE.fullmatch(line)
        if m is None:
            raise KbSyntaxError("expected '<id>: <Name>=t|f'", number)
        cid, name, value = m.group("id"), m.group("name"), m.group("value")
        if cid in seen:
            raise KbSyntaxError(f"duplicate requirement id: {cid!r}", number)
        seen.add(cid)
        if name not in table:
            raise KbSyntaxError(f"undeclared variable: {name!r}", number)
        index = table.index_of(name)
        lit = index if value == "t" else -index
        constraints.append(Constraint(cid, ((lit,),), table, label=f"{name}={value}"))
    return ConstraintSet(constraints)


# --------------------------------------------------------------------------
# DIMACS

_DIMACS_NAME_RE = re.compile(r"c\s+(?P<index>\d+)\s+(?P<name>\S+)\s*$")


def parse_dimacs(text: str) -> tuple[VariableTable, ConstraintSet]:
    """Load DIMACS CNF; each clause becomes one background constraint kb<N>.

    Comment lines of the form 'c <index> <name>' name a variable; the
    rest get synthetic names x<index>.
    """
    named: dict[int, str] = {}
    header: tuple[int, int] | None = None
    clauses: list[Clause] = []
    pending: list[int] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            m = _DIMACS_NAME_RE.match(line)
            if m is not None:
                named[int(m.group("index"))] = m.group("name")
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise KbSyntaxError("malformed header, expected 'p cnf <vars> <clauses>'", number)
            if header is not None:
                raise KbSyntaxError("duplicate header", number)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise KbSyntaxError("non-numeric header fields", number) from None
            continue
        if header is None:
            raise KbSyntaxError("clause before header", number)
        try:
            literals = [int(tok) for tok in line.split()]
        except ValueError:
            raise KbSyntaxError(f"bad clause token in {line!r}", number) from None
        for lit in literals:
            if lit == 0:
                clauses.append(tuple(pending))
                pending.clear()
            else:
                if abs(lit) > header[0]:
                    raise KbSyntaxError(f"literal {lit} exceeds declared {header[0]} variables", number)
                pending.append(lit)
    if header is None:
        raise IngestError("missing 'p cnf' header")
    if pending:
        raise IngestError("unterminated clause at end of file")
    if len(clauses) != header[1]:
        raise IngestError(f"header declares {header[1]} clauses, found {len(clauses)}")
    for index in named:
        if not 1 <= index <= header[0]:
            raise IngestError(f"variable name comment for out-of-range index {index}")

    table = VariableTable(
        named.get(i, f"x{i}") for i in range(1, header[0] + 1)
    )
    constraints = []
    for ordinal, clause in enumerate(clauses, start=1):
        cid = f"kb{ordinal}"
        if clause:
            constraints.append(Constraint(cid, (clause,), table))
        else:
            constraints.append(Constraint(cid, (), table, contradiction=True))
    return table, ConstraintSet(constraints)


def load_dimacs(path: str) -> tuple[VariableTable, ConstraintSet]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_dimacs(handle.read())


def detect_kb_format(text: str) -> str:
    """'dimacs' when a 'p cnf' header is present, otherwise 'kb'."""
    for line in text.splitlines():
        if line.strip().startswith("p cnf"):
            return "dimacs"
    return "kb"


def load_kb(path: str) -> tuple[VariableTable, ConstraintSet]:
    """Read a KB file in either supported format, detected by content."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    if detect_kb_format(text) == "dimacs":
        return parse_dimacs(text)
    return parse_kb(text)


# --------------------------------------------------------------------------
# requirement synthesis

@dataclass(frozen=True)
class RequirementSpec:
    """A synthesized requirement set: ordered variable assignments."""

    assignments: tuple[tuple[str, bool], ...]

    @property
    def cardinality(self) -> int:
        return len(self.assignments)

    def to_text(self) -> str:
        lines = [
            f"r{i}: {name}={'t' if value else 'f'}"
            for i, (name, value) in enumerate(self.assignments, start=1)
        ]
        return "\n".join(lines) + "\n"

    def to_constraints(self, table: VariableTable) -> ConstraintSet:
        return parse_requirements(self.to_text(), table)


def gen_requirements(
    table: VariableTable,
    background: ConstraintSet,
    count: int,
    card_range: tuple[int, int],
    seed: int,
    attempt_factor: int = 1000,
) -> list[RequirementSpec]:
    """Sample requirement sets that conflict with the background KB.

    Uniform rejection sampling from a single seeded generator: draw a
    cardinality, draw that many distinct variables with random
    polarities, keep the set only if it is inconsistent together with
    the background.  Deterministic for a fixed seed.
    """
    low, high = card_range
    if not 1 <= low <= high:
        raise IngestError(f"bad cardinality range {low}:{high}")
    if high > len(table):
        raise IngestError(f"cardinality {high} exceeds {len(table)} variables")
    if count < 0:
        raise IngestError("count must be non-negative")

    rng = random.Random(seed)
    budget = attempt_factor * count
    out: list[RequirementSpec] = []
    attempts = 0
    while len(out) < count:
        if attempts >= budget:
            raise IngestError(
                f"found only {len(out)} of {count} conflicting requirement sets "
                f"after {attempts} attempts"
            )
        attempts += 1
        cardinality = rng.randint(low, high)
        names = rng.sample(table.names(), cardinality)
        spec = RequirementSpec(tuple((name, rng.random() < 0.5) for name in names))
        if not check_union([background, spec.to_constraints(table)]).consistent:
            out.append(spec)
    return out
