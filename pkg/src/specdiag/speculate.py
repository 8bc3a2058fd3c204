"""Speculative consistency checking behind the diagnosis search.

When the search asks a question whose answer is not on file, we guess
how the search will proceed from either outcome and schedule the checks
both continuations would need, up to a budget.  Workers solve them in
the background while the search blocks only on the answer it actually
asked for.  Results are published exactly once into a per-run lookup
table keyed by the canonical id union, so repeated questions never cost
a second solver call.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
from typing import Callable, Sequence

from .model import ConstraintSet, canonical_key, split
from .sat import SolverError, check_union

REQUESTED = "requested"
SPECULATIVE = "speculative"

Backlog = tuple[ConstraintSet, ...]


class CheckEntry:
    """One scheduled consistency check; its verdict is published once."""

    __slots__ = ("key", "parts", "origin", "seq", "verdict", "error", "duration_ms", "_done")

    def __init__(self, key: str, parts: tuple[ConstraintSet, ...], origin: str, seq: int):
        self.key = key
        self.parts = parts
        self.origin = origin
        self.seq = seq
        self.verdict: bool | None = None
        self.error: BaseException | None = None
        self.duration_ms: int | None = None
        self._done = threading.Event()

    @property
    def done(self) -> bool:
        return self._done.is_set()

    @property
    def status(self) -> str:
        return "done" if self.done else "pending"

    def wait(self) -> bool:
        self._done.wait()
        if self.error is not None:
            raise SolverError(f"check {self.key!r} failed: {self.error}") from self.error
        assert self.verdict is not None
        return self.verdict


class LookupTable:
    """Thread-safe check registry: at most one entry per key, ever.

    ``schedule`` is called outside the lock for every newly admitted
    entry; leave it unset to record entries without executing them.
    ``diagnostics`` receives one line per table event:
    ``ADD <key> origin=<requested|speculative>`` and
    ``DONE <key> verdict=<t|f> ms=<n>``.
    """

    def __init__(
        self,
        schedule: Callable[[CheckEntry], None] | None = None,
        diagnostics: Callable[[str], None] | None = None,
    ):
        self._lock = threading.Lock()
        self._entries: dict[str, CheckEntry] = {}
        self._seq = itertools.count()
        self._schedule = schedule
        self._diagnostics = diagnostics

    def _emit(self, line: str) -> None:
        if self._diagnostics is not None:
            self._diagnostics(line)

    def add(
        self,
        key: str,
        parts: tuple[ConstraintSet, ...],
        origin: str,
        schedule: bool = True,
    ) -> CheckEntry | None:
        """Insert a pending entry unless the key is already present.

        Check and insert happen atomically: of two racing calls exactly
        one wins and the loser gets None.
        """
        with self._lock:
            if key in self._entries:
                return None
            entry = CheckEntry(key, parts, origin, next(self._seq))
            self._entries[key] = entry
        self._emit(f"ADD {key} origin={origin}")
        if schedule and self._schedule is not None:
            self._schedule(entry)
        return entry

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._entries

    def entry(self, key: str) -> CheckEntry | None:
        with self._lock:
            return self._entries.get(key)

    def keys(self) -> tuple[str, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def lookup(self, key: str) -> bool:
        """Block until the key's verdict is published, then return it."""
        entry = self.entry(key)
        if entry is None:
            raise KeyError(f"no check scheduled for key {key!r}")
        return entry.wait()

    def complete(self, entry: CheckEntry, verdict: bool, duration_ms: int) -> None:
        if entry.done:
            raise RuntimeError(f"check {entry.key!r} completed twice")
        entry.verdict = verdict
        entry.duration_ms = duration_ms
        entry._done.set()
        self._emit(f"DONE {entry.key} verdict={'t' if verdict else 'f'} ms={duration_ms}")

    def fail(self, entry: CheckEntry, error: BaseException) -> None:
        if entry.done:
            raise RuntimeError(f"check {entry.key!r} completed twice")
        entry.error = error
        entry._done.set()


class SpeculationBudget:
    """Counts admitted checks against a cap; one budget per wave."""

    def __init__(self, cap: int):
        if cap < 0:
            raise ValueError("budget cap must be non-negative")
        self.cap = cap
        self._spent = 0
        self._lock = threading.Lock()

    @property
    def spent(self) -> int:
        return self._spent

    @property
    def exhausted(self) -> bool:
        return self._spent >= self.cap

    def spend(self) -> None:
        with self._lock:
            self._spent += 1


def look_ahead(
    candidates: ConstraintSet,
    background: ConstraintSet,
    backlog: Backlog,
    table: LookupTable,
    budget: SpeculationBudget,
    requested_key: str | None = None,
) -> None:
    """Schedule the checks the diagnosis search is about to need.

    ``backlog`` stacks the constraint blocks the search would consider
    next, nearest first.  The union of background and candidates is
    admitted, then both continuations are expanded: first as if that
    union will prove consistent (the search would extend it with backlog
    material, giving the larger checks a head start), then as if it will
    prove inconsistent (the search would narrow the candidate half).
    Every admitted check spends budget; once the budget is gone the
    recursion stops.
    """
    if budget.exhausted:
        return
    key = canonical_key(background, candidates)
    if not table.exists(key):
        origin = REQUESTED if key == requested_key else SPECULATIVE
        if table.add(key, (background, candidates), origin) is not None:
            budget.spend()

    # assume consistent: the search keeps candidates and probes further
    # into the backlog on top of the extended background
    if backlog:
        head = backlog[0]
        extended = background.union(candidates)
        if (
            len(backlog) > 1
            and len(head) == 1
            and table.exists(canonical_key(extended, head))
        ):
            # the single-step extension is already on file; jump past it
            # and expand the block after it instead
            _descend(backlog[1], extended, backlog[2:], table, budget, requested_key)
        elif len(head) == 1:
            look_ahead(head, extended, backlog[1:], table, budget, requested_key)
        else:
            _descend(head, extended, backlog[1:], table, budget, requested_key)

    # assume inconsistent: the search narrows the candidate set, pushing
    # the far half onto the backlog
    if len(candidates) > 1:
        left, right = split(candidates)
        look_ahead(left, background, (right,) + backlog, table, budget, requested_key)
    elif backlog:
        head = backlog[0]
        if len(head) == 1:
            look_ahead(head, background, backlog[1:], table, budget, requested_key)
        else:
            _descend(head, background, backlog[1:], table, budget, requested_key)


def _descend(
    block: ConstraintSet,
    background: ConstraintSet,
    rest: Backlog,
    table: LookupTable,
    budget: SpeculationBudget,
    requested_key: str | None,
) -> None:
    """Expand a backlog block: halve it when possible, else take it whole."""
    if len(block) > 1:
        first, second = split(block)
        look_ahead(first, background, (second,) + rest, table, budget, requested_key)
    else:
        look_ahead(block, background, rest, table, budget, requested_key)


class _Counter:
    __slots__ = ("_value", "_lock")

    def __init__(self) -> None:
        self._value = 0
        self._lock = threading.Lock()

    def bump(self) -> None:
        with self._lock:
            self._value += 1

    @property
    def value(self) -> int:
        return self._value


_QueueItem = tuple[int, int, CheckEntry | None]


class SpeculativeProvider:
    """Check provider that pre-computes likely questions on worker threads.

    One provider serves one diagnosis run: the lookup table lives and
    dies with it.  A question already on file is answered from the
    table; otherwise a look-ahead wave schedules the question itself
    (highest priority) plus speculative follow-ups, and the caller
    blocks only on its own answer.  With ``max_gcc=0`` no wave admits
    anything and every question falls back to a synchronous call on the
    requesting thread, reproducing plain sequential behavior.

    ``budget_scope`` is "wave" (fresh budget per miss) or "run" (one
    budget for the provider's lifetime).
    """

    def __init__(
        self,
        workers: int,
        max_gcc: int,
        per_check_latency: float = 0.0,
        diagnostics: Callable[[str], None] | None = None,
        budget_scope: str = "wave",
        check_timeout_s: float | None = None,
    ):
        if workers < 1:
            raise ValueError("need at least one worker")
        if max_gcc < 0:
            raise ValueError("max_gcc must be non-negative")
        if budget_scope not in ("wave", "run"):
            raise ValueError(f"unknown budget scope {budget_scope!r}")
        self.workers = workers
        self.max_gcc = max_gcc
        self.per_check_latency = per_check_latency
        self.check_timeout_s = check_timeout_s
        self._table = LookupTable(schedule=self._enqueue, diagnostics=diagnostics)
        self._queue: queue.Queue[_QueueItem] = queue.PriorityQueue()
        self._threads: list[threading.Thread] = []
        self._pool_lock = threading.Lock()
        self._closed = False
        self._calls = _Counter()
        self._hits = _Counter()
        self._run_budget = SpeculationBudget(max_gcc) if budget_scope == "run" else None
        self._sentinel_seq = itertools.count()

    # ---- provider interface

    @property
    def solver_calls(self) -> int:
        return self._calls.value

    @property
    def lookup_hits(self) -> int:
        return self._hits.value

    @property
    def table(self) -> LookupTable:
        return self._table

    def is_consistent(
        self,
        candidates: ConstraintSet,
        background: ConstraintSet,
        deferred: ConstraintSet,
    ) -> bool:
        key = canonical_key(background, candidates)
        if self._table.exists(key):
            self._hits.bump()
        else:
            budget = self._run_budget or SpeculationBudget(self.max_gcc)
            backlog: Backlog = (deferred,) if len(deferred) else ()
            look_ahead(
                candidates,
                background,
                backlog,
                self._table,
                budget,
                requested_key=key,
            )
            if not self._table.exists(key):
                # speculation admitted nothing (disabled or spent budget):
                # answer inline on this thread, still published once
                entry = self._table.add(key, (background, candidates), REQUESTED, schedule=False)
                if entry is not None:
                    self._execute(entry)
        return self._table.lookup(key)

    # ---- worker pool

    def _enqueue(self, entry: CheckEntry) -> None:
        self._ensure_pool()
        priority = 0 if entry.origin == REQUESTED else 1
        self._queue.put((priority, entry.seq, entry))

    def _ensure_pool(self) -> None:
        if self._threads:
            return
        with self._pool_lock:
            if self._threads or self._closed:
                return
            for number in range(self.workers):
                thread = threading.Thread(
                    target=self._worker, name=f"specdiag-worker-{number}", daemon=True
                )
                thread.start()
                self._threads.append(thread)

    def _worker(self) -> None:
        while True:
            _, _, entry = self._queue.get()
            if entry is None:
                return
            self._execute(entry)

    def _execute(self, entry: CheckEntry) -> None:
        started = time.perf_counter()
        self._calls.bump()
        try:
            if self.per_check_latency > 0:
                time.sleep(self.per_check_latency)
            verdict = check_union(entry.parts, timeout_s=self.check_timeout_s)
        except BaseException as exc:  # published so waiters can re-raise
            self._table.fail(entry, exc)
            return
        elapsed_ms = int((time.perf_counter() - started) * 1000)
        self._table.complete(entry, verdict.consistent, elapsed_ms)

    def close(self) -> None:
        with self._pool_lock:
            if self._closed:
                return
            self._closed = True
            threads = list(self._threads)
        for _ in threads:
            self._queue.put((2, next(self._sentinel_seq), None))
        for thread in threads:
            thread.join()

    def __enter__(self) -> "SpeculativeProvider":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
