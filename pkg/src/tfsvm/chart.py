"""Bottom-up chart control, shared by parsing and generation.

The chart stores complete edges (frozen feature structures over a span) and
active edges (matched constituents plus a machine suspension to resume).
Initialization differs per task: the diagonal holds lexical structures for a
word string, or linearized semantic elements for a logical form.  After that
one fixpoint loop runs regardless of task: when a complete edge lands, every
rule is tried with it as first constituent, and every active edge ending at
its left boundary is resumed on it.  Dot movement is unification performed by
compiled code; rules are evaluated left to right, purely bottom-up, with no
prediction and no subsumption check (duplicate edges are kept unless
deduplication is explicitly requested).

Results are all complete edges spanning the whole input: there is no start
symbol.  Termination is by consumption plus configurable resource limits,
since grammars can legitimately diverge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .heap import FS, Heap
from .machine import Failed, Machine, Program, RuleInfo, Success, Suspended, Suspension
from .render import fs_json

RUN_LOOP_MARKER = "tfsvm.chart.ChartRun.step"
run_loop_invocations = 0


class UnknownWord(Exception):
    def __init__(self, word: str, position: int):
        self.word, self.position = word, position
        super().__init__(f"unknown word {word!r} at position {position}")


class ResourceExhausted(Exception):
    def __init__(self, limit: str, counters: dict):
        self.limit, self.counters = limit, counters
        super().__init__(f"resource limit exceeded: {limit} ({counters})")


@dataclass
class Limits:
    max_edges: int = 100_000
    max_steps: int = 10_000_000


@dataclass
class CompleteEdge:
    id: int
    frm: int
    to: int
    fs: FS
    rule: int = -1  # -1 for initialization edges
    is_init: bool = False


@dataclass
class ActiveEdge:
    id: int
    frm: int
    to: int
    susp: Suspension
    rule: RuleInfo
    matched: list[int] = field(default_factory=list)  # complete edge ids

    @property
    def needed(self) -> int:
        return self.rule.arity - self.susp.matched


@dataclass
class Chart:
    n: int
    completes: list[CompleteEdge] = field(default_factory=list)
    actives: list[ActiveEdge] = field(default_factory=list)
    by_start: dict[int, list[CompleteEdge]] = field(default_factory=dict)
    act_by_end: dict[int, list[ActiveEdge]] = field(default_factory=dict)
    counters: dict = field(
        default_factory=lambda: {"edges": 0, "attempts": 0, "failures": 0}
    )

    def spanning(self) -> list[CompleteEdge]:
        return [e for e in self.completes if e.frm == 0 and e.to == self.n]

    def cell(self, frm: int, to: int) -> list[CompleteEdge]:
        return [e for e in self.completes if e.frm == frm and e.to == to]


def init_parse(program: Program, words: list[str], heap: Heap) -> list[list[FS]]:
    """Look each word up; position i (1-based) occupies the [i-1, i] diagonal."""
    items: list[list[FS]] = []
    for pos, w in enumerate(words, start=1):
        entries = program.lexicon_fs(w)
        if not entries:
            raise UnknownWord(w, pos)
        cell = []
        for e in entries:
            root = heap.copy_from(e.heap, e.root)
            cell.append(FS(heap, heap.freeze(root)))
        items.append(cell)
    return items


def init_generate(sem: FS, heap: Heap, cfg=None) -> list[list[FS]]:
    """Linearized semantic elements become the diagonal, in consumption order."""
    from .invert import linearize_semantics

    items: list[list[FS]] = []
    for el in linearize_semantics(sem, cfg):
        root = heap.copy_from(el.heap, el.root)
        items.append([FS(heap, heap.freeze(root))])
    return items


class ChartRun:
    """One chart computation: the engine behind run(), steppable by debuggers.

    A step is one machine instruction when an attempt is active, otherwise one
    scheduling action.  There is deliberately no parse/generate distinction
    anywhere in this class.
    """

    def __init__(
        self,
        program: Program,
        heap: Heap,
        initial: list[list[FS]],
        limits: Limits | None = None,
        trace=None,
        dedup: bool = False,
        agenda_order: str = "fifo",
    ):
        self.program = program
        self.heap = heap
        self.limits = limits or Limits()
        self.trace = trace
        self.dedup = dedup
        self.agenda_order = agenda_order
        self.chart = Chart(n=len(initial))
        self.machine = Machine(program, heap, trace=trace)
        self.agenda: deque[CompleteEdge] = deque()
        self.tasks: deque[tuple] = deque()
        self._pending_outcome_ctx: tuple | None = None
        self._fingerprints: set = set()
        self.done = False
        if trace is not None:
            trace({"ev": "run-loop", "fn": RUN_LOOP_MARKER, "version": 1})
        for pos, cell in enumerate(initial):
            for fs in cell:
                self._add_complete(pos, pos + 1, fs, rule=-1, is_init=True)

    # -- edge creation -------------------------------------------------------

    def _add_complete(
        self, frm: int, to: int, fs: FS, rule: int, is_init: bool
    ) -> None:
        ch = self.chart
        if self.dedup:
            from .render import print_fs

            key = (frm, to, print_fs(fs))
            if key in self._fingerprints:
                return
            self._fingerprints.add(key)
        e = CompleteEdge(len(ch.completes) + len(ch.actives), frm, to, fs, rule, is_init)
        ch.completes.append(e)
        ch.counters["edges"] += 1
        if ch.counters["edges"] > self.limits.max_edges:
            raise ResourceExhausted("max_edges", dict(ch.counters))
        if self.trace is not None:
            self.trace(
                {
                    "ev": "edge",
                    "kind": "complete",
                    "from": frm,
                    "to": to,
                    "rule": rule,
                    "id": e.id,
                }
            )
        self.agenda.append(e)

    def _add_active(
        self, frm: int, to: int, susp: Suspension, rule: RuleInfo, matched: list[int]
    ) -> None:
        ch = self.chart
        a = ActiveEdge(len(ch.completes) + len(ch.actives), frm, to, susp, rule, matched)
        ch.actives.append(a)
        ch.act_by_end.setdefault(to, []).append(a)
        ch.counters["edges"] += 1
        if ch.counters["edges"] > self.limits.max_edges:
            raise ResourceExhausted("max_edges", dict(ch.counters))
        if self.trace is not None:
            self.trace(
                {
                    "ev": "edge",
                    "kind": "active",
                    "from": frm,
                    "to": to,
                    "rule": rule.index,
                    "dot": susp.matched,
                    "id": a.id,
                }
            )
        # pair with the complete edges already known at our right boundary
        for e in self.chart.by_start.get(to, []):
            self.tasks.append(("resume", a, e))

    # -- scheduling ----------------------------------------------------------

    def _process_complete(self, e: CompleteEdge) -> None:
        ch = self.chart
        ch.by_start.setdefault(e.frm, []).append(e)
        for a in ch.act_by_end.get(e.frm, []):
            self.tasks.append(("resume", a, e))
        for rule in self.program.rules:
            if rule.init_only and not e.is_init:
                continue
            self.tasks.append(("start", rule, e))

    def _begin_task(self, task: tuple) -> None:
        ch = self.chart
        ch.counters["attempts"] += 1
        if task[0] == "start":
            _, rule, e = task
            if self.trace is not None:
                self.trace(
                    {"ev": "attempt", "rule": rule.index, "dot": 0, "at": [e.frm, e.to]}
                )
            self.machine.begin(rule.entry, rule.index, e.fs)
            self._pending_outcome_ctx = ("start", rule, e)
        else:
            _, a, e = task
            if self.trace is not None:
                self.trace(
                    {
                        "ev": "attempt",
                        "rule": a.rule.index,
                        "dot": a.susp.matched,
                        "at": [a.frm, e.to],
                    }
                )
            self.machine.begin_resume(a.susp, e.fs)
            self._pending_outcome_ctx = ("resume", a, e)

    def _finish(self, outcome) -> None:
        kind, x, e = self._pending_outcome_ctx
        self._pending_outcome_ctx = None
        ch = self.chart
        if kind == "start":
            rule, frm, to, matched = x, e.frm, e.to, [e.id]
        else:
            rule, frm, to, matched = x.rule, x.frm, e.to, x.matched + [e.id]
        if isinstance(outcome, Failed):
            ch.counters["failures"] += 1
            if self.trace is not None:
                self.trace({"ev": "fail", "rule": rule.index, "at": [frm, to]})
            return
        if isinstance(outcome, Suspended):
            self._add_active(frm, to, outcome.susp, rule, matched)
            return
        assert isinstance(outcome, Success)
        self._add_complete(frm, to, outcome.fs, rule.index, is_init=False)

    # -- the run loop ----------------------------------------------------------

    def step(self) -> bool:
        """Advance one unit; False when the computation has finished."""
        global run_loop_invocations
        run_loop_invocations += 1
        if self.machine.active:
            out = self.machine.step()
            if self.machine.steps > self.limits.max_steps:
                raise ResourceExhausted("max_steps", dict(self.chart.counters))
            if out is not None:
                self._finish(out)
            return True
        if self.tasks:
            self._begin_task(self.tasks.popleft())
            return True
        if self.agenda:
            e = (
                self.agenda.popleft()
                if self.agenda_order == "fifo"
                else self.agenda.pop()
            )
            self._process_complete(e)
            return True
        self.done = True
        return False

    def run(self) -> list[CompleteEdge]:
        while self.step():
            pass
        return self.chart.spanning()


def run(
    program: Program,
    heap: Heap,
    initial: list[list[FS]],
    limits: Limits | None = None,
    trace=None,
    dedup: bool = False,
    agenda_order: str = "fifo",
) -> tuple[list[CompleteEdge], Chart]:
    """Run the chart to fixpoint; returns (spanning edges, full chart)."""
    cr = ChartRun(program, heap, initial, limits, trace, dedup, agenda_order)
    spanning = cr.run()
    return spanning, cr.chart


def chart_json(chart: Chart) -> dict:
    """Debugger rendering of the whole chart."""
    edges = []
    for e in chart.completes:
        edges.append(
            {
                "id": e.id,
                "kind": "complete",
                "from": e.frm,
                "to": e.to,
                "rule": e.rule,
                "init": e.is_init,
                "fs": fs_json(e.fs),
            }
        )
    for a in chart.actives:
        edges.append(
            {
                "id": a.id,
                "kind": "active",
                "from": a.frm,
                "to": a.to,
                "rule": a.rule.index,
                "dot": a.susp.matched,
                "needed": a.needed,
            }
        )
    edges.sort(key=lambda d: d["id"])
    return {"n": chart.n, "edges": edges, "counters": dict(chart.counters)}
