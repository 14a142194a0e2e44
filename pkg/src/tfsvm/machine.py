"""The abstract machine: instruction set, rule compiler, interpreter.

A rule compiles to straight-line code that rebuilds the rule's expanded
template against run-time constituents.  The put/get split follows the
classic compiled-unification design, adapted to typed feature structures:

* ``PUT_*``/``SET_ARC`` construct the head side;
* ``GET_*`` match a constituent against the template, with type work that was
  statically decidable already folded into the emitted types;
* ``UNIFY_REGS`` realizes reentrancies within and across constituents;
* ``BIND_CONSTITUENT``/``ADVANCE_DOT`` delimit dot movement: execution
  suspends between body constituents, and an active edge is exactly a
  suspension snapshot plus a resume offset.

There is no write/read mode flag: total well-typing means every feature slot
exists at least as a lazy placeholder, so ``GET_ARC`` on an unexpanded cell
materializes one level and subsumes write mode.  Failure is sticky; the
working region is discarded wholesale and the frozen region is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .heap import FS, Heap, UnifyFailure, copy_into
from .signature import Signature
from .templates import EmptyTemplate, LexTemplate, RuleTemplate

PUT_NODE = 0
PUT_REF = 1
SET_ARC = 2
GET_NODE = 3
GET_ARC = 4
UNIFY_REGS = 5
BIND_CONSTITUENT = 6
ADVANCE_DOT = 7
BUILD_HEAD = 8
PROCEED = 9

OP_NAMES = {
    PUT_NODE: "PUT_NODE",
    PUT_REF: "PUT_REF",
    SET_ARC: "SET_ARC",
    GET_NODE: "GET_NODE",
    GET_ARC: "GET_ARC",
    UNIFY_REGS: "UNIFY_REGS",
    BIND_CONSTITUENT: "BIND_CONSTITUENT",
    ADVANCE_DOT: "ADVANCE_DOT",
    BUILD_HEAD: "BUILD_HEAD",
    PROCEED: "PROCEED",
}

Instruction = tuple[int, int, int, int]


class MachineFault(Exception):
    """An invalid register or offset: a compiler bug, not grammar failure."""


class RegisterOverflow(Exception):
    pass


@dataclass
class RuleInfo:
    index: int
    name: str
    entry: int
    arity: int
    resume: list[int]  # offset to resume at for constituent k (k >= 2)
    init_only: bool = False


@dataclass
class Program:
    """Compiled grammar: shared instruction array plus per-rule metadata."""

    instructions: list[Instruction] = field(default_factory=list)
    rules: list[RuleInfo] = field(default_factory=list)
    heap: Heap | None = None  # frozen storage for lexicon and empty-category structures
    lexicon: dict[str, list[int]] = field(default_factory=dict)
    empty_entries: list[int] = field(default_factory=list)

    def lexicon_fs(self, word: str) -> list[FS]:
        return [FS(self.heap, r) for r in self.lexicon.get(word, [])]

    def rule_of_offset(self, ip: int) -> RuleInfo | None:
        best = None
        for r in self.rules:
            if r.entry <= ip:
                if best is None or r.entry > best.entry:
                    best = r
        return best


@dataclass
class Suspension:
    """An active edge's machine half: a relocatable working-region snapshot."""

    rule: int
    ip: int
    matched: int
    heap_snap: tuple
    regs: list[int]


@dataclass
class Success:
    fs: FS


@dataclass
class Suspended:
    susp: Suspension


@dataclass
class Failed:
    failure: UnifyFailure | None


# ---------------------------------------------------------------------------
# Compiler
# ---------------------------------------------------------------------------


from .heap import NODE as _NODE
from .heap import UNEXPANDED as _UNEXPANDED


class _RuleCompiler:
    def __init__(self, tpl: RuleTemplate, sig: Signature, base: int, max_regs: int):
        self.tpl = tpl
        self.sig = sig
        self.base = base
        self.max_regs = max_regs
        self.code: list[Instruction] = []
        self.reg_of: dict[int, int] = {}
        self.next_reg = len(tpl.body) + 1
        self.indeg = self._indegrees()

    def _indegrees(self) -> dict[int, int]:
        heap = self.tpl.heap
        roots = [self.tpl.head] + list(self.tpl.body)
        indeg: dict[int, int] = {}
        seen: set[int] = set()
        stack = []
        for r in roots:
            r = heap.deref(r)
            indeg[r] = indeg.get(r, 0) + 1
            stack.append(r)
        while stack:
            i = heap.deref(stack.pop())
            if i in seen:
                continue
            seen.add(i)
            if heap.kind[i] == _NODE:
                for a in heap.arcs[i]:
                    a = heap.deref(a)
                    indeg[a] = indeg.get(a, 0) + 1
                    stack.append(a)
        return indeg

    def _fresh(self) -> int:
        r = self.next_reg
        self.next_reg += 1
        if self.next_reg > self.max_regs:
            raise RegisterOverflow(
                f"rule {self.tpl.name!r} needs more than {self.max_regs} registers"
            )
        return r

    def emit(self, op: int, a: int = 0, b: int = 0, c: int = 0) -> int:
        self.code.append((op, a, b, c))
        return self.base + len(self.code) - 1

    def _skippable(self, cell: int, restriction: int) -> bool:
        heap = self.tpl.heap
        return (
            heap.kind[cell] == _UNEXPANDED
            and heap.data[cell] == restriction
            and self.indeg[cell] <= 1
        )

    # matching: constrain the runtime value in `reg` by template cell `c`
    def match(self, c: int, reg: int) -> None:
        heap, sig = self.tpl.heap, self.sig
        c = heap.deref(c)
        if c in self.reg_of:
            self.emit(UNIFY_REGS, reg, self.reg_of[c])
            return
        self.reg_of[c] = reg
        t = heap.data[c]
        if heap.kind[c] == _UNEXPANDED:
            if t != 0:
                self.emit(GET_NODE, t, reg)
            return
        self.emit(GET_NODE, t, reg)
        for k, (f, r) in enumerate(sig.features_of(t)):
            a = heap.deref(heap.arcs[c][k])
            if self._skippable(a, r):
                continue
            dst = self._fresh()
            self.emit(GET_ARC, reg, f, dst)
            self.match(a, dst)

    # head construction: build template cell `c`, return its register
    def build(self, c: int, target: int | None = None) -> int:
        heap, sig = self.tpl.heap, self.sig
        c = heap.deref(c)
        if c in self.reg_of:
            if target is not None and target != self.reg_of[c]:
                self.emit(PUT_REF, self.reg_of[c], target)
                return target
            return self.reg_of[c]
        reg = target if target is not None else self._fresh()
        t = heap.data[c]
        self.emit(PUT_NODE, t, reg)
        self.reg_of[c] = reg
        if heap.kind[c] == _NODE:
            for k, (f, r) in enumerate(sig.features_of(t)):
                a = heap.deref(heap.arcs[c][k])
                if self._skippable(a, r):
                    continue
                ar = self.build(a)
                self.emit(SET_ARC, reg, f, ar)
        return reg

    def compile(self) -> tuple[list[Instruction], list[int]]:
        resume: list[int] = []
        n = len(self.tpl.body)
        for k, broot in enumerate(self.tpl.body, start=1):
            if k >= 2:
                resume.append(self.base + len(self.code))
            self.emit(BIND_CONSTITUENT, k)
            self.match(broot, k)
            if k < n:
                self.emit(ADVANCE_DOT)
        head_reg = self.build(self.tpl.head, target=0)
        self.emit(BUILD_HEAD, head_reg)
        self.emit(PROCEED)
        return self.code, resume


def compile_rule(
    tpl: RuleTemplate, sig: Signature, base: int = 0, max_regs: int = 4096
) -> tuple[list[Instruction], list[int]]:
    """Compile one expanded rule template to straight-line code.

    Returns (instructions, resume offsets).  Offsets are absolute, assuming
    the fragment is placed at ``base``.
    """
    return _RuleCompiler(tpl, sig, base, max_regs).compile()


def compile_structure(
    fs_heap: Heap, root: int, sig: Signature, base: int = 0, max_regs: int = 4096
) -> list[Instruction]:
    """Zero-arity fragment that just builds a closed structure and proceeds."""
    tpl = RuleTemplate(fs_heap, root, [], "struct")
    code, _ = _RuleCompiler(tpl, sig, base, max_regs).compile()
    return code


def compile_grammar(
    rules: list[RuleTemplate],
    lexicon: list[LexTemplate],
    empties: list[EmptyTemplate],
    sig: Signature,
    max_regs: int = 4096,
) -> Program:
    """Assemble a whole program: rule code, prebuilt lexicon, empty metadata.

    Lexical entries are closed descriptions, so they are stored as prebuilt
    frozen structures rather than code; empty categories additionally get
    zero-arity fragments (they are folded into rules before this point)."""
    prog = Program(heap=Heap(sig))
    for i, tpl in enumerate(rules):
        base = len(prog.instructions)
        code, resume = compile_rule(tpl, sig, base, max_regs)
        prog.instructions.extend(code)
        prog.rules.append(
            RuleInfo(i, tpl.name, base, len(tpl.body), resume, tpl.init_only)
        )
    for entry in lexicon:
        root = prog.heap.copy_from(entry.heap, entry.root)
        root = prog.heap.freeze(root)
        prog.lexicon.setdefault(entry.word, []).append(root)
    for e in empties:
        base = len(prog.instructions)
        prog.instructions.extend(compile_structure(e.heap, e.root, sig, base, max_regs))
        prog.empty_entries.append(base)
    return prog


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


class Machine:
    """Executes compiled fragments against a heap.

    One machine per worker; the program and signature are shared immutably.
    Between ``ADVANCE_DOT`` suspensions execution is straight-line, and the
    fail flag aborts the current attempt before the next suspension.
    """

    def __init__(self, program: Program, heap: Heap, trace=None):
        self.program = program
        self.heap = heap
        self.sig = heap.sig
        self.trace = trace
        self.steps = 0
        self.regs: list[int] = []
        self.ip = -1
        self.fail = False
        self.head_ref: int | None = None
        self.pending: FS | None = None
        self.matched = 0
        self.rule = -1
        self.active = False

    # -- attempt lifecycle -------------------------------------------------

    def begin(self, entry: int, rule: int, constituent: FS | None) -> None:
        """Set up an attempt at ``entry``; constituent feeds BIND_CONSTITUENT 1."""
        if self.heap.scratch_size():
            self.heap.discard_scratch()
        self.regs = [-1] * 8
        self.ip = entry
        self.fail = False
        self.head_ref = None
        self.pending = constituent
        self.matched = 0
        self.rule = rule
        self.active = True

    def begin_resume(self, susp: Suspension, constituent: FS) -> None:
        """Set up continuation of a suspended attempt with the next constituent."""
        if self.heap.scratch_size():
            self.heap.discard_scratch()
        base = self.heap.mark
        self.heap.restore(susp.heap_snap)
        self.regs = [(-1 if r < 0 else r + base) for r in susp.regs]
        self.ip = susp.ip
        self.fail = False
        self.head_ref = None
        self.pending = constituent
        self.matched = susp.matched
        self.rule = susp.rule
        self.active = True

    def start(self, entry: int, rule: int, constituent: FS | None) -> object:
        self.begin(entry, rule, constituent)
        return self.run()

    def resume(self, susp: Suspension, constituent: FS) -> object:
        self.begin_resume(susp, constituent)
        return self.run()

    def run(self) -> object:
        while True:
            out = self.step()
            if out is not None:
                return out

    # -- single-step execution (the debugger drives this directly) -----------

    def step(self) -> object | None:
        if not self.active:
            raise MachineFault("step with no active attempt")
        prog = self.program
        if not 0 <= self.ip < len(prog.instructions):
            raise MachineFault(f"instruction offset {self.ip} out of range")
        op, a, b, c = prog.instructions[self.ip]
        self.steps += 1
        if self.trace is not None:
            self.trace({"ev": "step", "ip": self.ip, "op": OP_NAMES[op]})
        self.ip += 1
        heap = self.heap

        if op == PUT_NODE:
            self._setreg(b, heap.new_node(a))
        elif op == PUT_REF:
            self._setreg(b, self._reg(a))
        elif op == SET_ARC:
            i = heap.deref(self._reg(a))
            pos = self.sig.maybe_feat_pos(heap.data[i], b)
            if heap.kind[i] != _NODE or pos is None:
                raise MachineFault(
                    f"SET_ARC on unsuitable cell (ip={self.ip - 1})"
                )
            heap.arcs[i][pos] = self._reg(c)
        elif op == GET_NODE:
            r = heap.unify(self._reg(b), heap.new_unexpanded(a))
            if r is None:
                return self._failed()
        elif op == GET_ARC:
            i = heap.deref(self._reg(a))
            if heap.kind[i] == _UNEXPANDED:
                heap.expand1(i)
            pos = self.sig.maybe_feat_pos(heap.data[i], b)
            if pos is None:
                raise MachineFault(
                    f"GET_ARC: feature {self.sig.feat_name(b)} not appropriate "
                    f"for {self.sig.type_name(heap.data[i])} (ip={self.ip - 1})"
                )
            self._setreg(c, heap.arcs[i][pos])
        elif op == UNIFY_REGS:
            r = heap.unify(self._reg(a), self._reg(b))
            if r is None:
                return self._failed()
        elif op == BIND_CONSTITUENT:
            if self.pending is None:
                raise MachineFault("BIND_CONSTITUENT with no constituent available")
            self._setreg(a, copy_into(heap, self.pending))
            self.pending = None
            self.matched += 1
        elif op == ADVANCE_DOT:
            base = heap.mark
            susp = Suspension(
                rule=self.rule,
                ip=self.ip,
                matched=self.matched,
                heap_snap=heap.snapshot(),
                regs=[(-1 if r < 0 else r - base) for r in self.regs],
            )
            self.active = False
            heap.discard_scratch()
            return Suspended(susp)
        elif op == BUILD_HEAD:
            self.head_ref = self._reg(a)
        elif op == PROCEED:
            if self.head_ref is None:
                raise MachineFault("PROCEED without BUILD_HEAD")
            root = heap.freeze(self.head_ref)
            self.active = False
            return Success(FS(heap, root))
        else:
            raise MachineFault(f"invalid opcode {op}")
        return None

    def _failed(self) -> Failed:
        f = self.heap.failure
        self.active = False
        self.heap.discard_scratch()
        return Failed(f)

    def _reg(self, r: int) -> int:
        if not 0 <= r < len(self.regs) or self.regs[r] < 0:
            raise MachineFault(f"read of unset register X{r}")
        return self.regs[r]

    def _setreg(self, r: int, v: int) -> None:
        if r < 0:
            raise MachineFault(f"invalid register X{r}")
        while r >= len(self.regs):
            self.regs.extend([-1] * max(8, len(self.regs)))
        self.regs[r] = v


# ---------------------------------------------------------------------------
# Disassembler
# ---------------------------------------------------------------------------


def disassemble(program: Program, sig: Signature) -> str:
    """Stable text listing: one instruction per line, symbolic names."""
    lines = []
    entries = {r.entry: r for r in program.rules}
    resumes = {off: r for r in program.rules for off in r.resume}
    for ip, (op, a, b, c) in enumerate(program.instructions):
        if ip in entries:
            r = entries[ip]
            lines.append(f"; rule {r.name} (arity {r.arity})")
        if ip in resumes:
            lines.append(f"; resume {resumes[ip].name}")
        lines.append(f"{ip:05d}  {_format_instr(op, a, b, c, sig)}")
    return "\n".join(lines) + ("\n" if lines else "")


def _format_instr(op: int, a: int, b: int, c: int, sig: Signature) -> str:
    nm = OP_NAMES[op]
    if op == PUT_NODE:
        return f"{nm:<18}{sig.type_name(a)}, X{b}"
    if op == PUT_REF:
        return f"{nm:<18}X{a} -> X{b}"
    if op == SET_ARC:
        return f"{nm:<18}X{a}.{sig.feat_name(b)} := X{c}"
    if op == GET_NODE:
        return f"{nm:<18}{sig.type_name(a)}, X{b}"
    if op == GET_ARC:
        return f"{nm:<18}X{a}.{sig.feat_name(b)} -> X{c}"
    if op == UNIFY_REGS:
        return f"{nm:<18}X{a}, X{b}"
    if op == BIND_CONSTITUENT:
        return f"{nm:<18}{a}"
    if op == BUILD_HEAD:
        return f"{nm:<18}X{a}"
    return nm
