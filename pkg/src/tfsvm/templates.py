"""From descriptions to feature-structure templates.

Descriptions are partial; compilation expands each one into the most general
totally well-typed structure satisfying it.  Mentioning a feature promotes the
node's type to at least the feature's introducer, conjoined types take least
upper bounds, and repeated variables become reentrancies.  Expansion stops
with a placeholder wherever a value is the most general structure of its type,
which keeps appropriateness loops finite; the run time materializes further
levels on demand.

Also here: macro expansion (finite; recursion is an error) and compile-time
empty-category folding (each empty category is unified against every rule
body position; success contributes a reduced rule, iterated over new rules up
to a round budget).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .heap import FS, Heap
from .signature import Signature
from .syntax import (
    DConj,
    Desc,
    DFeat,
    DList,
    DMacro,
    DType,
    DVar,
    LexDecl,
    ParsedGrammar,
    RuleDecl,
    vars_of,
)


class CompileError(Exception):
    pass


class UnknownType(CompileError):
    pass


class UnknownFeature(CompileError):
    pass


class InconsistentDescription(CompileError):
    def __init__(self, path: tuple[str, ...], t1: str, t2: str, where: str = ""):
        self.path, self.t1, self.t2 = path, t1, t2
        at = ":".join(path) if path else "(root)"
        ctx = f" in {where}" if where else ""
        super().__init__(f"inconsistent description{ctx}: {t1} and {t2} clash at {at}")


class UnknownMacro(CompileError):
    pass


class MacroArityMismatch(CompileError):
    pass


class RecursiveMacro(CompileError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("recursive macro expansion: " + " -> ".join(cycle))


@dataclass
class Warning_:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class RuleTemplate:
    """An expanded rule: one frozen graph with a head root and body roots."""

    heap: Heap
    head: int
    body: list[int]
    name: str
    vars: dict[str, int] = field(default_factory=dict)
    init_only: bool = False  # only applicable to initialization edges

    @property
    def arity(self) -> int:
        return len(self.body)

    def head_fs(self) -> FS:
        return FS(self.heap, self.head)


@dataclass
class LexTemplate:
    heap: Heap
    word: str
    root: int
    vars: dict[str, int] = field(default_factory=dict)

    def fs(self) -> FS:
        return FS(self.heap, self.root)


@dataclass
class EmptyTemplate:
    heap: Heap
    root: int

    def fs(self) -> FS:
        return FS(self.heap, self.root)


# -- macro expansion -----------------------------------------------------------


def expand_macros(g: ParsedGrammar) -> ParsedGrammar:
    """Inline every macro invocation; parameters substitute argument ASTs."""

    def subst(d: Desc, env: dict[str, Desc]) -> Desc:
        if isinstance(d, DVar):
            return env.get(d.name, d)
        if isinstance(d, DFeat):
            return DFeat(d.line, d.col, d.feat, subst(d.value, env))
        if isinstance(d, DConj):
            return DConj(d.line, d.col, tuple(subst(p, env) for p in d.parts))
        if isinstance(d, DList):
            tail = None if d.tail is None else subst(d.tail, env)
            return DList(d.line, d.col, tuple(subst(p, env) for p in d.items), tail)
        if isinstance(d, DMacro):
            return DMacro(d.line, d.col, d.name, tuple(subst(a, env) for a in d.args))
        return d

    def expand(d: Desc, stack: tuple[str, ...]) -> Desc:
        if isinstance(d, DFeat):
            return DFeat(d.line, d.col, d.feat, expand(d.value, stack))
        if isinstance(d, DConj):
            return DConj(d.line, d.col, tuple(expand(p, stack) for p in d.parts))
        if isinstance(d, DList):
            tail = None if d.tail is None else expand(d.tail, stack)
            return DList(d.line, d.col, tuple(expand(p, stack) for p in d.items), tail)
        if isinstance(d, DMacro):
            key = (d.name, len(d.args))
            m = g.macros.get(key)
            if m is None:
                raise UnknownMacro(
                    f"line {d.line}: unknown macro @{d.name}/{len(d.args)}"
                )
            label = f"{d.name}/{len(d.args)}"
            if label in stack:
                raise RecursiveMacro(list(stack) + [label])
            if len(d.args) != len(m.params):
                raise MacroArityMismatch(
                    f"line {d.line}: macro {d.name} expects {len(m.params)} arguments"
                )
            args = tuple(expand(a, stack) for a in d.args)
            body = subst(m.body, dict(zip(m.params, args)))
            return expand(body, stack + (label,))
        return d

    rules = [
        RuleDecl(expand(r.head, ()), [expand(b, ()) for b in r.body], r.name, r.line)
        for r in g.rules
    ]
    lexicon = [
        LexDecl(w.word, [expand(d, ()) for d in w.descs], w.line) for w in g.lexicon
    ]
    empties = [type(e)(expand(e.desc, ()), e.line) for e in g.empties]
    return ParsedGrammar(g.sig_decls, rules, lexicon, empties, g.macros)


# -- description expansion -------------------------------------------------------


def _desugar_list(d: DList) -> Desc:
    """List sugar in terms of e_list/ne_list with hd/tl."""
    out: Desc = d.tail if d.tail is not None else DType(d.line, d.col, "e_list")
    for item in reversed(d.items):
        out = DConj(
            d.line,
            d.col,
            (
                DType(d.line, d.col, "ne_list"),
                DFeat(d.line, d.col, "hd", item),
                DFeat(d.line, d.col, "tl", out),
            ),
        )
    return out


class _Expander:
    def __init__(self, sig: Signature, heap: Heap, where: str = ""):
        self.sig = sig
        self.heap = heap
        self.env: dict[str, int] = {}
        self.where = where

    def top(self, d: Desc) -> int:
        root = self.heap.new_unexpanded(0)
        self.apply(root, d, ())
        return self.heap.deref(root)

    def _unify(self, cell: int, other: int, path: tuple[str, ...]) -> int:
        r = self.heap.unify(cell, other)
        if r is None:
            f = self.heap.failure
            sub = tuple(self.sig.feat_name(x) for x in f.path)
            raise InconsistentDescription(
                path + sub,
                self.sig.type_name(f.t1),
                self.sig.type_name(f.t2),
                self.where,
            )
        return r

    def apply(self, cell: int, d: Desc, path: tuple[str, ...]) -> int:
        heap, sig = self.heap, self.sig
        if isinstance(d, DType):
            if not sig.has_type(d.name):
                raise UnknownType(f"line {d.line}: unknown type {d.name!r}")
            return self._unify(cell, heap.new_unexpanded(sig.type_id(d.name)), path)
        if isinstance(d, DVar):
            bound = self.env.get(d.name)
            if bound is None:
                self.env[d.name] = heap.deref(cell)
                return heap.deref(cell)
            cell = self._unify(cell, bound, path)
            self.env[d.name] = cell
            return cell
        if isinstance(d, DFeat):
            if not sig.has_feat(d.feat):
                raise UnknownFeature(f"line {d.line}: unknown feature {d.feat!r}")
            f = sig.feat_id(d.feat)
            intro = sig.introducer(f)
            cell = self._unify(cell, heap.new_unexpanded(intro), path)
            target = heap.arc(cell, f)
            self.apply(target, d.value, path + (d.feat,))
            return heap.deref(cell)
        if isinstance(d, DConj):
            for p in d.parts:
                cell = self.apply(cell, p, path)
            return cell
        if isinstance(d, DList):
            return self.apply(cell, _desugar_list(d), path)
        if isinstance(d, DMacro):
            raise UnknownMacro(
                f"line {d.line}: macro @{d.name} not expanded (internal ordering bug)"
            )
        raise TypeError(f"not a description: {d!r}")


def infer_and_expand(d: Desc, sig: Signature, where: str = "") -> FS:
    """Most general totally well-typed structure satisfying d (frozen)."""
    heap = Heap(sig)
    ex = _Expander(sig, heap, where)
    root = ex.top(d)
    root = heap.freeze(root)
    return FS(heap, root)


def expand_rule(r: RuleDecl, sig: Signature) -> tuple[RuleTemplate, list[Warning_]]:
    """Expand head and body into one shared graph (variables scope rule-wide)."""
    heap = Heap(sig)
    ex = _Expander(sig, heap, f"rule {r.name}")
    head = ex.top(r.head)
    body = [ex.top(b) for b in r.body]
    warnings = _single_var_warnings([r.head] + r.body, f"rule {r.name}")
    var_cells = {v: heap.deref(c) for v, c in ex.env.items()}
    roots = heap.freeze_many([head] + body + list(var_cells.values()))
    tpl = RuleTemplate(
        heap,
        roots[0],
        roots[1 : 1 + len(body)],
        r.name,
        dict(zip(var_cells.keys(), roots[1 + len(body):])),
    )
    return tpl, warnings


def expand_lex(entry: LexDecl, sig: Signature) -> tuple[list[LexTemplate], list[Warning_]]:
    out = []
    warnings: list[Warning_] = []
    for i, d in enumerate(entry.descs):
        heap = Heap(sig)
        ex = _Expander(sig, heap, f"lexical entry {entry.word!r} ({i + 1})")
        root = ex.top(d)
        var_cells = {v: heap.deref(c) for v, c in ex.env.items()}
        roots = heap.freeze_many([root] + list(var_cells.values()))
        out.append(
            LexTemplate(heap, entry.word, roots[0], dict(zip(var_cells.keys(), roots[1:])))
        )
        warnings += _single_var_warnings([d], f"lexical entry {entry.word!r}")
    return out, warnings


def expand_empty(desc: Desc, sig: Signature, index: int) -> EmptyTemplate:
    heap = Heap(sig)
    ex = _Expander(sig, heap, f"empty category {index + 1}")
    root = heap.freeze(ex.top(desc))
    return EmptyTemplate(heap, root)


def _single_var_warnings(descs: list[Desc], where: str) -> list[Warning_]:
    counts: dict[str, int] = {}
    for d in descs:
        vars_of(d, counts)
    return [
        Warning_(
            "single-occurrence-variable",
            f"{where}: variable {v} occurs once and creates no reentrancy",
        )
        for v, n in sorted(counts.items())
        if n == 1 and not v.startswith("_")
    ]


# -- empty-category folding -------------------------------------------------------


@dataclass
class EcDiagnostics:
    warnings: list[Warning_] = field(default_factory=list)
    budget_exceeded: bool = False
    rounds_used: int = 0

    @property
    def non_equivalent(self) -> bool:
        return self.budget_exceeded


def _try_reduce(
    r: RuleTemplate, pos: int, e: EmptyTemplate, sig: Signature
) -> RuleTemplate | None:
    heap = Heap(sig)
    memo: dict[int, int] = {}
    head = heap.copy_from(r.heap, r.head, memo)
    body = [heap.copy_from(r.heap, b, memo) for b in r.body]
    ecopy = heap.copy_from(e.heap, e.root)
    if heap.unify(body[pos], ecopy) is None:
        return None
    rest = body[:pos] + body[pos + 1 :]
    roots = heap.freeze_many([head] + rest)
    return RuleTemplate(heap, roots[0], roots[1:], f"{r.name}~e{pos + 1}")


def expand_empty_categories(
    rules: list[RuleTemplate],
    empties: list[EmptyTemplate],
    sig: Signature,
    max_rounds: int = 2,
) -> tuple[list[RuleTemplate], EcDiagnostics]:
    """Fold empty categories into rules; with max_rounds=0 this is the identity."""
    diags = EcDiagnostics()
    if max_rounds <= 0 or not empties:
        return list(rules), diags
    out = list(rules)
    frontier = list(rules)
    for round_no in range(max_rounds):
        produced: list[RuleTemplate] = []
        for r in frontier:
            for pos in range(len(r.body)):
                for e in empties:
                    nr = _try_reduce(r, pos, e, sig)
                    if nr is None:
                        continue
                    if not nr.body:
                        diags.warnings.append(
                            Warning_(
                                "empty-body-rule-dropped",
                                f"folding an empty category into rule {r.name!r} "
                                "would leave no constituents; derived rule dropped",
                            )
                        )
                        continue
                    produced.append(nr)
        diags.rounds_used = round_no + 1
        if not produced:
            return out, diags
        out += produced
        frontier = produced
    # budget spent: probe whether another round would add more
    for r in frontier:
        for pos in range(len(r.body)):
            for e in empties:
                if _try_reduce(r, pos, e, sig) is not None:
                    diags.budget_exceeded = True
                    diags.warnings.append(
                        Warning_(
                            "ec-expansion-budget",
                            f"empty-category folding stopped after {max_rounds} rounds; "
                            "the compiled grammar may not be equivalent to the source",
                        )
                    )
                    return out, diags
    return out, diags
