"""Grammar inversion: from phrase structure to predicate-argument structure.

Parsing grammars order rules by surface phrase structure; generation wants
them ordered by the nesting of logical forms.  This pass restructures each
rule (composing through non-lexical semantic heads) so that the rule is keyed
by the fully applied predicate-argument structure it produces:

* The *semantic head* of a rule is the body constituent whose lambda-shaped
  semantics, applied to the other constituents' semantics (application being
  beta-reduction simulated by the rule's reentrancies), yields the mother's
  semantics.  Chains of rules are composed until the semantic head position
  is fillable by lexical material.
* Each lexical entry's semantics is peeled to a lambda nest over an atomic
  predicate-argument body.  Entries are grouped into classes (predicate type
  generalized as far as possible without capturing another syntactic
  category's predicates); each class yields one unary inverted rule that maps
  the class's semantic skeleton to a categorized word node with a singleton
  string contribution.  These fire only on initialization edges.
* Every constituent is threaded with a string-recovery feature: the head's
  value concatenates the body constituents' contributions in original phrase
  order, the semantic head's contribution being its primitive's structure.
* A semantic knowledge base maps (predicate type, argument arity) to the
  words realizing that primitive; final post-processing turns the string
  feature's structure list into word strings through it.

Generation inputs are linearized bottom-up (arguments precede their
predicate), so elements are consumed left to right exactly like words, which
is what gives generation parsing's termination behavior.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .heap import FS, Heap, NODE, UNEXPANDED, subsumes
from .signature import Signature
from .templates import LexTemplate, RuleTemplate


class InversionError(Exception):
    pass


class InversionFailure(InversionError):
    def __init__(self, rule: str, reason: str):
        self.rule, self.reason = rule, reason
        super().__init__(f"cannot invert rule {rule!r}: {reason}")


class MalformedSemantics(InversionError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"malformed semantic form at {path or '(root)'}: {reason}")


@dataclass
class Violation:
    where: str
    reason: str

    def __str__(self) -> str:
        return f"{self.where}: {self.reason}"


@dataclass
class SemConfig:
    """Names of the semantics-bearing features and types.

    Defaults match the usual encoding (sem/var/rst/prd/a1../form/conn); set
    others per grammar.  ``str_feat`` is the injected string-recovery feature.
    """

    sem: str = "sem"
    var: str = "var"
    rst: str = "rst"
    prd: str = "prd"
    arg_prefix: str = "a"
    max_args: int = 4
    form: str = "form"
    conn: str = "conn"
    lambda_type: str = "lambda"
    str_feat: str = "str"
    cat_path: tuple[str, ...] = ("syn", "cat")
    max_chain: int = 3

    def arg_feats(self) -> list[str]:
        return [f"{self.arg_prefix}{i}" for i in range(1, self.max_args + 1)]

    def to_json(self) -> dict:
        return {
            "sem": self.sem, "var": self.var, "rst": self.rst, "prd": self.prd,
            "arg_prefix": self.arg_prefix, "max_args": self.max_args,
            "form": self.form, "conn": self.conn, "lambda_type": self.lambda_type,
            "str_feat": self.str_feat, "cat_path": list(self.cat_path),
            "max_chain": self.max_chain,
        }

    @staticmethod
    def from_json(d: dict) -> "SemConfig":
        d = dict(d)
        d["cat_path"] = tuple(d.get("cat_path", ("syn", "cat")))
        return SemConfig(**d)


@dataclass
class KBRecord:
    prd_type: str
    arity: int
    word: str
    body_root: int  # primitive body (with free argument slots), in the KB heap


@dataclass
class SemanticKB:
    heap: Heap
    records: list[KBRecord] = field(default_factory=list)

    def index(self) -> dict[tuple[str, int], list[KBRecord]]:
        out: dict[tuple[str, int], list[KBRecord]] = {}
        for r in self.records:
            out.setdefault((r.prd_type, r.arity), []).append(r)
        return out

    def body_fs(self, r: KBRecord) -> FS:
        return FS(self.heap, r.body_root)


@dataclass
class InvertedGrammar:
    rules: list[RuleTemplate]
    str_feat: int
    cfg: SemConfig


# -- small helpers over the ids the config names --------------------------------


class _Names:
    def __init__(self, sig: Signature, cfg: SemConfig):
        self.sig, self.cfg = sig, cfg
        self.sem = sig.feat_id(cfg.sem) if sig.has_feat(cfg.sem) else None
        self.var = sig.feat_id(cfg.var) if sig.has_feat(cfg.var) else None
        self.rst = sig.feat_id(cfg.rst) if sig.has_feat(cfg.rst) else None
        self.prd = sig.feat_id(cfg.prd) if sig.has_feat(cfg.prd) else None
        self.lam = sig.type_id(cfg.lambda_type) if sig.has_type(cfg.lambda_type) else None
        self.strf = sig.feat_id(cfg.str_feat) if sig.has_feat(cfg.str_feat) else None
        self.args = [
            sig.feat_id(a) for a in cfg.arg_feats() if sig.has_feat(a)
        ]

    def is_lambda(self, heap: Heap, cell: int) -> bool:
        return self.lam is not None and self.sig.subsumes(self.lam, heap.type_of(cell))

    def prd_appropriate(self, heap: Heap, cell: int) -> bool:
        t = heap.type_of(cell)
        return self.prd is not None and self.sig.maybe_feat_pos(t, self.prd) is not None

    def arg_arcs(self, heap: Heap, cell: int) -> list[int]:
        """Materialized numbered-argument arcs a1..ak, in order."""
        cell = heap.deref(cell)
        t = heap.data[cell]
        out = []
        for f in self.args:
            a = heap.maybe_arc(cell, f)
            if a is None:
                break
            out.append(a)
        return out

    def peel(self, heap: Heap, cell: int) -> tuple[list[int], int]:
        """Follow the lambda nest: ([var cells...], body cell)."""
        vars_: list[int] = []
        cur = heap.deref(cell)
        while self.is_lambda(heap, cur) and heap.kind[heap.deref(cur)] == NODE:
            v = heap.maybe_arc(cur, self.var)
            r = heap.maybe_arc(cur, self.rst)
            if v is None or r is None:
                break
            vars_.append(heap.deref(v))
            cur = heap.deref(r)
        return vars_, cur


# -- rule analysis ----------------------------------------------------------------


@dataclass
class _RuleShape:
    head_idx: int
    args: list[tuple[int, int]]  # (constituent index, lambda depth), depth-sorted
    reason: str | None = None  # set when analysis failed


def _analyze(
    heap: Heap, head: int, body: list[int], nm: _Names
) -> _RuleShape | None | str:
    """Identify the semantic head and the argument constituents.

    Returns a _RuleShape, None when no head qualifies, or an error string
    when more than one does.
    """
    if nm.sem is None:
        return None
    head_sem = heap.maybe_arc(head, nm.sem)
    if head_sem is None:
        return None
    head_sem = heap.deref(head_sem)
    shapes = []
    for h in range(len(body)):
        sem = heap.maybe_arc(body[h], nm.sem)
        if sem is None:
            continue
        chain = [heap.deref(sem)]
        while nm.is_lambda(heap, chain[-1]):
            nxt = heap.maybe_arc(chain[-1], nm.rst)
            if nxt is None:
                break
            nxt = heap.deref(nxt)
            if nxt in chain:  # cyclic semantics: stop walking
                break
            chain.append(nxt)
        k = len(body) - 1
        if k >= len(chain) or chain[k] != head_sem:
            continue
        # var slots at depths 0..k-1 must be filled by the other constituents
        slots = []
        ok = True
        for d in range(k):
            v = heap.maybe_arc(chain[d], nm.var)
            if v is None:
                ok = False
                break
            slots.append(heap.deref(v))
        if not ok:
            continue
        assign: dict[int, int] = {}
        for j in range(len(body)):
            if j == h:
                continue
            jsem = heap.maybe_arc(body[j], nm.sem)
            if jsem is None or not nm.is_lambda(heap, jsem):
                ok = False
                break
            jr = heap.maybe_arc(jsem, nm.rst)
            if jr is None:
                ok = False
                break
            jr = heap.deref(jr)
            depth = next((d for d, s in enumerate(slots) if s == jr), None)
            if depth is None or depth in assign:
                ok = False
                break
            assign[depth] = j
        if ok:
            shapes.append(
                _RuleShape(h, [(assign[d], d) for d in sorted(assign)])
            )
    if not shapes:
        return None
    if len(shapes) > 1:
        return "more than one plausible semantic head"
    return shapes[0]


# -- invertibility check ------------------------------------------------------------


def check_invertibility(
    rules: list[RuleTemplate],
    lexicon: list[LexTemplate],
    sig: Signature,
    cfg: SemConfig,
) -> list[Violation]:
    """Diagnose everything that would stop this grammar from inverting."""
    out: list[Violation] = []
    for name in (cfg.sem, cfg.var, cfg.rst, cfg.prd, cfg.arg_prefix + "1"):
        if not sig.has_feat(name):
            out.append(
                Violation("signature", f"configured feature {name!r} is not declared")
            )
    if not sig.has_type(cfg.lambda_type):
        out.append(
            Violation("signature", f"configured type {cfg.lambda_type!r} is not declared")
        )
    if out:
        return out
    nm = _Names(sig, cfg)
    for entry in lexicon:
        sem = entry.heap.maybe_arc(entry.root, nm.sem)
        if sem is None:
            out.append(
                Violation(
                    f"lexical entry {entry.word!r}",
                    "no materialized semantics",
                )
            )
            continue
        vars_, body = nm.peel(entry.heap, sem)
        if not nm.prd_appropriate(entry.heap, body):
            out.append(
                Violation(
                    f"lexical entry {entry.word!r}",
                    "semantics does not bottom out in a predicate-argument atom",
                )
            )
            continue
        need = len(nm.arg_arcs(entry.heap, body))
        for i in range(1, need + 1):
            if not sig.has_feat(f"{cfg.arg_prefix}{i}"):
                out.append(
                    Violation(
                        f"lexical entry {entry.word!r}",
                        f"argument feature {cfg.arg_prefix}{i} missing from signature",
                    )
                )
    for r in rules:
        shape = _analyze(r.heap, r.head, r.body, nm)
        if shape is None:
            out.append(
                Violation(
                    f"rule {r.name!r}",
                    "head semantics is not reachable from any body constituent "
                    "through lambda application (disconnected semantics)",
                )
            )
        elif isinstance(shape, str):
            out.append(Violation(f"rule {r.name!r}", shape))
    return out


# -- lexical classes ------------------------------------------------------------------


@dataclass
class _LexClass:
    class_type: int
    arity: int
    category: int  # type id at the category path (or root type)
    heap: Heap
    word_root: int  # head of the inverted lexical rule (word node)
    lam_root: int  # its sem: the generalized lambda nest
    body: int  # primitive body inside the nest
    words: list[str]


def _category_of(heap: Heap, root: int, sig: Signature, cfg: SemConfig) -> int:
    cur = heap.deref(root)
    for name in cfg.cat_path:
        if not sig.has_feat(name):
            return heap.data[heap.deref(root)]
        a = heap.maybe_arc(cur, sig.feat_id(name))
        if a is None:
            return heap.data[heap.deref(root)]
        cur = heap.deref(a)
    return heap.data[cur]


def _retype_keep_arcs(heap: Heap, parent: int, pos: int, new_t: int) -> int:
    """Replace an arc's target by a copy at a more general type, keeping the
    arcs that remain appropriate (so internal reentrancies survive)."""
    sig = heap.sig
    old = heap.deref(heap.arcs[parent][pos])
    if heap.data[old] == new_t:
        return old
    if heap.kind[old] != NODE:
        fresh = heap.new_unexpanded(new_t)
        heap.arcs[parent][pos] = fresh
        return fresh
    old_feats = {f: heap.arcs[old][k] for k, (f, _) in enumerate(sig.features_of(heap.data[old]))}
    fresh = heap._alloc(NODE, new_t, None)
    heap.arcs[fresh] = [
        old_feats[f] if f in old_feats else heap.new_unexpanded(r)
        for f, r in sig.features_of(new_t)
    ]
    heap.arcs[parent][pos] = fresh
    return fresh


def _entry_analysis(entry: LexTemplate, nm: _Names) -> tuple[int, int, int]:
    """(prd value type, arity, category) of a lexical entry."""
    heap = entry.heap
    sem = heap.maybe_arc(entry.root, nm.sem)
    if sem is None:
        raise InversionError(
            f"lexical entry {entry.word!r} has no semantics; the grammar is not invertible"
        )
    vars_, body = nm.peel(heap, sem)
    prd_cell = heap.maybe_arc(body, nm.prd)
    ptype = heap.data[heap.deref(prd_cell)] if prd_cell is not None else 0
    arity = len(nm.arg_arcs(heap, body))
    cat = _category_of(heap, entry.root, heap.sig, nm.cfg)
    return ptype, arity, cat


def _class_type_for(
    ptype: int, cat: int, all_entries: list[tuple[int, int, int]], sig: Signature, nm: _Names
) -> int:
    """Most general ancestor of ptype that stays under the prd restriction and
    does not capture another syntactic category's predicates."""
    prd_restr = 0
    if nm.prd is not None:
        prd_restr = sig.restriction(sig.introducer(nm.prd), nm.prd)
    candidates = [
        t for t in range(sig.n_types)
        if sig.subsumes(t, ptype) and sig.subsumes(prd_restr, t)
    ]
    candidates.sort(key=lambda t: (-len(sig.descendants(t)), t))  # general first
    for c in candidates:
        clash = any(
            sig.subsumes(c, p2) and cat2 != cat
            for (p2, _a2, cat2) in all_entries
        )
        if not clash:
            return c
    return ptype


def _build_lex_classes(
    lexicon: list[LexTemplate], sig: Signature, cfg: SemConfig, nm: _Names
) -> tuple[list[_LexClass], SemanticKB]:
    kb = SemanticKB(Heap(sig))
    infos = [_entry_analysis(e, nm) for e in lexicon]
    classes: dict[tuple[int, int, int], _LexClass] = {}
    for entry, (ptype, arity, cat) in zip(lexicon, infos):
        # pristine copy of the primitive body for the knowledge base
        body_src = nm.peel(entry.heap, entry.heap.maybe_arc(entry.root, nm.sem))[1]
        broot = kb.heap.freeze(kb.heap.copy_from(entry.heap, body_src))
        kb.records.append(
            KBRecord(sig.type_name(ptype), arity, entry.word, broot)
        )
        ctype = _class_type_for(ptype, cat, infos, sig, nm)
        key = (ctype, arity, cat)
        if key in classes:
            classes[key].words.append(entry.word)
            continue
        # class skeleton: entry copy with the predicate generalized in place
        heap = Heap(sig)
        root = heap.copy_from(entry.heap, entry.root)
        sem = heap.maybe_arc(root, nm.sem)
        vars_, body = nm.peel(heap, sem)
        body = heap.deref(body)
        ppos = sig.maybe_feat_pos(heap.data[body], nm.prd)
        if ppos is not None:
            _retype_keep_arcs(heap, body, ppos, ctype)
        classes[key] = _LexClass(
            ctype, arity, cat, heap, root, heap.deref(sem), heap.deref(body),
            [entry.word],
        )
    return list(classes.values()), kb


# -- inverted rule construction ----------------------------------------------------


def _ne_list(heap: Heap, sig: Signature, items: list[int]) -> int:
    ne, e = sig.type_id("ne_list"), sig.type_id("e_list")
    hd, tl = sig.feat_id("hd"), sig.feat_id("tl")
    out = heap.new_unexpanded(e)
    for item in reversed(items):
        node = heap.new_node(ne)
        heap.arcs[node][sig.feat_pos(ne, hd)] = item
        heap.arcs[node][sig.feat_pos(ne, tl)] = out
        out = node
    return out


@dataclass
class _Chain:
    heap: Heap
    head: int
    sem_head_root: int  # the (composed) semantic-head constituent
    args: list[tuple[int, int]]  # (constituent root, depth)
    surface: list[tuple[str, int]]  # ("arg", root) / ("semhead", 0), original order
    rules: list[str]  # composed rule names, outermost first


def _chain_of(r: RuleTemplate, nm: _Names) -> _Chain | None:
    heap = Heap(r.heap.sig)
    memo: dict[int, int] = {}
    head = heap.copy_from(r.heap, r.head, memo)
    body = [heap.copy_from(r.heap, b, memo) for b in r.body]
    shape = _analyze(heap, head, body, nm)
    if shape is None or isinstance(shape, str):
        return None
    surface: list[tuple[str, int]] = []
    for i, b in enumerate(body):
        surface.append(("semhead", 0) if i == shape.head_idx else ("arg", b))
    return _Chain(
        heap, head, body[shape.head_idx],
        [(body[i], d) for i, d in shape.args], surface, [r.name],
    )


def _extend_chain(c: _Chain, r2: RuleTemplate, nm: _Names) -> _Chain | None:
    """Inline r2 at the chain's semantic-head position (fresh combined graph)."""
    heap = Heap(c.heap.sig)
    memo: dict[int, int] = {}
    head = heap.copy_from(c.heap, c.head, memo)
    sem_head_root = heap.copy_from(c.heap, c.sem_head_root, memo)
    args = [(heap.copy_from(c.heap, a, memo), d) for a, d in c.args]
    surface = [
        (k, heap.copy_from(c.heap, v, memo) if k == "arg" else 0)
        for k, v in c.surface
    ]
    memo2: dict[int, int] = {}
    r2_head = heap.copy_from(r2.heap, r2.head, memo2)
    r2_body = [heap.copy_from(r2.heap, b, memo2) for b in r2.body]
    if heap.unify(sem_head_root, r2_head) is None:
        return None
    shape = _analyze(heap, r2_head, r2_body, nm)
    if shape is None or isinstance(shape, str):
        return None
    k2 = len(shape.args)
    new_args = [(r2_body[i], d) for i, d in shape.args] + [
        (a, d + k2) for a, d in args
    ]
    inner_surface: list[tuple[str, int]] = []
    for i, b in enumerate(r2_body):
        inner_surface.append(("semhead", 0) if i == shape.head_idx else ("arg", b))
    new_surface: list[tuple[str, int]] = []
    for k, v in surface:
        if k == "semhead":
            new_surface.extend(inner_surface)
        else:
            new_surface.append((k, v))
    return _Chain(
        heap, head, r2_body[shape.head_idx], new_args, new_surface,
        c.rules + [r2.name],
    )


def _close_chain(
    c: _Chain, klass: _LexClass, nm: _Names, sig: Signature
) -> RuleTemplate | None:
    """Unify the lexical class's word template into the semantic-head slot and
    emit the inverted rule: argument constituents (by consumption order), then
    the binder for the head's lambda structure; string feature threaded."""
    heap = Heap(sig)
    memo: dict[int, int] = {}
    head = heap.copy_from(c.heap, c.head, memo)
    sem_head_root = heap.copy_from(c.heap, c.sem_head_root, memo)
    args = [(heap.copy_from(c.heap, a, memo), d) for a, d in c.args]
    surface = [
        (k, heap.copy_from(c.heap, v, memo) if k == "arg" else 0)
        for k, v in c.surface
    ]
    kmemo: dict[int, int] = {}
    word_root = heap.copy_from(klass.heap, klass.word_root, kmemo)
    if heap.unify(sem_head_root, word_root) is None:
        return None
    binder = heap.maybe_arc(sem_head_root, nm.sem)
    if binder is None:
        return None
    # the class primitive: walk to the bottom of the class's lambda nest
    prim = heap.deref(kmemo[klass.heap.deref(klass.body)])

    str_elems: list[int] = []
    arg_elem: dict[int, int] = {}
    for k, v in surface:
        if k == "semhead":
            str_elems.append(prim)
        else:
            e = heap.new_unexpanded(0)
            arg_elem[heap.deref(v)] = e
            str_elems.append(e)
    strf = nm.strf
    if strf is None:
        return None
    ok = _set_str(heap, head, strf, _ne_list(heap, sig, str_elems), sig)
    for aroot, _d in args:
        e = arg_elem[heap.deref(aroot)]
        ok = ok and _set_str(heap, aroot, strf, _ne_list(heap, sig, [e]), sig)
    if not ok:
        return None
    body_order = [a for a, _ in sorted(args, key=lambda x: x[1])] + [binder]
    roots = heap.freeze_many([head] + body_order)
    name = "gen~" + "+".join(c.rules) + f"~{sig.type_name(klass.class_type)}/{klass.arity}"
    return RuleTemplate(heap, roots[0], roots[1:], name)


def _set_str(heap: Heap, cell: int, strf: int, value: int, sig: Signature) -> bool:
    cell = heap.deref(cell)
    if heap.kind[cell] == UNEXPANDED:
        heap.expand1(cell)
    pos = sig.maybe_feat_pos(heap.data[cell], strf)
    if pos is None:
        return False
    return heap.unify(heap.arcs[cell][pos], value) is not None


def _invert_lex_class(klass: _LexClass, nm: _Names, sig: Signature) -> RuleTemplate | None:
    """Unary rule: categorized word node over the class's semantic skeleton."""
    heap = Heap(sig)
    memo: dict[int, int] = {}
    word = heap.copy_from(klass.heap, klass.word_root, memo)
    lam = heap.deref(memo[klass.heap.deref(klass.lam_root)])
    body = heap.deref(memo[klass.heap.deref(klass.body)])
    if not _set_str(heap, word, nm.strf, _ne_list(heap, sig, [body]), sig):
        return None
    roots = heap.freeze_many([word, lam])
    return RuleTemplate(
        heap, roots[0], [roots[1]],
        f"lex~{sig.type_name(klass.class_type)}/{klass.arity}",
        init_only=True,
    )


def invert(
    rules: list[RuleTemplate],
    lexicon: list[LexTemplate],
    sig: Signature,
    cfg: SemConfig | None = None,
) -> tuple[InvertedGrammar, SemanticKB]:
    """Produce the generation grammar and the semantic knowledge base.

    Requires check_invertibility to have passed.  Raises InversionFailure for
    rules whose semantic head cannot be identified (ambiguous heads included).
    """
    cfg = cfg or SemConfig()
    nm = _Names(sig, cfg)
    if nm.strf is None:
        raise InversionError(
            f"string feature {cfg.str_feat!r} missing: signature was not prepared for inversion"
        )
    classes, kb = _build_lex_classes(lexicon, sig, cfg, nm)
    out: list[RuleTemplate] = []
    for klass in classes:
        tpl = _invert_lex_class(klass, nm, sig)
        if tpl is not None:
            out.append(tpl)

    # seed chains from every rule, then compose through semantic-head slots
    chains: list[_Chain] = []
    for r in rules:
        c = _chain_of(r, nm)
        if c is None:
            shape = _analyze(r.heap, r.head, r.body, nm)
            reason = shape if isinstance(shape, str) else "no identifiable semantic head"
            raise InversionFailure(r.name, reason)
        chains.append(c)
    frontier = list(chains)
    for _ in range(cfg.max_chain - 1):
        grown: list[_Chain] = []
        for c in frontier:
            for r2 in rules:
                ext = _extend_chain(c, r2, nm)
                if ext is not None:
                    grown.append(ext)
        if not grown:
            break
        chains.extend(grown)
        frontier = grown

    seen_names: set[str] = set()
    for c in chains:
        for klass in classes:
            tpl = _close_chain(c, klass, nm, sig)
            if tpl is not None and tpl.name not in seen_names:
                seen_names.add(tpl.name)
                out.append(tpl)
    return InvertedGrammar(out, nm.strf, cfg), kb


# -- linearization of semantic input -------------------------------------------------


def linearize_semantics(sem: FS, cfg: SemConfig | None = None) -> list[FS]:
    """Order the elements of a closed predicate-argument structure.

    Post-order traversal: each node's arguments are linearized first (a1, a2,
    ... in order), then the node's own primitive is emitted, lambda-wrapped
    with its argument slots abstracted the way the inverted lexicon expects.
    """
    cfg = cfg or SemConfig()
    sig = sem.sig
    nm = _Names(sig, cfg)
    heap = sem.heap
    out: list[FS] = []

    def formula(cell: int) -> bool:
        return nm.prd_appropriate(heap, cell)

    def walk(cell: int, path: str) -> None:
        cell = heap.deref(cell)
        if not formula(cell):
            raise MalformedSemantics(path, "node lacks predicate-argument structure")
        args = nm.arg_arcs(heap, cell)
        for i, a in enumerate(args, start=1):
            a = heap.deref(a)
            if formula(a):
                walk(a, f"{path}:{cfg.arg_prefix}{i}" if path else f"{cfg.arg_prefix}{i}")
        out.append(_element_for(cell))

    def _element_for(cell: int) -> FS:
        eh = Heap(sig)
        memo: dict[int, int] = {}
        copy = eh.copy_from(heap, cell, memo)
        args = nm.arg_arcs(eh, copy)
        slots = []
        for a in args:
            a = eh.deref(a)
            if nm.prd_appropriate(eh, a):
                # abstract away the argument's own predicate content
                ppos = sig.maybe_feat_pos(eh.data[a], nm.prd)
                if ppos is not None and eh.kind[a] == NODE:
                    restr = sig.restriction(eh.data[a], nm.prd)
                    eh.arcs[a][ppos] = eh.new_unexpanded(restr)
            slots.append(a)
        root = copy
        for v in reversed(slots):
            node = eh.new_node(nm.lam)
            eh.arcs[node][sig.feat_pos(nm.lam, nm.var)] = v
            eh.arcs[node][sig.feat_pos(nm.lam, nm.rst)] = root
            root = node
        return FS(eh, eh.freeze(root))

    if nm.lam is None or nm.prd is None:
        raise MalformedSemantics("", "semantic configuration missing from signature")
    root = heap.deref(sem.root)
    if nm.is_lambda(heap, root):
        raise MalformedSemantics("", "input must be a closed form, not a lambda")
    walk(root, "")
    return out


# -- final string realization ----------------------------------------------------------


def str_elements(result: FS, inv_cfg: SemConfig) -> list[FS] | None:
    """The structures on the result's string feature, in order; None if absent."""
    sig = result.sig
    if not sig.has_feat(inv_cfg.str_feat):
        return None
    heap = result.heap
    cell = heap.maybe_arc(result.root, sig.feat_id(inv_cfg.str_feat))
    if cell is None:
        return None
    ne, e = sig.type_id("ne_list"), sig.type_id("e_list")
    hd, tl = sig.feat_id("hd"), sig.feat_id("tl")
    out: list[FS] = []
    cur = heap.deref(cell)
    while True:
        t = heap.data[cur]
        if t == e:
            return out
        if t != ne or heap.kind[cur] != NODE:
            return None  # open or ill-formed list
        out.append(FS(heap, heap.arcs[cur][sig.feat_pos(ne, hd)]))
        cur = heap.deref(heap.arcs[cur][sig.feat_pos(ne, tl)])


# -- text serialization of the inverted grammar ----------------------------------


def _safe_rule_name(name: str) -> str:
    out = "".join(c if c.isalnum() or c == "_" else "_" for c in name)
    return out if out and out[0].isalpha() and out[0].islower() else "r_" + out


def inverted_grammar_text(
    inv: InvertedGrammar, kb: SemanticKB, sig: Signature
) -> str:
    """The inverted grammar in grammar-file syntax plus a #kb section.

    The output is a loadable grammar: the signature and the (named) inverted
    rules re-parse and re-expand; `#kb` lines are comments to the grammar
    parser and data to load_inverted_text.  Rule names keep the lex~ prefix
    (as lex_) so initialization-only marking survives the round trip.
    """
    from .render import print_rule

    lines = ["% inverted grammar (generation direction)", ""]
    for d in sig.to_decls():
        subs = ", ".join(d.subtypes)
        feats = ", ".join(f"{f}:{r}" for f, r in d.feats)
        line = f"{d.name} sub [{subs}]"
        if feats:
            line += f" intro [{feats}]"
        lines.append(line + ".")
    lines.append("")
    for r in inv.rules:
        body = print_rule(r.heap, r.head, r.body)
        lines.append(f"{_safe_rule_name(r.name)} rule {body}")
        lines.append("")
    lines.append("#kb section: semantic primitives to words")
    for rec in kb.records:
        lines.append(f'#kb {rec.prd_type}/{rec.arity} -> "{rec.word}".')
    return "\n".join(lines) + "\n"


def kb_from_text(text: str, sig: Signature, cfg: SemConfig) -> SemanticKB:
    """Rebuild a knowledge base from #kb lines.

    Bodies are reconstructed as the most general predicate-argument structure
    of the recorded primitive and arity (entry-specific refinements are not
    in the text format), which keeps subsumption-based matching sound.
    """
    import re as _re

    kb = SemanticKB(Heap(sig))
    for m in _re.finditer(r'^#kb\s+(\w+)/(\d+)\s*->\s*"([^"]+)"\.', text, _re.M):
        ptype, arity, word = m.group(1), int(m.group(2)), m.group(3)
        heap = kb.heap
        body = heap.new_unexpanded(0)
        prd = heap.new_unexpanded(sig.type_id(ptype))
        nm = _Names(sig, cfg)
        cell = heap.unify(body, heap.new_unexpanded(sig.introducer(nm.prd)))
        for k in range(1, arity + 1):
            f = sig.feat_id(f"{cfg.arg_prefix}{k}")
            cell = heap.unify(cell, heap.new_unexpanded(sig.introducer(f)))
        heap.expand1(cell)
        ppos = sig.feat_pos(heap.data[cell], nm.prd)
        heap.unify(heap.arcs[cell][ppos], prd)
        root = heap.freeze(cell)
        kb.records.append(KBRecord(ptype, arity, word, root))
    return kb


def realize_strings(
    result: FS, kb: SemanticKB, inv: InvertedGrammar
) -> tuple[list[list[str]], list[str]]:
    """All word sequences the result structure denotes, plus diagnostics.

    Each element of the string list is matched against the knowledge base
    (keyed by predicate type and arity, corrected by subsumption against the
    recording entry's primitive body); the sequences are the ordered cartesian
    product of the per-element word choices.
    """
    cfg = inv.cfg
    sig = result.sig
    nm = _Names(sig, cfg)
    diags: list[str] = []
    elems = str_elements(result, cfg)
    if elems is None:
        return [], [f"result carries no {cfg.str_feat!r} list"]
    index = kb.index()
    choices: list[list[str]] = []
    for pos, el in enumerate(elems):
        h = el.heap
        cell = h.deref(el.root)
        words: list[str] = []
        if nm.prd_appropriate(h, cell):
            p = h.maybe_arc(cell, nm.prd)
            ptype = h.data[h.deref(p)] if p is not None else 0
            arity = len(nm.arg_arcs(h, cell))
            cands = index.get((sig.type_name(ptype), arity), [])
            if not cands:
                cands = kb.records
            for rec in cands:
                if subsumes(kb.body_fs(rec), el):
                    words.append(rec.word)
        if not words:
            diags.append(
                f"string element {pos} matches no lexical primitive "
                f"(type {h.sig.type_name(h.data[cell])})"
            )
            return [], diags
        choices.append(sorted(set(words)))
    return [list(combo) for combo in itertools.product(*choices)], diags
