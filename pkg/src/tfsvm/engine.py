"""Compilation pipeline and task entry points.

``compile_source`` turns grammar text into a CompiledArtifact: a parse
program, and (on request) the inverted generation program plus the semantic
knowledge base, all sharing one compiled signature.  ``parse_words`` and
``generate`` are the two ways to run the one chart engine over an artifact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .chart import Chart, CompleteEdge, Limits, init_generate, init_parse, run
from .heap import FS, Heap, subsumes
from .invert import (
    InvertedGrammar,
    SemConfig,
    SemanticKB,
    check_invertibility,
    invert,
    inverted_grammar_text,
    kb_from_text,
)
from .machine import Program, compile_grammar
from .signature import Signature, TypeDecl, compile_signature
from .syntax import (
    Desc,
    DConj,
    DFeat,
    DType,
    DVar,
    ParsedGrammar,
    parse_grammar,
    tokenize,
    _Clause,
    _parse_description,
)
from .templates import (
    CompileError,
    EcDiagnostics,
    EmptyTemplate,
    LexTemplate,
    RuleTemplate,
    Warning_,
    expand_empty,
    expand_empty_categories,
    expand_lex,
    expand_macros,
    expand_rule,
    infer_and_expand,
)

ENGINE_VERSION = "0.1.0"

_LIST_DECLS = [
    TypeDecl("list", ("e_list", "ne_list")),
    TypeDecl("e_list"),
    TypeDecl("ne_list", (), (("hd", "bot"), ("tl", "list"))),
]


@dataclass
class CompiledArtifact:
    signature: Signature
    program: Program  # parsing direction
    gen_program: Program | None = None
    kb: SemanticKB | None = None
    inv_cfg: SemConfig | None = None
    metadata: dict = field(default_factory=dict)
    warnings: list[Warning_] = field(default_factory=list)
    ec_diags: EcDiagnostics | None = None
    # compile-time byproducts, not serialized:
    rule_templates: list[RuleTemplate] = field(default_factory=list)
    lex_templates: list[LexTemplate] = field(default_factory=list)
    inverted: InvertedGrammar | None = None

    @property
    def can_generate(self) -> bool:
        return self.gen_program is not None and self.kb is not None

    def inverted_or_cfg(self) -> InvertedGrammar:
        """The inverted grammar, or a shell carrying just the configuration
        (enough for string realization after loading a serialized artifact)."""
        if self.inverted is not None:
            return self.inverted
        return InvertedGrammar(
            [], self.signature.feat_id(self.inv_cfg.str_feat), self.inv_cfg
        )


def _inject_lists(decls: list[TypeDecl]) -> list[TypeDecl]:
    names = {d.name for d in decls}
    if {"list", "e_list", "ne_list"} & names:
        return decls  # grammar takes responsibility for its list types
    out = []
    for d in decls:
        if d.name == "bot":
            out.append(TypeDecl(d.name, d.subtypes + ("list",), d.feats, d.line))
        else:
            out.append(d)
    return out + _LIST_DECLS


def _inject_str(
    decls: list[TypeDecl], sig: Signature, target: int, str_feat: str
) -> list[TypeDecl]:
    tname = sig.type_name(target)
    out = []
    for d in decls:
        if d.name == tname:
            out.append(TypeDecl(d.name, d.subtypes, d.feats + ((str_feat, "list"),), d.line))
        else:
            out.append(d)
    return out


def _str_target(sig: Signature, roots: list[int]) -> int:
    """Most specific type subsuming every rule/lexicon root type."""
    cands = [
        t for t in range(sig.n_types) if all(sig.subsumes(t, r) for r in roots)
    ]
    cands.sort(key=lambda t: (len(sig.descendants(t)), t))
    return cands[0] if cands else 0


def _expand_all(
    g: ParsedGrammar, sig: Signature, max_ec_rounds: int
) -> tuple[list[RuleTemplate], list[LexTemplate], list[EmptyTemplate], list[Warning_], EcDiagnostics]:
    warnings: list[Warning_] = []
    rules: list[RuleTemplate] = []
    for r in g.rules:
        tpl, w = expand_rule(r, sig)
        rules.append(tpl)
        warnings += w
    lex: list[LexTemplate] = []
    for entry in g.lexicon:
        tpls, w = expand_lex(entry, sig)
        lex += tpls
        warnings += w
    empties = [expand_empty(e.desc, sig, i) for i, e in enumerate(g.empties)]
    rules, ec = expand_empty_categories(rules, empties, sig, max_ec_rounds)
    warnings += ec.warnings
    return rules, lex, empties, warnings, ec


def compile_source(
    text: str,
    invert_grammar: bool = False,
    max_ec_rounds: int = 2,
    sem_cfg: SemConfig | None = None,
    max_regs: int = 4096,
) -> CompiledArtifact:
    """Compile grammar text; with invert_grammar also build the generation side."""
    cfg = sem_cfg or SemConfig()
    g = expand_macros(parse_grammar(text))
    decls = _inject_lists(g.sig_decls)
    sig = compile_signature(decls)
    rules, lex, empties, warnings, ec = _expand_all(g, sig, max_ec_rounds)

    gen_program = None
    kb = None
    inverted = None
    if invert_grammar:
        for d in decls:
            for f, _r in d.feats:
                if f == cfg.str_feat:
                    raise CompileError(
                        f"feature {cfg.str_feat!r} already exists in the signature; "
                        "configure a different string feature for inversion"
                    )
        roots = sorted(
            {r.heap.type_of(r.head) for r in rules}
            | {r.heap.type_of(b) for r in rules for b in r.body}
            | {e.heap.type_of(e.root) for e in lex}
        )
        target = _str_target(sig, roots)
        decls = _inject_str(decls, sig, target, cfg.str_feat)
        sig = compile_signature(decls)
        rules, lex, empties, warnings, ec = _expand_all(g, sig, max_ec_rounds)
        violations = check_invertibility(rules, lex, sig, cfg)
        if violations:
            raise CompileError(
                "grammar is not invertible:\n  "
                + "\n  ".join(str(v) for v in violations)
            )
        inverted, kb = invert(rules, lex, sig, cfg)
        gen_program = compile_grammar(inverted.rules, [], [], sig, max_regs)

    program = compile_grammar(rules, lex, empties, sig, max_regs)
    meta = {
        "engine": ENGINE_VERSION,
        "source_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "inverted": bool(invert_grammar),
        "max_ec_rounds": max_ec_rounds,
        "types": sig.n_types,
        "features": sig.n_feats,
        "rules": len(rules),
        "instructions": len(program.instructions)
        + (len(gen_program.instructions) if gen_program else 0),
    }
    return CompiledArtifact(
        signature=sig,
        program=program,
        gen_program=gen_program,
        kb=kb,
        inv_cfg=cfg if invert_grammar else None,
        metadata=meta,
        warnings=warnings,
        ec_diags=ec,
        rule_templates=rules,
        lex_templates=lex,
        inverted=inverted,
    )


# -- running ---------------------------------------------------------------------


def parse_words(
    art: CompiledArtifact,
    words: list[str],
    limits: Limits | None = None,
    trace=None,
    dedup: bool = False,
) -> tuple[list[CompleteEdge], Chart]:
    heap = Heap(art.signature)
    initial = init_parse(art.program, words, heap)
    return run(art.program, heap, initial, limits, trace, dedup)


def generate(
    art: CompiledArtifact,
    sem: FS,
    limits: Limits | None = None,
    trace=None,
    dedup: bool = False,
) -> tuple[list[list[str]], list[CompleteEdge], Chart, list[str]]:
    """Generate from a semantic form: returns (word sequences, result edges,
    chart, diagnostics).  Result edges are the spanning edges whose semantics
    matches the input (generation asks for phrases meaning the input form)."""
    from .invert import realize_strings

    if not art.can_generate:
        raise CompileError("artifact was compiled without inversion; cannot generate")
    heap = Heap(art.signature)
    initial = init_generate(sem, heap, art.inv_cfg)
    spanning, chart = run(art.gen_program, heap, initial, limits, trace, dedup)
    sem_feat = (
        art.signature.feat_id(art.inv_cfg.sem)
        if art.signature.has_feat(art.inv_cfg.sem)
        else None
    )
    diags: list[str] = []
    results: list[CompleteEdge] = []
    for e in spanning:
        if sem_feat is None:
            continue
        cell = e.fs.heap.maybe_arc(e.fs.root, sem_feat)
        if cell is None:
            continue
        if subsumes(sem, FS(e.fs.heap, cell)):
            results.append(e)
    outputs: list[list[str]] = []
    seen = set()
    for e in results:
        seqs, d = realize_strings(e.fs, art.kb, art.inverted_or_cfg())
        diags += d
        for s in seqs:
            key = tuple(s)
            if key not in seen:
                seen.add(key)
                outputs.append(s)
    return outputs, results, chart, diags


def dump_inverted(art: CompiledArtifact) -> str:
    """Serialize the inversion output (inverted grammar + #kb section)."""
    if art.inverted is None or art.kb is None:
        raise CompileError("artifact carries no inverted grammar to dump")
    return inverted_grammar_text(art.inverted, art.kb, art.signature)


def load_inverted_text(text: str, sem_cfg: SemConfig | None = None) -> CompiledArtifact:
    """Reload a dumped inverted grammar into a generation-capable artifact.

    The lex_ rule-name prefix restores initialization-only marking; knowledge
    base bodies are rebuilt from the #kb lines at class generality."""
    cfg = sem_cfg or SemConfig()
    g = expand_macros(parse_grammar(text))
    sig = compile_signature(g.sig_decls)
    rules: list[RuleTemplate] = []
    for r in g.rules:
        tpl, _w = expand_rule(r, sig)
        tpl.init_only = r.name.startswith("lex_")
        rules.append(tpl)
    gen_program = compile_grammar(rules, [], [], sig)
    kb = kb_from_text(text, sig, cfg)
    return CompiledArtifact(
        signature=sig,
        program=Program(heap=Heap(sig)),
        gen_program=gen_program,
        kb=kb,
        inv_cfg=cfg,
        metadata={"loaded_from": "inverted-grammar-text"},
        inverted=InvertedGrammar(rules, sig.feat_id(cfg.str_feat), cfg),
    )


def parse_sem_text(art: CompiledArtifact, text: str) -> FS:
    """A semantic form given as ALE description text, expanded to a structure."""
    toks = tokenize(text)
    c = _Clause(toks)
    d = _parse_description(c)
    if not c.at_end():
        from .syntax import GrammarSyntaxError

        t = c.peek()
        raise GrammarSyntaxError(t.line, t.col, "trailing tokens after description")
    return infer_and_expand(d, art.signature, "semantic input")


def parse_sem_json(art: CompiledArtifact, obj) -> FS:
    """A semantic form in the JSON structure schema."""
    return infer_and_expand(_json_to_desc(obj, {}), art.signature, "semantic input")


def _json_to_desc(obj, tags: dict[int, str]) -> Desc:
    if not isinstance(obj, dict):
        raise CompileError("JSON structure must be an object")
    if "ref" in obj:
        n = obj["ref"]
        if n not in tags:
            tags[n] = f"J{n}"
        return DVar(0, 0, tags[n])
    parts: list[Desc] = []
    if "tag" in obj:
        n = obj["tag"]
        tags[n] = f"J{n}"
        parts.append(DVar(0, 0, tags[n]))
    parts.append(DType(0, 0, obj.get("type", "bot")))
    for f, v in sorted(obj.get("feats", {}).items()):
        parts.append(DFeat(0, 0, f, _json_to_desc(v, tags)))
    if len(parts) == 1:
        return parts[0]
    return DConj(0, 0, tuple(parts))


