import random

import pytest

from tfsvm.heap import FS, Heap, copy_into, iso, subsumes
from tfsvm.signature import TypeDecl, compile_signature
from tfsvm.syntax import (
    DConj,
    DFeat,
    DList,
    DType,
    DVar,
    GrammarSyntaxError,
    UnsupportedConstruct,
    desc_to_text,
    parse_grammar,
    tokenize,
    _Clause,
    _parse_description,
)
from tfsvm.templates import (
    InconsistentDescription,
    RecursiveMacro,
    UnknownFeature,
    UnknownMacro,
    UnknownType,
    expand_empty,
    expand_empty_categories,
    expand_lex,
    expand_macros,
    expand_rule,
    infer_and_expand,
)

from oracles import enumerate_fs, random_desc, satisfies

MINI = """
bot sub [t, a, b].
t sub [] intro [f:a, g:b].
a sub [a1].
a1 sub [].
b sub [].
"""


def parse_desc(text):
    return _parse_description(_Clause(tokenize(text)))


def mini_sig():
    return compile_signature(parse_grammar(MINI).sig_decls)


# -- grammar file parsing -------------------------------------------------------


def test_exemplar_grammar_parses(en_text):
    g = parse_grammar(en_text)
    assert len(g.rules) == 2
    assert [w.word for w in g.lexicon] == ["every", "boy", "sleeps"]
    assert all(len(w.descs) == 1 for w in g.lexicon)
    assert not g.empties and not g.macros


def test_operator_precedence_and_shared_variable():
    d = parse_desc("(a, f:(b, g:X), h:X)")
    assert isinstance(d, DConj) and len(d.parts) == 3
    assert isinstance(d.parts[1], DFeat) and d.parts[1].feat == "f"
    inner = d.parts[1].value
    assert isinstance(inner, DConj)
    assert isinstance(inner.parts[1].value, DVar)
    assert d.parts[2].value.name == "X"


def test_feature_path_binds_tighter_than_comma():
    d = parse_desc("f:g:x, y")
    assert isinstance(d, DConj)
    f = d.parts[0]
    assert isinstance(f, DFeat) and f.feat == "f"
    assert isinstance(f.value, DFeat) and f.value.feat == "g"


def test_cats_is_rejected_with_named_diagnostic():
    with pytest.raises(UnsupportedConstruct) as e:
        parse_grammar("x ===> cats> [a, b].")
    assert "cats>" in str(e.value)


@pytest.mark.parametrize(
    "src, what",
    [
        ("x lex_rule y **> z.", "lexical rule"),
        ("p(X) :- q(X).", "definite clause"),
        ("x ===> cat> (a, f:{y}).", "set value"),
        ("x ===> goal> g, cat> a.", "goal>"),
    ],
)
def test_unsupported_constructs(src, what):
    with pytest.raises(UnsupportedConstruct) as e:
        parse_grammar(src)
    assert what in str(e.value)


def test_syntax_error_has_position():
    with pytest.raises(GrammarSyntaxError) as e:
        parse_grammar("bot sub [a\n b.")
    assert e.value.line >= 1 and e.value.col >= 1


def test_lexicon_multiple_entries_preserved_in_order():
    g = parse_grammar("bot sub [a, b].\na sub [].\nb sub [].\nw ---> a ; b.")
    assert len(g.lexicon) == 1
    assert [d.name for d in g.lexicon[0].descs] == ["a", "b"]


def test_named_rule_and_optional_cat_markers():
    g = parse_grammar("bot sub [a].\na sub [].\nmine rule a ===> cat> a, a.")
    assert g.rules[0].name == "mine"
    assert len(g.rules[0].body) == 2


def test_parse_print_parse_fixpoint():
    texts = [
        "(a, f:(b, g:X), h:X)",
        "[a, b|T]",
        "f:g:(x, y)",
        "@m(X, (a, f:Y))",
        "[]",
    ]
    for t in texts:
        d1 = parse_desc(t)
        d2 = parse_desc(desc_to_text(d1))
        assert desc_to_text(d1) == desc_to_text(d2)
        assert d1 == d2


# -- macros ----------------------------------------------------------------------


def test_macro_expansion_with_parameters():
    g = parse_grammar(
        "bot sub [syn, np].\nsyn sub [] intro [cat:np].\nnp sub [].\n"
        "np(X) macro (syn, cat:X).\n"
        "w ---> @np(np)."
    )
    g2 = expand_macros(g)
    d = g2.lexicon[0].descs[0]
    assert isinstance(d, DConj)
    assert d.parts[1].value.name == "np"


def test_nested_macros_expand_transitively():
    g = parse_grammar(
        "bot sub [a].\na sub [] .\n"
        "inner(X) macro f:X.\nouter(X) macro (a, @inner(X)).\n"
        "w ---> @outer(a)."
    )
    g2 = expand_macros(g)
    txt = desc_to_text(g2.lexicon[0].descs[0])
    assert txt == "a, f:a"


def test_recursive_macro_is_an_error():
    g = parse_grammar("bot sub [a].\na sub [].\nm(X) macro (a, @m(X)).\nw ---> @m(a).")
    with pytest.raises(RecursiveMacro):
        expand_macros(g)


def test_unknown_macro_and_arity_mismatch():
    g = parse_grammar("bot sub [a].\na sub [].\nw ---> @nope(a).")
    with pytest.raises(UnknownMacro):
        expand_macros(g)


# -- description expansion ----------------------------------------------------------


def test_bot_expands_to_most_general_placeholder():
    s = mini_sig()
    fs = infer_and_expand(parse_desc("bot"), s)
    h = Heap(s)
    assert iso(fs, FS(h, h.new_unexpanded(0)))


def test_feature_mention_promotes_to_introducer():
    s = mini_sig()
    fs = infer_and_expand(parse_desc("f:a1"), s)
    assert fs.type_name() == "t"


def test_inconsistent_description_reports_path():
    s = compile_signature(
        [
            TypeDecl("bot", ("np", "vp", "x")),
            TypeDecl("np", (), (("cat", "x"),)),
            TypeDecl("vp"),
            TypeDecl("x"),
        ]
    )
    with pytest.raises(InconsistentDescription) as e:
        infer_and_expand(parse_desc("(np, cat:vp)"), s)
    assert e.value.path == ("cat",)


def test_unknown_type_and_feature_errors():
    s = mini_sig()
    with pytest.raises(UnknownType):
        infer_and_expand(parse_desc("nosuch"), s)
    with pytest.raises(UnknownFeature):
        infer_and_expand(parse_desc("nofeat:a"), s)


def test_exemplar_lexicon_matches_initial_structures(en_art):
    """The diagonal structures for the worked example's three words."""
    sig = en_art.signature
    expected = {
        "every": "(word, syn:(syn, cat:det), sem:(lambda, var:(R5, a1:R2), "
        "rst:(lambda, var:(R6, a1:R2), rst:(prd:(forall, var:R2, form:(bool, "
        "conn:if, wff1:R5, wff2:R6)), a1:R5, a2:R6))))",
        "boy": "(word, syn:(syn, cat:n), sem:(lambda, var:R5, rst:(prd:boy, a1:R5)))",
        "sleeps": "(word, syn:(syn, cat:vp), sem:(lambda, var:R5, rst:(prd:sleep, a1:R5)))",
    }
    for word, text in expected.items():
        want = infer_and_expand(parse_desc(text), sig)
        got = en_art.program.lexicon_fs(word)
        assert len(got) == 1
        assert iso(got[0], want)


def test_expansion_output_satisfies_description_random():
    rng = random.Random(1001)
    from oracles import random_signature

    n_ok = 0
    while n_ok < 120:
        s = random_signature(rng, n_types=5, n_feats=2)
        d = random_desc(rng, s, ["X", "Y"])
        try:
            fs = infer_and_expand(d, s)
        except InconsistentDescription:
            continue
        assert satisfies(fs, d), desc_to_text(d)
        n_ok += 1


def test_expansion_is_most_general_satisfier_exhaustive():
    """Brute force: no enumerated satisfier escapes the expansion's cone."""
    s = compile_signature(
        [
            TypeDecl("bot", ("t", "a", "b")),
            TypeDecl("t", (), (("f", "a"), ("g", "a"))),
            TypeDecl("a", ("b",)),
            TypeDecl("b"),
        ]
    )
    universe = enumerate_fs(s, max_nodes=3)
    rng = random.Random(77)
    descs = [
        parse_desc("t"),
        parse_desc("(t, f:b)"),
        parse_desc("(t, f:X, g:X)"),
        parse_desc("f:(a, X)"),
        parse_desc("(t, f:b, g:b)"),
    ] + [random_desc(rng, s, ["X"]) for _ in range(10)]
    checked = 0
    for d in descs:
        try:
            out = infer_and_expand(d, s)
        except InconsistentDescription:
            continue
        for cand in universe:
            if satisfies(cand, d, env={}):
                assert subsumes(out, cand), desc_to_text(d)
                checked += 1
    assert checked > 50


# -- empty categories ------------------------------------------------------------------


EC_GRAMMAR = """
bot sub [cat].
cat sub [s, x, y, e].
s sub []. x sub []. y sub []. e sub [].
s ===> cat> x, cat> y.
y ===> cat> e, cat> y.
empty e.
w ---> x.
v ---> y.
"""


def _templates(src):
    g = parse_grammar(src)
    sig = compile_signature(g.sig_decls)
    rules = [expand_rule(r, sig)[0] for r in g.rules]
    empties = [expand_empty(e.desc, sig, i) for i, e in enumerate(g.empties)]
    return sig, rules, empties


def test_no_empties_identity():
    sig, rules, _ = _templates(EC_GRAMMAR)
    out, diags = expand_empty_categories(rules, [], sig, 2)
    assert out == rules and not diags.warnings


def test_max_rounds_zero_is_identity():
    sig, rules, empties = _templates(EC_GRAMMAR)
    out, diags = expand_empty_categories(rules, empties, sig, 0)
    assert out == rules


def test_single_fold_adds_unary_rule_with_bindings():
    src = """
bot sub [cat, mark].
cat sub [s, x, e] intro [m:mark].
mark sub [m1].
s sub []. x sub []. e sub []. m1 sub [].
s ===> cat> x, cat> (e, m:M), cat> (x, m:M).
empty (e, m:m1).
"""
    sig, rules, empties = _templates(src)
    out, diags = expand_empty_categories(rules, empties, sig, 2)
    assert len(out) == 2
    reduced = out[1]
    assert reduced.arity == 2
    # oracle: manual unification says the binding m:m1 must propagate to the
    # remaining x constituent
    h = reduced.heap
    m = sig.feat_id("m")
    last = reduced.body[1]
    assert sig.type_name(h.type_of(h.maybe_arc(last, m))) == "m1"


def test_self_reenabling_empty_trips_budget():
    src = """
bot sub [cat].
cat sub [s, e].
s sub []. e sub [].
s ===> cat> e, cat> e, cat> e, cat> e.
empty e.
w ---> s.
"""
    sig, rules, empties = _templates(src)
    out, diags = expand_empty_categories(rules, empties, sig, 2)
    assert diags.budget_exceeded
    assert diags.non_equivalent
    assert len(out) > len(rules)
    out3, diags3 = expand_empty_categories(rules, empties, sig, 4)
    assert not diags3.budget_exceeded  # enough rounds: expansion converges


def test_empty_body_rules_are_dropped_with_warning():
    src = """
bot sub [cat].
cat sub [s, e].
s sub []. e sub [].
s ===> cat> e.
empty e.
"""
    sig, rules, empties = _templates(src)
    out, diags = expand_empty_categories(rules, empties, sig, 2)
    assert len(out) == 1
    assert any(w.kind == "empty-body-rule-dropped" for w in diags.warnings)
