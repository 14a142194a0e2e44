"""Acceptance suite: one test per acceptance criterion, each at its stated
tolerance.  A summary with one PASS/FAIL line per criterion is printed at the
end of the pytest run (see the hook in conftest.py)."""

import random
import time

import pytest

import tfsvm
from tfsvm.heap import FS, Heap, copy_into, iso, iso_many
from tfsvm.machine import OP_NAMES
from tfsvm.syntax import RuleDecl, tokenize, _Clause, _parse_description
from tfsvm.templates import expand_rule, infer_and_expand

from conftest import SEM_INPUT, grammar_text
from oracles import (
    brute_lub,
    cky_table,
    naive_unify,
    random_cfg,
    random_fs,
    random_multi_bcpo,
    random_signature,
    random_tree_bcpo,
)


def parse_desc(text):
    return _parse_description(_Clause(tokenize(text)))


EXPECTED_SEM = SEM_INPUT

EXPECTED_NP = (
    "(phrase, syn:(syn, cat:np), sem:(lambda, var:(Q, a1:X), "
    "rst:(prd:(forall, var:X, form:(bool, conn:if, wff1:(W, prd:boy, a1:X), "
    "wff2:Q)), a1:W, a2:Q)))"
)

EXPECTED_RESULT = (
    "(phrase, syn:(syn, cat:s), sem:(M, prd:(forall, var:X, form:(bool, "
    "conn:if, wff1:(W1, prd:boy, a1:X), wff2:(W2, prd:sleep, a1:X))), "
    "a1:W1, a2:W2), str:[M, W1, W2])"
)


def test_golden_parse():
    """Exemplar golden parse: one spanning edge, expected semantics and the
    expected intermediate noun-phrase edge; under one second."""
    t0 = time.perf_counter()
    art = tfsvm.compile_source(grammar_text("english_tiny.gram"))
    edges, chart = tfsvm.parse_words(art, ["every", "boy", "sleeps"])
    assert len(edges) == 1
    sig = art.signature
    sem_cell = edges[0].fs.heap.maybe_arc(edges[0].fs.root, sig.feat_id("sem"))
    assert iso(
        FS(edges[0].fs.heap, sem_cell), infer_and_expand(parse_desc(EXPECTED_SEM), sig)
    )
    np_edges = chart.cell(0, 2)
    assert len(np_edges) == 1
    assert iso(np_edges[0].fs, infer_and_expand(parse_desc(EXPECTED_NP), sig))
    assert time.perf_counter() - t0 < 1.0


def test_golden_inversion():
    """Inverting the exemplar produces the composed sentence rule and the
    three lexical rules with the expected skeletons, reentrancy patterns and
    string threading; verified by description-level isomorphism."""
    t0 = time.perf_counter()
    art = tfsvm.compile_source(grammar_text("english_tiny.gram"), invert_grammar=True)
    sig = art.signature

    def build(head, body):
        tpl, _ = expand_rule(
            RuleDecl(parse_desc(head), [parse_desc(b) for b in body], "want"), sig
        )
        return tpl

    by_name = {r.name: r for r in art.inverted.rules}
    cases = {
        "gen~rule_1+rule_2~forall/2": build(
            "(phrase, syn:(syn, cat:s), str:[R3, R19, R22], "
            "sem:(R3, prd:(forall, var:R5, form:(bool, conn:if, "
            "wff1:(R8, a1:R5), wff2:(R10, a1:R5))), a1:R8, a2:R10))",
            [
                "(phrase, syn:(syn, cat:n), sem:(lambda, rst:R8), str:[R19])",
                "(phrase, syn:(syn, cat:vp), sem:(lambda, rst:R10), str:[R22])",
                "(lambda, var:R8, rst:(lambda, var:R10, rst:R3))",
            ],
        ),
        "lex~noun/1": build(
            "(word, syn:(syn, cat:n), sem:R3, str:[R5])",
            ["(R3, lambda, var:R4, rst:(R5, prd:noun, a1:R4))"],
        ),
        "lex~v_intrans/1": build(
            "(word, syn:(syn, cat:vp), sem:R3, str:[R5])",
            ["(R3, lambda, var:R4, rst:(R5, prd:v_intrans, a1:R4))"],
        ),
        "lex~forall/2": build(
            "(word, syn:(syn, cat:det), sem:R3, str:[R10])",
            [
                "(R3, lambda, var:(R4, a1:R6), rst:(lambda, var:(R8, a1:R6), "
                "rst:(R10, prd:(forall, var:R6, form:(bool, conn:if, wff1:R4, "
                "wff2:R8)), a1:R4, a2:R8)))"
            ],
        ),
    }
    assert set(cases) <= set(by_name)
    for name, want in cases.items():
        got = by_name[name]
        assert iso_many(
            got.heap, [got.head] + got.body, want.heap, [want.head] + want.body
        ), name
    assert time.perf_counter() - t0 < 1.0


def test_golden_generation():
    """Generation: the three diagonal entries, the spanning result structure,
    and exactly the one expected string; under one second."""
    t0 = time.perf_counter()
    art = tfsvm.compile_source(grammar_text("english_tiny.gram"), invert_grammar=True)
    sig = art.signature
    sem = tfsvm.parse_sem_text(art, SEM_INPUT)
    elements = tfsvm.linearize_semantics(sem, art.inv_cfg)
    wants = [
        "(lambda, var:X, rst:(prd:boy, a1:X))",
        "(lambda, var:X, rst:(prd:sleep, a1:X))",
        "(lambda, var:(P, a1:X), rst:(lambda, var:(Q, a1:X), "
        "rst:(prd:(forall, var:X, form:(bool, conn:if, wff1:P, wff2:Q)), a1:P, a2:Q)))",
    ]
    assert len(elements) == 3
    for el, want in zip(elements, wants):
        assert iso(el, infer_and_expand(parse_desc(want), sig))
    outputs, results, chart, diags = tfsvm.generate(art, sem)
    assert len(results) >= 1
    assert any(
        iso(r.fs, infer_and_expand(parse_desc(EXPECTED_RESULT), sig)) for r in results
    )
    assert outputs == [["every", "boy", "sleeps"]]
    assert time.perf_counter() - t0 < 1.0


def test_round_trip():
    """parse('every boy sleeps') -> semantics; generating from that semantics
    realizes the original sentence (exact string match)."""
    art = tfsvm.compile_source(grammar_text("english_tiny.gram"), invert_grammar=True)
    edges, _ = tfsvm.parse_words(art, ["every", "boy", "sleeps"])
    fs = edges[0].fs
    sem = FS(fs.heap, fs.heap.maybe_arc(fs.root, art.signature.feat_id("sem")))
    outputs, _r, _c, _d = tfsvm.generate(art, sem)
    assert ["every", "boy", "sleeps"] in outputs


def test_anbn_recognition():
    """a^n b^n accepted for n in {1,2,4,8,16,32}; ten random unequal pairs
    rejected; n=32 parses within ten seconds."""
    art = tfsvm.compile_source(grammar_text("anbn.gram"))

    def accepts(words):
        edges, _ = tfsvm.parse_words(art, words)
        return any(e.fs.type_name() == "s" for e in edges)

    for n in (1, 2, 4, 8, 16):
        assert accepts(["a"] * n + ["b"] * n)
    t0 = time.perf_counter()
    assert accepts(["a"] * 32 + ["b"] * 32)
    assert time.perf_counter() - t0 < 10.0
    rng = random.Random(424242)
    for _ in range(10):
        n, m = rng.randrange(1, 9), rng.randrange(1, 9)
        while n == m:
            m = rng.randrange(1, 9)
        assert not accepts(["a"] * n + ["b"] * m)


def test_unification_oracle_suite():
    """At least 1000 randomized structure pairs: destructive unification
    agrees with the reference unifier on success/failure and result shape."""
    rng = random.Random(600613)
    agree = 0
    for _ in range(1000):
        sig = random_signature(
            rng, n_types=rng.randrange(4, 8), n_feats=rng.randrange(1, 4)
        )
        a, b = random_fs(rng, sig), random_fs(rng, sig)
        h = Heap(sig)
        r = h.unify(copy_into(h, a), copy_into(h, b))
        want = naive_unify(a, b)
        if r is None:
            assert want is None
        else:
            assert want is not None and iso(FS(h, h.freeze(r)), want)
        agree += 1
    assert agree == 1000


def test_lub_oracle_suite():
    """At least 100 random bounded-complete orders (up to 30 types): the
    compiled table equals brute force on every pair."""
    rng = random.Random(1146)
    accepted = 0
    while accepted < 100:
        n = rng.randrange(5, 31)
        decls = (
            random_tree_bcpo(rng, n)
            if rng.random() < 0.5
            else random_multi_bcpo(rng, n, rng.randrange(1, 4))
        )
        try:
            sig = tfsvm.compile_signature(decls)
        except Exception:
            continue
        names = [d.name for d in decls]
        for n1 in names:
            for n2 in names:
                want = brute_lub(decls, n1, n2)
                got = sig.lub(sig.type_id(n1), sig.type_id(n2))
                assert (want is None and got is None) or sig.type_name(got) == want
        accepted += 1
    assert accepted == 100


def test_compiled_code_equivalence():
    """At least 200 randomized rules: compiled execution agrees with naive
    template unification in every case."""
    from test_machine import _random_rule_setup, naive_apply, run_rule
    from tfsvm.machine import Failed, Success

    rng = random.Random(3551)
    checked = 0
    while checked < 200:
        setup = _random_rule_setup(rng)
        if setup is None:
            continue
        sig, tpl, constituents = setup
        want = naive_apply(tpl, constituents, sig)
        got = run_rule(tpl, sig, constituents)
        if want is None:
            assert isinstance(got, Failed)
        else:
            assert isinstance(got, Success) and iso(got.fs, want)
        checked += 1
    assert checked == 200


def test_cky_equivalence():
    """Twenty random atomic-category grammars, all strings up to length 8:
    spanning category sets equal the CKY oracle's."""
    rng = random.Random(271828)
    grammars = 0
    while grammars < 20:
        text, rules, lexicon, words = random_cfg(rng)
        try:
            art = tfsvm.compile_source(text)
        except Exception:
            continue
        grammars += 1
        for length in range(1, 9):
            for mask in range(2 ** length):
                s = [words[(mask >> i) & 1] for i in range(length)]
                want = cky_table(rules, lexicon, s).get((0, length), set())
                edges, _ = tfsvm.parse_words(
                    art, s, tfsvm.Limits(500_000, 100_000_000), dedup=True
                )
                assert {e.fs.type_name() for e in edges} == want, (text, s)
    assert grammars == 20


def test_task_agnosticism():
    """Parse and generation golden runs exercise the identical opcode set and
    the single shared run loop (checked through trace markers)."""
    import tfsvm.chart as chart_mod

    art = tfsvm.compile_source(grammar_text("english_tiny.gram"), invert_grammar=True)

    def traced(run):
        events = []
        run(events.append)
        ops = {e["op"] for e in events if e["ev"] == "step"}
        markers = [e for e in events if e["ev"] == "run-loop"]
        assert len(markers) == 1
        return ops, markers[0]["fn"]

    before = chart_mod.run_loop_invocations
    parse_ops, parse_marker = traced(
        lambda t: tfsvm.parse_words(art, ["every", "boy", "sleeps"], trace=t)
    )
    mid = chart_mod.run_loop_invocations
    gen_ops, gen_marker = traced(
        lambda t: tfsvm.generate(art, tfsvm.parse_sem_text(art, SEM_INPUT), trace=t)
    )
    after = chart_mod.run_loop_invocations
    assert parse_marker == gen_marker == chart_mod.RUN_LOOP_MARKER
    assert before < mid < after  # both tasks ran through the one loop
    assert parse_ops == gen_ops
    assert parse_ops <= set(OP_NAMES.values())
