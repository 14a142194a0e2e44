"""Grammar source parsing.

The accepted language (documented in full in docs/grammar-syntax.md):

* ``%`` starts a line comment; clauses end with ``.``.
* Signature clauses: ``name sub [t1, t2] intro [f:Restr, g:Restr].``
  (either bracket group may be empty or absent).
* Lexical entries: ``word ---> Desc ; Desc ; ... .``
* Rules: ``name rule Head ===> Body.`` with the name (and ``rule`` keyword)
  optional.  Body constituents are separated by top-level commas and may carry
  an optional ``cat>`` marker, which is accepted and discarded.
* Empty categories: ``empty Desc.``
* Macros: ``name(V1, ..., Vn) macro Desc.``  Invoked as ``@name(...)``.

Descriptions: type atoms (lowercase), variables (capitalized), ``feat:Desc``
with ``:`` binding tighter than ``,``, parenthesized conjunctions, list sugar
(``[]``, ``[a, b]``, ``[H|T]``) and macro calls.  Constructs this engine
deliberately does not support (``cats>``, lexical rules, definite clauses,
inequations, set values, ``goal>``) are rejected with a named diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .signature import TypeDecl


class GrammarSyntaxError(Exception):
    def __init__(self, line: int, col: int, message: str):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {message}")


class UnsupportedConstruct(GrammarSyntaxError):
    def __init__(self, line: int, col: int, construct: str):
        self.construct = construct
        super(GrammarSyntaxError, self).__init__(
            f"line {line}, column {col}: unsupported construct: {construct}"
        )
        self.line, self.col = line, col


# -- description AST ---------------------------------------------------------


@dataclass(frozen=True)
class Desc:
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DType(Desc):
    name: str = ""


@dataclass(frozen=True)
class DVar(Desc):
    name: str = ""


@dataclass(frozen=True)
class DFeat(Desc):
    feat: str = ""
    value: Desc = None  # type: ignore[assignment]


@dataclass(frozen=True)
class DConj(Desc):
    parts: tuple[Desc, ...] = ()


@dataclass(frozen=True)
class DList(Desc):
    items: tuple[Desc, ...] = ()
    tail: Desc | None = None


@dataclass(frozen=True)
class DMacro(Desc):
    name: str = ""
    args: tuple[Desc, ...] = ()


@dataclass
class RuleDecl:
    head: Desc
    body: list[Desc]
    name: str
    line: int = 0


@dataclass
class LexDecl:
    word: str
    descs: list[Desc]
    line: int = 0


@dataclass
class EmptyDecl:
    desc: Desc
    line: int = 0


@dataclass
class MacroDecl:
    name: str
    params: list[str]
    body: Desc
    line: int = 0


@dataclass
class ParsedGrammar:
    sig_decls: list[TypeDecl]
    rules: list[RuleDecl]
    lexicon: list[LexDecl]
    empties: list[EmptyDecl]
    macros: dict[tuple[str, int], MacroDecl]


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+|%[^\n]*|\#[^\n]*)
    | (?P<catsgt>cats>)
    | (?P<catgt>cat>)
    | (?P<goalgt>goal>)
    | (?P<lexarrow>--->)
    | (?P<rulearrow>===>)
    | (?P<lexrule>\*\*>)
    | (?P<neck>:-)
    | (?P<ineq>=\\=)
    | (?P<ident>[a-z][A-Za-z0-9_]*)
    | (?P<var>[A-Z_][A-Za-z0-9_]*)
    | (?P<punct>[()\[\],:;|.@{}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise GrammarSyntaxError(line, col, f"unexpected character {src[pos]!r}")
        text = m.group(0)
        kind = m.lastgroup or ""
        if kind == "punct":
            kind = text
        if kind != "ws":
            toks.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    return toks


_REJECTED = {
    "catsgt": "cats> (category list in a rule body)",
    "goalgt": "goal> (external goals)",
    "lexrule": "lexical rule (**>)",
    "neck": "definite clause (:-)",
    "ineq": "inequation (=\\=)",
    "{": "set value ({...})",
    "}": "set value ({...})",
}


# -- clause parsing -------------------------------------------------------------


class _Clause:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token | None:
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            last = self.toks[-1]
            raise GrammarSyntaxError(last.line, last.col, "unexpected end of clause")
        self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise GrammarSyntaxError(
                t.line, t.col, f"expected {kind!r}, found {t.text!r}"
            )
        return t

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)

    def err(self, msg: str) -> GrammarSyntaxError:
        t = self.peek() or self.toks[-1]
        return GrammarSyntaxError(t.line, t.col, msg)


def _check_rejected(toks: list[Token]) -> None:
    for t in toks:
        if t.kind in _REJECTED:
            raise UnsupportedConstruct(t.line, t.col, _REJECTED[t.kind])


def _split_clauses(toks: list[Token]) -> list[list[Token]]:
    clauses: list[list[Token]] = []
    cur: list[Token] = []
    for t in toks:
        if t.kind == ".":
            if cur:
                clauses.append(cur)
                cur = []
            continue
        cur.append(t)
    if cur:
        t = cur[-1]
        raise GrammarSyntaxError(t.line, t.col, "clause not terminated by '.'")
    return clauses


def _depth0_kinds(toks: list[Token]) -> list[str]:
    depth = 0
    out = []
    for t in toks:
        if t.kind in ("(", "["):
            depth += 1
        elif t.kind in (")", "]"):
            depth -= 1
        elif depth == 0:
            out.append(t.kind if t.kind != "ident" else t.text)
    return out


def parse_grammar(src: str) -> ParsedGrammar:
    toks = tokenize(src)
    _check_rejected(toks)
    g = ParsedGrammar([], [], [], [], {})
    for ctoks in _split_clauses(toks):
        d0 = _depth0_kinds(ctoks)
        c = _Clause(ctoks)
        if "sub" in d0:
            g.sig_decls.append(_parse_sig_clause(c))
        elif "lexarrow" in d0:
            g.lexicon.append(_parse_lex_clause(c))
        elif "rulearrow" in d0:
            g.rules.append(_parse_rule_clause(c, len(g.rules)))
        elif ctoks[0].kind == "ident" and ctoks[0].text == "empty":
            c.next()
            desc = _parse_description(c)
            if not c.at_end():
                raise c.err("trailing tokens after empty-category description")
            g.empties.append(EmptyDecl(desc, ctoks[0].line))
        elif "macro" in d0:
            m = _parse_macro_clause(c)
            key = (m.name, len(m.params))
            if key in g.macros:
                raise GrammarSyntaxError(
                    m.line, 1, f"macro {m.name}/{len(m.params)} defined twice"
                )
            g.macros[key] = m
        elif "if" in d0:
            t = ctoks[0]
            raise UnsupportedConstruct(t.line, t.col, "definite clause (... if ...)")
        else:
            t = ctoks[0]
            raise GrammarSyntaxError(
                t.line, t.col, f"unrecognized clause starting with {t.text!r}"
            )
    return g


def _parse_sig_clause(c: _Clause) -> TypeDecl:
    name = c.expect("ident")
    kw = c.expect("ident")
    if kw.text != "sub":
        raise GrammarSyntaxError(kw.line, kw.col, f"expected 'sub', found {kw.text!r}")
    subtypes: list[str] = []
    c.expect("[")
    while True:
        t = c.next()
        if t.kind == "]":
            break
        if t.kind != "ident":
            raise GrammarSyntaxError(t.line, t.col, f"expected type name, found {t.text!r}")
        subtypes.append(t.text)
        t = c.next()
        if t.kind == "]":
            break
        if t.kind != ",":
            raise GrammarSyntaxError(t.line, t.col, f"expected ',' or ']', found {t.text!r}")
    feats: list[tuple[str, str]] = []
    if not c.at_end():
        kw = c.expect("ident")
        if kw.text != "intro":
            raise GrammarSyntaxError(kw.line, kw.col, f"expected 'intro', found {kw.text!r}")
        c.expect("[")
        while True:
            t = c.next()
            if t.kind == "]":
                break
            if t.kind != "ident":
                raise GrammarSyntaxError(t.line, t.col, f"expected feature name, found {t.text!r}")
            c.expect(":")
            r = c.expect("ident")
            feats.append((t.text, r.text))
            t = c.next()
            if t.kind == "]":
                break
            if t.kind != ",":
                raise GrammarSyntaxError(t.line, t.col, f"expected ',' or ']', found {t.text!r}")
        if not c.at_end():
            raise c.err("trailing tokens after signature clause")
    return TypeDecl(name.text, tuple(subtypes), tuple(feats), name.line)


def _parse_lex_clause(c: _Clause) -> LexDecl:
    w = c.expect("ident")
    arrow = c.next()
    if arrow.kind != "lexarrow":
        raise GrammarSyntaxError(arrow.line, arrow.col, "expected '--->' after word")
    descs = [_parse_description(c)]
    while not c.at_end():
        t = c.next()
        if t.kind != ";":
            raise GrammarSyntaxError(t.line, t.col, f"expected ';' between entries, found {t.text!r}")
        descs.append(_parse_description(c))
    return LexDecl(w.text, descs, w.line)


def _parse_rule_clause(c: _Clause, index: int) -> RuleDecl:
    name = f"rule_{index + 1}"
    t0, t1 = c.peek(0), c.peek(1)
    if (
        t0 is not None
        and t1 is not None
        and t0.kind == "ident"
        and t1.kind == "ident"
        and t1.text == "rule"
    ):
        name = t0.text
        c.next()
        c.next()
    head = _parse_conjunct(c)
    arrow = c.next()
    if arrow.kind != "rulearrow":
        raise GrammarSyntaxError(
            arrow.line, arrow.col, f"expected '===>' after rule head, found {arrow.text!r}"
        )
    body: list[Desc] = []
    while True:
        t = c.peek()
        if t is not None and t.kind == "catgt":
            c.next()  # cat> markers are pure syntax
        body.append(_parse_conjunct(c))
        if c.at_end():
            break
        t = c.next()
        if t.kind != ",":
            raise GrammarSyntaxError(
                t.line, t.col, f"expected ',' between constituents, found {t.text!r}"
            )
    return RuleDecl(head, body, name, arrow.line)


def _parse_macro_clause(c: _Clause) -> MacroDecl:
    name = c.expect("ident")
    params: list[str] = []
    t = c.peek()
    if t is not None and t.kind == "(":
        c.next()
        while True:
            v = c.next()
            if v.kind == ")":
                break
            if v.kind != "var":
                raise GrammarSyntaxError(
                    v.line, v.col, f"macro parameters must be variables, found {v.text!r}"
                )
            params.append(v.text)
            v = c.next()
            if v.kind == ")":
                break
            if v.kind != ",":
                raise GrammarSyntaxError(v.line, v.col, f"expected ',' or ')', found {v.text!r}")
    kw = c.expect("ident")
    if kw.text != "macro":
        raise GrammarSyntaxError(kw.line, kw.col, f"expected 'macro', found {kw.text!r}")
    body = _parse_description(c)
    if not c.at_end():
        raise c.err("trailing tokens after macro body")
    return MacroDecl(name.text, params, body, name.line)


# -- description parsing ---------------------------------------------------------


def _parse_description(c: _Clause) -> Desc:
    """A description: conjuncts joined by commas (up to clause structure)."""
    first = _parse_conjunct(c)
    parts = [first]
    while True:
        t = c.peek()
        if t is None or t.kind != ",":
            break
        c.next()
        parts.append(_parse_conjunct(c))
    if len(parts) == 1:
        return first
    return DConj(first.line, first.col, tuple(parts))


def _parse_conjunct(c: _Clause) -> Desc:
    """One conjunct: a feature path or a primary term (no top-level comma)."""
    t = c.peek()
    if t is None:
        raise c.err("expected a description")
    if t.kind == "ident":
        nxt = c.peek(1)
        if nxt is not None and nxt.kind == ":":
            c.next()
            c.next()
            value = _parse_conjunct(c)
            return DFeat(t.line, t.col, t.text, value)
        c.next()
        return DType(t.line, t.col, t.text)
    return _parse_primary(c)


def _parse_primary(c: _Clause) -> Desc:
    t = c.next()
    if t.kind == "(":
        inner = _parse_description(c)
        c.expect(")")
        return inner
    if t.kind == "var":
        return DVar(t.line, t.col, t.text)
    if t.kind == "@":
        name = c.expect("ident")
        args: list[Desc] = []
        nxt = c.peek()
        if nxt is not None and nxt.kind == "(":
            c.next()
            while True:
                args.append(_parse_conjunct(c))
                v = c.next()
                if v.kind == ")":
                    break
                if v.kind != ",":
                    raise GrammarSyntaxError(
                        v.line, v.col, f"expected ',' or ')', found {v.text!r}"
                    )
        return DMacro(t.line, t.col, name.text, tuple(args))
    if t.kind == "[":
        items: list[Desc] = []
        tail: Desc | None = None
        nxt = c.peek()
        if nxt is not None and nxt.kind == "]":
            c.next()
            return DList(t.line, t.col, (), None)
        while True:
            items.append(_parse_conjunct(c))
            v = c.next()
            if v.kind == "]":
                break
            if v.kind == "|":
                tail = _parse_conjunct(c)
                c.expect("]")
                break
            if v.kind != ",":
                raise GrammarSyntaxError(v.line, v.col, f"expected ',', '|' or ']', found {v.text!r}")
        return DList(t.line, t.col, tuple(items), tail)
    raise GrammarSyntaxError(t.line, t.col, f"unexpected token {t.text!r} in description")


# -- AST printing (parse -> print -> parse is a fixpoint) -------------------------


def desc_to_text(d: Desc) -> str:
    if isinstance(d, DType):
        return d.name
    if isinstance(d, DVar):
        return d.name
    if isinstance(d, DFeat):
        v = desc_to_text(d.value)
        if isinstance(d.value, DConj):
            v = f"({v})"
        return f"{d.feat}:{v}"
    if isinstance(d, DConj):
        return ", ".join(
            f"({desc_to_text(p)})" if isinstance(p, DConj) else desc_to_text(p)
            for p in d.parts
        )
    if isinstance(d, DList):
        inner = ", ".join(
            f"({desc_to_text(p)})" if isinstance(p, DConj) else desc_to_text(p)
            for p in d.items
        )
        if d.tail is not None:
            tail = desc_to_text(d.tail)
            if isinstance(d.tail, DConj):
                tail = f"({tail})"
            return f"[{inner}|{tail}]"
        return f"[{inner}]"
    if isinstance(d, DMacro):
        if d.args:
            inner = ", ".join(
                f"({desc_to_text(p)})" if isinstance(p, DConj) else desc_to_text(p)
                for p in d.args
            )
            return f"@{d.name}({inner})"
        return f"@{d.name}"
    raise TypeError(f"not a description: {d!r}")


def vars_of(d: Desc, acc: dict[str, int] | None = None) -> dict[str, int]:
    """Occurrence counts of every variable in a description."""
    if acc is None:
        acc = {}
    if isinstance(d, DVar):
        acc[d.name] = acc.get(d.name, 0) + 1
    elif isinstance(d, DFeat):
        vars_of(d.value, acc)
    elif isinstance(d, DConj):
        for p in d.parts:
            vars_of(p, acc)
    elif isinstance(d, DList):
        for p in d.items:
            vars_of(p, acc)
        if d.tail is not None:
            vars_of(d.tail, acc)
    elif isinstance(d, DMacro):
        for p in d.args:
            vars_of(p, acc)
    return acc
