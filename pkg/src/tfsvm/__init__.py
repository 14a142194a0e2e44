"""tfsvm: a reversible typed-feature-structure grammar engine.

Grammars (an ALE-subset syntax) compile to abstract machine code; one
bottom-up chart interpreter executes the code for both parsing (string to
semantic structures) and generation (semantic form to strings), the latter
via a compile-time grammar-inversion pass.
"""

from .chart import Chart, Limits, ResourceExhausted, UnknownWord, run
from .engine import (
    CompiledArtifact,
    compile_source,
    generate,
    parse_sem_json,
    parse_sem_text,
    parse_words,
)
from .heap import FS, Heap, copy_into, expand, iso, subsumes
from .invert import (
    InversionFailure,
    MalformedSemantics,
    SemConfig,
    check_invertibility,
    invert,
    linearize_semantics,
    realize_strings,
)
from .machine import Machine, MachineFault, Program, compile_rule, disassemble
from .render import fs_json, print_fs
from .signature import Signature, SignatureError, TypeDecl, compile_signature
from .syntax import GrammarSyntaxError, UnsupportedConstruct, parse_grammar
from .templates import CompileError, InconsistentDescription, infer_and_expand

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "CompiledArtifact",
    "CompileError",
    "FS",
    "GrammarSyntaxError",
    "Heap",
    "InconsistentDescription",
    "InversionFailure",
    "Limits",
    "Machine",
    "MachineFault",
    "MalformedSemantics",
    "Program",
    "ResourceExhausted",
    "SemConfig",
    "Signature",
    "SignatureError",
    "TypeDecl",
    "UnknownWord",
    "UnsupportedConstruct",
    "check_invertibility",
    "compile_rule",
    "compile_signature",
    "compile_source",
    "copy_into",
    "disassemble",
    "expand",
    "fs_json",
    "generate",
    "infer_and_expand",
    "invert",
    "iso",
    "linearize_semantics",
    "parse_grammar",
    "parse_sem_json",
    "parse_sem_text",
    "parse_words",
    "print_fs",
    "realize_strings",
    "run",
    "subsumes",
    "__version__",
]
