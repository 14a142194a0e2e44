import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import tfsvm


def grammar_text(name: str) -> str:
    return (resources.files("tfsvm") / "grammars" / name).read_text()


@pytest.fixture(scope="session")
def en_text() -> str:
    return grammar_text("english_tiny.gram")


@pytest.fixture(scope="session")
def en_art(en_text):
    """The exemplar grammar, parse direction only."""
    return tfsvm.compile_source(en_text)


@pytest.fixture(scope="session")
def en_art_inv(en_text):
    """The exemplar grammar with the generation program and knowledge base."""
    return tfsvm.compile_source(en_text, invert_grammar=True)


@pytest.fixture(scope="session")
def anbn_art():
    return tfsvm.compile_source(grammar_text("anbn.gram"))


SEM_INPUT = (
    "(prd:(forall, var:X, form:(bool, conn:if, wff1:(W1, prd:boy, a1:X), "
    "wff2:(W2, prd:sleep, a1:X))), a1:W1, a2:W2)"
)


# -- acceptance summary: one PASS/FAIL line per criterion -------------------------

_ACCEPTANCE: dict[str, str] = {}

_CRITERIA = {
    "test_golden_parse": "golden parse of the worked example (< 1 s)",
    "test_golden_inversion": "golden grammar inversion (< 1 s)",
    "test_golden_generation": "golden generation and realization (< 1 s)",
    "test_round_trip": "parse/generate round trip (exact string)",
    "test_anbn_recognition": "a^n b^n recognition, n up to 32 (< 10 s)",
    "test_unification_oracle_suite": "unification oracle suite (>= 1000 pairs)",
    "test_lub_oracle_suite": "LUB oracle suite (>= 100 random BCPOs)",
    "test_compiled_code_equivalence": "compiled-code equivalence (>= 200 rules)",
    "test_cky_equivalence": "CKY equivalence (20 grammars, strings <= 8)",
    "test_task_agnosticism": "task-agnostic run loop and opcode set",
}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        if name in _CRITERIA:
            _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in _CRITERIA.items():
        if name in _ACCEPTANCE:
            terminalreporter.write_line(f"{_ACCEPTANCE[name]}: {label}")
