"""Command-line interface.

Exit codes are a stable contract: 0 = results found (or command succeeded),
1 = no results, 2 = usage or compile error, 3 = resource limit hit,
4 = benchmark expectation mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

from .chart import Limits, ResourceExhausted, UnknownWord
from .engine import (
    CompiledArtifact,
    compile_source,
    generate,
    parse_sem_json,
    parse_sem_text,
    parse_words,
)
from .invert import InversionError, SemConfig
from .machine import disassemble
from .render import print_fs
from .signature import SignatureError
from .syntax import GrammarSyntaxError
from .templates import CompileError

EXIT_OK = 0
EXIT_NO_RESULTS = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_BENCH_MISMATCH = 4


def _load_sem_cfg(path: str | None) -> SemConfig:
    if not path:
        return SemConfig()
    with open(path) as f:
        return SemConfig.from_json(json.load(f))


def _limits(args) -> Limits:
    return Limits(max_edges=args.max_edges, max_steps=args.max_steps)


def _add_limit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-edges", type=int, default=100_000)
    p.add_argument("--max-steps", type=int, default=10_000_000)
    p.add_argument("--json", action="store_true", help="render results as JSON")
    p.add_argument("--trace", metavar="FILE", help="write JSON-lines trace events")
    p.add_argument("--dedup", action="store_true", help="drop isomorphic duplicate edges")
    p.add_argument(
        "--expand-depth",
        type=int,
        default=None,
        metavar="N",
        help="materialize lazy placeholders down to N levels before printing",
    )


def _load_artifact(path: str) -> CompiledArtifact:
    from .serialize import load_artifact

    return load_artifact(path)


def _open_trace(args):
    if not args.trace:
        return None, None
    f = open(args.trace, "w")

    def emit(ev):
        f.write(json.dumps(ev) + "\n")

    return emit, f


def cmd_compile(args) -> int:
    from .serialize import save_artifact

    with open(args.grammar) as f:
        text = f.read()
    cfg = _load_sem_cfg(args.sem_config)
    art = compile_source(
        text,
        invert_grammar=args.invert,
        max_ec_rounds=args.max_ec_rounds,
        sem_cfg=cfg if args.invert else None,
    )
    for w in art.warnings:
        print(f"warning: {w}", file=sys.stderr)
    m = art.metadata
    print(
        f"compiled: {m['types']} types, {m['features']} features, "
        f"{m['rules']} rules, {m['instructions']} instructions"
    )
    if art.gen_program is not None:
        print(
            f"generation: {len(art.gen_program.rules)} inverted rules, "
            f"{len(art.kb.records)} knowledge-base records"
        )
    if args.out:
        save_artifact(art, args.out)
        print(f"wrote {args.out}")
    if args.dump_inverted:
        from .engine import dump_inverted

        with open(args.dump_inverted, "w") as f:
            f.write(dump_inverted(art))
        print(f"wrote {args.dump_inverted}")
    return EXIT_OK


def cmd_parse(args) -> int:
    art = _load_artifact(args.artifact)
    trace, tf = _open_trace(args)
    try:
        words = args.sentence.split()
        edges, chart = parse_words(art, words, _limits(args), trace, args.dedup)
        for e in edges:
            style = "json" if args.json else "ale"
            print(print_fs(e.fs, style=style, expand_depth=args.expand_depth))
        print(
            f"; {len(edges)} result(s), {chart.counters['edges']} edges, "
            f"{chart.counters['attempts']} attempts",
            file=sys.stderr,
        )
        return EXIT_OK if edges else EXIT_NO_RESULTS
    finally:
        if tf:
            tf.close()


def cmd_generate(args) -> int:
    art = _load_artifact(args.artifact)
    if not art.can_generate:
        print("error: artifact was compiled without --invert", file=sys.stderr)
        return EXIT_USAGE
    trace, tf = _open_trace(args)
    try:
        if args.sem.lstrip().startswith("{"):
            sem = parse_sem_json(art, json.loads(args.sem))
        else:
            sem = parse_sem_text(art, args.sem)
        outputs, results, chart, diags = generate(
            art, sem, _limits(args), trace, args.dedup
        )
        for d in diags:
            print(f"; {d}", file=sys.stderr)
        for seq in outputs:
            print(json.dumps(seq) if args.json else " ".join(seq))
        return EXIT_OK if outputs else EXIT_NO_RESULTS
    finally:
        if tf:
            tf.close()


def cmd_disasm(args) -> int:
    art = _load_artifact(args.artifact)
    prog = art.gen_program if args.generation else art.program
    if prog is None:
        print("error: artifact has no generation program", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(disassemble(prog, art.signature))
    return EXIT_OK


def cmd_bench(args) -> int:
    """Run a suite of inputs with expected result counts; CSV timing table."""
    art = _load_artifact(args.artifact)
    rows = []
    mismatches = 0
    with open(args.suite) as f:
        cases = [json.loads(line) for line in f if line.strip()]
    for case in cases:
        task = case.get("task", "parse")
        expected = case.get("expect")
        t0 = time.perf_counter()
        try:
            if task == "parse":
                edges, chart = parse_words(
                    art, case["input"].split(), Limits(args.max_edges, args.max_steps)
                )
                n = len(edges)
            else:
                sem = parse_sem_text(art, case["input"])
                outputs, _res, chart, _d = generate(
                    art, sem, Limits(args.max_edges, args.max_steps)
                )
                n = len(outputs)
            dt = time.perf_counter() - t0
            ok = expected is None or n == expected
        except ResourceExhausted:
            dt = time.perf_counter() - t0
            n, ok, chart = -1, False, None
        if not ok:
            mismatches += 1
        rows.append(
            {
                "task": task,
                "input": case["input"],
                "time_s": f"{dt:.4f}",
                "edges": chart.counters["edges"] if chart else "",
                "steps": chart.counters["attempts"] if chart else "",
                "results": n,
                "expect": "" if expected is None else expected,
                "ok": ok,
            }
        )
    out = io.StringIO()
    if rows:
        w = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    sys.stdout.write(out.getvalue())
    if mismatches:
        print(f"; {mismatches} case(s) mismatched expectations", file=sys.stderr)
        return EXIT_BENCH_MISMATCH
    return EXIT_OK


def cmd_serve_debug(args) -> int:
    from .debugserver import serve

    art = _load_artifact(args.artifact)
    server = serve(art, args.host, args.port)
    print(f"debug server on http://{args.host}:{server.port}/api/v1/ (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tfsvm",
        description="Reversible typed-feature-structure grammar engine",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a grammar file to an artifact")
    p.add_argument("grammar")
    p.add_argument("--invert", action="store_true", help="also build the generation program")
    p.add_argument("--out", metavar="FILE", help="write the artifact here")
    p.add_argument("--max-ec-rounds", type=int, default=2)
    p.add_argument("--sem-config", metavar="JSON", help="semantics-path configuration")
    p.add_argument(
        "--dump-inverted",
        metavar="FILE",
        help="also write the inverted grammar + #kb section as grammar text",
    )
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("parse", help="parse a sentence with a compiled artifact")
    p.add_argument("artifact")
    p.add_argument("sentence")
    _add_limit_flags(p)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("generate", help="generate strings from a semantic form")
    p.add_argument("artifact")
    p.add_argument("sem", help="ALE description text, or a JSON structure")
    _add_limit_flags(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("disasm", help="print a program's disassembly")
    p.add_argument("artifact")
    p.add_argument("--generation", action="store_true")
    p.set_defaults(fn=cmd_disasm)

    p = sub.add_parser("bench", help="run a benchmark suite (JSON lines)")
    p.add_argument("artifact")
    p.add_argument("suite")
    p.add_argument("--max-edges", type=int, default=100_000)
    p.add_argument("--max-steps", type=int, default=10_000_000)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve-debug", help="serve the debug protocol for the browser UI")
    p.add_argument("artifact")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(fn=cmd_serve_debug)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (GrammarSyntaxError, SignatureError, CompileError, InversionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownWord as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_RESULTS
    except ResourceExhausted as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
