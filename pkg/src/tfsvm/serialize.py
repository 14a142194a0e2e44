"""Artifact serialization.

One little-endian binary container (magic ``TFSM``) holds everything a run
needs: the signature declarations, one or two programs (instruction arrays
packed as ``<B3i`` records, heaps packed per cell), the lexicon tables, the
semantic knowledge base, and metadata.  Loading reproduces run-identical
behavior; programs are byte-stable for identical source text.  The layout is
documented in docs/formats.md.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from .engine import CompiledArtifact
from .heap import Heap
from .invert import KBRecord, SemConfig, SemanticKB
from .machine import Program, RuleInfo
from .signature import Signature, TypeDecl, compile_signature

MAGIC = b"TFSM"
VERSION = 1


class ArtifactFormatError(Exception):
    pass


def _pack_instructions(prog: Program) -> bytes:
    return b"".join(struct.pack("<B3i", op, a, b, c) for op, a, b, c in prog.instructions)


def _unpack_instructions(blob: bytes) -> list[tuple[int, int, int, int]]:
    rec = struct.calcsize("<B3i")
    if len(blob) % rec:
        raise ArtifactFormatError("instruction blob length is not a whole record count")
    return [struct.unpack_from("<B3i", blob, i) for i in range(0, len(blob), rec)]


def _pack_heap(heap: Heap) -> bytes:
    out = [struct.pack("<I", heap.mark)]
    for i in range(heap.mark):
        arcs = heap.arcs[i] or []
        out.append(struct.pack("<BiH", heap.kind[i], heap.data[i], len(arcs)))
        for a in arcs:
            out.append(struct.pack("<i", a))
    return b"".join(out)


def _unpack_heap(blob: bytes, sig: Signature) -> Heap:
    heap = Heap(sig)
    (n,) = struct.unpack_from("<I", blob, 0)
    off = 4
    for _ in range(n):
        kind, data, na = struct.unpack_from("<BiH", blob, off)
        off += struct.calcsize("<BiH")
        arcs = None
        if na or kind == 0:
            arcs = list(struct.unpack_from(f"<{na}i", blob, off)) if na else []
            off += 4 * na
        heap._alloc(kind, data, arcs)
    heap.mark = n
    return heap


def _program_header(prog: Program) -> dict:
    return {
        "rules": [
            {
                "index": r.index,
                "name": r.name,
                "entry": r.entry,
                "arity": r.arity,
                "resume": r.resume,
                "init_only": r.init_only,
            }
            for r in prog.rules
        ],
        "lexicon": prog.lexicon,
        "empty_entries": prog.empty_entries,
    }


def _program_from(header: dict, inst: bytes, heapblob: bytes, sig: Signature) -> Program:
    prog = Program(heap=_unpack_heap(heapblob, sig))
    prog.instructions = _unpack_instructions(inst)
    prog.rules = [
        RuleInfo(
            r["index"], r["name"], r["entry"], r["arity"], list(r["resume"]), r["init_only"]
        )
        for r in header["rules"]
    ]
    prog.lexicon = {w: list(roots) for w, roots in header["lexicon"].items()}
    prog.empty_entries = list(header["empty_entries"])
    return prog


def save_artifact(art: CompiledArtifact, path: str) -> None:
    header: dict = {
        "metadata": art.metadata,
        "signature": [
            {"name": d.name, "subtypes": list(d.subtypes), "feats": [list(f) for f in d.feats]}
            for d in art.signature.to_decls()
        ],
        "program": _program_header(art.program),
        "gen_program": _program_header(art.gen_program) if art.gen_program else None,
        "kb": None,
        "inv_cfg": art.inv_cfg.to_json() if art.inv_cfg else None,
    }
    blobs = [_pack_instructions(art.program), _pack_heap(art.program.heap)]
    if art.gen_program is not None:
        blobs += [_pack_instructions(art.gen_program), _pack_heap(art.gen_program.heap)]
    if art.kb is not None:
        header["kb"] = {
            "records": [
                {"prd": r.prd_type, "arity": r.arity, "word": r.word, "root": r.body_root}
                for r in art.kb.records
            ]
        }
        blobs.append(_pack_heap(art.kb.heap))
    header["blob_sizes"] = [len(b) for b in blobs]
    hjson = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(hjson)))
        f.write(hjson)
        for b in blobs:
            f.write(b)


def load_artifact(path: str) -> CompiledArtifact:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ArtifactFormatError("not an artifact file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ArtifactFormatError(f"unsupported artifact version {version}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    off = 16
    header = json.loads(data[off : off + hlen])
    off += hlen
    blobs = []
    for size in header["blob_sizes"]:
        blobs.append(data[off : off + size])
        off += size
    decls = [
        TypeDecl(d["name"], tuple(d["subtypes"]), tuple((f, r) for f, r in d["feats"]))
        for d in header["signature"]
    ]
    sig = compile_signature(decls)
    program = _program_from(header["program"], blobs[0], blobs[1], sig)
    gen_program = None
    kb = None
    idx = 2
    if header["gen_program"] is not None:
        gen_program = _program_from(header["gen_program"], blobs[idx], blobs[idx + 1], sig)
        idx += 2
    if header["kb"] is not None:
        kb = SemanticKB(_unpack_heap(blobs[idx], sig))
        kb.records = [
            KBRecord(r["prd"], r["arity"], r["word"], r["root"])
            for r in header["kb"]["records"]
        ]
    inv_cfg = SemConfig.from_json(header["inv_cfg"]) if header["inv_cfg"] else None
    return CompiledArtifact(
        signature=sig,
        program=program,
        gen_program=gen_program,
        kb=kb,
        inv_cfg=inv_cfg,
        metadata=header["metadata"],
    )
