"""Rendering of feature structures.

Two styles: ``ale`` text, which is valid description syntax (so printed
structures can be re-parsed and re-expanded), and ``json``, the stable schema
consumed by the debug UI:

    {"tag": n?, "type": "name", "feats": {"f": <node> | {"ref": n}}}

Reentrant cells get a numbered tag at their first occurrence and a bare tag
(text) or ``{"ref": n}`` (json) afterwards; cycles therefore print finitely.
Arcs whose value is the most general structure allowed by the type are
omitted: they carry no information beyond well-typedness.
"""

from __future__ import annotations

from .heap import FS, NODE, UNEXPANDED, Heap, fully_expand, trim, trim_many

DEFAULT_EXPAND_DEPTH = 24


def _shared_cells(heap: Heap, roots: list[int]) -> set[int]:
    """Cells needing tags: in-degree over one (roots count), or back edges."""
    indeg: dict[int, int] = {}
    seen: set[int] = set()
    shared: set[int] = set()
    on_stack: set[int] = set()
    for root in roots:
        r = heap.deref(root)
        indeg[r] = indeg.get(r, 0) + 1
        if indeg[r] > 1:
            shared.add(r)
        if r in seen:
            continue
        seen.add(r)
        stack: list[tuple[int, int]] = [(r, 0)]
        while stack:
            i, k = stack[-1]
            arcs = heap.arcs[i] if heap.kind[i] == NODE else None
            if k == 0:
                on_stack.add(i)
            if arcs is None or k >= len(arcs):
                on_stack.discard(i)
                stack.pop()
                continue
            stack[-1] = (i, k + 1)
            j = heap.deref(arcs[k])
            indeg[j] = indeg.get(j, 0) + 1
            if j in on_stack:
                shared.add(j)
            if indeg[j] > 1:
                shared.add(j)
            if j not in seen:
                seen.add(j)
                stack.append((j, 0))
    return shared


def _informative(heap: Heap, a: int, restriction: int, shared: set[int]) -> bool:
    a = heap.deref(a)
    if a in shared:
        return True
    return not (heap.kind[a] == UNEXPANDED and heap.data[a] == restriction)


class _Printer:
    def __init__(self, heap: Heap, roots: list[int]):
        self.heap = heap
        self.sig = heap.sig
        self.roots = [heap.deref(r) for r in roots]
        self.shared = _shared_cells(heap, self.roots)
        self.tags: dict[int, int] = {}

    def tag_of(self, i: int) -> int:
        if i not in self.tags:
            self.tags[i] = len(self.tags) + 1
        return self.tags[i]

    # -- ale text -----------------------------------------------------------

    def text(self, i: int) -> str:
        i = self.heap.deref(i)
        if i in self.shared:
            first = i not in self.tags
            n = self.tag_of(i)
            if not first:
                return f"R{n}"
            return f"(R{n}, {self._inner(i)})"
        inner = self._inner(i)
        if inner.startswith("[") or "," not in inner:
            return inner
        return f"({inner})"

    def _inner(self, i: int) -> str:
        """Type plus informative features; bare type when nothing informative."""
        heap, sig = self.heap, self.sig
        t = heap.data[i]
        if heap.kind[i] == UNEXPANDED:
            return sig.type_name(t)
        as_list = self._list_text(i)
        if as_list is not None:
            return as_list
        parts = []
        for k, (f, r) in enumerate(sig.features_of(t)):
            a = heap.arcs[i][k]
            if _informative(heap, a, r, self.shared):
                parts.append(f"{sig.feat_name(f)}:{self.text(a)}")
        if not parts:
            return sig.type_name(t)
        return ", ".join([sig.type_name(t)] + parts)

    def _list_text(self, i: int) -> str | None:
        """Render e_list/ne_list chains as [..] sugar when unambiguous."""
        heap, sig = self.heap, self.sig
        if not (sig.has_type("ne_list") and sig.has_type("e_list")):
            return None
        ne, e = sig.type_id("ne_list"), sig.type_id("e_list")
        if heap.data[i] != ne:
            return None
        if not (sig.has_feat("hd") and sig.has_feat("tl")):
            return None
        hd, tl = sig.feat_id("hd"), sig.feat_id("tl")
        items, cur = [], i
        while True:
            cur = heap.deref(cur)
            t = heap.data[cur]
            if t == e and heap.kind[cur] in (NODE, UNEXPANDED):
                if cur in self.shared:
                    return None
                break
            if t != ne or heap.kind[cur] != NODE:
                return None
            if cur in self.shared and cur != i:
                return None
            if sig.maybe_feat_pos(t, hd) is None or sig.maybe_feat_pos(t, tl) is None:
                return None
            items.append(heap.arcs[cur][sig.feat_pos(t, hd)])
            cur = heap.arcs[cur][sig.feat_pos(t, tl)]
        return "[" + ", ".join(self.text(x) for x in items) + "]"

    # -- json ---------------------------------------------------------------

    def json(self, i: int):
        i = self.heap.deref(i)
        if i in self.shared and i in self.tags:
            return {"ref": self.tags[i]}
        obj: dict = {}
        if i in self.shared:
            obj["tag"] = self.tag_of(i)
        heap, sig = self.heap, self.sig
        t = heap.data[i]
        obj["type"] = sig.type_name(t)
        feats = {}
        if heap.kind[i] == NODE:
            for k, (f, r) in enumerate(sig.features_of(t)):
                a = heap.arcs[i][k]
                if _informative(heap, a, r, self.shared):
                    feats[sig.feat_name(f)] = self.json(a)
        obj["feats"] = feats
        return obj


def print_fs(fs: FS, style: str = "ale", expand_depth: int | None = None) -> str:
    """Deterministic rendering of a feature structure.

    ``ale`` output is description syntax; parse it back and expand to get an
    isomorphic structure.  Placeholders deeper than ``expand_depth`` print as
    bare type names.
    """
    if expand_depth is not None:
        fs = fully_expand(fs, expand_depth)
    normal = trim(fs)
    p = _Printer(normal.heap, [normal.root])
    if style == "json":
        return _to_json_text(p.json(normal.root))
    if style != "ale":
        raise ValueError(f"unknown style {style!r}")
    return p.text(normal.root)


def fs_json(fs: FS):
    """The JSON-schema object (not serialized) for one structure."""
    normal = trim(fs)
    p = _Printer(normal.heap, [normal.root])
    return p.json(normal.root)


def print_rule(heap: Heap, head: int, body: list[int]) -> str:
    """Serialize a rule template back to grammar text (tags shared rule-wide)."""
    th, roots = trim_many(heap, [head] + list(body))
    p = _Printer(th, roots)
    parts = [p.text(r) for r in roots]
    return parts[0] + " ===>\n  " + ",\n  ".join(parts[1:]) + "."


def _to_json_text(obj) -> str:
    import json

    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
