"""Heap-based feature structures.

Structures are graphs of tagged cells held in a growable heap.  The heap is
split at ``mark``: cells below it are frozen (immutable, canonical, never
containing forwarding references), cells at or above it form the working
region where destructive unification runs.  A failed attempt discards the
working region wholesale; a successful one compacts the result down into the
frozen region.  This freeze-on-success discipline replaces trail/undo
machinery: the chart control never backtracks inside an attempt.

Cell kinds:

* ``NODE``: a typed node with one positional arc per appropriate feature.
* ``REF``: union-find forwarding pointer (working region only).
* ``UNEXPANDED``: stands for the most general totally well-typed structure of
  its type.  Materialized one level at a time on demand, which is what makes
  appropriateness loops safe.

Cycles are legal everywhere; there is deliberately no occurs check.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

from .signature import Signature

NODE, REF, UNEXPANDED = 0, 1, 2

_KIND_NAMES = {NODE: "node", REF: "ref", UNEXPANDED: "unexpanded"}


@dataclass
class UnifyFailure:
    """Type clash diagnostics: the offending path and the two culprit types."""

    path: tuple[int, ...]
    t1: int
    t2: int

    def pretty(self, sig: Signature) -> str:
        p = ":".join(sig.feat_name(f) for f in self.path) or "(root)"
        return (
            f"type clash at {p}: {sig.type_name(self.t1)} vs {sig.type_name(self.t2)}"
        )


class Heap:
    def __init__(self, sig: Signature):
        self.sig = sig
        self.kind: list[int] = []
        self.data: list[int] = []  # NODE/UNEXPANDED: type id; REF: target cell
        self.arcs: list[list[int] | None] = []
        self.mark = 0  # cells below are frozen
        self.failure: UnifyFailure | None = None
        self.expansions = 0  # lazy materialization counter (test instrumentation)

    # -- allocation ---------------------------------------------------------

    def _alloc(self, kind: int, data: int, arcs: list[int] | None) -> int:
        self.kind.append(kind)
        self.data.append(data)
        self.arcs.append(arcs)
        return len(self.kind) - 1

    def new_unexpanded(self, t: int) -> int:
        return self._alloc(UNEXPANDED, t, None)

    def new_node(self, t: int) -> int:
        """Node of type t with every arc a fresh most-general placeholder."""
        feats = self.sig.features_of(t)
        i = self._alloc(NODE, t, None)
        self.arcs[i] = [self._alloc(UNEXPANDED, r, None) for _, r in feats]
        return i

    def new_ref(self, target: int) -> int:
        return self._alloc(REF, target, None)

    # -- basic access -------------------------------------------------------

    def deref(self, i: int) -> int:
        kind, data = self.kind, self.data
        while kind[i] == REF:
            j = data[i]
            if kind[j] == REF:  # path halving
                data[i] = data[j]
            i = j
        return i

    def type_of(self, i: int) -> int:
        return self.data[self.deref(i)]

    def size(self) -> int:
        return len(self.kind)

    def arc(self, i: int, f: int) -> int:
        """Arc target for feature f, materializing a placeholder if needed."""
        i = self.deref(i)
        if self.kind[i] == UNEXPANDED:
            self.expand1(i)
        pos = self.sig.feat_pos(self.data[i], f)
        return self.arcs[i][pos]

    def maybe_arc(self, i: int, f: int) -> int | None:
        """Arc target if f is appropriate and i is materialized, else None."""
        i = self.deref(i)
        if self.kind[i] != NODE:
            return None
        pos = self.sig.maybe_feat_pos(self.data[i], f)
        return None if pos is None else self.arcs[i][pos]

    # -- lazy expansion and promotion ----------------------------------------

    def expand1(self, i: int) -> int:
        """Materialize one level: Unexpanded(t) becomes Node(t, placeholders)."""
        i = self.deref(i)
        if self.kind[i] != UNEXPANDED:
            return i
        t = self.data[i]
        arcs = [self._alloc(UNEXPANDED, r, None) for _, r in self.sig.features_of(t)]
        self.kind[i] = NODE
        self.arcs[i] = arcs
        self.expansions += 1
        return i

    def _promote(self, i: int, t_new: int, pending: list) -> None:
        """Raise node i's type in place, remapping its positional arc layout.

        New features get placeholders; features whose restriction tightened
        are queued on ``pending`` for unification with the new restriction.
        """
        sig = self.sig
        t_old = self.data[i]
        if t_old == t_new:
            return
        if self.kind[i] == UNEXPANDED:
            self.data[i] = t_new
            return
        old_feats = sig.features_of(t_old)
        old_arcs = self.arcs[i]
        old_pos = {f: k for k, (f, _) in enumerate(old_feats)}
        new_arcs: list[int] = []
        for f, r in sig.features_of(t_new):
            k = old_pos.get(f)
            if k is None:
                new_arcs.append(self._alloc(UNEXPANDED, r, None))
            else:
                a = old_arcs[k]
                new_arcs.append(a)
                if old_feats[k][1] != r:
                    pending.append((a, self._alloc(UNEXPANDED, r, None), None))
        self.data[i] = t_new
        self.arcs[i] = new_arcs

    # -- unification ---------------------------------------------------------

    def unify(self, a: int, b: int) -> int | None:
        """Destructively unify the subgraphs at a and b in the working region.

        Returns the result root, or None with ``self.failure`` set.  Both
        inputs must live in the working region: frozen structures are copied
        in first by the caller.
        """
        sig = self.sig
        self.failure = None
        root = self.deref(a)
        # worklist entries: (cell, cell, path-link); path-link = (feat, parent-link)
        work: list[tuple[int, int, tuple | None]] = [(a, b, None)]
        while work:
            x, y, path = work.pop()
            x, y = self.deref(x), self.deref(y)
            if x == y:
                continue
            tx, ty = self.data[x], self.data[y]
            t = sig.lub(tx, ty) if tx != ty else tx
            if t is None:
                self.failure = UnifyFailure(_path_tuple(path), tx, ty)
                return None
            kx, ky = self.kind[x], self.kind[y]
            if kx == UNEXPANDED and ky == UNEXPANDED:
                self.data[x] = t
                self.kind[y] = REF
                self.data[y] = x
                self.arcs[y] = None
                continue
            if kx == UNEXPANDED:  # y is a node: keep it, promote
                self.kind[x] = REF
                self.data[x] = y
                self.arcs[x] = None
                self._promote(y, t, work)
                continue
            if ky == UNEXPANDED:
                self.kind[y] = REF
                self.data[y] = x
                self.arcs[y] = None
                self._promote(x, t, work)
                continue
            # node/node: redirect before recursing so cycles converge
            y_arcs = self.arcs[y]
            y_feats = sig.features_of(ty)
            self.kind[y] = REF
            self.data[y] = x
            self.arcs[y] = None
            self._promote(x, t, work)
            x_pos = {f: k for k, (f, _) in enumerate(sig.features_of(t))}
            x_arcs = self.arcs[x]
            for k, (f, _) in enumerate(y_feats):
                work.append((x_arcs[x_pos[f]], y_arcs[k], (f, path)))
        return self.deref(root)

    # -- copying / freezing ---------------------------------------------------

    def copy_from(self, src: "Heap", root: int, memo: dict[int, int] | None = None) -> int:
        """Structure-preserving copy of src's subgraph into this heap."""
        if memo is None:
            memo = {}
        root = src.deref(root)
        if root in memo:
            return memo[root]
        stack = [root]
        order: list[int] = []
        while stack:
            i = src.deref(stack.pop())
            if i in memo:
                continue
            memo[i] = self._alloc(src.kind[i], src.data[i], None)
            order.append(i)
            if src.kind[i] == NODE:
                stack.extend(src.arcs[i])
        for i in order:
            if src.kind[i] == NODE:
                self.arcs[memo[i]] = [memo[src.deref(a)] for a in src.arcs[i]]
        return memo[root]

    def freeze_many(self, roots: list[int]) -> list[int]:
        """Compact the subgraphs at roots into the frozen region; reset scratch.

        The frozen copy contains no REF cells and is shared across roots.
        Returns the new frozen roots, positionally.
        """
        droots = [self.deref(r) for r in roots]
        memo: dict[int, int] = {}
        frozen_kind: list[int] = []
        frozen_data: list[int] = []
        frozen_arcs: list[list[int] | None] = []
        base = self.mark
        stack = list(droots)
        order: list[int] = []
        while stack:
            i = self.deref(stack.pop())
            if i in memo:
                continue
            memo[i] = base + len(frozen_kind)
            frozen_kind.append(self.kind[i])
            frozen_data.append(self.data[i])
            frozen_arcs.append(None)
            order.append(i)
            if self.kind[i] == NODE:
                stack.extend(self.arcs[i])
        for i in order:
            if self.kind[i] == NODE:
                frozen_arcs[memo[i] - base] = [memo[self.deref(a)] for a in self.arcs[i]]
        del self.kind[base:], self.data[base:], self.arcs[base:]
        self.kind.extend(frozen_kind)
        self.data.extend(frozen_data)
        self.arcs.extend(frozen_arcs)
        self.mark = len(self.kind)
        return [memo[r] for r in droots]

    def freeze(self, root: int) -> int:
        """Single-root freeze_many."""
        return self.freeze_many([root])[0]

    def discard_scratch(self) -> None:
        del self.kind[self.mark:], self.data[self.mark:], self.arcs[self.mark:]

    def scratch_size(self) -> int:
        return len(self.kind) - self.mark

    def frozen_checksum(self) -> int:
        h = zlib.crc32(bytes(k for k in self.kind[: self.mark]))
        for i in range(self.mark):
            h = zlib.crc32(self.data[i].to_bytes(8, "little", signed=True), h)
            a = self.arcs[i]
            if a:
                for x in a:
                    h = zlib.crc32(x.to_bytes(8, "little", signed=True), h)
        return h

    # -- working-region snapshots ---------------------------------------------

    def snapshot(self) -> tuple:
        """Relocatable copy of the whole working region."""
        base = self.mark
        kinds = self.kind[base:]
        datas = []
        for off, k in enumerate(kinds):
            d = self.data[base + off]
            datas.append(d - base if k == REF else d)
        arcs = [
            None if a is None else [x - base for x in a]
            for a in self.arcs[base:]
        ]
        return (kinds, datas, arcs)

    def restore(self, snap: tuple) -> None:
        """Replace the working region with a snapshot's contents."""
        kinds, datas, arcs = snap
        base = self.mark
        self.discard_scratch()
        self.kind.extend(kinds)
        for off, k in enumerate(kinds):
            d = datas[off]
            self.data.append(d + base if k == REF else d)
        for a in arcs:
            self.arcs.append(None if a is None else [x + base for x in a])


def _path_tuple(link: tuple | None) -> tuple[int, ...]:
    out: list[int] = []
    while link is not None:
        f, link = link
        out.append(f)
    return tuple(out)


@dataclass(frozen=True)
class FS:
    """A feature structure: a root cell in some heap."""

    heap: Heap
    root: int

    @property
    def sig(self) -> Signature:
        return self.heap.sig

    def type_name(self) -> str:
        return self.sig.type_name(self.heap.type_of(self.root))


def copy_into(dst: Heap, src: FS) -> int:
    """Copy src into dst's working region, preserving reentrancies and cycles."""
    return dst.copy_from(src.heap, src.root)


def expand(heap: Heap, r: int) -> int:
    """Materialize one level of an Unexpanded cell, in place."""
    return heap.expand1(r)


# ---------------------------------------------------------------------------
# Structure-level predicates: subsumption, normalization, isomorphism.
# ---------------------------------------------------------------------------


def subsumes(a: FS, b: FS) -> bool:
    """True iff a is at most as specific as b (a simulation of a into b exists).

    Unexpanded cells on the a-side constrain only the type: as the most
    general structure of their type they impose no arc or reentrancy
    requirements.  On the b-side they are virtually expanded, each virtual
    node being fresh (the most general structure has no reentrancy).
    """
    ha, hb, sig = a.heap, b.heap, a.sig
    virtual_types: list[int] = []  # virtual b-nodes, keyed by negative ids
    mapped: dict[int, int] = {}

    def b_type(bk: int) -> int:
        return virtual_types[-bk - 1] if bk < 0 else hb.data[hb.deref(bk)]

    stack = [(ha.deref(a.root), hb.deref(b.root))]
    while stack:
        x, bk = stack.pop()
        x = ha.deref(x)
        if bk >= 0:
            bk = hb.deref(bk)
        if x in mapped:
            if mapped[x] != bk:
                return False
            continue
        mapped[x] = bk
        tx, tb = ha.data[x], b_type(bk)
        if not sig.subsumes(tx, tb):
            return False
        if ha.kind[x] != NODE:
            continue
        feats = sig.features_of(tx)
        if bk < 0:
            # virtually expand: children are fresh most-general nodes
            tfeats = {f: r for f, r in sig.features_of(tb)}
            for k, (f, _) in enumerate(feats):
                virtual_types.append(tfeats[f])
                stack.append((ha.arcs[x][k], -len(virtual_types)))
        else:
            if hb.kind[bk] == UNEXPANDED:
                tfeats = {f: r for f, r in sig.features_of(tb)}
                for k, (f, _) in enumerate(feats):
                    virtual_types.append(tfeats[f])
                    stack.append((ha.arcs[x][k], -len(virtual_types)))
            else:
                bpos = {f: i for i, (f, _) in enumerate(sig.features_of(tb))}
                for k, (f, _) in enumerate(feats):
                    stack.append((ha.arcs[x][k], hb.arcs[bk][bpos[f]]))
    return True


def _reachable(heap: Heap, roots: list[int]) -> list[int]:
    seen: set[int] = set()
    stack = [heap.deref(r) for r in roots]
    order = []
    while stack:
        i = heap.deref(stack.pop())
        if i in seen:
            continue
        seen.add(i)
        order.append(i)
        if heap.kind[i] == NODE:
            stack.extend(heap.arcs[i])
    return order


def _mgs_mask(heap: Heap, roots: list[int]) -> set[int]:
    """Cells whose subgraph is the most general structure of its type and is
    internally unshared: these are semantically interchangeable with an
    Unexpanded placeholder."""
    sig = heap.sig
    cells = _reachable(heap, roots)
    indeg: dict[int, int] = {c: 0 for c in cells}
    for r in roots:
        indeg[heap.deref(r)] += 1
    for c in cells:
        if heap.kind[c] == NODE:
            for a in heap.arcs[c]:
                indeg[heap.deref(a)] += 1

    state: dict[int, bool] = {}

    def check(i: int) -> bool:
        i = heap.deref(i)
        if i in state:
            return state[i]
        state[i] = False  # cycles are token sharing: never most-general
        if heap.kind[i] == UNEXPANDED:
            state[i] = True
            return True
        t = heap.data[i]
        ok = True
        for k, (_, r) in enumerate(sig.features_of(t)):
            a = heap.deref(heap.arcs[i][k])
            if indeg[a] > 1 or heap.data[a] != r or not check(a):
                ok = False
                break
        state[i] = ok
        return ok

    return {c for c in cells if check(c)}


def trim_many(heap: Heap, roots: list[int]) -> tuple[Heap, list[int]]:
    """Canonicalize a multi-rooted graph: collapse most-general unshared
    subgraphs to placeholders.  Root cells count as externally referenced, so
    sharing between roots survives.  Returns a fresh frozen heap."""
    mgs = _mgs_mask(heap, roots)
    out = Heap(heap.sig)
    memo: dict[int, int] = {}
    droots = [heap.deref(r) for r in roots]

    stack = list(droots)
    order = []
    while stack:
        i = heap.deref(stack.pop())
        if i in memo:
            continue
        if heap.kind[i] == UNEXPANDED or i in mgs:
            memo[i] = out.new_unexpanded(heap.data[i])
            continue
        memo[i] = out._alloc(NODE, heap.data[i], None)
        order.append(i)
        stack.extend(heap.arcs[i])
    for i in order:
        out.arcs[memo[i]] = [memo[heap.deref(a)] for a in heap.arcs[i]]
    new_roots = out.freeze_many([memo[r] for r in droots])
    return out, new_roots


def trim(fs: FS) -> FS:
    """Canonical single-root form; see trim_many."""
    out, roots = trim_many(fs.heap, [fs.root])
    return FS(out, roots[0])


def iso_many(ha: Heap, ra: list[int], hb: Heap, rb: list[int]) -> bool:
    """Graph isomorphism of two multi-rooted structures, modulo lazy
    materialization and tag renumbering.  One bijection covers all roots."""
    if len(ra) != len(rb):
        return False
    ha, ra = trim_many(ha, ra)
    hb, rb = trim_many(hb, rb)
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    stack = list(zip(ra, rb))
    while stack:
        x, y = stack.pop()
        if x in fwd or y in bwd:
            if fwd.get(x) != y or bwd.get(y) != x:
                return False
            continue
        fwd[x], bwd[y] = y, x
        if ha.kind[x] != hb.kind[y] or ha.data[x] != hb.data[y]:
            return False
        if ha.kind[x] == NODE:
            stack.extend(zip(ha.arcs[x], hb.arcs[y]))
    return True


def iso(a: FS, b: FS) -> bool:
    """Isomorphism modulo lazy materialization and tag renumbering."""
    return iso_many(a.heap, [a.root], b.heap, [b.root])


def fully_expand(fs: FS, depth: int) -> FS:
    """Copy with placeholders materialized down to ``depth`` levels.

    Remaining placeholders (under appropriateness loops deeper than the cap)
    stay as placeholders; callers render them explicitly.
    """
    src = fs.heap
    sig = src.sig
    out = Heap(sig)

    memo: dict[int, int] = {}

    def go(i: int, d: int) -> int:
        i = src.deref(i)
        if i in memo:
            return memo[i]
        if src.kind[i] == UNEXPANDED:
            if d <= 0 or not sig.features_of(src.data[i]):
                if not sig.features_of(src.data[i]):
                    j = out._alloc(NODE, src.data[i], None)
                    out.arcs[j] = []
                    memo[i] = j
                    return j
                j = out.new_unexpanded(src.data[i])
                memo[i] = j
                return j
            t = src.data[i]
            j = out._alloc(NODE, t, None)
            memo[i] = j
            out.arcs[j] = [
                _go_virtual(r, d - 1) for _, r in sig.features_of(t)
            ]
            return j
        t = src.data[i]
        j = out._alloc(NODE, t, None)
        memo[i] = j
        out.arcs[j] = [go(a, d - 1) for a in src.arcs[i]]
        return j

    def _go_virtual(t: int, d: int) -> int:
        feats = sig.features_of(t)
        if not feats:
            j = out._alloc(NODE, t, None)
            out.arcs[j] = []
            return j
        if d <= 0:
            return out.new_unexpanded(t)
        j = out._alloc(NODE, t, None)
        out.arcs[j] = [_go_virtual(r, d - 1) for _, r in feats]
        return j

    root = out.freeze(go(fs.root, depth))
    return FS(out, root)
