"""Type hierarchy compilation.

A grammar's type signature is a bounded-complete partial order of types plus
appropriateness declarations (which features a type carries and the type
restriction on each feature's value).  This module turns the declarations into
dense lookup tables: a reflexive-transitive subsumption relation, a total
least-upper-bound table, and per-type ordered feature layouts that the rest of
the engine treats as positional arc layouts.

Conventions: ``bot`` (type id 0) is the unique most general type.  "t1
subsumes t2" means t1 is more general; the LUB of two types is their most
general common subtype, and its absence means the types are incompatible.
"""

from __future__ import annotations

from dataclasses import dataclass


BOT = 0


class SignatureError(Exception):
    """Inconsistent type or appropriateness declarations."""


class MissingBot(SignatureError):
    pass


class DuplicateType(SignatureError):
    pass


class UnknownTypeName(SignatureError):
    pass


class OrphanType(SignatureError):
    """A type not reachable from bot: bot would not be the most general type."""


class SubtypeCycle(SignatureError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("subtype declarations form a cycle: " + " < ".join(cycle))


class NotBoundedComplete(SignatureError):
    def __init__(self, t1: str, t2: str, bounds: list[str]):
        self.t1, self.t2, self.bounds = t1, t2, bounds
        super().__init__(
            f"types {t1!r} and {t2!r} have incomparable minimal common subtypes "
            f"{{{', '.join(bounds)}}}; hierarchy is not bounded complete"
        )


class FeatureIntroductionViolation(SignatureError):
    def __init__(self, feat: str, declarers: list[str]):
        self.feat, self.declarers = feat, declarers
        super().__init__(
            f"feature {feat!r} has no unique most general introducing type "
            f"(declared at {{{', '.join(declarers)}}})"
        )


class AppropriatenessNonMonotone(SignatureError):
    def __init__(self, typ: str, feat: str, detail: str = ""):
        self.typ, self.feat = typ, feat
        msg = f"value restrictions for feature {feat!r} cannot be reconciled at type {typ!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass(frozen=True)
class TypeDecl:
    """One ``name sub [subtypes] intro [feat:Restriction, ...]`` clause."""

    name: str
    subtypes: tuple[str, ...] = ()
    feats: tuple[tuple[str, str], ...] = ()
    line: int = 0


class Signature:
    """Compiled type hierarchy.  Immutable after construction; share freely."""

    def __init__(self, decls: list[TypeDecl]):
        self._build(decls)

    # -- queries ----------------------------------------------------------

    def type_id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownTypeName(f"unknown type {name!r}") from None

    def has_type(self, name: str) -> bool:
        return name in self._ids

    def type_name(self, t: int) -> str:
        return self.type_names[t]

    def feat_id(self, name: str) -> int:
        try:
            return self._feat_ids[name]
        except KeyError:
            raise UnknownTypeName(f"unknown feature {name!r}") from None

    def has_feat(self, name: str) -> bool:
        return name in self._feat_ids

    def feat_name(self, f: int) -> str:
        return self.feat_names[f]

    def subsumes(self, t1: int, t2: int) -> bool:
        """True iff t1 is more general than or equal to t2."""
        return bool(self._desc[t1] >> t2 & 1)

    def lub(self, t1: int, t2: int) -> int | None:
        """Least upper bound (most general common subtype), or None if none."""
        r = self._lub[t1 * self.n_types + t2]
        return None if r < 0 else r

    def features_of(self, t: int) -> list[tuple[int, int]]:
        """Ordered (feature, value restriction) pairs appropriate at t."""
        return self._approp[t]

    def feat_pos(self, t: int, f: int) -> int:
        """Positional index of feature f in t's arc layout."""
        return self._featpos[t][f]

    def maybe_feat_pos(self, t: int, f: int) -> int | None:
        return self._featpos[t].get(f)

    def introducer(self, f: int) -> int:
        return self._introducer[f]

    def restriction(self, t: int, f: int) -> int:
        return self._approp[t][self._featpos[t][f]][1]

    def in_approp_loop(self, t: int) -> bool:
        """True iff t lies on a cycle of appropriateness value restrictions."""
        return self._loop[t]

    def descendants(self, t: int) -> list[int]:
        mask, out = self._desc[t], []
        i = 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return out

    def immediate_subtypes(self, t: int) -> list[int]:
        return list(self._children[t])

    def immediate_supertypes(self, t: int) -> list[int]:
        return list(self._parents[t])

    # -- construction ------------------------------------------------------

    def _build(self, decls: list[TypeDecl]) -> None:
        if not decls:
            raise MissingBot("empty signature: the type 'bot' must be declared")
        by_name: dict[str, TypeDecl] = {}
        for d in decls:
            if d.name in by_name:
                raise DuplicateType(f"type {d.name!r} declared twice")
            by_name[d.name] = d
        if "bot" not in by_name:
            raise MissingBot("the most general type 'bot' must be declared")

        names = ["bot"] + [d.name for d in decls if d.name != "bot"]
        self.type_names = names
        self._ids = {nm: i for i, nm in enumerate(names)}
        n = self.n_types = len(names)

        for d in decls:
            for s in d.subtypes:
                if s not in self._ids:
                    raise UnknownTypeName(
                        f"type {d.name!r} lists unknown subtype {s!r}"
                    )
            for f, r in d.feats:
                if r not in self._ids:
                    raise UnknownTypeName(
                        f"feature {f!r} at type {d.name!r} has unknown value restriction {r!r}"
                    )

        children: list[list[int]] = [[] for _ in range(n)]
        parents: list[list[int]] = [[] for _ in range(n)]
        for d in decls:
            t = self._ids[d.name]
            for s in d.subtypes:
                c = self._ids[s]
                if c not in children[t]:
                    children[t].append(c)
                    parents[c].append(t)
        self._children, self._parents = children, parents

        order = self._toposort()  # ancestors before descendants; raises on cycles
        self._rank = {t: i for i, t in enumerate(order)}

        # reflexive-transitive closure as bitmasks, computed children-first
        desc = [0] * n
        for t in reversed(order):
            m = 1 << t
            for c in children[t]:
                m |= desc[c]
            desc[t] = m
        self._desc = desc
        if desc[BOT] != (1 << n) - 1:
            missing = [names[t] for t in range(n) if not desc[BOT] >> t & 1]
            raise OrphanType(
                f"types not subsumed by 'bot': {', '.join(missing)}; "
                "'bot' must be the unique most general type"
            )
        anc = [0] * n
        for t in order:
            m = 1 << t
            for p in parents[t]:
                m |= anc[p]
            anc[t] = m
        self._anc = anc

        self._build_lub()
        self._build_approp(by_name, order)
        self._build_loops()

    def _toposort(self) -> list[int]:
        n = self.n_types
        indeg = [len(self._parents[t]) for t in range(n)]
        ready = sorted(t for t in range(n) if indeg[t] == 0)
        out: list[int] = []
        while ready:
            t = ready.pop(0)
            out.append(t)
            grew = []
            for c in self._children[t]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    grew.append(c)
            if grew:
                ready = sorted(ready + grew)
        if len(out) != n:
            cyc = [t for t in range(n) if indeg[t] > 0]
            path = self._find_cycle(cyc)
            raise SubtypeCycle([self.type_names[t] for t in path])
        return out

    def _find_cycle(self, nodes: list[int]) -> list[int]:
        pool = set(nodes)
        start = nodes[0]
        seen: dict[int, int] = {}
        path = [start]
        cur = start
        while cur not in seen:
            seen[cur] = len(path) - 1
            cur = next(c for c in self._children[cur] if c in pool)
            path.append(cur)
        return path[seen[cur]:]

    def _build_lub(self) -> None:
        n, desc, anc = self.n_types, self._desc, self._anc
        table = [-1] * (n * n)
        for i in range(n):
            table[i * n + i] = i
            for j in range(i + 1, n):
                common = desc[i] & desc[j]
                if not common:
                    continue
                mins, m, t = [], common, 0
                while m:
                    if m & 1 and anc[t] & common == 1 << t:
                        mins.append(t)
                    m >>= 1
                    t += 1
                if len(mins) > 1:
                    raise NotBoundedComplete(
                        self.type_names[i],
                        self.type_names[j],
                        [self.type_names[t] for t in mins],
                    )
                table[i * n + j] = table[j * n + i] = mins[0]
        self._lub = table

    def _build_approp(self, by_name: dict[str, TypeDecl], order: list[int]) -> None:
        n = self.n_types
        declared: dict[str, list[int]] = {}
        decl_restr: dict[tuple[int, str], str] = {}
        decl_idx: dict[tuple[int, str], int] = {}
        for d in by_name.values():
            t = self._ids[d.name]
            for i, (f, r) in enumerate(d.feats):
                if (t, f) in decl_restr:
                    raise AppropriatenessNonMonotone(
                        d.name, f, "feature declared twice at one type"
                    )
                declared.setdefault(f, []).append(t)
                decl_restr[t, f] = r
                decl_idx[t, f] = i

        feat_names = []
        introducer: list[int] = []
        intro_key: dict[str, tuple[int, int]] = {}
        for f, ts in declared.items():
            cands = [t for t in ts if all(self.subsumes(t, u) for u in ts)]
            if not cands:
                raise FeatureIntroductionViolation(f, [self.type_names[t] for t in ts])
            feat_names.append(f)
            introducer.append(cands[0])
            intro_key[f] = (self._rank[cands[0]], decl_idx[cands[0], f])
        fsorted = sorted(range(len(feat_names)), key=lambda i: intro_key[feat_names[i]])
        self.feat_names = [feat_names[i] for i in fsorted]
        self._introducer = [introducer[i] for i in fsorted]
        self._feat_ids = {nm: i for i, nm in enumerate(self.feat_names)}
        self.n_feats = len(self.feat_names)

        # restrictions first, walking general-to-specific so inheritance folds in
        restr: list[dict[int, int]] = [dict() for _ in range(n)]
        for t in order:
            tname = self.type_names[t]
            acc: dict[int, int] = {}
            for p in self._parents[t]:
                for f, r in restr[p].items():
                    if f in acc:
                        j = self.lub(acc[f], r)
                        if j is None:
                            raise AppropriatenessNonMonotone(
                                tname,
                                self.feat_names[f],
                                "inherited restrictions "
                                f"{self.type_names[acc[f]]!r} and {self.type_names[r]!r} clash",
                            )
                        acc[f] = j
                    else:
                        acc[f] = r
            for (tt, fname), rname in decl_restr.items():
                if tt != t:
                    continue
                f = self._feat_ids[fname]
                r = self._ids[rname]
                if f in acc:
                    j = self.lub(acc[f], r)
                    if j is None:
                        raise AppropriatenessNonMonotone(
                            tname,
                            fname,
                            f"declared restriction {rname!r} clashes with inherited "
                            f"{self.type_names[acc[f]]!r}",
                        )
                    acc[f] = j
                else:
                    acc[f] = r
            restr[t] = acc

        self._approp: list[list[tuple[int, int]]] = []
        self._featpos: list[dict[int, int]] = []
        for t in range(n):
            feats = sorted(restr[t].keys())  # feat ids already in introduction order
            self._approp.append([(f, restr[t][f]) for f in feats])
            self._featpos.append({f: i for i, f in enumerate(feats)})

    def _build_loops(self) -> None:
        # t is flagged iff t can reach itself through value restrictions
        n = self.n_types
        succ = [set(r for _, r in self._approp[t]) for t in range(n)]
        reach: list[int] = [0] * n
        for t in range(n):
            seen = set()
            stack = list(succ[t])
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(succ[u])
            m = 0
            for u in seen:
                m |= 1 << u
            reach[t] = m
        self._loop = [bool(reach[t] >> t & 1) for t in range(n)]

    # -- misc ---------------------------------------------------------------

    def to_decls(self) -> list[TypeDecl]:
        """Reconstruct declaration records (used by artifact serialization)."""
        out = []
        for t in range(self.n_types):
            own = []
            for f, r in self._approp[t]:
                if self._introducer[f] == t:
                    own.append((self.feat_names[f], self.type_names[r]))
                    continue
                inherited = None
                for p in self._parents[t]:
                    pos = self._featpos[p].get(f)
                    if pos is None:
                        continue
                    pr = self._approp[p][pos][1]
                    inherited = pr if inherited is None else self.lub(inherited, pr)
                if inherited != r:  # subtype tightened the restriction
                    own.append((self.feat_names[f], self.type_names[r]))
            out.append(
                TypeDecl(
                    name=self.type_names[t],
                    subtypes=tuple(self.type_names[c] for c in self._children[t]),
                    feats=tuple(own),
                )
            )
        return out

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Signature {self.n_types} types, {self.n_feats} features>"


def compile_signature(decls: list[TypeDecl]) -> Signature:
    """Compile type declarations, establishing every hierarchy invariant."""
    return Signature(decls)
