"""Finite presheaves on a context poset and the flat-induced topology.

A :class:`Presheaf` stores, per context, a tuple of hashable element labels
and, for every pair ``V' <= V``, the restriction as an index array.  The
topology ``j`` acts on sieves by ``j_V(w) = {V' <= V : flat(V') in w}``; its
sheaves are exactly the presheaves ``Q`` for which ``zeta_Q : Q -> flat^* Q``
(restriction along ``flat(V) <= V``) is a bijection at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence

from . import _kernels
from .contexts import ContextPoset
from .errors import InvalidInput, NotDense, NotSheaf, SizeLimit

DEFAULT_GUARD = 1_000_000


@dataclass(frozen=True, eq=False)
class Presheaf:
    poset: ContextPoset
    elements: tuple[tuple[Hashable, ...], ...]
    maps: dict  # (V, V') -> tuple[int, ...] for every V' <= V
    name: str = ""
    _index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_rule(cls, poset: ContextPoset, elements: Sequence[Sequence[Hashable]],
                  restrict: Callable[[int, int, Hashable], Hashable],
                  name: str = "") -> "Presheaf":
        """Build from labels and a label-level restriction ``restrict(V, V', x)``."""
        elements = tuple(tuple(e) for e in elements)
        lookup = [{x: i for i, x in enumerate(stage)} for stage in elements]
        maps = {}
        for v in poset.ids:
            for w in poset.below(v):
                if w == v:
                    maps[v, w] = tuple(range(len(elements[v])))
                    continue
                try:
                    maps[v, w] = tuple(lookup[w][restrict(v, w, x)] for x in elements[v])
                except KeyError as exc:
                    raise InvalidInput(f"restriction leaves stage {poset.label(w)}: {exc}")
        return cls(poset, elements, maps, name)

    def size(self, v: int) -> int:
        return len(self.elements[v])

    def index(self, v: int, label: Hashable) -> int:
        if v not in self._index:
            self._index[v] = {x: i for i, x in enumerate(self.elements[v])}
        return self._index[v][label]

    def restrict(self, v: int, w: int, i: int) -> int:
        return self.maps[v, w][i]

    def restrict_label(self, v: int, w: int, label: Hashable) -> Hashable:
        return self.elements[w][self.maps[v, w][self.index(v, label)]]

    def is_functorial(self) -> bool:
        p = self.poset
        for v in p.ids:
            if self.maps[v, v] != tuple(range(self.size(v))):
                return False
            for w in p.below(v):
                for u in p.below(w):
                    direct = self.maps[v, u]
                    via = self.maps[w, u]
                    if any(direct[i] != via[self.maps[v, w][i]] for i in range(self.size(v))):
                        return False
        return True

    def down(self, v: int) -> "Presheaf":
        """Downward restriction: stages outside the down-set of ``v`` emptied."""
        p = self.poset
        inside = p.down(v)
        elements = tuple(self.elements[w] if w in inside else () for w in p.ids)
        maps = {k: (m if k[0] in inside else ()) for k, m in self.maps.items()}
        return Presheaf(p, elements, maps, f"{self.name}|{p.label(v)}")

    def same_as(self, other: "Presheaf") -> bool:
        return self.elements == other.elements and self.maps == other.maps


class Sieve(NamedTuple):
    at: int
    members: frozenset

    def is_valid(self, poset: ContextPoset) -> bool:
        below = poset.down(self.at)
        if not self.members <= below:
            return False
        return all(poset.down(m) <= self.members for m in self.members)


# Omega ---------------------------------------------------------------------

def downsets_of(poset: ContextPoset, ids: Iterable[int], flat: bool = False,
                guard: int = DEFAULT_GUARD) -> list[frozenset[int]]:
    """Down-closed subsets of the sub-poset ``ids`` (itself down-closed).

    With ``flat=True`` only sets closed under ``flat(V) in U => V in U`` are
    returned, which are the global elements of ``Omega_j`` on the sub-poset.
    """
    ids = sorted(ids)
    pos = {v: i for i, v in enumerate(ids)}
    down = [sum(1 << pos[w] for w in poset.below(v) if w in pos) for v in ids]
    fl = [pos[poset.flat(v)] for v in ids] if flat else None
    masks = _kernels.downsets(down, fl, guard)
    if len(masks) > guard:
        raise SizeLimit(f"more than {guard} down-sets")
    out = [frozenset(ids[i] for i in range(len(ids)) if m >> i & 1) for m in masks]
    return sorted(out, key=lambda s: (len(s), sorted(s)))


def build_omega(poset: ContextPoset) -> Presheaf:
    """Subobject classifier: sieves at each stage, restricted by intersection."""
    elements = [downsets_of(poset, poset.below(v)) for v in poset.ids]
    return Presheaf.from_rule(poset, elements,
                              lambda v, w, s: s & poset.down(w), "Omega")


def apply_j(poset: ContextPoset, omega: Sieve) -> Sieve:
    return Sieve(omega.at, frozenset(w for w in poset.below(omega.at)
                                     if poset.flat(w) in omega.members))


def in_omega_j(poset: ContextPoset, omega: Sieve) -> bool:
    return all(w in omega.members for w in poset.below(omega.at)
               if poset.flat(w) in omega.members)


def build_omega_j(poset: ContextPoset) -> tuple[Presheaf, "TruthValue"]:
    """Subobject classifier of the sheaf topos plus its truth arrow.

    Stage ``V`` keeps the sieves that are ``flat``-saturated; this must agree
    with the fixed points of ``j`` (equalizer of ``1`` and ``j``).
    """
    elements = []
    for v in poset.ids:
        sieves = downsets_of(poset, poset.below(v))
        keep = [s for s in sieves if in_omega_j(poset, Sieve(v, s))]
        fixed = [s for s in sieves if apply_j(poset, Sieve(v, s)).members == s]
        assert keep == fixed, "Omega_j differs from the fixed points of j"
        elements.append(keep)
    omega_j = Presheaf.from_rule(poset, elements,
                                 lambda v, w, s: s & poset.down(w), "Omega_j")
    return omega_j, TruthValue.top(poset)


def retraction_r(poset: ContextPoset, omega: Sieve) -> Sieve:
    """Epi part of the factorisation of ``j`` through ``Omega_j``."""
    out = apply_j(poset, omega)
    assert in_omega_j(poset, out)
    return out


@dataclass(frozen=True)
class TruthValue:
    """Global element of ``Omega`` (or ``Omega_j``): one sieve per context."""

    sieves: tuple[frozenset, ...]

    @classmethod
    def from_downset(cls, poset: ContextPoset, downset: Iterable[int]) -> "TruthValue":
        u = frozenset(downset)
        return cls(tuple(u & poset.down(v) for v in poset.ids))

    @classmethod
    def top(cls, poset: ContextPoset) -> "TruthValue":
        return cls(tuple(poset.down(v) for v in poset.ids))

    @classmethod
    def bottom(cls, poset: ContextPoset) -> "TruthValue":
        return cls(tuple(frozenset() for _ in poset.ids))

    def at(self, v: int) -> Sieve:
        return Sieve(v, self.sieves[v])

    @property
    def downset(self) -> frozenset:
        return frozenset(v for v, s in enumerate(self.sieves) if v in s)

    def is_compatible(self, poset: ContextPoset) -> bool:
        for v in poset.ids:
            if not self.at(v).is_valid(poset):
                return False
            for w in poset.below(v):
                if self.sieves[v] & poset.down(w) != self.sieves[w]:
                    return False
        return True

    def in_omega_j(self, poset: ContextPoset) -> bool:
        return all(in_omega_j(poset, self.at(v)) for v in poset.ids)

    def __le__(self, other: "TruthValue") -> bool:
        return all(a <= b for a, b in zip(self.sieves, other.sieves))

    def join(self, other: "TruthValue") -> "TruthValue":
        return TruthValue(tuple(a | b for a, b in zip(self.sieves, other.sieves)))

    def meet(self, other: "TruthValue") -> "TruthValue":
        return TruthValue(tuple(a & b for a, b in zip(self.sieves, other.sieves)))

    def retract(self, poset: ContextPoset) -> "TruthValue":
        """Compose with ``r``: stagewise ``j``."""
        return TruthValue(tuple(apply_j(poset, self.at(v)).members for v in poset.ids))


def truth_values(poset: ContextPoset, guard: int = DEFAULT_GUARD) -> list[TruthValue]:
    """All global elements of ``Omega`` via their down-set characterisation."""
    return [TruthValue.from_downset(poset, d) for d in downsets_of(poset, poset.ids, guard=guard)]


def truth_values_j(poset: ContextPoset, guard: int = DEFAULT_GUARD) -> list[TruthValue]:
    """All global elements of ``Omega_j``."""
    return [TruthValue.from_downset(poset, d)
            for d in downsets_of(poset, poset.ids, flat=True, guard=guard)]


# Subobjects, closure, sheafification --------------------------------------

@dataclass(frozen=True)
class Subpresheaf:
    parent: Presheaf
    stages: tuple[frozenset[int], ...]  # element indices of the parent

    def is_valid(self) -> bool:
        q = self.parent
        for v in q.poset.ids:
            for w in q.poset.below(v):
                if any(q.maps[v, w][i] not in self.stages[w] for i in self.stages[v]):
                    return False
        return True

    def __le__(self, other: "Subpresheaf") -> bool:
        return all(a <= b for a, b in zip(self.stages, other.stages))

    def as_presheaf(self) -> Presheaf:
        q = self.parent
        elements = [tuple(q.elements[v][i] for i in sorted(self.stages[v])) for v in q.poset.ids]
        return Presheaf.from_rule(q.poset, elements, q.restrict_label, f"sub({q.name})")

    @classmethod
    def full(cls, q: Presheaf) -> "Subpresheaf":
        return cls(q, tuple(frozenset(range(q.size(v))) for v in q.poset.ids))

    @classmethod
    def empty(cls, q: Presheaf) -> "Subpresheaf":
        return cls(q, tuple(frozenset() for _ in q.poset.ids))


def closure(s: Subpresheaf) -> Subpresheaf:
    """``{q in Q(V) : q restricted to flat(V) lies in S(flat(V))}`` per stage."""
    q, p = s.parent, s.parent.poset
    stages = []
    for v in p.ids:
        f = p.flat(v)
        stages.append(frozenset(i for i in range(q.size(v)) if q.maps[v, f][i] in s.stages[f]))
    return Subpresheaf(q, tuple(stages))


def is_dense(s: Subpresheaf) -> bool:
    return closure(s) == Subpresheaf.full(s.parent)


def sheafify(q: Presheaf) -> Presheaf:
    """``(flat^* Q)(V) = Q(flat(V))`` with restrictions ``Q(flat V' <= flat V)``."""
    p = q.poset
    elements = tuple(q.elements[p.flat(v)] for v in p.ids)
    maps = {(v, w): q.maps[p.flat(v), p.flat(w)] for (v, w) in q.maps}
    return Presheaf(p, elements, maps, f"flat*({q.name})")


@dataclass(frozen=True, eq=False)
class NatTransform:
    source: Presheaf
    target: Presheaf
    components: tuple[tuple[int, ...], ...]

    def is_natural(self) -> bool:
        s, t = self.source, self.target
        for v in s.poset.ids:
            for w in s.poset.below(v):
                for i in range(s.size(v)):
                    if self.components[w][s.maps[v, w][i]] != t.maps[v, w][self.components[v][i]]:
                        return False
        return True

    def is_iso(self) -> bool:
        return all(len(c) == self.target.size(v) and len(set(c)) == len(c)
                   for v, c in enumerate(self.components))

    def apply(self, v: int, i: int) -> int:
        return self.components[v][i]


def zeta(q: Presheaf) -> NatTransform:
    """Unit ``Q -> flat^* Q`` with components ``Q(flat(V) <= V)``."""
    p = q.poset
    comps = tuple(q.maps[v, p.flat(v)] for v in p.ids)
    return NatTransform(q, sheafify(q), comps)


def is_sheaf(q: Presheaf) -> bool:
    return zeta(q).is_iso()


def constant_presheaf(poset: ContextPoset, labels: Sequence[Hashable]) -> Presheaf:
    return Presheaf.from_rule(poset, [labels] * len(poset), lambda v, w, x: x, "const")


def extend_along_dense(lam: NatTransform, s: Subpresheaf, r: Presheaf) -> NatTransform:
    """Unique extension ``mu : Q -> R`` of ``lam : S -> R`` along dense ``S <= Q``.

    ``mu = zeta_R^{-1} . flat^*(lam) . zeta_Q``.
    """
    if not is_dense(s):
        raise NotDense("subobject is not dense in its parent")
    if not is_sheaf(r):
        raise NotSheaf("target of the extension is not a sheaf")
    q, p = s.parent, s.parent.poset
    zr = zeta(r)
    inv = [{y: x for x, y in enumerate(c)} for c in zr.components]
    # index of a parent element within S, per stage
    s_index = [{x: k for k, x in enumerate(sorted(s.stages[v]))} for v in p.ids]
    comps = []
    for v in p.ids:
        f = p.flat(v)
        row = []
        for i in range(q.size(v)):
            at_flat = q.maps[v, f][i]
            image = lam.components[f][s_index[f][at_flat]]
            row.append(inv[v][image])
        comps.append(tuple(row))
    return NatTransform(q, r, tuple(comps))


def nat_transforms(q: Presheaf, r: Presheaf, guard: int = DEFAULT_GUARD) -> list[NatTransform]:
    """Every natural transformation ``Q -> R`` by exhaustive search."""
    p = q.poset
    slots = [(v, i) for v in p.ids for i in range(q.size(v))]
    comp = [[-1] * q.size(v) for v in p.ids]
    out: list[NatTransform] = []
    nodes = 0

    def ok(v: int, i: int, x: int) -> bool:
        for w in p.below(v):
            if w != v and comp[w][q.maps[v, w][i]] != r.maps[v, w][x]:
                return False
        return True

    def rec(k: int) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > guard:
            raise SizeLimit("natural-transformation search exceeded its guard")
        if k == len(slots):
            out.append(NatTransform(q, r, tuple(tuple(c) for c in comp)))
            return
        v, i = slots[k]
        for x in range(r.size(v)):
            if ok(v, i, x):
                comp[v][i] = x
                rec(k + 1)
        comp[v][i] = -1

    rec(0)
    return out


# Global elements -------------------------------------------------------------

def _search_order(q: Presheaf) -> list[int]:
    """Greedy order: next is the context comparable to most decided ones.

    Keeps the section search connected so that conflicts prune early.
    """
    p = q.poset
    left = set(p.ids)
    order: list[int] = []
    score = {v: 0 for v in p.ids}
    while left:
        v = max(left, key=lambda c: (score[c], q.size(c) == 1, c))
        order.append(v)
        left.discard(v)
        for w in set(p.below(v)) | set(p.above(v)):
            if w in left:
                score[w] += 1
    return order


def _pack_sections(q: Presheaf):
    p = q.poset
    offsets = {}
    tab: list[int] = []
    for v in p.ids:
        for w in p.below(v):
            if w != v:
                offsets[v, w] = len(tab)
                tab.extend(q.maps[v, w])
    up_ptr, up_ctx, up_off = [0], [], []
    dn_ptr, dn_ctx, dn_off = [0], [], []
    for v in p.ids:
        for u in p.above(v):
            if u != v:
                up_ctx.append(u)
                up_off.append(offsets[u, v])
        up_ptr.append(len(up_ctx))
        for w in p.below(v):
            if w != v:
                dn_ctx.append(w)
                dn_off.append(offsets[v, w])
        dn_ptr.append(len(dn_ctx))
    return _search_order(q), up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off, tab


def estimate_sections(q: Presheaf) -> int:
    """Upper bound on the number of global elements (product over maximal contexts)."""
    return math.prod(q.size(v) for v in q.poset.maximal())


def _sections(q: Presheaf, guard: int, collect: bool):
    sizes = [q.size(v) for v in q.poset.ids]
    count, found = _kernels.sections(sizes, *_pack_sections(q), limit=guard, collect=collect)
    if count > guard:
        raise SizeLimit(f"more than {guard} global elements")
    return count, found


def global_elements(q: Presheaf, guard: int = DEFAULT_GUARD) -> list[tuple[int, ...]]:
    """All compatible families, as element indices per context.

    The search prunes as it goes; ``guard`` bounds the number of families
    produced, and exceeding it raises :class:`SizeLimit`.
    """
    return _sections(q, guard, True)[1]


def count_global_elements(q: Presheaf, guard: int = DEFAULT_GUARD) -> int:
    return _sections(q, guard, False)[0]


def subobjects(q: Presheaf, guard: int = DEFAULT_GUARD) -> list[Subpresheaf]:
    """Every subpresheaf of ``q`` (stages encoded as element bitmasks)."""
    p = q.poset
    if any(q.size(v) > 16 for v in p.ids):
        raise SizeLimit("stage too large for subobject enumeration")
    full = [(1 << q.size(v)) - 1 for v in p.ids]
    up_ptr, up_ctx, up_off, tab = [0], [], [], []
    for v in p.ids:
        for u in p.above(v):
            if u == v:
                continue
            up_ctx.append(u)
            up_off.append(len(tab))
            m = q.maps[u, v]
            for mask in range(full[u] + 1):
                img = 0
                for i in range(q.size(u)):
                    if mask >> i & 1:
                        img |= 1 << m[i]
                tab.append(img)
        up_ptr.append(len(up_ctx))
    fams = _kernels.hyper_families(full, [True] * len(p), up_ptr, up_ctx, up_off, tab, guard)
    if len(fams) > guard:
        raise SizeLimit(f"more than {guard} subobjects")
    return [Subpresheaf(q, tuple(frozenset(i for i in range(q.size(v)) if fam[v] >> i & 1)
                                 for v in p.ids)) for fam in fams]


def sub_sheafify(s: Subpresheaf) -> Subpresheaf:
    """``flat^* S`` viewed inside ``flat^* Q``; needs ``Q`` itself sheafified."""
    p = s.parent.poset
    return Subpresheaf(s.parent, tuple(s.stages[p.flat(v)] for v in p.ids))
