"""Truth objects, their characteristic morphisms and truth-value assignment.

A truth object is predicate-backed: ``member(V, A)`` decides whether the
proposition ``A`` (a :class:`~qsheaf.spectral.Prop` living over ``V``) is in
the stage at ``V``.  Stages can be materialized by enumerating the candidate
propositions over ``V``; presheaf candidates are ``Sub_dB(O|V)``, sheaf
candidates are ``Sub_jdB(flat^*(O|V))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import linops
from .contexts import ContextPoset
from .errors import InvalidInput, NotFilter, SizeLimit
from .presheaves import (DEFAULT_GUARD, Presheaf, Sieve, TruthValue, in_omega_j,
                         is_sheaf)
from .spectral import (PRESHEAF, SHEAF, Prop, _check_flavor, daseinize_mask,
                       name_of, propositions, restrict_down, sheafify_prop)

TRACE_EPS = 1e-9


def candidates(poset: ContextPoset, flavor: str, v: int,
               guard: int = DEFAULT_GUARD) -> tuple[Prop, ...]:
    """Propositions that may belong to a stage at ``v``."""
    return propositions(poset, flavor, over=v, guard=guard)


def restrict_prop(poset: ContextPoset, a: Prop, w: int) -> Prop:
    """Power-object restriction to ``w``: ``A|w`` or ``flat^*(A|w)``."""
    if a.flavor == PRESHEAF:
        return restrict_down(poset, a, w)
    return sheafify_prop(poset, restrict_down(poset, a, w))


@dataclass(frozen=True, eq=False)
class TruthObject:
    poset: ContextPoset
    flavor: str
    member: Callable[[int, Prop], bool]
    tag: str = ""
    _stages: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_stages(cls, poset: ContextPoset, flavor: str,
                    stages: Iterable[Iterable[Prop]], tag: str = "") -> "TruthObject":
        sets = tuple(frozenset(s) for s in stages)
        obj = cls(poset, flavor, lambda v, a: a in sets[v], tag)
        for v, s in enumerate(sets):
            obj._stages[v] = s
        return obj

    def contains(self, v: int, a: Prop) -> bool:
        return bool(self.member(v, a))

    def stage(self, v: int, guard: int = DEFAULT_GUARD) -> frozenset[Prop]:
        if v not in self._stages:
            self._stages[v] = frozenset(a for a in candidates(self.poset, self.flavor, v, guard)
                                        if self.member(v, a))
        return self._stages[v]

    def stages(self, guard: int = DEFAULT_GUARD) -> tuple[frozenset[Prop], ...]:
        return tuple(self.stage(v, guard) for v in self.poset.ids)

    def __le__(self, other: "TruthObject") -> bool:
        return all(a <= b for a, b in zip(self.stages(), other.stages()))

    def same_as(self, other: "TruthObject") -> bool:
        return self.flavor == other.flavor and self.stages() == other.stages()

    def as_presheaf(self, guard: int = DEFAULT_GUARD) -> Presheaf:
        """The materialized subobject of the power object, as a presheaf."""
        p = self.poset
        elements = [sorted(self.stage(v, guard), key=lambda a: _prop_key(a)) for v in p.ids]
        return Presheaf.from_rule(p, elements, lambda v, w, a: restrict_prop(p, a, w),
                                  f"T{self.tag}")


def _prop_key(a: Prop) -> tuple:
    return tuple(-1 if t is None else t for t in a.tops)


def power_object(poset: ContextPoset, flavor: str, guard: int = DEFAULT_GUARD) -> Presheaf:
    """``V -> Sub_dB(O|V)`` or ``V -> Sub_jdB(flat^*(O|V))`` with their restrictions."""
    return full_truth(poset, flavor).as_presheaf(guard)


def full_truth(poset: ContextPoset, flavor: str) -> TruthObject:
    _check_flavor(flavor)
    return TruthObject(poset, flavor, lambda v, a: True, "full")


def empty_truth(poset: ContextPoset, flavor: str) -> TruthObject:
    _check_flavor(flavor)
    return TruthObject(poset, flavor, lambda v, a: False, "empty")


def _trace_table(poset: ContextPoset, rho: np.ndarray) -> list[list[float]]:
    out = []
    for v in poset.ids:
        ctx = poset.contexts[v]
        out.append([linops.expectation(rho, ctx.projection(m)) for m in range(ctx.full_mask + 1)])
    return out


def truth_rho_r(poset: ContextPoset, rho, r: float, flavor: str = PRESHEAF,
                eps: float = TRACE_EPS) -> TruthObject:
    """Propositions true with probability at least ``r`` in state ``rho``.

    ``A`` is a member at ``V`` iff ``tr(rho * top A(V')) >= r - eps`` for
    every ``V' <= V`` (tops read in ``flat(V')`` for the sheaf flavor).
    """
    _check_flavor(flavor)
    if not 0.0 <= r <= 1.0:
        raise InvalidInput(f"r must lie in [0, 1], got {r}")
    rho = linops.as_density(rho, poset.dim)
    traces = _trace_table(poset, rho)

    def member(v: int, a: Prop) -> bool:
        for w in poset.below(v):
            t = a.tops[w]
            if t is None or traces[a.stage_context(poset, w)][t] < r - eps:
                return False
        return True

    return TruthObject(poset, flavor, member, f"rho,r={r:g}")


def truth_vector(poset: ContextPoset, phi, flavor: str = PRESHEAF) -> TruthObject:
    """Propositions containing the daseinized vector state at every stage below ``V``."""
    _check_flavor(flavor)
    p = linops.ket_projector(linops.as_unit_vector(phi, poset.dim))
    dmask = [daseinize_mask(poset, p, v) for v in poset.ids]

    def member(v: int, a: Prop) -> bool:
        for w in poset.below(v):
            t = a.tops[w]
            if t is None or dmask[a.stage_context(poset, w)] & ~t:
                return False
        return True

    return TruthObject(poset, flavor, member, "phi")


# Filters -------------------------------------------------------------------------

def is_filter(members: frozenset[Prop], pool: Iterable[Prop]) -> bool:
    """Upward closed in ``pool`` and closed under binary meets (empty allowed)."""
    pool = list(pool)
    for a in members:
        if any(a <= b and b not in members for b in pool):
            return False
        if any(a.meet(b) not in members for b in members):
            return False
    return True


def check_filters(t: TruthObject, guard: int = DEFAULT_GUARD) -> None:
    for v in t.poset.ids:
        if not is_filter(t.stage(v, guard), candidates(t.poset, t.flavor, v, guard)):
            raise NotFilter(f"stage {t.poset.label(v)} of {t.tag or 'truth object'} is not a filter")


def is_truth_object(t: TruthObject, guard: int = DEFAULT_GUARD) -> bool:
    """Filter stages, closed under the power-object restrictions."""
    p = t.poset
    try:
        check_filters(t, guard)
    except NotFilter:
        return False
    for v in p.ids:
        for a in t.stage(v, guard):
            for w in p.below(v):
                if not t.contains(w, restrict_prop(p, a, w)):
                    return False
    return True


# Characteristic morphism and truth values ---------------------------------------------

def tau_char(t: TruthObject, check: bool = False,
             guard: int = DEFAULT_GUARD) -> Callable[[int, Prop], Sieve]:
    """``tau_V(S) = {V' <= V : S restricted to V' is in T(V')}``."""
    p = t.poset
    if check:
        check_filters(t, guard)

    def tau(v: int, s: Prop) -> Sieve:
        if s.flavor != t.flavor:
            raise InvalidInput("proposition and truth object flavors differ")
        out = Sieve(v, frozenset(w for w in p.below(v) if t.contains(w, restrict_prop(p, s, w))))
        assert out.is_valid(p), "characteristic sieve is not downward closed"
        if t.flavor == SHEAF:
            assert in_omega_j(p, out), "sheaf characteristic sieve is not j-closed"
        return out

    return tau


def nu(p_: Prop, t: TruthObject) -> TruthValue:
    """Truth value of a proposition: ``tau`` composed with its name."""
    if p_.flavor != t.flavor:
        raise InvalidInput("proposition and truth object flavors differ")
    poset = t.poset
    tau = tau_char(t)
    return TruthValue(tuple(tau(v, name_of(poset, p_, v)).members for v in poset.ids))


def nu_projection_fast(poset: ContextPoset, proj, rho, r: float, flavor: str = PRESHEAF,
                       eps: float = TRACE_EPS) -> TruthValue:
    """``{V' <= V : tr(rho delta(P)_{V'}) >= r}`` (``delta_j`` for the sheaf flavor)."""
    _check_flavor(flavor)
    if not 0.0 <= r <= 1.0:
        raise InvalidInput(f"r must lie in [0, 1], got {r}")
    rho = linops.as_density(rho, poset.dim)
    ok = set()
    for w in poset.ids:
        c = w if flavor == PRESHEAF else poset.flat(w)
        d = poset.contexts[c].projection(daseinize_mask(poset, proj, c))
        if linops.expectation(rho, d) >= r - eps:
            ok.add(w)
    return TruthValue.from_downset(poset, ok)


def nu_vector_fast(poset: ContextPoset, proj, phi, flavor: str = PRESHEAF) -> TruthValue:
    """``{V' <= V : |phi><phi| below delta(P)_{V'}}`` (``delta_j`` for sheaves)."""
    _check_flavor(flavor)
    ket = linops.ket_projector(linops.as_unit_vector(phi, poset.dim))
    ok = set()
    for w in poset.ids:
        c = w if flavor == PRESHEAF else poset.flat(w)
        d = poset.contexts[c].projection(daseinize_mask(poset, proj, c))
        if linops.loewner_leq(ket, d, 1e-7):
            ok.add(w)
    return TruthValue.from_downset(poset, ok)


# Enumeration of truth objects ---------------------------------------------------------

def truth_objects(poset: ContextPoset, flavor: str, guard: int = DEFAULT_GUARD,
                  sheaves_only: bool = False) -> list[TruthObject]:
    """Every truth object of the given flavor.

    A nonempty filter in a finite lattice is principal, so a truth object is
    a choice per context of ``None`` (empty stage) or a generator ``g_V``,
    subject to ``g_V`` nonempty below a nonempty stage and
    ``restrict(g_V) >= g_V'`` for ``V' <= V``.  With ``sheaves_only`` the
    results are filtered to those whose materialized presheaf is a sheaf.
    """
    p = poset
    cands = [candidates(p, flavor, v, guard) for v in p.ids]
    pos = [{a: i for i, a in enumerate(c)} for c in cands]
    ups = [[frozenset(b for b in c if a <= b) for a in c] for c in cands]
    leq = [[[a <= b for b in c] for a in c] for c in cands]
    restr = {(u, v): [pos[v][restrict_prop(p, a, v)] for a in cands[u]]
             for u in p.ids for v in p.below(u) if v != u}
    order = sorted(p.ids, reverse=True)
    choice = [-1] * len(p)
    out: list[TruthObject] = []

    def ok(v: int, g: int) -> bool:
        for u in p.above(v):
            if u == v or choice[u] < 0:
                continue
            if g < 0 or not leq[v][g][restr[u, v][choice[u]]]:
                return False
        return True

    def rec(k: int) -> None:
        if k == len(order):
            stages = [frozenset() if choice[v] < 0 else ups[v][choice[v]] for v in p.ids]
            t = TruthObject.from_stages(p, flavor, stages, f"enum{len(out)}")
            if not sheaves_only or is_sheaf(t.as_presheaf(guard)):
                out.append(t)
            if len(out) > guard:
                raise SizeLimit(f"more than {guard} truth objects")
            return
        v = order[k]
        for g in range(-1, len(cands[v])):
            if ok(v, g):
                choice[v] = g
                rec(k + 1)
        choice[v] = -1

    rec(0)
    return out
