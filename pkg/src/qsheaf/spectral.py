"""Spectral and outer presheaves, daseinization and proposition objects.

Projections of a context are atom bitmasks: bit ``i`` selects minimal
projection ``i``.  For ``V' <= V`` every atom of ``V`` sits under exactly one
atom of ``V'`` (``ContextPoset.refine``), so daseinizing a projection of ``V``
down to ``V'`` keeps each atom of ``V'`` that covers a selected atom of ``V``.

A :class:`Prop` stores a downward-Boolean subobject by its stagewise tops.
In the presheaf flavor the top at ``W`` is a mask of ``W``; in the sheaf
flavor it is a mask of ``flat(W)`` and must agree with the top at
``flat(W)``.  ``None`` marks an empty stage (outside the down-set of the
context the subobject lives over).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels, linops
from .contexts import ContextPoset
from .errors import InvalidInput, SizeLimit
from .presheaves import DEFAULT_GUARD, Presheaf

PRESHEAF = "presheaf"
SHEAF = "sheaf"
FLAVORS = (PRESHEAF, SHEAF)


def _check_flavor(flavor: str) -> None:
    if flavor not in FLAVORS:
        raise InvalidInput(f"unknown flavor {flavor!r}")


# Daseinization on masks ----------------------------------------------------

def dase_mask(poset: ContextPoset, big: int, small: int, mask: int) -> int:
    """``delta(P)_small`` for the projection ``mask`` of ``big`` (``small <= big``)."""
    out = 0
    for i, under in enumerate(poset.refine(small, big)):
        if under & mask:
            out |= 1 << i
    return out


def dase_table(poset: ContextPoset, big: int, small: int) -> tuple[int, ...]:
    key = ("dase", big, small)
    if key not in poset._cache:
        full = poset.contexts[big].full_mask
        poset._cache[key] = tuple(dase_mask(poset, big, small, m) for m in range(full + 1))
    return poset._cache[key]


def daseinize_mask(poset: ContextPoset, p, v: int, eps: float | None = None) -> int:
    """Atoms ``e`` of ``v`` with ``||e P|| > eps`` (overlap formula)."""
    eps = poset.eps if eps is None else eps
    p = linops.as_projection(p, poset.dim, 1e-7)
    out = 0
    for i, e in enumerate(poset.contexts[v].atoms):
        if np.linalg.norm(e @ p) > eps:
            out |= 1 << i
    return out


def daseinize(poset: ContextPoset, p, v: int) -> np.ndarray:
    """Least projection of context ``v`` dominating ``p``."""
    return poset.contexts[v].projection(daseinize_mask(poset, p, v))


def daseinize_meet_mask(poset: ContextPoset, p, v: int) -> int:
    """Reference: meet of every projection of ``v`` above ``p``."""
    ctx = poset.contexts[v]
    p = linops.as_projection(p, poset.dim)
    out = ctx.full_mask
    for m in range(ctx.full_mask + 1):
        if linops.loewner_leq(p, ctx.projection(m), 1e-7):
            out &= m
    return out


def daseinize_j_mask(poset: ContextPoset, p, v: int) -> int:
    """``delta_j(P)_V = delta(P)_{flat V}``, a mask of ``flat(v)``."""
    return daseinize_mask(poset, p, poset.flat(v))


def daseinize_j(poset: ContextPoset, p, v: int) -> np.ndarray:
    f = poset.flat(v)
    return poset.contexts[f].projection(daseinize_mask(poset, p, f))


def mask_of(poset: ContextPoset, p, v: int) -> int:
    """Atom mask of a projection that lies in context ``v``."""
    p = linops.as_matrix(p, poset.dim)
    m = daseinize_mask(poset, p, v)
    if not np.allclose(poset.contexts[v].projection(m), p, atol=1e-7):
        raise InvalidInput(f"projection is not an element of context {poset.label(v)}")
    return m


def alpha(poset: ContextPoset, v: int, p) -> frozenset[int]:
    """Characters (atom indices) sending ``p`` to 1."""
    m = mask_of(poset, p, v)
    return frozenset(i for i in range(poset.contexts[v].size) if m >> i & 1)


# Sigma and O ---------------------------------------------------------------

def build_sigma(poset: ContextPoset) -> Presheaf:
    """Gelfand spectra; a character of ``V`` is named by its atom index."""
    def restrict(v, w, i):
        for j, under in enumerate(poset.refine(w, v)):
            if under >> i & 1:
                return j
        raise AssertionError("atom with no cover")

    elements = [tuple(range(poset.contexts[v].size)) for v in poset.ids]
    return Presheaf.from_rule(poset, elements, restrict, "Sigma")


def build_outer(poset: ContextPoset) -> Presheaf:
    """Projection lattices restricted by daseinization."""
    elements = [tuple(range(poset.contexts[v].full_mask + 1)) for v in poset.ids]
    return Presheaf.from_rule(poset, elements,
                              lambda v, w, m: dase_table(poset, v, w)[m], "O")


# Propositions ----------------------------------------------------------------

@dataclass(frozen=True)
class Prop:
    """Downward-Boolean subobject (equivalently a hyper-element) by its tops."""

    flavor: str
    tops: tuple

    def stage_context(self, poset: ContextPoset, w: int) -> int:
        return w if self.flavor == PRESHEAF else poset.flat(w)

    def downset(self, w: int) -> frozenset[int]:
        """The stage at ``w`` as the set of projections under the top."""
        t = self.tops[w]
        if t is None:
            return frozenset()
        return frozenset(m for m in range(t + 1) if m & t == m)

    def __le__(self, other: "Prop") -> bool:
        for a, b in zip(self.tops, other.tops):
            if a is None:
                continue
            if b is None or a & b != a:
                return False
        return True

    def meet(self, other: "Prop") -> "Prop":
        return Prop(self.flavor, tuple(None if a is None or b is None else a & b
                                       for a, b in zip(self.tops, other.tops)))

    def join(self, other: "Prop") -> "Prop":
        return Prop(self.flavor, tuple(b if a is None else a if b is None else a | b
                                       for a, b in zip(self.tops, other.tops)))


def domain(poset: ContextPoset, flavor: str, over: int | None = None) -> tuple[int, ...]:
    """Contexts with a nonempty stage for subobjects of ``O|over`` or its sheafification."""
    _check_flavor(flavor)
    if over is None:
        return tuple(poset.ids)
    if flavor == PRESHEAF:
        return poset.below(over)
    return tuple(w for w in poset.ids if poset.is_leq(poset.flat(w), over))


def is_hyper(poset: ContextPoset, prop: Prop, over: int | None = None) -> bool:
    """Hyper-element inequalities for ``prop`` over ``O|over`` (or ``flat^*``)."""
    dom = set(domain(poset, prop.flavor, over))
    if set(w for w, t in enumerate(prop.tops) if t is not None) != dom:
        return False
    for w in dom:
        ctx = prop.stage_context(poset, w)
        if not 0 <= prop.tops[w] <= poset.contexts[ctx].full_mask:
            return False
        if prop.flavor == SHEAF and prop.tops[w] != prop.tops[ctx]:
            return False
    for w in dom:
        for w2 in poset.below(w):
            if w2 == w or w2 not in dom:
                continue
            a, b = prop.stage_context(poset, w), prop.stage_context(poset, w2)
            if dase_table(poset, a, b)[prop.tops[w]] & ~prop.tops[w2]:
                return False
    return True


def _hyper_enumerate(poset: ContextPoset, flavor: str, over: int | None,
                     guard: int) -> list[Prop]:
    dom = domain(poset, flavor, over)
    active = [False] * len(poset)
    for w in dom:
        active[w] = flavor == PRESHEAF or poset.flat(w) == w
    # any active pair has stage context equal to itself
    full = [poset.contexts[w].full_mask for w in poset.ids]
    if any(full[w] >= 1 << 16 for w in poset.ids if active[w]):
        raise SizeLimit("projection lattice too large to enumerate")
    up_ptr, up_ctx, up_off, tab = [0], [], [], []
    for v in poset.ids:
        if active[v]:
            for u in poset.above(v):
                if u != v and active[u]:
                    up_ctx.append(u)
                    up_off.append(len(tab))
                    tab.extend(dase_table(poset, u, v))
        up_ptr.append(len(up_ctx))
    fams = _kernels.hyper_families(full, active, up_ptr, up_ctx, up_off, tab, guard)
    if len(fams) > guard:
        raise SizeLimit(f"more than {guard} propositions")
    dset = set(dom)
    out = []
    for fam in fams:
        tops = []
        for w in poset.ids:
            if w not in dset:
                tops.append(None)
            elif flavor == PRESHEAF:
                tops.append(fam[w])
            else:
                tops.append(fam[poset.flat(w)])
        out.append(Prop(flavor, tuple(tops)))
    return out


def propositions(poset: ContextPoset, flavor: str, over: int | None = None,
                 guard: int = DEFAULT_GUARD) -> tuple[Prop, ...]:
    """``Sub_dB(O|over)`` (presheaf) or ``Sub_jdB(flat^*(O|over))`` (sheaf).

    ``over=None`` means the whole poset.  Results are cached on the poset and
    listed in a fixed order.
    """
    key = ("props", flavor, over)
    if key not in poset._cache:
        poset._cache[key] = tuple(_hyper_enumerate(poset, flavor, over, guard))
    return poset._cache[key]


def proposition_of(poset: ContextPoset, p, flavor: str = PRESHEAF) -> Prop:
    """Stagewise down-set generated by ``delta(P)`` or ``delta_j(P)``."""
    _check_flavor(flavor)
    if flavor == PRESHEAF:
        return Prop(PRESHEAF, tuple(daseinize_mask(poset, p, v) for v in poset.ids))
    return Prop(SHEAF, tuple(daseinize_j_mask(poset, p, v) for v in poset.ids))


def full_prop(poset: ContextPoset, flavor: str, over: int | None = None) -> Prop:
    dom = set(domain(poset, flavor, over))
    p = Prop(flavor, ())
    return Prop(flavor, tuple(poset.contexts[p.stage_context(poset, w)].full_mask
                              if w in dom else None for w in poset.ids))


def restrict_down(poset: ContextPoset, prop: Prop, v: int) -> Prop:
    """``A|v``: keep the stages at contexts below ``v``."""
    below = poset.down(v)
    return Prop(prop.flavor, tuple(t if w in below else None for w, t in enumerate(prop.tops)))


def sheafify_prop(poset: ContextPoset, prop: Prop) -> Prop:
    """``flat^* A``: the stage at ``W`` becomes the stage of ``A`` at ``flat(W)``.

    For a presheaf-flavor ``A`` the top at ``flat(W)`` is already a mask of
    ``flat(W)``; for a sheaf-flavor ``A`` this is the identity on valid input.
    """
    return Prop(SHEAF, tuple(prop.tops[poset.flat(w)] for w in poset.ids))


def name_of(poset: ContextPoset, prop: Prop, v: int) -> Prop:
    """Component of the name of ``prop`` at ``v``: ``P|v`` or ``flat^*(P|v)``."""
    if prop.flavor == PRESHEAF:
        return restrict_down(poset, prop, v)
    return sheafify_prop(poset, restrict_down(poset, prop, v))


def embed_sheaf_prop(poset: ContextPoset, prop: Prop) -> Prop:
    """Read a sheaf hyper-element as a presheaf family (tops embedded into ``W``)."""
    return Prop(PRESHEAF, tuple(None if t is None else poset.embed(poset.flat(w), w, t)
                                for w, t in enumerate(prop.tops)))


# Representation changes ----------------------------------------------------

def convert(poset: ContextPoset, x, frm: str, to: str, flavor: str = PRESHEAF):
    """Move between the ``dB``, ``hyp`` and ``cl`` representations.

    ``dB``: tuple of per-stage frozensets of masks (down-sets with a top).
    ``hyp``: a :class:`Prop`.  ``cl``: tuple of per-stage frozensets of
    character indices.  An empty stage is an empty frozenset in ``dB``, a
    ``None`` top in ``hyp`` and ``None`` in ``cl`` (where ``frozenset()`` is
    the clopen set of the zero projection).
    """
    _check_flavor(flavor)
    kinds = ("dB", "hyp", "cl")
    if frm not in kinds or to not in kinds:
        raise InvalidInput(f"unknown representation {frm!r} -> {to!r}")
    if frm == "hyp":
        if not isinstance(x, Prop) or x.flavor != flavor:
            raise InvalidInput("expected a Prop of the requested flavor")
        h = x
    elif frm == "dB":
        tops = []
        for stage in x:
            if not stage:
                tops.append(None)
                continue
            top = 0
            for m in stage:
                top |= m
            if top not in stage or any(m & top != m for m in stage) or \
                    frozenset(m for m in range(top + 1) if m & top == m) != stage:
                raise InvalidInput("stage is not a down-set with a top")
            tops.append(top)
        h = Prop(flavor, tuple(tops))
    else:
        h = Prop(flavor, tuple(None if s is None else sum(1 << i for i in s) for s in x))
    if to == "hyp":
        return h
    if to == "dB":
        return tuple(h.downset(w) for w in poset.ids)
    return tuple(None if t is None else frozenset(i for i in range(t.bit_length()) if t >> i & 1)
                 for t in h.tops)


# Proposition power presheaf of the sheafified spectrum -------------------------

def clopen_power_sheaf(poset: ContextPoset, guard: int = DEFAULT_GUARD) -> Presheaf:
    """``V -> Sub_jcl(flat^*(Sigma|V))`` with restriction ``S -> flat^*(S|V')``.

    Stages are enumerated directly as closed subobjects of the sheafified
    restricted spectral presheaf, not through the hyper-element bijection.
    """
    from .presheaves import closure, sheafify, subobjects

    sigma = build_sigma(poset)
    elements = []
    for v in poset.ids:
        q = sheafify(sigma.down(v))
        stage = []
        for s in subobjects(q, guard):
            if closure(s) == s:
                stage.append(tuple(frozenset(q.elements[w][i] for i in s.stages[w])
                                   for w in poset.ids))
        elements.append(stage)

    def restrict(v, w, s):
        below = poset.down(w)
        cut = [st if u in below else frozenset() for u, st in enumerate(s)]
        return tuple(cut[poset.flat(u)] for u in poset.ids)

    return Presheaf.from_rule(poset, elements, restrict, "P_jcl(flat*Sigma)")


def masks_of_projections(poset: ContextPoset, v: int) -> Iterable[int]:
    return range(poset.contexts[v].full_mask + 1)


def context_projections(poset: ContextPoset) -> Sequence[np.ndarray]:
    """Every projection of every context, deduplicated."""
    out: list[np.ndarray] = []
    for v in poset.ids:
        ctx = poset.contexts[v]
        for m in range(ctx.full_mask + 1):
            p = ctx.projection(m)
            if not any(np.allclose(p, q, atol=1e-7) for q in out):
                out.append(p)
    return out
