"""Translation between the presheaf and the flat-sheaf formalisms.

Three kinds of data are translated: truth values (``nu_j = r . nu``),
propositions (``flat^* P = P_j``) and truth objects
(``flat^* T = varrho^{-1}(T_j)``).  Each sheaf datum has a class of presheaf
translations; the ``*_min`` / ``*_max`` constructors give its bounds and the
``verify_theorem`` routines check by enumeration that each class is exactly
the interval between them.
"""

from __future__ import annotations

import itertools
import time
from typing import Iterable

import numpy as np

from . import linops
from .contexts import ContextPoset
from .errors import InvalidInput, SizeLimit
from .presheaves import DEFAULT_GUARD, TruthValue, is_sheaf, truth_values, truth_values_j
from .spectral import (PRESHEAF, SHEAF, Prop, dase_table, embed_sheaf_prop, is_hyper,
                       propositions, restrict_down, sheafify_prop)
from .truth import (TruthObject, candidates, is_truth_object, nu, truth_objects, truth_rho_r)

THEOREM_MAX_CONTEXTS = 6
THEOREM_MAX_ATOMS = 4


# Truth values ------------------------------------------------------------------

def is_translation_tv(poset: ContextPoset, nu_: TruthValue, nu_j: TruthValue) -> bool:
    """``V' in (nu_j)_V  <=>  flat(V') in nu_V`` at every stage."""
    for v in poset.ids:
        for w in poset.below(v):
            if (w in nu_j.sieves[v]) != (poset.flat(w) in nu_.sieves[v]):
                return False
    return True


def retract_tv(poset: ContextPoset, nu_: TruthValue) -> TruthValue:
    return nu_.retract(poset)


def gamma_max(poset: ContextPoset, nu_j: TruthValue) -> TruthValue:
    """Largest translation: ``nu_j`` itself read as a global element of ``Omega``."""
    return TruthValue(nu_j.sieves)


def gamma_min(poset: ContextPoset, nu_j: TruthValue) -> TruthValue:
    """Least translation: ``V'`` kept iff ``(nu_j)_V`` meets ``U_flat(V')``."""
    return TruthValue(tuple(
        frozenset(w for w in poset.below(v) if nu_j.sieves[v] & poset.u_flat(w))
        for v in poset.ids))


# Propositions --------------------------------------------------------------------

def is_translation_prop(poset: ContextPoset, p_: Prop, p_j: Prop) -> bool:
    """``P(flat V) = P_j(V)`` at every stage."""
    if p_.flavor != PRESHEAF or p_j.flavor != SHEAF:
        raise InvalidInput("expected a presheaf proposition and a sheaf proposition")
    return sheafify_prop(poset, p_) == p_j


def iota_max(poset: ContextPoset, p_j: Prop) -> Prop:
    """Largest translation: stage ``V`` is the preimage of ``P_j(V)`` under ``zeta_O``."""
    return embed_sheaf_prop(poset, p_j)


def iota_min(poset: ContextPoset, p_j: Prop) -> Prop:
    """Smallest translation: join of ``delta(top P_j(W))_V`` over ``W in U_flat(V)``."""
    tops = []
    for v in poset.ids:
        t = 0
        for w in poset.u_flat(v):
            t |= dase_table(poset, poset.flat(w), v)[p_j.tops[w]]
        tops.append(t)
    return Prop(PRESHEAF, tuple(tops))


def varrho(poset: ContextPoset, v: int, s: Prop) -> Prop:
    """``(varrho_O)_V``: a subobject of ``O|flat(V)`` goes to its sheafification."""
    if s.flavor != PRESHEAF:
        raise InvalidInput("varrho acts on presheaf-flavor subobjects")
    return sheafify_prop(poset, s)


# Truth objects -------------------------------------------------------------------

def truth_preimage(t_j: TruthObject) -> TruthObject:
    """``varrho^{-1}(T_j)``: stage ``V`` holds subobjects ``A`` of ``O|flat(V)``.

    Candidates at ``V`` are therefore propositions over ``flat(V)``, so
    materialize stages with :func:`preimage_stage` rather than ``stage``.
    """
    poset = t_j.poset
    return TruthObject(poset, PRESHEAF,
                       lambda v, a: t_j.contains(v, sheafify_prop(poset, a)), "preimage")


def preimage_stage(t_j: TruthObject, v: int, guard: int = DEFAULT_GUARD) -> frozenset[Prop]:
    poset = t_j.poset
    pre = truth_preimage(t_j)
    return frozenset(a for a in candidates(poset, PRESHEAF, poset.flat(v), guard)
                     if pre.contains(v, a))


def is_translation_truth(t: TruthObject, t_j: TruthObject, guard: int = DEFAULT_GUARD) -> bool:
    """``T(flat V) = varrho^{-1}(T_j)(V)`` over all of ``Sub_dB(O|flat V)``."""
    poset = t.poset
    for v in poset.ids:
        f = poset.flat(v)
        for a in candidates(poset, PRESHEAF, f, guard):
            if t.contains(f, a) != t_j.contains(v, sheafify_prop(poset, a)):
                return False
    return True


def name_triangle_commutes(t: TruthObject, t_j: TruthObject, guard: int = DEFAULT_GUARD) -> bool:
    """Name-triangle condition: for ``A`` over ``flat V`` and ``V' <= flat V``,
    ``A|flat(V')`` is in ``T(flat V')`` iff ``flat^*(A|V')`` is in ``T_j(V')``."""
    poset = t.poset
    for v in poset.ids:
        f = poset.flat(v)
        for a in candidates(poset, PRESHEAF, f, guard):
            for w in poset.below(f):
                fw = poset.flat(w)
                left = t.contains(fw, restrict_down(poset, a, fw))
                right = t_j.contains(w, sheafify_prop(poset, restrict_down(poset, a, w)))
                if left != right:
                    return False
    return True


def jmath_max(t_j: TruthObject) -> TruthObject:
    """Largest translation: ``A`` in stage ``V`` iff ``flat^*(A|V)`` is in ``T_j(V)``."""
    poset = t_j.poset
    return TruthObject(poset, PRESHEAF,
                       lambda v, a: t_j.contains(v, sheafify_prop(poset, restrict_down(poset, a, v))),
                       "jmax")


def filter_generate(poset: ContextPoset, v: int, gens: Iterable[Prop],
                    guard: int = DEFAULT_GUARD) -> frozenset[Prop]:
    """Smallest filter of ``Sub_dB(O|V)`` containing ``gens``; empty for no generators."""
    gens = set(gens)
    if not gens:
        return frozenset()
    closed = set(gens)
    frontier = list(gens)
    while frontier:
        a = frontier.pop()
        for b in list(closed):
            m = a.meet(b)
            if m not in closed:
                closed.add(m)
                frontier.append(m)
    pool = candidates(poset, PRESHEAF, v, guard)
    return frozenset(b for b in pool if any(a <= b for a in closed))


def jmath_min(t_j: TruthObject, guard: int = DEFAULT_GUARD) -> TruthObject:
    """Smallest translation: the filter generated at ``V`` by the restrictions
    ``A|V`` of the preimage stages at every ``W in U_flat(V)``; empty when
    ``U_flat(V)`` is empty."""
    poset = t_j.poset
    pre = {w: preimage_stage(t_j, w, guard) for w in poset.ids}
    stages = []
    for v in poset.ids:
        gens = set()
        for w in sorted(poset.u_flat(v)):
            for a in pre[w]:
                gens.add(restrict_down(poset, a, v))
        stages.append(filter_generate(poset, v, gens, guard))
    return TruthObject.from_stages(poset, PRESHEAF, stages, "jmin")


def verify_nu_relation(poset: ContextPoset, p_: Prop, t: TruthObject, p_j: Prop,
                       t_j: TruthObject) -> bool:
    """``nu_j(P_j; T_j) = r . nu(P; T)``."""
    return nu(p_j, t_j) == nu(p_, t).retract(poset)


# Theorem verifiers ---------------------------------------------------------------

def _downset_labels(poset: ContextPoset, tv: TruthValue) -> list[str]:
    return [poset.label(v) for v in sorted(tv.downset)]


def _check_size(poset: ContextPoset) -> None:
    if len(poset) > THEOREM_MAX_CONTEXTS:
        raise SizeLimit(f"theorem verification needs at most {THEOREM_MAX_CONTEXTS} contexts")
    if max(c.size for c in poset.contexts) > THEOREM_MAX_ATOMS:
        raise SizeLimit(f"theorem verification needs at most {THEOREM_MAX_ATOMS} atoms per context")


def _closed_pairwise(items: list, join, meet) -> bool:
    members = set(items)
    return all(join(a, b) in members and meet(a, b) in members
               for a, b in itertools.combinations(items, 2))


def verify_theorem1(poset: ContextPoset, guard: int = DEFAULT_GUARD) -> dict:
    """Global elements of ``Omega`` split into intervals ``[gamma_min, gamma_max]``."""
    _check_size(poset)
    omega = truth_values(poset, guard)
    omega_j = truth_values_j(poset, guard)
    index = {nj: k for k, nj in enumerate(omega_j)}
    classes: list[list[TruthValue]] = [[] for _ in omega_j]
    lands = True
    for x in omega:
        r = x.retract(poset)
        if r not in index:
            lands = False
            continue
        classes[index[r]].append(x)
    intervals = bounds_translate = closed = retract_ok = True
    details = []
    for nj, cls in zip(omega_j, classes):
        lo, hi = gamma_min(poset, nj), gamma_max(poset, nj)
        interval = [x for x in omega if lo <= x <= hi]
        intervals &= set(interval) == set(cls)
        bounds_translate &= is_translation_tv(poset, lo, nj) and is_translation_tv(poset, hi, nj)
        retract_ok &= lo.retract(poset) == nj and hi.retract(poset) == nj
        closed &= _closed_pairwise(cls, TruthValue.join, TruthValue.meet)
        details.append({"nu_j": _downset_labels(poset, nj), "size": len(cls),
                        "gamma_min": _downset_labels(poset, lo),
                        "gamma_max": _downset_labels(poset, hi)})
    partition = lands and sum(len(c) for c in classes) == len(omega)
    clauses = {"partition": partition, "interval": intervals,
               "bounds_are_translations": bounds_translate, "retraction": retract_ok,
               "closed_under_join_meet": closed}
    return {"theorem": 1, "omega": len(omega), "omega_j": len(omega_j),
            "class_sizes": [len(c) for c in classes], "classes": details,
            "clauses": clauses, "passed": all(clauses.values())}


def verify_theorem2(poset: ContextPoset, guard: int = DEFAULT_GUARD) -> dict:
    """``Sub_dB(O)`` splits into intervals ``[iota_min(P_j), iota_max(P_j)]``."""
    _check_size(poset)
    props = propositions(poset, PRESHEAF, guard=guard)
    props_j = propositions(poset, SHEAF, guard=guard)
    index = {pj: k for k, pj in enumerate(props_j)}
    classes: list[list[Prop]] = [[] for _ in props_j]
    lands = True
    for a in props:
        s = sheafify_prop(poset, a)
        if s not in index:
            lands = False
            continue
        classes[index[s]].append(a)
    intervals = bounds = closed = True
    for pj, cls in zip(props_j, classes):
        lo, hi = iota_min(poset, pj), iota_max(poset, pj)
        bounds &= is_hyper(poset, lo) and is_hyper(poset, hi)
        bounds &= is_translation_prop(poset, lo, pj) and is_translation_prop(poset, hi, pj)
        interval = [a for a in props if lo <= a <= hi]
        intervals &= set(interval) == set(cls)
        closed &= _closed_pairwise(cls, Prop.join, Prop.meet)
    partition = lands and sum(len(c) for c in classes) == len(props)
    clauses = {"partition": partition, "interval": intervals,
               "bounds_are_translations": bounds, "closed_under_join_meet": closed}
    return {"theorem": 2, "sub_db": len(props), "sub_jdb": len(props_j),
            "class_sizes": [len(c) for c in classes], "clauses": clauses,
            "passed": all(clauses.values())}


DEFAULT_STATES = (
    ("0", [1, 0]), ("1", [0, 1]), ("+", [1, 1]), ("-", [1, -1]), ("i", [1, 1j]),
)
DEFAULT_R = (0.0, 0.3, 0.5, 0.9, 1.0)


def _grid_states(poset: ContextPoset, seed: int) -> list[np.ndarray]:
    n = poset.dim
    out = []
    for _, vec in DEFAULT_STATES:
        v = np.zeros(n, dtype=np.complex128)
        v[: min(2, n)] = np.asarray(vec, dtype=np.complex128)[: min(2, n)]
        out.append(linops.ket_projector(v / np.linalg.norm(v)))
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = z @ z.conj().T
    out.append(rho / np.trace(rho).real)
    return out


def sample_truth_sheaves(poset: ContextPoset, guard: int = DEFAULT_GUARD, seed: int = 0,
                         enumerated: list[TruthObject] | None = None
                         ) -> tuple[list[TruthObject], int]:
    """Truth sheaves to test: ``T^{rho,r}_j`` over a grid, principal filters of
    proposition names, and every truth sheaf when that enumeration fits the guard.

    Grid members whose stages are not filters (possible for ``r <= 1/2``)
    or that are not sheaves are skipped; their number is returned alongside.
    ``enumerated`` passes in an already computed list of all truth sheaves.
    """
    out: list[TruthObject] = []
    seen = set()
    skipped = 0

    def add(t: TruthObject, trusted: bool = False) -> None:
        nonlocal skipped
        key = t.stages(guard)
        if key in seen:
            return
        if not trusted and not (is_truth_object(t, guard) and is_sheaf(t.as_presheaf(guard))):
            skipped += 1
            return
        seen.add(key)
        out.append(t)

    for rho in _grid_states(poset, seed):
        for r in DEFAULT_R:
            add(truth_rho_r(poset, rho, r, SHEAF))
    for pj in propositions(poset, SHEAF, guard=guard):
        stages = []
        for v in poset.ids:
            g = sheafify_prop(poset, restrict_down(poset, pj, v))
            stages.append([a for a in candidates(poset, SHEAF, v, guard) if g <= a])
        add(TruthObject.from_stages(poset, SHEAF, stages, "principal"))
    if enumerated is None:
        try:
            enumerated = truth_objects(poset, SHEAF, guard, sheaves_only=True)
        except SizeLimit:
            enumerated = []
    for t in enumerated:
        add(t, trusted=True)
    return out, skipped


def _translation_targets(t_j: TruthObject, guard: int) -> dict[int, frozenset] | None:
    """Stage each translation must have at every ``flat``-fixed context, or
    ``None`` when two contexts with the same ``flat`` image disagree."""
    poset = t_j.poset
    need: dict[int, frozenset] = {}
    for v in poset.ids:
        f = poset.flat(v)
        st = preimage_stage(t_j, v, guard)
        if need.setdefault(f, st) != st:
            return None
    return need


def _stage_encoder(poset: ContextPoset, guard: int):
    """Stages of a presheaf truth object as a flat row of 64-bit membership words."""
    cands = [candidates(poset, PRESHEAF, v, guard) for v in poset.ids]
    pos = [{a: i for i, a in enumerate(c)} for c in cands]
    words = [(len(c) + 63) // 64 for c in cands]

    def encode(stages) -> list[int]:
        row = []
        for v, stage in enumerate(stages):
            ws = [0] * words[v]
            for a in stage:
                i = pos[v][a]
                ws[i >> 6] |= 1 << (i & 63)
            row.extend(ws)
        return row

    return encode


def verify_theorem3(poset: ContextPoset, guard: int = DEFAULT_GUARD, seed: int = 0) -> dict:
    """Translation classes of truth sheaves are the intervals ``[jmath_min, jmath_max]``.

    Presheaf truth objects are compared through their materialized stages:
    ``T`` translates ``T_j`` exactly when its stage at each ``flat(V)``
    equals the preimage stage of ``T_j`` at ``V`` (this is
    :func:`is_translation_truth`, evaluated once per stage instead of per pair).
    """
    _check_size(poset)
    presheaves = truth_objects(poset, PRESHEAF, guard)
    keys = [t.stages(guard) for t in presheaves]
    fixed = poset.fixed_points()
    by_fixed: dict[tuple, list[int]] = {}
    for k, key in enumerate(keys):
        by_fixed.setdefault(tuple(key[f] for f in fixed), []).append(k)
    key_set = set(keys)
    encode = _stage_encoder(poset, guard)
    table = np.array([encode(key) for key in keys], dtype=np.uint64)

    def translation_class(t_j: TruthObject) -> set[int]:
        need = _translation_targets(t_j, guard)
        if need is None:
            return set()
        return set(by_fixed.get(tuple(need[f] for f in fixed), []))

    all_sheaves_enumerated = True
    try:
        all_sheaves = truth_objects(poset, SHEAF, guard, sheaves_only=True)
    except SizeLimit:
        all_sheaves_enumerated = False
        all_sheaves = None
    sheaves, skipped = sample_truth_sheaves(poset, guard, seed, all_sheaves)
    if all_sheaves is None:
        all_sheaves = sheaves
    interval_ok = bounds_ok = True
    sizes = []
    for t_j in sheaves:
        lo, hi = jmath_min(t_j, guard), jmath_max(t_j)
        lo_k, hi_k = lo.stages(guard), hi.stages(guard)
        cls = translation_class(t_j)
        lo_e = np.array(encode(lo_k), dtype=np.uint64)
        hi_e = np.array(encode(hi_k), dtype=np.uint64)
        inside = np.all((table & ~hi_e) == 0, axis=1) & np.all((lo_e & ~table) == 0, axis=1)
        interval_ok &= cls == set(np.flatnonzero(inside).tolist())
        bounds_ok &= lo_k in key_set and hi_k in key_set
        bounds_ok &= is_translation_truth(lo, t_j, guard) and is_translation_truth(hi, t_j, guard)
        sizes.append(len(cls))
    translated: set[int] = set()
    for t_j in all_sheaves:
        translated |= translation_class(t_j)
    untranslated = [k for k in range(len(presheaves)) if k not in translated]
    clauses = {"interval": interval_ok, "bounds_are_translations": bounds_ok}
    return {"theorem": 3, "truth_presheaves": len(presheaves),
            "sampled_truth_sheaves": len(sheaves), "skipped_non_filter_samples": skipped,
            "all_truth_sheaves": len(all_sheaves) if all_sheaves_enumerated else None,
            "class_sizes": sizes,
            "non_translation_truth_presheaves": len(untranslated),
            "non_translation_exists": bool(untranslated),
            "clauses": clauses, "passed": all(clauses.values())}


def verify_theorem(n: int, poset: ContextPoset, guard: int = DEFAULT_GUARD, seed: int = 0) -> dict:
    start = time.perf_counter()
    if n == 1:
        out = verify_theorem1(poset, guard)
    elif n == 2:
        out = verify_theorem2(poset, guard)
    elif n == 3:
        out = verify_theorem3(poset, guard, seed)
    else:
        raise InvalidInput(f"unknown theorem {n}")
    out["_seconds"] = time.perf_counter() - start
    return out
