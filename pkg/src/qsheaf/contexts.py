"""Finite posets of commutative subalgebras ("contexts") and the flat map.

A context is stored by its minimal projections.  ``build_poset`` closes a set
of seed algebras and quantized observables under the Galois pair

    phi(C) = least commutative algebra containing exp(i * upsilon(c)), c in C
    psi(V) = {a : exp(i * upsilon(a)) in V}

and under pairwise intersection, then fixes context ids along a linear
extension of inclusion (id 0 is always the trivial algebra C.I).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linops
from .errors import ClosureViolation, InvalidInput, NonCommutingSet, SizeLimit
from .linops import EPS, AlgebraBasis

MAX_OBSERVABLES = 12
DEFAULT_MAX_CONTEXTS = 64
BOTTOM_LABEL = "CI"


@dataclass(frozen=True, eq=False)
class ClassicalObservable:
    name: str
    operator: np.ndarray


@dataclass(frozen=True, eq=False)
class Context:
    id: int
    atoms: np.ndarray  # (k, n, n) minimal projections, canonical order
    label: str

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def algebra(self) -> AlgebraBasis:
        return linops.algebra_from_projections(self.atoms)

    def projection(self, mask: int) -> np.ndarray:
        """Sum of the atoms selected by the bitmask ``mask``."""
        n = self.atoms.shape[1]
        out = np.zeros((n, n), dtype=np.complex128)
        for i in range(self.size):
            if mask >> i & 1:
                out += self.atoms[i]
        return out

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1


def _same_atoms(a: np.ndarray, b: np.ndarray, eps: float) -> bool:
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=0.0, atol=eps))


def _atoms_of(alg: AlgebraBasis, seed: int, eps: float) -> np.ndarray:
    return np.array(linops.minimal_projections(alg, seed=seed, eps=eps))


@dataclass(frozen=True, eq=False)
class ContextPoset:
    """Immutable finite context poset with its flat endomap.

    ``leq[a, b]`` means context ``a`` is a subalgebra of context ``b``.  Ids
    follow a linear extension, so ``leq[a, b]`` implies ``a <= b`` as ints.
    """

    dim: int
    contexts: tuple[Context, ...]
    leq: np.ndarray
    flat_map: tuple[int, ...]
    observables: tuple[ClassicalObservable, ...] = ()
    eps: float = EPS
    seed: int = linops.DEFAULT_SEED
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.contexts)

    @property
    def ids(self) -> range:
        return range(len(self.contexts))

    @property
    def bottom(self) -> int:
        return 0

    def label(self, v: int) -> str:
        return self.contexts[v].label

    def index(self, label: str) -> int:
        for c in self.contexts:
            if c.label == label:
                return c.id
        raise KeyError(label)

    def is_leq(self, a: int, b: int) -> bool:
        return bool(self.leq[a, b])

    def flat(self, v: int) -> int:
        return self.flat_map[v]

    def below(self, v: int) -> tuple[int, ...]:
        """All ``w <= v`` in increasing id order (``v`` included)."""
        key = ("below", v)
        if key not in self._cache:
            self._cache[key] = tuple(w for w in self.ids if self.leq[w, v])
        return self._cache[key]

    def above(self, v: int) -> tuple[int, ...]:
        key = ("above", v)
        if key not in self._cache:
            self._cache[key] = tuple(w for w in self.ids if self.leq[v, w])
        return self._cache[key]

    def down(self, v: int) -> frozenset[int]:
        return frozenset(self.below(v))

    def down_mask(self, v: int) -> int:
        return sum(1 << w for w in self.below(v))

    def fixed_points(self) -> tuple[int, ...]:
        return tuple(v for v in self.ids if self.flat_map[v] == v)

    def maximal(self) -> tuple[int, ...]:
        return tuple(v for v in self.ids if len(self.above(v)) == 1)

    def covers(self) -> list[tuple[int, int]]:
        """Hasse edges ``(a, b)`` with ``a < b`` and nothing strictly between."""
        out = []
        for b in self.ids:
            for a in self.below(b):
                if a == b:
                    continue
                if not any(c not in (a, b) and self.leq[a, c] for c in self.below(b)):
                    out.append((a, b))
        return out

    def u_flat(self, v: int) -> frozenset[int]:
        """Contexts ``W`` with ``v`` contained in ``flat(W)``."""
        return frozenset(w for w in self.ids if self.leq[v, self.flat_map[w]])

    def refine(self, small: int, big: int) -> tuple[int, ...]:
        """For each atom of ``small``, the bitmask of atoms of ``big`` below it."""
        key = ("refine", small, big)
        if key not in self._cache:
            if not self.leq[small, big]:
                raise InvalidInput(f"{self.label(small)} is not below {self.label(big)}")
            sa, ba = self.contexts[small].atoms, self.contexts[big].atoms
            masks = []
            for f in sa:
                m = 0
                for i, e in enumerate(ba):
                    if np.linalg.norm(f @ e - e) <= 1e-7:
                        m |= 1 << i
                masks.append(m)
            self._cache[key] = tuple(masks)
        return self._cache[key]

    def embed(self, small: int, big: int, mask: int) -> int:
        """Re-express a projection of ``small`` as an atom mask of ``big``."""
        ref = self.refine(small, big)
        out = 0
        for i, m in enumerate(ref):
            if mask >> i & 1:
                out |= m
        return out

    def meet(self, a: int, b: int) -> int:
        """Order-theoretic meet: the largest common lower bound."""
        common = [c for c in self.ids if self.leq[c, a] and self.leq[c, b]]
        top = max(common)
        if not all(self.leq[c, top] for c in common):
            raise ClosureViolation("no meet of %s and %s" % (self.label(a), self.label(b)))
        return top

    def intersect(self, a: int, b: int) -> int:
        """Id of the context whose algebra is the intersection of ``a`` and ``b``."""
        meet = linops.span_intersection(self.contexts[a].algebra,
                                        self.contexts[b].algebra, self.eps)
        found = self.lookup(_atoms_of(meet, self.seed, self.eps))
        if found is None:
            raise ClosureViolation("poset is not closed under intersection")
        return found

    # Galois pair ----------------------------------------------------------

    def exp_of(self, name: str) -> np.ndarray:
        key = ("exp", name)
        if key not in self._cache:
            obs = {o.name: o for o in self.observables}
            if name not in obs:
                raise InvalidInput(f"unknown observable {name!r}")
            self._cache[key] = linops.matrix_exp_i(obs[name].operator, self.eps)
        return self._cache[key]

    def psi(self, v: int) -> frozenset[str]:
        alg = self.contexts[v].algebra
        return frozenset(o.name for o in self.observables
                         if linops.algebra_member(alg, self.exp_of(o.name), 1e-7))

    def phi(self, names: Iterable[str]) -> int:
        atoms = phi_atoms([self.exp_of(n) for n in sorted(names)], self.dim,
                          self.seed, self.eps)
        found = self.lookup(atoms)
        if found is None:
            raise ClosureViolation("phi lands outside the poset")
        return found

    def lookup(self, atoms: np.ndarray) -> int | None:
        for c in self.contexts:
            if _same_atoms(c.atoms, atoms, 1e-7):
                return c.id
        return None


def phi_atoms(exps: Sequence[np.ndarray], dim: int, seed: int, eps: float) -> np.ndarray:
    """Atoms of the least commutative algebra containing ``exps``."""
    alg = linops.generated_algebra(list(exps), dim=dim, eps=eps)
    if not alg.commutative:
        raise NonCommutingSet("exponentials of the observable subset do not commute")
    return _atoms_of(alg, seed, eps)


def _commute(a: np.ndarray, b: np.ndarray) -> bool:
    return float(np.linalg.norm(a @ b - b @ a)) <= 1e-8


def _as_observables(observables, dim, eps) -> list[ClassicalObservable]:
    if isinstance(observables, Mapping):
        items = [ClassicalObservable(k, linops.as_matrix(v, dim)) for k, v in observables.items()]
    else:
        items = [ClassicalObservable(o.name, linops.as_matrix(o.operator, dim))
                 for o in observables]
    names = [o.name for o in items]
    if len(set(names)) != len(names):
        raise InvalidInput("observable names must be unique")
    if len(items) > MAX_OBSERVABLES:
        raise InvalidInput(f"at most {MAX_OBSERVABLES} observables are supported")
    for o in items:
        if not linops.is_hermitian(o.operator, eps):
            raise InvalidInput(f"observable {o.name!r} is not Hermitian")
    for a, b in itertools.combinations(items, 2):
        if np.allclose(a.operator, b.operator, rtol=0.0, atol=eps):
            raise InvalidInput(f"quantization is not injective: {a.name!r} == {b.name!r}")
    return items


class _Collector:
    def __init__(self, eps: float, limit: int):
        self.eps = eps
        self.limit = limit
        self.atoms: list[np.ndarray] = []
        self.labels: list[str] = []
        self.rank: list[int] = []  # label priority, lower wins

    def add(self, atoms: np.ndarray, label: str, rank: int) -> int:
        for i, a in enumerate(self.atoms):
            if _same_atoms(a, atoms, 1e-7):
                if rank < self.rank[i]:
                    self.labels[i], self.rank[i] = label, rank
                return i
        self.atoms.append(atoms)
        self.labels.append(label)
        self.rank.append(rank)
        if len(self.atoms) > self.limit:
            raise SizeLimit(f"context poset exceeds max_contexts={self.limit}")
        return len(self.atoms) - 1


def build_poset(observables=(), seed_contexts: Mapping[str, Sequence] | None = None,
                dim: int | None = None, max_contexts: int = DEFAULT_MAX_CONTEXTS,
                eps: float = EPS, seed: int = linops.DEFAULT_SEED) -> ContextPoset:
    """Build the smallest admissible context poset.

    It contains C.I, every seed context, ``phi(C)`` for each commuting subset
    ``C`` of observables, and is closed under pairwise intersection and under
    ``flat = phi . psi``.  The flat-map axioms are checked before returning.

    Parameters
    ----------
    observables
        Mapping ``name -> Hermitian matrix`` or a sequence of
        :class:`ClassicalObservable`.
    seed_contexts
        Mapping ``name -> list of generator matrices``; each must generate a
        commutative algebra.
    dim
        Hilbert-space dimension; inferred from the inputs when omitted.
    """
    seed_contexts = dict(seed_contexts or {})
    if dim is None:
        sample = list(observables.values()) if isinstance(observables, Mapping) else \
            [o.operator for o in observables]
        sample += [g for gens in seed_contexts.values() for g in gens]
        if not sample:
            raise InvalidInput("cannot infer the dimension from empty inputs")
        dim = linops.as_matrix(sample[0]).shape[0]
    obs = _as_observables(observables, dim, eps)
    exps = {o.name: linops.matrix_exp_i(o.operator, eps) for o in obs}
    coll = _Collector(eps, max_contexts)
    coll.add(np.eye(dim, dtype=np.complex128)[None], BOTTOM_LABEL, 0)

    for name, gens in seed_contexts.items():
        gens = [linops.as_matrix(g, dim) for g in gens]
        alg = linops.generated_algebra(gens, dim=dim, eps=eps)
        if not alg.commutative:
            raise NonCommutingSet(f"seed context {name!r} is not commutative")
        coll.add(_atoms_of(alg, seed, eps), name, 1)

    names = [o.name for o in obs]
    for k in range(1, len(names) + 1):
        for subset in itertools.combinations(names, k):
            if not all(_commute(exps[a], exps[b]) for a, b in itertools.combinations(subset, 2)):
                continue
            atoms = phi_atoms([exps[a] for a in subset], dim, seed, eps)
            coll.add(atoms, "phi(" + ",".join(subset) + ")", 2)

    done: set[tuple[int, int]] = set()
    changed = True
    while changed:
        changed = False
        count = len(coll.atoms)
        for i in range(count):
            for j in range(i + 1, count):
                if (i, j) in done:
                    continue
                done.add((i, j))
                ai = linops.algebra_from_projections(coll.atoms[i])
                aj = linops.algebra_from_projections(coll.atoms[j])
                meet = linops.span_intersection(ai, aj, eps)
                before = len(coll.atoms)
                coll.add(_atoms_of(meet, seed, eps),
                         f"{coll.labels[i]}&{coll.labels[j]}", 3)
                changed |= len(coll.atoms) > before
        for i in range(len(coll.atoms)):
            alg = linops.algebra_from_projections(coll.atoms[i])
            inside = [exps[n] for n in names if linops.algebra_member(alg, exps[n], 1e-7)]
            before = len(coll.atoms)
            coll.add(phi_atoms(inside, dim, seed, eps), "phi(" + ",".join(
                n for n in names if linops.algebra_member(alg, exps[n], 1e-7)) + ")", 2)
            changed |= len(coll.atoms) > before

    order = sorted(range(len(coll.atoms)), key=lambda i: (
        coll.atoms[i].shape[0], tuple(linops.projection_key(p) for p in coll.atoms[i])))
    contexts = tuple(Context(new, coll.atoms[old], coll.labels[old])
                     for new, old in enumerate(order))
    labels = [c.label for c in contexts]
    if len(set(labels)) != len(labels):
        contexts = tuple(Context(c.id, c.atoms, f"{c.label}#{c.id}")
                         if labels.count(c.label) > 1 else c for c in contexts)

    n = len(contexts)
    leq = np.zeros((n, n), dtype=bool)
    for b in contexts:
        alg = b.algebra
        for a in contexts:
            if a.size <= b.size:
                leq[a.id, b.id] = all(linops.algebra_member(alg, p, 1e-7) for p in a.atoms)

    proto = ContextPoset(dim, contexts, leq, tuple(range(n)), tuple(obs), eps, seed)
    flat = []
    for c in contexts:
        image = proto.phi(proto.psi(c.id)) if obs else 0
        flat.append(image)
    poset = ContextPoset(dim, contexts, leq, tuple(flat), tuple(obs), eps, seed)
    check_poset_axioms(poset)
    return poset


def check_poset_axioms(poset: ContextPoset) -> None:
    """Raise :class:`ClosureViolation` unless every structural axiom holds."""
    leq, flat = poset.leq, poset.flat_map
    ids = poset.ids
    for a in ids:
        if not leq[a, a]:
            raise ClosureViolation("order is not reflexive")
        if not leq[0, a]:
            raise ClosureViolation("C.I is not the bottom element")
        for b in ids:
            if a != b and leq[a, b] and leq[b, a]:
                raise ClosureViolation("order is not antisymmetric")
            if leq[a, b] and b < a:
                raise ClosureViolation("ids are not a linear extension")
            for c in ids:
                if leq[a, b] and leq[b, c] and not leq[a, c]:
                    raise ClosureViolation("order is not transitive")
    for v in ids:
        if not leq[flat[v], v]:
            raise ClosureViolation("flat is not deflationary")
        if flat[flat[v]] != flat[v]:
            raise ClosureViolation("flat is not idempotent")
        for w in ids:
            if leq[w, v] and not leq[flat[w], flat[v]]:
                raise ClosureViolation("flat is not monotone")
            common = [c for c in ids if leq[c, v] and leq[c, w]]
            top = max(common)
            if not all(leq[c, top] for c in common):
                raise ClosureViolation("poset is not closed under intersection")
