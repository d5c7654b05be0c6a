"""Ready-made context posets: the qubit example, Kochen-Specker ray sets, random posets."""

from __future__ import annotations

import itertools

import numpy as np

from .contexts import ContextPoset, build_poset

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

KS_MAX_CONTEXTS = 256


def fixture_a() -> ContextPoset:
    """Qubit with quantized observable ``a = sigma_z`` and a seed context generated by ``sigma_x``.

    Contexts ``CI < D`` and ``CI < Vx``; flat fixes ``CI`` and ``D`` and sends ``Vx`` to ``CI``.
    """
    return build_poset({"a": SIGMA_Z}, {"D": [SIGMA_Z], "Vx": [SIGMA_X]}, dim=2)


def trivial_fixture(dim: int = 2) -> ContextPoset:
    """Only the scalar context."""
    return build_poset({}, {}, dim=dim)


def single_context_fixture() -> ContextPoset:
    """Qubit with one maximal context fixed by flat."""
    return build_poset({"a": SIGMA_Z}, {}, dim=2)


def _ray_projector(ray) -> np.ndarray:
    v = np.asarray(ray, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def ray_contexts(rays, bases) -> dict[str, list[np.ndarray]]:
    """Seed contexts, one per orthogonal basis given by ray indices."""
    return {f"B{k}": [_ray_projector(rays[i]) for i in basis] for k, basis in enumerate(bases)}


CABELLO18_RAYS = [
    (0, 0, 0, 1), (0, 0, 1, 0), (1, 1, 0, 0), (1, -1, 0, 0),
    (0, 1, 0, 0), (1, 0, 1, 0), (1, 0, -1, 0),
    (1, -1, 1, -1), (1, -1, -1, 1), (0, 0, 1, 1),
    (1, 1, 1, 1), (0, 1, 0, -1),
    (1, 0, 0, 1), (1, 0, 0, -1), (0, 1, -1, 0),
    (1, 1, -1, 1), (1, 1, 1, -1), (-1, 1, 1, 1),
]

CABELLO18_BASES = [
    (0, 1, 2, 3), (0, 4, 5, 6), (1, 4, 12, 13), (2, 7, 8, 9), (3, 9, 15, 16),
    (5, 11, 15, 17), (6, 7, 10, 11), (8, 10, 13, 14), (12, 14, 16, 17),
]


def cabello18() -> ContextPoset:
    """18 rays in dimension 4 forming 9 orthogonal bases, each ray in exactly two."""
    seeds = ray_contexts(CABELLO18_RAYS, CABELLO18_BASES)
    return build_poset({}, seeds, dim=4, max_contexts=KS_MAX_CONTEXTS)


def peres33_rays() -> list[tuple[float, ...]]:
    """The 33 rays of Peres' set (up to sign)."""
    r = np.sqrt(2.0)
    rays: set[tuple[float, ...]] = set()

    def add(v):
        v = np.array(v, dtype=float)
        k = next(i for i in range(3) if abs(v[i]) > 1e-12)
        if v[k] < 0:
            v = -v
        rays.add(tuple(np.round(v, 12)))

    for perm in set(itertools.permutations((1, 0, 0))):
        add(perm)
    for perm in set(itertools.permutations((0, 1, 1))) | set(itertools.permutations((0, 1, -1))):
        add(perm)
    for s in (1, -1):
        for perm in set(itertools.permutations((0, 1, s * r))):
            add(perm)
    for s1, s2 in itertools.product((1, -1), repeat=2):
        for perm in set(itertools.permutations((s1, s2, r))):
            add(perm)
    return sorted(rays)


def orthogonal_cliques(rays) -> list[tuple[int, ...]]:
    """Maximal sets of pairwise orthogonal rays, as sorted index tuples."""
    vs = [np.asarray(r, dtype=np.complex128) / np.linalg.norm(r) for r in rays]
    n = len(vs)
    orth = [[abs(np.vdot(vs[i], vs[j])) < 1e-9 for j in range(n)] for i in range(n)]
    found: list[tuple[int, ...]] = []

    def grow(clique, cands):
        if not cands:
            found.append(tuple(clique))
            return
        for k, c in enumerate(cands):
            grow(clique + [c], [d for d in cands[k + 1:] if orth[c][d]])

    for i in range(n):
        grow([i], [j for j in range(i + 1, n) if orth[i][j]])
    sets = [frozenset(c) for c in found]
    return sorted(tuple(sorted(c)) for c in set(sets) if not any(c < d for d in sets))


def peres33() -> ContextPoset:
    """Peres' 33 rays in dimension 3, one context per maximal orthogonal set.

    Two orthogonal rays with no third partner in the set still generate a
    maximal context: the complement of their span is the third atom.
    """
    rays = peres33_rays()
    bases = orthogonal_cliques(rays)
    seeds = {}
    for k, basis in enumerate(bases):
        seeds[f"B{k}"] = [_ray_projector(rays[i]) for i in basis]
    return build_poset({}, seeds, dim=3, max_contexts=KS_MAX_CONTEXTS)


def _random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_fixture(seed: int, max_contexts: int = 12) -> ContextPoset:
    """Small random poset: commuting observables in one eigenbasis plus a seed context.

    Dimension is 2 to 4.  Observables are coarse functions of a random basis,
    so flat is usually non-trivial; the seed context uses a second basis.
    Retries with a derived seed until the poset has at most ``max_contexts``
    contexts.
    """
    rng = np.random.default_rng(seed)
    for _ in range(50):
        n = int(rng.integers(2, 5))
        u = _random_unitary(rng, n)
        k = int(rng.integers(1, 3))
        obs = {}
        for i in range(k):
            eigs = rng.integers(0, 2, size=n).astype(float) * (i + 1)
            obs[f"a{i}"] = u @ np.diag(eigs) @ u.conj().T
        w = u if rng.random() < 0.3 else _random_unitary(rng, n)
        blocks = rng.integers(0, 2, size=n).astype(float)
        seeds = {"S": [w @ np.diag(blocks + np.arange(n) * (rng.random() < 0.5)) @ w.conj().T]}
        try:
            poset = build_poset(obs, seeds, dim=n, max_contexts=max_contexts)
        except Exception:
            continue
        return poset
    raise RuntimeError("could not draw a small random fixture")
