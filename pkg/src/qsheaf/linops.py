"""Dense complex linear algebra on a fixed Hilbert-space dimension.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``.
Projections, density matrices and states are arrays that passed the matching
validator; there are no wrapper classes for them.  Commutative algebras are
carried around as an :class:`AlgebraBasis`, an orthonormal (Frobenius) basis
of a unital ``*``-subalgebra of ``M_n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import InvalidInput, NotCommutative

EPS = 1e-9
MAX_DIM = 16
EIGEN_GAP = 1e-6
ROUND_DECIMALS = 6
MAX_RETRIES = 5
DEFAULT_SEED = 0


def as_matrix(m, dim: int | None = None) -> np.ndarray:
    """Coerce ``m`` to a finite square complex array, optionally of size ``dim``."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[0] > MAX_DIM:
        raise InvalidInput(f"dimension {arr.shape[0]} outside 1..{MAX_DIM}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInput(f"dimension mismatch: {arr.shape[0]} != {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("matrix has non-finite entries")
    return arr


def _same_dim(*mats: np.ndarray) -> None:
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise InvalidInput(f"dimension mismatch: {sorted(shapes)}")


def is_hermitian(m: np.ndarray, eps: float = EPS) -> bool:
    m = as_matrix(m)
    return float(np.linalg.norm(m - m.conj().T)) <= eps


def is_projection(m: np.ndarray, eps: float = EPS) -> bool:
    """True iff ``m`` is self-adjoint and idempotent up to ``eps`` (Frobenius)."""
    m = as_matrix(m)
    return is_hermitian(m, eps) and float(np.linalg.norm(m @ m - m)) <= eps


def loewner_leq(p: np.ndarray, q: np.ndarray, eps: float = EPS) -> bool:
    """Range inclusion of projections: ``p <= q`` iff ``q p = p``."""
    p, q = as_matrix(p), as_matrix(q)
    _same_dim(p, q)
    return float(np.linalg.norm(q @ p - p)) <= eps


def as_projection(m, dim: int | None = None, eps: float = EPS) -> np.ndarray:
    arr = as_matrix(m, dim)
    if not is_projection(arr, eps):
        raise InvalidInput("matrix is not an orthogonal projection")
    return arr


def as_density(m, dim: int | None = None, eps: float = EPS) -> np.ndarray:
    """Validate a density matrix: Hermitian, positive semidefinite, unit trace."""
    arr = as_matrix(m, dim)
    if not is_hermitian(arr, eps):
        raise InvalidInput("density matrix is not Hermitian")
    if abs(np.trace(arr) - 1.0) > eps:
        raise InvalidInput("density matrix trace differs from 1")
    if np.linalg.eigvalsh((arr + arr.conj().T) / 2).min() < -eps:
        raise InvalidInput("density matrix has a negative eigenvalue")
    return arr


def as_unit_vector(v, dim: int | None = None, eps: float = EPS) -> np.ndarray:
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInput(f"vector dimension {arr.shape[0]} != {dim}")
    if not np.all(np.isfinite(arr)) or abs(np.linalg.norm(arr) - 1.0) > eps:
        raise InvalidInput("state vector must have unit norm")
    return arr


def ket_projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())


@dataclass(frozen=True, eq=False)
class AlgebraBasis:
    """Orthonormal basis (Frobenius inner product) of a unital *-subalgebra."""

    dim: int
    basis: np.ndarray  # shape (k, dim, dim)
    commutative: bool

    def __len__(self) -> int:
        return self.basis.shape[0]

    def project(self, m: np.ndarray) -> np.ndarray:
        coeffs = np.einsum("kij,ij->k", self.basis.conj(), m)
        return np.einsum("k,kij->ij", coeffs, self.basis)


def _full_algebra(n: int) -> np.ndarray:
    units = np.zeros((n * n, n, n), dtype=np.complex128)
    for idx in range(n * n):
        units[idx, idx // n, idx % n] = 1.0
    return units


def _basis_is_commutative(basis: np.ndarray, eps: float) -> bool:
    for i in range(basis.shape[0]):
        for j in range(i + 1, basis.shape[0]):
            a, b = basis[i], basis[j]
            if np.linalg.norm(a @ b - b @ a) > eps:
                return False
    return True


def _null_space(m: np.ndarray, rcond: float, atol: float) -> np.ndarray:
    """Right null space; singular values below ``max(rcond * s_max, atol)`` count as zero."""
    _, sv, vh = np.linalg.svd(m)
    cut = max(rcond * (sv[0] if sv.size else 0.0), atol)
    rank = int(np.sum(sv > cut))
    return vh[rank:].conj().T


def commutant(mats: Sequence[np.ndarray], dim: int | None = None,
              eps: float = EPS) -> AlgebraBasis:
    """Basis of ``{X : XA = AX and XA* = A*X for all A in mats}``.

    Solved as the null space of the stacked row-major commutation system
    ``(I (x) A^T - A (x) I) vec(X) = 0``.  An empty ``mats`` needs ``dim``
    and yields the full matrix algebra.
    """
    mats = [as_matrix(m) for m in mats]
    if not mats:
        if dim is None:
            raise InvalidInput("commutant of an empty set needs an explicit dimension")
        full = _full_algebra(dim)
        return AlgebraBasis(dim, full, dim == 1)
    _same_dim(*mats)
    n = mats[0].shape[0]
    if dim is not None and dim != n:
        raise InvalidInput(f"dimension mismatch: {n} != {dim}")
    eye = np.eye(n)
    blocks = []
    for a in mats:
        for b in (a, a.conj().T):
            blocks.append(np.kron(eye, b.T) - np.kron(b, eye))
    # absolute floor: a generator that is a multiple of I up to roundoff gives a pure-noise system
    ns = _null_space(np.vstack(blocks), 1e-10, eps)
    basis = ns.T.reshape(-1, n, n)
    return AlgebraBasis(n, basis, _basis_is_commutative(basis, max(eps, 1e-8)))


def generated_algebra(mats: Sequence[np.ndarray], dim: int | None = None,
                      eps: float = EPS) -> AlgebraBasis:
    """Unital *-algebra generated by ``mats``, computed as the double commutant."""
    mats = [as_matrix(m) for m in mats]
    if not mats:
        if dim is None:
            raise InvalidInput("generated algebra of an empty set needs a dimension")
        ident = np.eye(dim, dtype=np.complex128)[None] / np.sqrt(dim)
        return AlgebraBasis(dim, ident, True)
    first = commutant(mats, dim, eps)
    return commutant(list(first.basis), first.dim, eps)


def algebra_member(alg: AlgebraBasis, m: np.ndarray, eps: float = EPS) -> bool:
    """Frobenius distance from ``m`` to the span of ``alg`` is at most ``eps``."""
    m = as_matrix(m, alg.dim)
    return float(np.linalg.norm(m - alg.project(m))) <= eps


def _hermitian_generators(alg: AlgebraBasis) -> np.ndarray:
    herm = []
    for b in alg.basis:
        herm.append((b + b.conj().T) / 2)
        herm.append((b - b.conj().T) / 2j)
    return np.array(herm)


def _corner_dimension(p: np.ndarray, alg: AlgebraBasis) -> int:
    corner = np.array([(p @ b @ p).reshape(-1) for b in alg.basis])
    sv = np.linalg.svd(corner, compute_uv=False)
    return int(np.sum(sv > 1e-8 * max(1.0, sv[0] if sv.size else 1.0)))


def projection_key(p: np.ndarray) -> tuple:
    """Rounded real/imaginary entries, used for canonical ordering."""
    r = np.round(p, ROUND_DECIMALS) + 0.0  # drops negative zeros
    return tuple(np.stack([r.real, r.imag], axis=-1).reshape(-1).tolist())


def minimal_projections(alg: AlgebraBasis, seed: int = DEFAULT_SEED,
                        eps: float = EPS) -> list[np.ndarray]:
    """Minimal projections (atoms) of a commutative algebra in canonical order.

    A random real combination of a Hermitian spanning set is diagonalised and
    eigenspaces closer than ``EIGEN_GAP`` are merged.  Each candidate must lie
    in the algebra and cut out a one-dimensional corner ``pAp``; otherwise the
    decomposition is retried with a fresh random element.
    """
    if not alg.commutative:
        raise NotCommutative("minimal projections need a commutative algebra")
    herm = _hermitian_generators(alg)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        coeffs = rng.uniform(-1.0, 1.0, size=herm.shape[0])
        h = np.einsum("k,kij->ij", coeffs, herm)
        h = (h + h.conj().T) / 2
        vals, vecs = np.linalg.eigh(h)
        groups: list[list[int]] = [[0]]
        for i in range(1, len(vals)):
            if vals[i] - vals[i - 1] < EIGEN_GAP:
                groups[-1].append(i)
            else:
                groups.append([i])
        projs = []
        for g in groups:
            v = vecs[:, g]
            projs.append(v @ v.conj().T)
        ok = all(algebra_member(alg, p, 1e-7) and _corner_dimension(p, alg) == 1
                 for p in projs)
        if ok and len(projs) == len(alg):
            return sorted(projs, key=projection_key)
    raise NotCommutative("could not isolate minimal projections; algebra is "
                         "ill-conditioned or not commutative")


def matrix_exp_i(h: np.ndarray, eps: float = EPS) -> np.ndarray:
    """``exp(iH)`` for Hermitian ``H`` via its spectral decomposition."""
    h = as_matrix(h)
    if not is_hermitian(h, eps):
        raise InvalidInput("matrix_exp_i needs a Hermitian argument")
    vals, vecs = np.linalg.eigh((h + h.conj().T) / 2)
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


def span_intersection(a: AlgebraBasis, b: AlgebraBasis, eps: float = EPS) -> AlgebraBasis:
    """Orthonormal basis of ``span(a) & span(b)``."""
    if a.dim != b.dim:
        raise InvalidInput("dimension mismatch")
    n = a.dim
    ma = a.basis.reshape(len(a), -1).T
    mb = b.basis.reshape(len(b), -1).T
    ns = null_space(np.hstack([ma, -mb]), rcond=1e-8)
    vecs = ma @ ns[: len(a)]
    if vecs.shape[1] == 0:
        raise InvalidInput("intersection of unital algebras cannot be trivial")
    q, _ = np.linalg.qr(vecs)
    basis = q.T.reshape(-1, n, n)
    return AlgebraBasis(n, basis, _basis_is_commutative(basis, max(eps, 1e-8)))


def algebra_from_projections(projs: Iterable[np.ndarray]) -> AlgebraBasis:
    """The commutative algebra spanned by pairwise-orthogonal projections."""
    projs = list(projs)
    n = projs[0].shape[0]
    basis = np.array([p / np.sqrt(max(np.trace(p).real, 1e-300)) for p in projs])
    return AlgebraBasis(n, basis, True)


def expectation(rho: np.ndarray, p: np.ndarray) -> float:
    """``tr(rho p)`` (real part)."""
    return float(np.real(np.trace(rho @ p)))
