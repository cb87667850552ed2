"""Dense complex linear algebra for small systems.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The wrappers
:class:`DensityMatrix`, :class:`Projection` and :class:`Unitary` only exist
to certify that a matrix passed validation; each holds a read-only copy.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import (
    BadRank,
    DimensionMismatch,
    NonFinite,
    NotHermitian,
    NotPositive,
    NotProjection,
    NotSquare,
    NotUnitary,
    NotUnitTrace,
)
from .policy import DEFAULT, Tolerances


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex array (read-only copy)."""
    if isinstance(m, (DensityMatrix, Projection, Unitary)):
        return m.matrix
    a = np.array(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has NaN or Inf entries")
    a.setflags(write=False)
    return a


def _square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise NotSquare(f"matrix is {a.shape[0]}x{a.shape[1]}, expected square")
    return a


def maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def hermitian_residual(a: np.ndarray) -> float:
    return maxabs(a - a.conj().T)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Spectrum, descending, clamped into [0, 1] for reporting only."""
        return np.clip(np.linalg.eigvalsh(self.matrix)[::-1], 0.0, 1.0)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Projection:
    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def H(self) -> np.ndarray:
        return self.matrix.conj().T


class Keep(Enum):
    FIRST = "first"
    SECOND = "second"


def validate_density(m, tol: Tolerances = DEFAULT) -> DensityMatrix:
    """Certify ``m`` as a density matrix.

    Raises NotHermitian, NotUnitTrace or NotPositive naming the measured
    residual.  The matrix is stored unchanged.
    """
    a = _square(m)
    r = hermitian_residual(a)
    if r > tol.herm:
        raise NotHermitian(f"Hermiticity residual {r:.3e} exceeds {tol.herm:.1e}")
    tr = np.trace(a).real
    if abs(tr - 1.0) > tol.trace:
        raise NotUnitTrace(f"trace residual {abs(tr - 1.0):.3e} exceeds {tol.trace:.1e}")
    lo = float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])
    if lo < -tol.psd:
        raise NotPositive(f"minimum eigenvalue {lo:.3e} below -{tol.psd:.1e}")
    return DensityMatrix(_frozen(a))


def validate_projection(m, tol: Tolerances = DEFAULT) -> Projection:
    a = _square(m)
    r = hermitian_residual(a)
    if r > tol.herm:
        raise NotHermitian(f"projection Hermiticity residual {r:.3e}")
    r = maxabs(a @ a - a)
    if r > tol.proj:
        raise NotProjection(f"idempotency residual {r:.3e} exceeds {tol.proj:.1e}")
    tr = np.trace(a).real
    rank = int(round(tr))
    if abs(tr - rank) > tol.trace:
        raise NotProjection(f"trace {tr!r} is not an integer rank")
    return Projection(_frozen(a), rank)


def validate_unitary(m, tol: Tolerances = DEFAULT) -> Unitary:
    a = _square(m)
    r = maxabs(a @ a.conj().T - np.eye(a.shape[0]))
    if r > tol.unitary:
        raise NotUnitary(f"unitarity residual {r:.3e} exceeds {tol.unitary:.1e}")
    return Unitary(_frozen(a))


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(rho, dims: tuple[int, int], keep: Keep | str = Keep.FIRST,
                  tol: Tolerances = DEFAULT) -> DensityMatrix:
    """Reduced state of a bipartite ``n*m`` system.

    ``keep=FIRST`` traces out the second factor and returns the n×n marginal.
    """
    a = _square(rho)
    n, m = dims
    if a.shape[0] != n * m:
        raise DimensionMismatch(f"state has dimension {a.shape[0]}, dims give {n}*{m}")
    t = a.reshape(n, m, n, m)
    if Keep(keep) is Keep.FIRST:
        red = np.einsum("ijkj->ik", t)
    else:
        red = np.einsum("ijil->jl", t)
    return validate_density(red, tol)


def _phase_fix(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    out = vecs.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        idx = int(np.argmax(np.abs(col) > 1e-12))
        z = col[idx]
        if abs(z) > 0:
            out[:, c] = col * (abs(z) / z)
    return out


def eig_hermitian(m, tol: Tolerances = DEFAULT) -> tuple[np.ndarray, Unitary]:
    """Eigendecomposition ``m = U diag(w) U†`` with ``w`` descending.

    Degenerate eigenvalues (within ``tol.eig``) are ordered by the
    lexicographic order of their phase-fixed eigenvectors, which makes the
    output deterministic.
    """
    a = _square(m)
    r = hermitian_residual(a)
    if r > tol.herm:
        raise NotHermitian(f"Hermiticity residual {r:.3e} exceeds {tol.herm:.1e}")
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    w, v = w[::-1].copy(), _phase_fix(v[:, ::-1])

    order = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[start] - w[i] > tol.eig:
            block = list(range(start, i))
            keys = {c: tuple(np.round(np.concatenate([v[:, c].real, v[:, c].imag]), 10))
                    for c in block}
            order.extend(sorted(block, key=lambda c: keys[c], reverse=True))
            start = i
    v = v[:, order]
    w = w[order]
    return w, Unitary(_frozen(v))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_random_unitary(n: int, seed=None) -> Unitary:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The diagonal of R is made real positive so the distribution is exactly
    Haar.  Deterministic for an integer ``seed``.
    """
    if n < 1:
        raise DimensionMismatch("n must be >= 1")
    rng = _rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return Unitary(_frozen(q))


def random_density(n: int, rank: int | None = None, seed=None,
                   tol: Tolerances = DEFAULT) -> DensityMatrix:
    """Random state ``U diag(p) U†`` with ``p`` uniform on the simplex of
    ``rank`` nonzero weights and ``U`` Haar."""
    rank = n if rank is None else rank
    if not 1 <= rank <= n:
        raise BadRank(f"rank {rank} outside [1, {n}]")
    rng = _rng(seed)
    p = np.zeros(n)
    p[:rank] = rng.dirichlet(np.ones(rank))
    u = haar_random_unitary(n, rng).matrix
    return density_from_spectrum(p, u, tol)


def density_from_spectrum(p, u, tol: Tolerances = DEFAULT) -> DensityMatrix:
    """``U diag(p) U†`` symmetrised to exact Hermiticity."""
    u = as_matrix(u)
    rho = (u * np.asarray(p, dtype=float)) @ u.conj().T
    rho = (rho + rho.conj().T) / 2
    return validate_density(rho, tol)


def pure_state(psi, tol: Tolerances = DEFAULT) -> DensityMatrix:
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    return validate_density(np.outer(psi, psi.conj()), tol)


def von_neumann_entropy(rho) -> float:
    """``-Σ λ ln λ`` from the spectrum; the reference value for minimizer checks."""
    w, _ = eig_hermitian(rho)
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def trace_distance(a, b) -> float:
    """``½‖a − b‖₁``."""
    d = as_matrix(a) - as_matrix(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2))))


def conjugate(u, m) -> np.ndarray:
    """``U m U†``."""
    u = as_matrix(u)
    return u @ as_matrix(m) @ u.conj().T
