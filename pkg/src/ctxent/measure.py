"""Contextual measures: a state evaluated on the projections of a context.

Also holds the checks of the measure axioms (normalisation, finite
additivity, monotonicity, context independence) and of compatibility with
partial traces.  Checks never raise on failure; they return a report.
"""

from dataclasses import dataclass

import numpy as np

from .context import (
    Context,
    context_from_unitary,
    maximal_context_from_unitary,
    refines,
    trivial_tensor,
)
from .errors import DimensionMismatch, NotARefinement, NumericalBreakdown
from .matrixcore import (
    DensityMatrix,
    Keep,
    haar_random_unitary,
    partial_trace,
)
from .policy import DEFAULT, Tolerances


@dataclass(frozen=True, eq=False)
class ContextProbability:
    context: Context
    probs: np.ndarray


@dataclass(frozen=True)
class CheckReport:
    check: str
    max_residual: float
    trials: int
    passed: bool

    def to_json(self) -> dict:
        return {"check": self.check, "max_residual": self.max_residual,
                "trials": self.trials, "pass": self.passed}


def clamp_probabilities(p: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Snap entries within ``tol.prob`` of 0 or 1; raise on larger excursions."""
    p = np.asarray(p, dtype=float)
    if p.min() < -tol.prob or p.max() > 1 + tol.prob:
        raise NumericalBreakdown(f"probabilities {p} leave [0, 1] beyond {tol.prob:.1e}")
    return np.clip(p, 0.0, 1.0)


def _state_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def measure_eval(rho, v: Context, tol: Tolerances = DEFAULT) -> ContextProbability:
    """``(Tr ρP_1, ..., Tr ρP_k)`` in the canonical order of ``v``."""
    m = _state_matrix(rho)
    if m.shape[0] != v.dim:
        raise DimensionMismatch(f"state dimension {m.shape[0]} vs context dimension {v.dim}")
    return ContextProbability(v, clamp_probabilities(v.probabilities(m), tol))


def projection_value(rho, p) -> float:
    """``m(P) = Tr(ρ P)`` for a raw projection (zero allowed)."""
    return float(np.trace(_state_matrix(rho) @ np.asarray(p)).real)


def _random_partition(k: int, rng, min_blocks: int = 2):
    blocks = int(rng.integers(min_blocks, k + 1))
    labels = np.concatenate([np.arange(blocks), rng.integers(0, blocks, k - blocks)])
    rng.shuffle(labels)
    return [tuple(int(i) for i in np.flatnonzero(labels == b)) for b in range(blocks)]


def random_context(n: int, rng, maximal: bool = False) -> Context:
    """Haar-rotated coarse-graining with a random rank profile."""
    u = haar_random_unitary(n, rng).matrix
    if maximal or n == 2:
        return maximal_context_from_unitary(u)
    return context_from_unitary(u, _random_partition(n, rng))


def check_finite_additivity(rho, trials: int = 100, seed: int = 0,
                            tol: float = 1e-10) -> list[CheckReport]:
    """Measure axioms on random contexts.

    For each trial a random maximal basis is drawn; ``P`` and ``Q`` are
    disjoint sums of its rank-one projections and ``R >= P``.  Checked:
    ``m(I) = 1``, ``m(0) = 0``, ``m(P+Q) = m(P) + m(Q)`` and ``m(P) <= m(R)``.
    """
    m = _state_matrix(rho)
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    norm = abs(projection_value(m, eye) - 1.0)
    zero = abs(projection_value(m, np.zeros((n, n))))
    add = mono = 0.0
    for _ in range(trials):
        u = haar_random_unitary(n, rng).matrix
        perm = rng.permutation(n)
        a = int(rng.integers(1, n)) if n > 1 else 1
        b = int(rng.integers(a, n + 1))
        p_cols, q_cols = perm[:a], perm[a:b]
        proj = lambda cols: u[:, cols] @ u[:, cols].conj().T
        P, Q = proj(p_cols), proj(q_cols)
        add = max(add, abs(projection_value(m, P + Q) - projection_value(m, P) - projection_value(m, Q)))
        R = proj(perm[:b])
        mono = max(mono, projection_value(m, P) - projection_value(m, R))
    return [
        CheckReport("normalisation", norm, 1, norm <= tol),
        CheckReport("zero", zero, 1, zero <= tol),
        CheckReport("finite_additivity", add, trials, add <= tol),
        CheckReport("monotonicity", max(mono, 0.0), trials, mono <= tol),
    ]


def check_context_independence(rho, trials: int = 100, seed: int = 0,
                               tol: float = 1e-10) -> CheckReport:
    """The value of a projection does not depend on the context holding it.

    ``P`` is embedded in two contexts that differ on its complement, and the
    corresponding entries of both probability vectors are compared.
    """
    m = _state_matrix(rho)
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = haar_random_unitary(n, rng).matrix
        r = int(rng.integers(1, n))
        # rotate only the complement of the first r columns
        w = np.eye(n, dtype=complex)
        w[r:, r:] = haar_random_unitary(n - r, rng).matrix
        u2 = u @ w
        part = [tuple(range(r))] + [(i,) for i in range(r, n)]
        v1 = context_from_unitary(u, part)
        v2 = context_from_unitary(u2, part)
        p1 = v1.raw_probabilities(m)[0]
        p2 = v2.raw_probabilities(m)[0]
        worst = max(worst, abs(p1 - p2))
    return CheckReport("context_independence", worst, trials, worst <= tol)


def check_partial_trace_compat(rho, n: int, m: int, v: Context, w: Context,
                               tol: float = 1e-10) -> CheckReport:
    """Marginal contexts see the reduced states.

    Compares ``μ_ρ`` on ``V ⊗ ℂI_m`` with ``μ_{ρ₁}`` on ``V`` and ``μ_ρ`` on
    ``ℂI_n ⊗ W`` with ``μ_{ρ₂}`` on ``W`` entrywise.
    """
    mat = _state_matrix(rho)
    if mat.shape[0] != n * m or v.dim != n or w.dim != m:
        raise DimensionMismatch("state and contexts do not match the n*m split")
    rho1 = partial_trace(mat, (n, m), Keep.FIRST)
    rho2 = partial_trace(mat, (n, m), Keep.SECOND)
    # V ⊗ I keeps V's canonical group order on raw probabilities
    lhs1 = trivial_tensor(v, m, first=True).raw_probabilities(mat)
    rhs1 = np.array([np.trace(rho1.matrix @ p).real for p in v.stack])
    lhs2 = trivial_tensor(w, n, first=False).raw_probabilities(mat)
    rhs2 = np.array([np.trace(rho2.matrix @ q).real for q in w.stack])
    r = float(max(np.max(np.abs(lhs1 - rhs1)), np.max(np.abs(lhs2 - rhs2))))
    return CheckReport("partial_trace_compat", r, 1, r <= tol)


def coarse_grain_consistency(rho, v_fine: Context, v_coarse: Context) -> float:
    """Residual between ``μ`` on ``v_coarse`` and groupwise sums on ``v_fine``."""
    parts = refines(v_fine, v_coarse)
    if parts is None:
        raise NotARefinement("v_fine does not refine v_coarse")
    m = _state_matrix(rho)
    fine = v_fine.probabilities(m)
    coarse = v_coarse.probabilities(m)
    return float(max(abs(coarse[a] - fine[part].sum()) for a, part in enumerate(parts)))
