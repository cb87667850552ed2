"""Reconstruct a density matrix from a contextual-entropy oracle.

Outline for ``n >= 3``:

1. minimise the oracle over maximal contexts; the minimiser ``V`` is an
   eigenbasis context of the unknown state.  A zero minimum means a pure
   state, handled by :func:`reconstruct_pure`;
2. query the binary contexts ``W_i = {P_i, I - P_i}''`` and invert the
   two-outcome entropy to ``p_i <= 1/2``;
3. choose eigenvalues ``λ_i ∈ {p_i, 1 - p_i}`` summing to one, using the
   sum ``S = Σ p_i`` (at most one ``λ_j`` can exceed one half, in which
   case ``p_j = S/2``).  Two indices matching ``S/2`` leave a rank-two
   ambiguity that a second pass on a rotated frame resolves;
4. check the candidate against the oracle on a sample of fresh contexts.

For ``n = 2`` the section only fixes the state up to ``ρ ↔ I - ρ``
(:func:`reconstruct_dim2`).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .context import Context, MaximalContext, context_from_unitary
from .entropy import (
    LN2,
    SHANNON,
    EntropyKind,
    EntropyOracle,
    contextual_entropy,
    invert_two_outcome,
    two_outcome,
)
from .errors import (
    DimensionMismatch,
    InvalidInput,
    MultipleZeroContexts,
    NoZeroContext,
    TargetOutOfRange,
    UnsupportedKind,
)
from .io import matrix_to_json
from .matrixcore import DensityMatrix, density_from_spectrum, haar_random_unitary, validate_density
from .measure import CheckReport
from .minimizer import MinimizerConfig, MinimizerResult, minimize_over_maximal_contexts
from .policy import DEFAULT


@dataclass(frozen=True)
class ReconstructionConfig:
    minimizer: MinimizerConfig = MinimizerConfig()
    tol_zero: float = 1e-8
    tol_sum: float = 1e-7
    tie_tol: float = 1e-7
    verify_contexts: int = 64
    verify_tol: float = 1e-6
    seed: int = 0
    retry_cap: int = 16
    # smallest admissible 1 - |<e_a|U e_b>|^2 for the complement rotations
    mixing_margin: float = 0.05

    def __post_init__(self):
        for name in ("tol_zero", "tol_sum", "tie_tol", "verify_tol", "mixing_margin"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if self.verify_contexts < 0 or self.retry_cap < 1:
            raise InvalidInput("verify_contexts must be >= 0 and retry_cap >= 1")

    def to_json(self) -> dict:
        return {"minimizer": self.minimizer.to_json(), "tol_zero": self.tol_zero,
                "tol_sum": self.tol_sum, "tie_tol": self.tie_tol,
                "verify_contexts": self.verify_contexts, "verify_tol": self.verify_tol,
                "seed": self.seed, "retry_cap": self.retry_cap}


class InfeasibleReason(str, Enum):
    BINARY_ABOVE_LN2 = "binary_context_above_ln2"
    SUM_EXCEEDS_ONE = "sum_exceeds_one"
    NO_HALF_SUM_MATCH = "no_half_sum_match"
    TOO_MANY_MATCHES = "too_many_half_sum_matches"
    TIE_WITH_NONZERO_REST = "tie_with_nonzero_rest"
    TIE_BREAK_FAILED = "tie_break_failed"
    NO_ZERO_CONTEXT = "no_zero_context"
    MULTIPLE_ZERO_CONTEXTS = "multiple_zero_contexts"
    VERIFICATION_FAILED = "verification_failed"


@dataclass(frozen=True)
class ReconstructionResult:
    diagnostics: dict = field(default_factory=dict, kw_only=True)

    exit_code = None


@dataclass(frozen=True)
class Unique(ReconstructionResult):
    rho: DensityMatrix
    exit_code = 0

    def to_json(self) -> dict:
        return {"outcome": "unique", "rho": matrix_to_json(self.rho), "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class AmbiguousPair(ReconstructionResult):
    rho_a: DensityMatrix
    rho_b: DensityMatrix
    exit_code = 3

    def to_json(self) -> dict:
        return {"outcome": "ambiguous", "rho_a": matrix_to_json(self.rho_a),
                "rho_b": matrix_to_json(self.rho_b), "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class Infeasible(ReconstructionResult):
    reason: InfeasibleReason
    detail: dict = field(default_factory=dict)
    exit_code = 4

    def to_json(self) -> dict:
        return {"outcome": "infeasible", "reason": self.reason.value, "detail": self.detail,
                "diagnostics": self.diagnostics}


class _Tie(Exception):
    def __init__(self, j1: int, j2: int):
        self.j1, self.j2 = j1, j2


class _NoSolution(Exception):
    def __init__(self, reason: InfeasibleReason, **detail):
        self.reason, self.detail = reason, detail


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------

def complement_rotation(n: int, fixed: int, rng, margin: float = 0.05,
                        retry_cap: int = 16) -> np.ndarray:
    """Unitary (in the context frame) fixing basis vector ``fixed`` and
    rotating the others without permuting them.

    ``exp(A)`` for a random anti-Hermitian ``A`` supported on the complement,
    rejected until no rotated vector lies within ``margin`` of a basis axis,
    i.e. ``|<e_a|U e_b>|^2 <= 1 - margin`` on the complement.
    """
    rest = [i for i in range(n) if i != fixed]
    m = len(rest)
    if m < 2:
        raise InvalidInput("a complement of dimension < 2 cannot be rotated without permuting")
    for _ in range(retry_cap):
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        a = (a - a.conj().T) / 2
        block = expm(a * (1.2 / np.linalg.norm(a, 2)))
        if np.max(np.abs(block) ** 2) <= 1 - margin:
            u = np.eye(n, dtype=complex)
            u[np.ix_(rest, rest)] = block
            return u
    raise MultipleZeroContexts("could not draw a non-permuting complement rotation")


def _binary_contexts(basis: np.ndarray) -> list[Context]:
    n = basis.shape[0]
    return [context_from_unitary(basis, [(i,), tuple(j for j in range(n) if j != i)])
            for i in range(n)]


def _invert_all(oracle, contexts, kind, tol_inv) -> np.ndarray:
    values = [oracle(w) for w in contexts]
    high = [(i, v) for i, v in enumerate(values) if v > LN2 + tol_inv]
    if high:
        raise _NoSolution(InfeasibleReason.BINARY_ABOVE_LN2,
                          offending={str(i): v for i, v in high}, ln2=LN2)
    return np.array([invert_two_outcome(kind, min(v, LN2))[0] for v in values]), values


def assign_eigenvalues(p, cfg: ReconstructionConfig = ReconstructionConfig()) -> np.ndarray:
    """Choose ``λ_i ∈ {p_i, 1 - p_i}`` with ``Σ λ_i = 1``.

    Raises ``_Tie`` for the rank-two ambiguity and ``_NoSolution`` when no
    admissible choice exists.  The result is renormalised to unit sum.
    """
    p = np.asarray(p, dtype=float)
    s = float(p.sum())
    if s > 1 + cfg.tol_sum:
        raise _NoSolution(InfeasibleReason.SUM_EXCEEDS_ONE, S=s, p=p.tolist())
    lam = p.copy()
    if s < 1 - cfg.tol_sum:
        matches = [j for j in range(len(p)) if abs(p[j] - s / 2) <= cfg.tie_tol]
        if not matches:
            raise _NoSolution(InfeasibleReason.NO_HALF_SUM_MATCH, S=s, p=p.tolist())
        if len(matches) == 2:
            j1, j2 = matches
            others = [p[i] for i in range(len(p)) if i not in matches]
            if all(x <= cfg.tol_zero for x in others):
                raise _Tie(j1, j2)
            raise _NoSolution(InfeasibleReason.TIE_WITH_NONZERO_REST, S=s, p=p.tolist(),
                              matches=matches)
        if len(matches) > 2:
            raise _NoSolution(InfeasibleReason.TOO_MANY_MATCHES, S=s, p=p.tolist(),
                              matches=matches)
        j = matches[0]
        lam[j] = 1 - p[j]
    return lam / lam.sum()


def _integer_partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _integer_partitions(n - first, first):
            yield (first,) + rest


def sample_contexts(n: int, count: int, seed) -> list[Context]:
    """``count`` Haar-rotated contexts cycling through every rank profile."""
    rng = np.random.default_rng(seed)
    profiles = [pr for pr in _integer_partitions(n) if len(pr) >= 2]
    out = []
    for c in range(count):
        ranks = profiles[c % len(profiles)]
        u = haar_random_unitary(n, rng).matrix
        bounds = np.cumsum((0,) + ranks)
        out.append(context_from_unitary(u, [tuple(range(bounds[i], bounds[i + 1]))
                                            for i in range(len(ranks))]))
    return out


def verify_candidate(rho, oracle: EntropyOracle, contexts: int = 64, tol: float = 1e-6,
                     seed=0, kind: EntropyKind | None = None) -> CheckReport:
    """Largest ``|E_ρ(V) - oracle(V)|`` over a sample of contexts.

    A pass is evidence, not a certificate: only finitely many contexts are
    compared.
    """
    kind = kind or oracle.kind or SHANNON
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if m.shape[0] != oracle.dim:
        raise DimensionMismatch("candidate and oracle dimensions differ")
    worst = 0.0
    for v in sample_contexts(oracle.dim, contexts, seed):
        worst = max(worst, abs(contextual_entropy(m, v, kind) - oracle(v)))
    return CheckReport("verify_candidate", worst, contexts, worst <= tol)


def _kind_for(oracle, kind):
    kind = kind or oracle.kind or SHANNON
    if kind.family == "hartley":
        raise UnsupportedKind("Hartley entropy does not determine the state; "
                              "reconstruction needs order q > 0")
    if kind.family == "chebyshev":
        # -ln p_max is minimal on every context containing the top eigenvector,
        # so the minimiser does not single out an eigenbasis
        raise UnsupportedKind("Chebyshev entropy does not pin an eigenbasis; use a finite order q")
    return kind


def zero_threshold(kind: EntropyKind, tol_zero: float) -> float:
    """Oracle value treated as zero for ``kind``.

    ``tol_zero`` is read on the Shannon scale: it fixes the largest stray
    probability ``p0`` with ``H(p0, 1 - p0) = tol_zero``, and the threshold
    is the two-outcome entropy of ``kind`` at ``p0``.  For ``q < 1`` this is
    much larger than ``tol_zero`` since those entropies grow like ``p0**q``.
    """
    p0 = invert_two_outcome(SHANNON, tol_zero)[0]
    return float(two_outcome(kind, p0))


def _projector_state(basis: np.ndarray, i: int) -> DensityMatrix:
    col = basis[:, i]
    return validate_density(np.outer(col, col.conj()))


# --------------------------------------------------------------------------
# public algorithms
# --------------------------------------------------------------------------

def reconstruct_pure(oracle: EntropyOracle, v0: MaximalContext,
                     cfg: ReconstructionConfig = ReconstructionConfig(), rng=None,
                     kind: EntropyKind | None = None) -> DensityMatrix:
    """Identify which rank-one projection of a zero-entropy context is the state.

    For each axis ``i`` a rotation fixing ``P_i`` and mixing the other axes
    is applied to ``v0``; only the rotation around the state's own axis
    keeps the oracle at zero.
    """
    n = v0.dim
    zero = zero_threshold(_kind_for(oracle, kind), cfg.tol_zero)
    if oracle(v0) > zero:
        raise NoZeroContext("the given maximal context does not read zero")
    if n < 3:
        raise MultipleZeroContexts("in dimension 2 every axis-fixing rotation keeps the context")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    basis = v0.basis
    for _ in range(cfg.retry_cap):
        zeros = []
        for i in range(n):
            u = complement_rotation(n, i, rng, cfg.mixing_margin, cfg.retry_cap)
            vi = MaximalContext(basis @ u, v0._groups, validate=False)
            if oracle(vi) <= zero:
                zeros.append(i)
        if len(zeros) == 1:
            return _projector_state(basis, zeros[0])
        if not zeros:
            raise NoZeroContext("no rotated context reads zero")
    raise MultipleZeroContexts(f"{len(zeros)} rotated contexts read zero after {cfg.retry_cap} tries")


def _minimize(oracle, n, cfg) -> MinimizerResult:
    return minimize_over_maximal_contexts(oracle, n, cfg.minimizer)


def _finish(candidate: DensityMatrix, oracle, cfg, kind, diag) -> ReconstructionResult:
    if cfg.verify_contexts:
        rep = verify_candidate(candidate, oracle, cfg.verify_contexts, cfg.verify_tol,
                               seed=cfg.seed + 1, kind=kind)
        diag["verification"] = rep.to_json()
        if not rep.passed:
            return Infeasible(InfeasibleReason.VERIFICATION_FAILED,
                              {"max_residual": rep.max_residual, "verify_tol": cfg.verify_tol},
                              diagnostics=diag)
    return Unique(candidate, diagnostics=diag)


def reconstruct_dim2(oracle: EntropyOracle, cfg: ReconstructionConfig = ReconstructionConfig(),
                     kind: EntropyKind | None = None) -> ReconstructionResult:
    """Qubit case: the section fixes the state only up to ``ρ ↔ I - ρ``.

    Raises :class:`~ctxent.errors.TargetOutOfRange` when the minimum
    exceeds ``ln 2``.
    """
    if oracle.dim != 2:
        raise DimensionMismatch("reconstruct_dim2 needs a two-dimensional oracle")
    kind = _kind_for(oracle, kind)
    q0 = oracle.queries
    mres = _minimize(oracle, 2, cfg)
    diag = {"branch": "dim2", "min_value": mres.best_value,
            "minimizer_converged": mres.converged}
    lam, _ = invert_two_outcome(kind, mres.best_value)
    diag["lambda"] = lam
    b = mres.best_context.stack
    p, q = b[0], b[1]
    if abs(lam - 0.5) <= cfg.tie_tol:
        res = _finish(validate_density(np.eye(2) / 2), oracle, cfg, kind, diag)
        res.diagnostics["queries"] = oracle.queries - q0
        return res
    rho_a = validate_density(lam * p + (1 - lam) * q)
    rho_b = validate_density((1 - lam) * p + lam * q)
    if cfg.verify_contexts:
        reports = [verify_candidate(r, oracle, cfg.verify_contexts, cfg.verify_tol,
                                    seed=cfg.seed + 1, kind=kind) for r in (rho_a, rho_b)]
        diag["verification"] = [r.to_json() for r in reports]
        if not all(r.passed for r in reports):
            return Infeasible(InfeasibleReason.VERIFICATION_FAILED,
                              {"max_residual": max(r.max_residual for r in reports)},
                              diagnostics=diag)
    diag["queries"] = oracle.queries - q0
    return AmbiguousPair(rho_a, rho_b, diagnostics=diag)


def reconstruct(oracle: EntropyOracle, n: int | None = None,
                cfg: ReconstructionConfig = ReconstructionConfig(),
                kind: EntropyKind | None = None) -> ReconstructionResult:
    """Run the full reconstruction; infeasibility is returned, not raised.

    ``kind`` defaults to the oracle's own kind (Shannon if unset).  Only
    :class:`~ctxent.errors.BudgetExhausted` and input errors propagate.
    """
    n = oracle.dim if n is None else n
    if n != oracle.dim:
        raise DimensionMismatch(f"oracle dimension {oracle.dim} vs n = {n}")
    if n < 2:
        raise DimensionMismatch("reconstruction needs n >= 2")
    kind = _kind_for(oracle, kind)
    if n == 2:
        # before the pure-state shortcut: a pure qubit maps to the pair {P, I - P}
        try:
            return reconstruct_dim2(oracle, cfg, kind)
        except TargetOutOfRange as exc:
            return Infeasible(InfeasibleReason.BINARY_ABOVE_LN2, {"message": str(exc)},
                              diagnostics={"branch": "dim2"})

    q0 = oracle.queries
    rng = np.random.default_rng(cfg.seed)
    mres = _minimize(oracle, n, cfg)
    basis = mres.best_context.basis
    diag = {"kind": str(kind), "min_value": mres.best_value,
            "minimizer_converged": mres.converged}

    def done(result):
        result.diagnostics["queries"] = oracle.queries - q0
        return result

    if mres.best_value <= zero_threshold(kind, cfg.tol_zero):
        diag["branch"] = "pure"
        try:
            rho = reconstruct_pure(oracle, mres.best_context, cfg, rng, kind)
        except NoZeroContext as exc:
            return done(Infeasible(InfeasibleReason.NO_ZERO_CONTEXT, {"message": str(exc)},
                                   diagnostics=diag))
        except MultipleZeroContexts as exc:
            return done(Infeasible(InfeasibleReason.MULTIPLE_ZERO_CONTEXTS,
                                   {"message": str(exc)}, diagnostics=diag))
        return done(_finish(rho, oracle, cfg, kind, diag))

    diag["branch"] = "binary_contexts"
    try:
        p, values = _invert_all(oracle, _binary_contexts(basis), kind, DEFAULT.inv)
        diag.update(binary_values=values, p=p.tolist(), S=float(p.sum()))
        try:
            lam = assign_eigenvalues(p, cfg)
            diag["branch"] = "S=1" if abs(p.sum() - 1) <= cfg.tol_sum else "S<1"
        except _Tie as tie:
            diag["branch"] = "tie"
            lam = _break_tie(oracle, basis, p, tie.j1, tie.j2, kind, cfg, rng, diag)
    except _NoSolution as exc:
        return done(Infeasible(exc.reason, exc.detail, diagnostics=diag))

    diag["eigenvalues"] = lam.tolist()
    candidate = density_from_spectrum(lam, basis)
    return done(_finish(candidate, oracle, cfg, kind, diag))


def _break_tie(oracle, basis, p, j1, j2, kind, cfg, rng, diag) -> np.ndarray:
    """Decide between ``p P_j1 + (1-p) P_j2`` and the swap on a rotated frame.

    The rotation fixes ``P_j1``, so the ``j1`` entry of the rotated
    diagonal is the eigenvalue ``λ_j1`` itself.
    """
    n = basis.shape[0]
    attempts = []
    for _ in range(cfg.retry_cap):
        u = complement_rotation(n, j1, rng, cfg.mixing_margin, cfg.retry_cap)
        x, _ = _invert_all(oracle, _binary_contexts(basis @ u), kind, DEFAULT.inv)
        try:
            d = assign_eigenvalues(x, cfg)
        except (_Tie, _NoSolution) as exc:
            attempts.append(getattr(exc, "reason", "tie"))
            continue
        pj = p[j1]
        lam = np.zeros(n)
        if abs(d[j1] - pj) <= abs(d[j1] - (1 - pj)):
            lam[j1], lam[j2] = pj, 1 - pj
        else:
            lam[j1], lam[j2] = 1 - pj, pj
        diag["tie_break"] = {"j1": j1, "j2": j2, "rotated_diagonal": d.tolist(),
                             "attempts": len(attempts) + 1}
        return lam
    raise _NoSolution(InfeasibleReason.TIE_BREAK_FAILED, j1=j1, j2=j2,
                      attempts=[str(a) for a in attempts])


def reconstruct_state(rho, kind: EntropyKind = SHANNON,
                      cfg: ReconstructionConfig = ReconstructionConfig()) -> ReconstructionResult:
    """Convenience round trip: reconstruct from the oracle backed by ``rho``."""
    oracle = EntropyOracle.from_state(rho, kind)
    return reconstruct(oracle, oracle.dim, cfg, kind)
