"""Randomised property batteries for contextual measures and entropies.

Each battery takes a dimension, a seed and a trial count and returns a
list of :class:`~ctxent.measure.CheckReport`.  ``run_batteries`` runs a
selection over several seeds and merges the reports per check.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .context import (
    Context,
    coarsen,
    context_distance,
    context_from_unitary,
    split_context,
)
from .entropy import (
    SHANNON,
    EntropyKind,
    check_recursion,
    coarse_grain,
    contextual_entropy,
    renyi,
)
from .errors import InvalidInput
from .matrixcore import (
    Keep,
    haar_random_unitary,
    partial_trace,
    random_density,
    tensor,
    validate_density,
)
from .measure import (
    CheckReport,
    _random_partition,
    check_context_independence,
    check_finite_additivity,
    check_partial_trace_compat,
    random_context,
)

RENYI_ORDERS = (EntropyKind.renyi(0.5), EntropyKind.renyi(2), EntropyKind.renyi(3))


def _report(name, residuals, tol) -> CheckReport:
    r = float(max(residuals)) if len(residuals) else 0.0
    return CheckReport(name, max(r, 0.0), len(residuals), r <= tol)


def _random_state(n, rng):
    return random_density(n, int(rng.integers(1, n + 1)), rng)


def random_refinement_pair(n: int, rng) -> tuple[Context, Context]:
    """``(V_fine, V_coarse)`` with ``V_coarse ⊆ V_fine`` and random rank profiles."""
    u = haar_random_unitary(n, rng).matrix
    fine = context_from_unitary(u, _random_partition(n, rng)) if n > 2 else \
        context_from_unitary(u, [(0,), (1,)])
    if fine.k == 2:
        return fine, fine
    return fine, coarsen(fine, _random_partition(fine.k, rng))


def set_partitions(items):
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]
        yield [[head]] + part


# --------------------------------------------------------------------------
# single-system batteries
# --------------------------------------------------------------------------

def battery_measure(n, seed, trials) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    rho = _random_state(n, rng)
    reps = check_finite_additivity(rho, trials, seed)
    reps.append(check_context_independence(rho, trials, seed))
    return reps


def battery_monotonicity(n, seed, trials, kinds=(SHANNON,) + RENYI_ORDERS) -> list[CheckReport]:
    """``E|_V <= E|_V'`` for ``V ⊆ V'``, on random states and refinement pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in kinds:
        res = []
        for _ in range(trials):
            rho = _random_state(n, rng)
            fine, coarse = random_refinement_pair(n, rng)
            res.append(contextual_entropy(rho, coarse, kind) - contextual_entropy(rho, fine, kind))
        out.append(_report(f"monotonicity[{kind}]", res, 1e-9))
    return out


def battery_recursion(n, seed, trials) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    res = []
    for _ in range(trials):
        rho = _random_state(n, rng)
        fine, coarse = random_refinement_pair(n, rng)
        res.append(check_recursion(rho, coarse, fine))
    return [_report("recursion", res, 1e-9)]


def battery_equivariance(n, seed, trials, kinds=(SHANNON, EntropyKind.renyi(2))) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    out = []
    for kind in kinds:
        res = []
        for _ in range(trials):
            rho = _random_state(n, rng)
            v = random_context(n, rng)
            u = haar_random_unitary(n, rng)
            moved = validate_density(u.matrix @ rho.matrix @ u.H)
            res.append(abs(contextual_entropy(rho, v, kind)
                           - contextual_entropy(moved, v.conjugated(u.matrix), kind)))
        out.append(_report(f"equivariance[{kind}]", res, 1e-10))
    return out


def battery_concavity(n, seed, trials,
                      kinds=(SHANNON, EntropyKind.renyi(0.5))) -> list[CheckReport]:
    """Pointwise concavity on each context; Rényi only for ``0 < q <= 1``."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in kinds:
        if kind.family == "chebyshev" or (kind.family == "renyi" and kind.q > 1):
            raise InvalidInput(f"concavity is not expected for {kind}")
        res = []
        for _ in range(trials):
            a, b = _random_state(n, rng), _random_state(n, rng)
            r = float(rng.uniform())
            mix = validate_density(r * a.matrix + (1 - r) * b.matrix)
            v = random_context(n, rng)
            res.append(r * contextual_entropy(a, v, kind) + (1 - r) * contextual_entropy(b, v, kind)
                       - contextual_entropy(mix, v, kind))
        out.append(_report(f"concavity[{kind}]", res, 1e-9))
    return out


def battery_weak_recursivity(n, seed, trials,
                             kinds=RENYI_ORDERS + (EntropyKind.parse("chebyshev"),)) -> list[CheckReport]:
    """Coarse-graining outcomes never raises the entropy."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in kinds:
        res = []
        for _ in range(trials):
            p = rng.dirichlet(np.full(n, 0.5))
            part = _random_partition(n, rng, min_blocks=1)
            res.append(renyi(kind, coarse_grain(p, part)) - renyi(kind, p))
        out.append(_report(f"weak_recursivity[{kind}]", res, 1e-9))
    return out


def battery_q_monotonicity(n, seed, trials) -> list[CheckReport]:
    """``R_t(p) <= R_q(p)`` for ``t > q``, across a grid including 0, 1 and ∞."""
    rng = np.random.default_rng(seed)
    orders = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 10.0, math.inf]
    kinds = [EntropyKind.renyi(q) for q in orders]
    res = []
    for _ in range(trials):
        p = rng.dirichlet(np.full(n, 0.5))
        vals = [renyi(k, p) for k in kinds]
        res.append(max(b - a for a, b in zip(vals, vals[1:])))
    return [_report("renyi_q_monotonicity", res, 1e-9)]


def battery_continuity(n, seed, trials, scales=np.logspace(-7, -2, 6)) -> list[CheckReport]:
    """``|E(UVU†) - E(V)| <= C ||U - I||`` with ``||T|| = max |T_ij|``.

    ``C`` is fitted as the largest observed ratio.  Continuity is judged by
    the log-log slope of the change against ``||U - I||``: a Lipschitz map
    has slope >= 1 as the perturbation shrinks.  Also checks
    ``d(V, UVU†) <= ||U - I||`` on the first ten trials.
    """
    rng = np.random.default_rng(seed)
    slopes, ratio_all, dist_excess = [], [], []
    for t in range(trials):
        rho = random_density(n, n, rng)
        v = random_context(n, rng)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = (a - a.conj().T) / 2
        base = contextual_entropy(rho, v)
        eps, delta = [], []
        for s in scales:
            u = expm(s * a)
            eps.append(float(np.max(np.abs(u - np.eye(n)))))
            delta.append(abs(contextual_entropy(rho, v.conjugated(u)) - base))
        eps, delta = np.array(eps), np.array(delta)
        ratio_all.append(float(np.max(delta / eps)))
        slopes.append(np.polyfit(np.log(eps), np.log(np.maximum(delta, 1e-300)), 1)[0])
        if t < 10:  # the distance search is the costly part
            d = context_distance(v, v.conjugated(expm(scales[-1] * a)), seed=t)
            dist_excess.append(d - eps[-1])
    c = max(ratio_all)
    return [
        CheckReport("continuity_constant", c, trials,
                    bool(math.isfinite(c) and min(slopes) >= 0.9)),
        _report("distance_bounded_by_perturbation", dist_excess, 1e-6),
    ]


# --------------------------------------------------------------------------
# composite-system batteries
# --------------------------------------------------------------------------

def battery_partial_trace(n, seed, trials, m=2) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    worst = []
    for _ in range(trials):
        rho = _random_state(n * m, rng)
        rep = check_partial_trace_compat(rho, n, m, random_context(n, rng), random_context(m, rng))
        worst.append(rep.max_residual)
    return [_report("partial_trace_compat", worst, 1e-10)]


def battery_split_additivity(n, seed, trials, m=2,
                             kinds=(SHANNON,) + RENYI_ORDERS) -> list[CheckReport]:
    """Product states are additive on split contexts."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in kinds:
        res = []
        for _ in range(trials):
            r1, r2 = _random_state(n, rng), _random_state(m, rng)
            v, w = random_context(n, rng), random_context(m, rng)
            prod = validate_density(tensor(r1.matrix, r2.matrix))
            lhs = contextual_entropy(prod, split_context(v, w), kind)
            res.append(abs(lhs - contextual_entropy(r1, v, kind) - contextual_entropy(r2, w, kind)))
        out.append(_report(f"split_additivity[{kind}]", res, 1e-10))
    return out


def battery_subadditivity(n, seed, trials, m=2) -> list[CheckReport]:
    """Shannon subadditivity on split contexts for (generally entangled) states."""
    rng = np.random.default_rng(seed)
    res = []
    for _ in range(trials):
        rho = _random_state(n * m, rng)
        r1 = partial_trace(rho, (n, m), Keep.FIRST)
        r2 = partial_trace(rho, (n, m), Keep.SECOND)
        v, w = random_context(n, rng), random_context(m, rng)
        res.append(contextual_entropy(rho, split_context(v, w))
                   - contextual_entropy(r1, v) - contextual_entropy(r2, w))
    return [_report("split_subadditivity", res, 1e-9)]


@dataclass
class CounterexampleResult:
    found: bool
    context: Context | None
    excess: float  # E_ρ(V) - E_{ρ1⊗ρ2}(V) at the best context found
    tried: int

    def to_report(self) -> CheckReport:
        return CheckReport("entangled_context_counterexample", self.excess, self.tried, self.found)


def uniform_diagonal_basis(rho) -> np.ndarray:
    """Unitary whose columns all see probability ``1/N`` under ``rho``.

    Eigenbasis of ``rho`` followed by the discrete Fourier transform: each
    Fourier vector has flat weights on the eigenvectors.
    """
    w, vecs = np.linalg.eigh(np.asarray(getattr(rho, "matrix", rho)))
    n = len(w)
    f = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / math.sqrt(n)
    return vecs @ f


def entangled_counterexample_search(rho, dims: tuple[int, int], seed=0, random_bases: int = 200,
                                    kind: EntropyKind = SHANNON) -> CounterexampleResult:
    """Look for a context ``V`` with ``E_ρ(V) > E_{ρ1⊗ρ2}(V)``.

    Candidates are all coarse-grainings of the uniform-diagonal basis of
    ``rho`` and of random bases.  On a split context no violation exists,
    so any hit is an entangled context.
    """
    m = np.asarray(getattr(rho, "matrix", rho))
    n1, n2 = dims
    if m.shape[0] != n1 * n2:
        raise InvalidInput("state dimension does not match dims")
    r1 = partial_trace(m, dims, Keep.FIRST)
    r2 = partial_trace(m, dims, Keep.SECOND)
    prod = tensor(r1.matrix, r2.matrix)
    rng = np.random.default_rng(seed)
    parts = [p for p in set_partitions(range(n1 * n2)) if len(p) >= 2]
    best, best_v, tried = -math.inf, None, 0
    bases = [uniform_diagonal_basis(m)] + [haar_random_unitary(n1 * n2, rng).matrix
                                           for _ in range(random_bases)]
    for u in bases:
        for part in parts:
            v = context_from_unitary(u, part)
            gap = contextual_entropy(m, v, kind) - contextual_entropy(prod, v, kind)
            tried += 1
            if gap > best:
                best, best_v = gap, v
        if best > 1e-6:
            break
    return CounterexampleResult(best > 1e-6, best_v, float(best), tried)


def bell_state() -> np.ndarray:
    psi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    return np.outer(psi, psi.conj())


def battery_entangled_counterexample(n, seed, trials) -> list[CheckReport]:
    return [entangled_counterexample_search(bell_state(), (2, 2), seed).to_report()]


BATTERIES = {
    "measure": battery_measure,
    "monotonicity": battery_monotonicity,
    "recursion": battery_recursion,
    "equivariance": battery_equivariance,
    "concavity": battery_concavity,
    "split_additivity": battery_split_additivity,
    "subadditivity": battery_subadditivity,
    "partial_trace": battery_partial_trace,
    "weak_recursivity": battery_weak_recursivity,
    "renyi_q_monotonicity": battery_q_monotonicity,
    "entangled_counterexample": battery_entangled_counterexample,
    "continuity": battery_continuity,
}


def run_batteries(names, n: int, seeds, trials: int = 100) -> list[CheckReport]:
    """Run ``names`` for every seed and merge same-named reports (worst residual)."""
    unknown = [x for x in names if x not in BATTERIES]
    if unknown:
        raise InvalidInput(f"unknown batteries {unknown}; choose from {sorted(BATTERIES)}")
    merged: dict[str, CheckReport] = {}
    for name in names:
        for seed in seeds:
            for rep in BATTERIES[name](n, seed, trials):
                old = merged.get(rep.check)
                if old is None:
                    merged[rep.check] = rep
                else:
                    merged[rep.check] = CheckReport(
                        rep.check, max(old.max_residual, rep.max_residual),
                        old.trials + rep.trials, old.passed and rep.passed)
    return list(merged.values())
