"""Minimise an entropy oracle over maximal contexts.

Maximal contexts are parametrised by unitaries ``U`` (columns = basis), so
the oracle restricted to them is a real function on U(n).  The search is
derivative free because oracles may be black boxes.

Each restart starts from a Haar-random ``U`` and sweeps a stencil of
Givens generators acting on pairs of basis columns, in two phase variants
(real rotation, imaginary rotation).  A Givens rotation by ``π/2`` only
relabels the two columns, so along each stencil direction the objective is
``π/2``-periodic; for Schur-concave entropies it is also unimodal on that
circle.  Each stencil direction therefore gets a coarse periodic scan
followed by a bounded Brent refinement.  After the stencil, one random
anti-Hermitian direction is probed with step ``η``, which shrinks on
failure.  A restart stops when a sweep lowers the value by less than
``tol`` or after ``max_iters`` sweeps.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .context import MaximalContext, maximal_context_from_unitary
from .entropy import SHANNON, EntropyKind, EntropyOracle
from .errors import BudgetExhausted, DimensionMismatch, InvalidInput
from .matrixcore import haar_random_unitary

_QUARTER = math.pi / 4


@dataclass(frozen=True)
class MinimizerConfig:
    restarts: int | None = None  # None -> 8 * n
    max_iters: int = 50
    step: float = 0.3
    shrink: float = 0.5
    tol: float = 1e-15
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.restarts is not None and self.restarts < 1:
            raise InvalidInput("restarts must be >= 1")
        if self.max_iters < 1 or not self.step > 0 or not 0 < self.shrink < 1 or not self.tol > 0:
            raise InvalidInput("max_iters, step, tol must be positive and 0 < shrink < 1")
        if self.workers < 1:
            raise InvalidInput("workers must be >= 1")

    def restarts_for(self, n: int) -> int:
        return self.restarts if self.restarts is not None else 8 * n

    def to_json(self) -> dict:
        return {"restarts": self.restarts, "max_iters": self.max_iters, "step": self.step,
                "shrink": self.shrink, "tol": self.tol, "seed": self.seed, "workers": self.workers}


@dataclass
class MinimizerResult:
    best_context: MaximalContext
    best_value: float
    value_trace: list[float]
    queries_used: int
    converged: bool
    best_restart: int = 0
    restart_values: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {
            "best_value": self.best_value,
            "converged": self.converged,
            "queries_used": self.queries_used,
            "best_restart": self.best_restart,
            "restart_values": self.restart_values,
            "value_trace": self.value_trace,
            "generating_unitary": matrix_to_json(self.best_context.generating_unitary),
        }


def _rotate(u: np.ndarray, i: int, j: int, imag: bool, t: float) -> np.ndarray:
    """``U @ G`` with ``G`` the Givens rotation by ``t`` in columns ``i, j``."""
    c, s = math.cos(t), math.sin(t)
    out = u.copy()
    if imag:
        out[:, i] = c * u[:, i] + 1j * s * u[:, j]
        out[:, j] = 1j * s * u[:, i] + c * u[:, j]
    else:
        out[:, i] = c * u[:, i] + s * u[:, j]
        out[:, j] = -s * u[:, i] + c * u[:, j]
    return out


def _reorthonormalize(u: np.ndarray) -> np.ndarray:
    x, _, yh = np.linalg.svd(u)
    return x @ yh


@dataclass
class _Run:
    u: np.ndarray
    value: float
    trace: list
    converged: bool


def _descend(objective, u: np.ndarray, cfg: MinimizerConfig, rng) -> _Run:
    n = u.shape[0]
    stencil = [(i, j, imag) for i in range(n) for j in range(i + 1, n) for imag in (False, True)]
    # per-direction bracket half-width; the widest value triggers a full periodic scan
    wide = _QUARTER / 2
    width = [wide] * len(stencil)
    f = objective(u)
    trace = [f]
    eta = cfg.step
    converged = False
    xatol = 1e-3
    for _ in range(cfg.max_iters):
        f_start = f
        for d, (i, j, imag) in enumerate(stencil):
            def g(t, i=i, j=j, imag=imag):
                return objective(_rotate(u, i, j, imag, t))

            w = width[d]
            if w >= wide:
                grid = (0.0, wide, -wide, 2 * wide)
                vals = [f] + [g(t) for t in grid[1:]]
                k = int(np.argmin(vals))
                tb, fb = grid[k], vals[k]
            else:
                tb, fb = 0.0, f
            res = minimize_scalar(g, bounds=(tb - w, tb + w), method="bounded",
                                  options={"xatol": min(xatol, w / 4)})
            t_best, f_best = (float(res.x), float(res.fun)) if res.fun < fb else (tb, fb)
            if w < wide and abs(t_best - tb) > 0.9 * w:
                width[d] = min(wide, 4 * w)
            else:
                width[d] = min(wide, max(4 * abs(t_best), 1e-7))
            if f_best < f:
                u = _rotate(u, i, j, imag, t_best)
                f = f_best
                trace.append(f)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = (a - a.conj().T) / 2
        a /= np.linalg.norm(a)
        moved = False
        for sign in (1.0, -1.0):
            cand = expm(-sign * eta * a) @ u
            fc = objective(cand)
            if fc < f:
                u, f, moved = cand, fc, True
                trace.append(f)
                break
        if not moved:
            eta *= cfg.shrink
        u = _reorthonormalize(u)
        # an angle error d costs ~d^2 in value: resolve angles to the scale of the last gain
        gain = max(f_start - f, 0.0)
        xatol = min(xatol, max(1e-11, 0.1 * math.sqrt(gain)))
        if gain <= cfg.tol and xatol <= 1e-11:
            converged = True
            break
    return _Run(u, f, trace, converged)


def minimize_over_maximal_contexts(oracle: EntropyOracle, n: int,
                                   cfg: MinimizerConfig = MinimizerConfig()) -> MinimizerResult:
    """Multi-start search for the maximal context with the smallest oracle value.

    Ties between restarts go to the lowest restart index, so the result is
    independent of the order in which concurrent restarts finish.
    """
    if oracle.dim != n:
        raise DimensionMismatch(f"oracle dimension {oracle.dim} vs n = {n}")
    start_queries = oracle.queries
    if n == 1:
        raise DimensionMismatch("a one-dimensional system has no nontrivial context")

    def objective(u):
        return oracle(MaximalContext(u, _SINGLETONS[n], validate=False))

    restarts = cfg.restarts_for(n)
    seeds = np.random.SeedSequence(cfg.seed).spawn(restarts)

    def run(r):
        rng = np.random.default_rng(seeds[r])
        u0 = haar_random_unitary(n, rng).matrix.copy()
        try:
            return _descend(objective, u0, cfg, rng)
        except BudgetExhausted:
            return None

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(run, range(restarts)))
    else:
        runs = []
        for r in range(restarts):
            runs.append(run(r))
            if runs[-1] is None:
                break

    done = [(r, x) for r, x in enumerate(runs) if x is not None]
    if not any(x.converged for _, x in done):
        if len(done) < restarts:
            raise BudgetExhausted("oracle budget spent before any restart converged")
    best_r, best = min(done, key=lambda rx: (rx[1].value, rx[0]))
    return MinimizerResult(
        best_context=maximal_context_from_unitary(_reorthonormalize(best.u)),
        best_value=best.value,
        value_trace=best.trace,
        queries_used=oracle.queries - start_queries,
        converged=best.converged,
        best_restart=best_r,
        restart_values=[x.value for _, x in done],
    )


class _Singletons(dict):
    def __missing__(self, n):
        self[n] = tuple((i,) for i in range(n))
        return self[n]


_SINGLETONS = _Singletons()


def extract_quantum_entropy(rho, kind: EntropyKind = SHANNON,
                            cfg: MinimizerConfig = MinimizerConfig()) -> float:
    """Quantum counterpart of ``kind`` (von Neumann for Shannon) obtained as
    the minimum of the contextual entropy over maximal contexts."""
    oracle = EntropyOracle.from_state(rho, kind)
    return minimize_over_maximal_contexts(oracle, oracle.dim, cfg).best_value
