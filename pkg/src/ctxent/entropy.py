"""Shannon and Rényi entropies, their contextual lifts and the entropy oracle.

Natural logarithms throughout; ``0 ln 0 = 0`` and ``0^q = 0``.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .context import Context, refines
from .errors import (
    BadPartition,
    BudgetExhausted,
    DimensionMismatch,
    InvalidInput,
    NotAProbabilityVector,
    NotARefinement,
    OracleMiss,
    TargetNegative,
    TargetOutOfRange,
    UnsupportedKind,
)
from .matrixcore import DensityMatrix
from .measure import clamp_probabilities, measure_eval
from .policy import DEFAULT, Tolerances

LN2 = math.log(2.0)
_Q_SHANNON_BAND = 1e-6


@dataclass(frozen=True)
class EntropyKind:
    """Member of the Rényi family.

    ``family`` is one of ``shannon``, ``renyi``, ``hartley``, ``chebyshev``;
    ``q`` is set only for ``renyi``.  Use :meth:`renyi` to build Rényi kinds,
    it routes ``q`` near 1 to Shannon and the endpoints to Hartley and
    Chebyshev.
    """

    family: str = "shannon"
    q: float | None = None

    def __post_init__(self):
        if self.family not in ("shannon", "renyi", "hartley", "chebyshev"):
            raise UnsupportedKind(f"unknown entropy family {self.family!r}")
        if self.family == "renyi":
            if self.q is None or not self.q >= 0 or abs(self.q - 1) <= _Q_SHANNON_BAND \
                    or self.q == 0 or math.isinf(self.q):
                raise UnsupportedKind(f"renyi needs q >= 0, q != 0, 1, inf (got {self.q}); "
                                      "use EntropyKind.renyi()")
        elif self.q is not None:
            raise UnsupportedKind(f"{self.family} takes no parameter")

    @classmethod
    def renyi(cls, q: float) -> "EntropyKind":
        q = float(q)
        if q < 0 or math.isnan(q):
            raise UnsupportedKind(f"Rényi order must be >= 0, got {q}")
        if q == 0:
            return HARTLEY
        if math.isinf(q):
            return CHEBYSHEV
        if abs(q - 1) <= _Q_SHANNON_BAND:
            return SHANNON
        return cls("renyi", q)

    @classmethod
    def parse(cls, text: str) -> "EntropyKind":
        """``shannon``, ``hartley``, ``chebyshev`` or ``renyi:<q>``."""
        text = text.strip().lower()
        if text.startswith("renyi:"):
            try:
                q = float(text.split(":", 1)[1])
            except ValueError:
                raise UnsupportedKind(f"bad Rényi order in {text!r}") from None
            return cls.renyi(q)
        if text in ("shannon", "hartley", "chebyshev"):
            return cls(text)
        raise UnsupportedKind(f"unknown entropy kind {text!r}")

    @property
    def order(self) -> float:
        """Rényi order: 1 for Shannon, 0 for Hartley, inf for Chebyshev."""
        return {"shannon": 1.0, "hartley": 0.0, "chebyshev": math.inf}.get(self.family, self.q)

    def __str__(self):
        return f"renyi:{self.q:g}" if self.family == "renyi" else self.family


SHANNON = EntropyKind("shannon")
HARTLEY = EntropyKind("hartley")
CHEBYSHEV = EntropyKind("chebyshev")


def _as_prob(p, tol: Tolerances) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise NotAProbabilityVector("empty or non-finite probability vector")
    if np.any(p < -tol.prob) or abs(p.sum() - 1.0) > tol.prob:
        raise NotAProbabilityVector(f"{p} is not a probability vector within {tol.prob:.0e}")
    return np.clip(p, 0.0, None)


def _entropy(kind: EntropyKind, p: np.ndarray, tol: Tolerances) -> float:
    nz = p[p > 0]
    if kind.family == "shannon":
        h = -float(np.sum(nz * np.log(nz)))
    elif kind.family == "hartley":
        h = math.log(int(np.count_nonzero(p > tol.prob)))
    elif kind.family == "chebyshev":
        h = -math.log(float(p.max()))
    else:
        h = math.log(float(np.sum(nz ** kind.q))) / (1.0 - kind.q)
    return max(h, 0.0)


def shannon(p, tol: Tolerances = DEFAULT) -> float:
    """``-Σ p ln p``."""
    return _entropy(SHANNON, _as_prob(p, tol), tol)


def renyi(kind: EntropyKind, p, tol: Tolerances = DEFAULT) -> float:
    """Entropy of ``p`` for any member of the family."""
    return _entropy(kind, _as_prob(p, tol), tol)


def contextual_entropy(rho, v: Context, kind: EntropyKind = SHANNON,
                       tol: Tolerances = DEFAULT) -> float:
    """Entropy of the probability vector ``μ_ρ`` induces on ``v``."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if m.shape[0] != v.dim:
        raise DimensionMismatch(f"state dimension {m.shape[0]} vs context dimension {v.dim}")
    return _entropy(kind, clamp_probabilities(v.raw_probabilities(m), tol), tol)


def coarse_grain(p, partition) -> np.ndarray:
    """Groupwise sums of ``p`` over the blocks of ``partition``."""
    p = np.asarray(p, dtype=float)
    blocks = [list(b) for b in partition]
    flat = sorted(i for b in blocks for i in b)
    if flat != list(range(len(p))) or any(not b for b in blocks):
        raise BadPartition(f"{partition} does not partition {len(p)} indices")
    return np.array([p[b].sum() for b in blocks])


def check_recursion(rho, v_coarse: Context, v_fine: Context,
                    tol: Tolerances = DEFAULT) -> float:
    """``|Sh(V') - Sh(V) - Σ μ(P_i) Sh(μ(Q^i_·)/μ(P_i))|`` for ``V ⊆ V'``.

    Blocks with ``μ(P_i) <= tol.prob`` contribute nothing to the sum.
    """
    parts = refines(v_fine, v_coarse, tol)
    if parts is None:
        raise NotARefinement("v_fine does not refine v_coarse")
    fine = measure_eval(rho, v_fine, tol).probs
    coarse = measure_eval(rho, v_coarse, tol).probs
    lhs = _entropy(SHANNON, fine, tol)
    rhs = _entropy(SHANNON, coarse, tol)
    for pi, part in zip(coarse, parts):
        if pi > tol.prob:
            cond = fine[part] / pi
            rhs += pi * _entropy(SHANNON, cond / cond.sum(), tol)
    return abs(lhs - rhs)


def check_weak_recursivity(kind: EntropyKind, p, partition,
                           tol: Tolerances = DEFAULT) -> bool:
    """True iff coarse-graining ``p`` along ``partition`` does not raise the entropy."""
    p = _as_prob(p, tol)
    return renyi(kind, p, tol) >= renyi(kind, coarse_grain(p, partition), tol) - tol.prob


def two_outcome(kind: EntropyKind, x) -> np.ndarray:
    """Entropy of ``(x, 1 - x)``, vectorised over ``x`` in [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    y = 1.0 - x
    if kind.family == "shannon":
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(x > 0, x * np.log(x), 0.0) - np.where(y > 0, y * np.log(y), 0.0)
    elif kind.family == "hartley":
        h = np.where((x > 0) & (y > 0), LN2, 0.0)
    elif kind.family == "chebyshev":
        h = -np.log(np.maximum(x, y))
    else:
        h = np.log(x ** kind.q + y ** kind.q) / (1.0 - kind.q)
    return np.maximum(h, 0.0)


def invert_two_outcome(kind: EntropyKind, target: float,
                       tol: Tolerances = DEFAULT) -> tuple[float, float]:
    """Solve ``H(x, 1 - x) = target`` for the pair of solutions ``x <= 1/2 <= 1 - x``.

    Bisection on [0, 1/2], where the two-outcome entropy is strictly
    increasing for every order ``q > 0``.  Hartley is rejected: its
    two-outcome entropy is constant on (0, 1).
    """
    if kind.family == "hartley":
        raise UnsupportedKind("Hartley entropy cannot be inverted on two outcomes")
    target = float(target)
    if target < -tol.inv:
        raise TargetNegative(f"target {target} is negative")
    if target > LN2 + tol.inv:
        raise TargetOutOfRange(f"target {target} exceeds ln 2 = {LN2}")
    if target <= 0.0:
        return 0.0, 1.0
    if target >= LN2:
        return 0.5, 0.5
    lo, hi = 0.0, 0.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(two_outcome(kind, mid)) < target:
            lo = mid
        else:
            hi = mid
    x = min((lo, hi), key=lambda t: abs(float(two_outcome(kind, t)) - target))
    return x, 1.0 - x


def two_outcome_curve(kind: EntropyKind, points: int = 1001) -> tuple[np.ndarray, np.ndarray]:
    """Grid ``x = 0, 1/(points-1), ..., 1`` and ``H(x, 1 - x)`` on it."""
    x = np.linspace(0.0, 1.0, points)
    return x, two_outcome(kind, x)


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------

class OracleRangeError(InvalidInput):
    """An oracle answered outside ``[0, ln n]``."""


@dataclass
class EntropySectionSample:
    """Finite sample of a contextual-entropy section."""

    dim: int
    entries: list = field(default_factory=list)  # (Context, value)
    kind: str | None = None


class EntropyOracle:
    """Black box ``Context -> [0, ln n]``.

    Wraps a callable, checks dimensions and range, counts queries and
    optionally records every answer.  Thread safe as long as ``fn`` is.
    """

    def __init__(self, fn, dim: int, budget: int | None = None, kind: EntropyKind | None = None,
                 record: bool = False, tol: Tolerances = DEFAULT):
        self._fn = fn
        self.dim = dim
        self.budget = budget
        self.kind = kind
        self.tol = tol
        self._lock = threading.Lock()
        self._count = 0
        self._record = [] if record else None
        self._upper = math.log(dim) + 1e-9

    @classmethod
    def from_state(cls, rho, kind: EntropyKind = SHANNON, **kw) -> "EntropyOracle":
        m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        tol = kw.get("tol", DEFAULT)

        def fn(v):
            return contextual_entropy(m, v, kind, tol)

        return cls(fn, m.shape[0], kind=kind, **kw)

    @classmethod
    def from_section(cls, sample: EntropySectionSample, **kw) -> "EntropyOracle":
        """Replay oracle; unknown contexts raise :class:`OracleMiss`.

        Lookup is bit-exact first, so a recorded run replays identically,
        then falls back to the rounded fingerprint for hand-written samples.
        """
        exact = {v.exact_key: float(val) for v, val in sample.entries}
        rounded = {}
        for v, val in sample.entries:
            rounded.setdefault(v.key, float(val))

        def fn(v):
            val = exact.get(v.exact_key)
            if val is None:
                val = rounded.get(v.key)
            if val is None:
                raise OracleMiss(f"section sample has no value for {v!r}")
            return val

        kind = EntropyKind.parse(sample.kind) if sample.kind else None
        return cls(fn, sample.dim, kind=kind, **kw)

    @property
    def queries(self) -> int:
        return self._count

    def __call__(self, v: Context) -> float:
        if v.dim != self.dim:
            raise DimensionMismatch(f"oracle dimension {self.dim} vs context dimension {v.dim}")
        with self._lock:
            if self.budget is not None and self._count >= self.budget:
                raise BudgetExhausted(f"oracle budget of {self.budget} queries spent")
            self._count += 1
        value = float(self._fn(v))
        if not -1e-12 <= value <= self._upper:
            raise OracleRangeError(f"oracle value {value} outside [0, ln {self.dim}]")
        if self._record is not None:
            with self._lock:
                self._record.append((v, value))
        return value

    def section(self) -> EntropySectionSample:
        if self._record is None:
            raise RuntimeError("oracle was not created with record=True")
        seen, entries = set(), []
        for v, val in self._record:
            if v.exact_key not in seen:
                seen.add(v.exact_key)
                entries.append((v, val))
        return EntropySectionSample(self.dim, entries, str(self.kind) if self.kind else None)
