"""Measurement contexts as families of orthogonal projections.

A context is stored as an orthonormal basis adapted to it together with a
partition of the basis columns: group ``g`` spans the range of projection
``P_g``.  Every projection family summing to the identity has such a basis,
so the representation is complete and evaluating a state on a context
reduces to the diagonal of ``B† ρ B``.

Listings are canonical: projections are sorted by descending rank and then
by descending lexicographic order of their entries rounded to 1e-8 (real
parts first, imaginary parts as a final tiebreak).
"""

import itertools
import math
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize, minimize_scalar

from .errors import (
    BadPartition,
    DimensionMismatch,
    NotComplete,
    NotOrthogonal,
    TrivialContext,
    ZeroProjection,
)
from .matrixcore import (
    Projection,
    Unitary,
    as_matrix,
    maxabs,
    tensor,
    validate_projection,
    validate_unitary,
)
from .policy import DEFAULT, Tolerances

_ROUND = 8


def _check_groups(groups, n: int) -> tuple[tuple[int, ...], ...]:
    groups = tuple(tuple(int(i) for i in g) for g in groups)
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(n)) or any(len(g) == 0 for g in groups):
        raise BadPartition(f"{groups} is not a partition of range({n}) into nonempty blocks")
    return groups


@lru_cache(maxsize=256)
def _layout(groups) -> tuple[bool, bool]:
    singletons = all(len(g) == 1 for g in groups)
    return singletons, singletons and all(g[0] == i for i, g in enumerate(groups))


class Context:
    """A nontrivial context ``{P_1, ..., P_k}''`` with ``2 <= k <= n``.

    Build instances with :func:`context_from_projections`,
    :func:`context_from_unitary` or :func:`maximal_context_from_unitary`.
    Instances are immutable.
    """

    __slots__ = ("_basis", "_groups", "_raw", "_singletons", "_identity_order", "__dict__")

    def __init__(self, basis, groups, *, raw_projections=None, tol: Tolerances = DEFAULT,
                 validate: bool = True):
        b = basis.matrix if isinstance(basis, Unitary) else np.asarray(basis, dtype=np.complex128)
        if validate:
            b = validate_unitary(b, tol).matrix
        elif b.flags.writeable:
            b = b.copy()
            b.setflags(write=False)
        n = b.shape[0]
        groups = _check_groups(groups, n) if validate else tuple(groups)
        if len(groups) < 2:
            raise TrivialContext("a context needs at least two projections")
        self._basis = b
        self._groups = groups
        self._raw = raw_projections
        self._singletons, self._identity_order = _layout(groups)

    # -- raw (construction-order) views, used on hot paths ----------------

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def k(self) -> int:
        return len(self._groups)

    @property
    def basis(self) -> np.ndarray:
        """Orthonormal basis adapted to the context (columns)."""
        return self._basis

    def raw_probabilities(self, rho: np.ndarray) -> np.ndarray:
        """``Tr(ρ P_g)`` in construction order, unclamped."""
        if self._raw is not None:
            return np.einsum("ij,kji->k", rho, self._raw).real
        b = self._basis
        diag = np.einsum("ji,jk,ki->i", b.conj(), rho, b).real
        if self._singletons:
            return diag if self._identity_order else diag[[g[0] for g in self._groups]]
        return np.array([diag[list(g)].sum() for g in self._groups])

    def _raw_stack(self) -> np.ndarray:
        if self._raw is not None:
            return self._raw
        b = self._basis
        return np.stack([b[:, g] @ b[:, g].conj().T for g in map(list, self._groups)])

    # -- canonical views ---------------------------------------------------

    @cached_property
    def canonical_order(self) -> tuple[int, ...]:
        """Permutation taking construction order to canonical order."""
        stack = np.round(self._raw_stack(), _ROUND) + 0.0
        ranks = [len(g) for g in self._groups]
        flat = stack.reshape(len(ranks), -1)
        keys = [(-ranks[i], tuple(-flat[i].real), tuple(-flat[i].imag)) for i in range(len(ranks))]
        return tuple(sorted(range(len(ranks)), key=lambda i: keys[i]))

    @property
    def groups(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._groups[i] for i in self.canonical_order)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    @cached_property
    def stack(self) -> np.ndarray:
        """Projections as a ``(k, n, n)`` array in canonical order."""
        s = self._raw_stack()[list(self.canonical_order)].copy()
        s.setflags(write=False)
        return s

    @property
    def projections(self) -> tuple[Projection, ...]:
        return tuple(Projection(p, r) for p, r in zip(self.stack, self.ranks))

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """``Tr(ρ P_i)`` in canonical order, unclamped."""
        return self.raw_probabilities(rho)[list(self.canonical_order)]

    @cached_property
    def key(self) -> bytes:
        """Hashable fingerprint of the canonical projections."""
        s = np.round(self.stack, _ROUND) + (0.0 + 0.0j)
        return bytes(str(self.ranks), "ascii") + s.tobytes()

    @cached_property
    def exact_key(self) -> bytes:
        """Bit-exact fingerprint; distinguishes contexts closer than ``key`` resolves."""
        return bytes(str(self.ranks), "ascii") + (self.stack + (0.0 + 0.0j)).tobytes()

    def __eq__(self, other):
        if not isinstance(other, Context):
            return NotImplemented
        return self.dim == other.dim and self.ranks == other.ranks and \
            maxabs(self.stack - other.stack) <= 1e-8

    def __hash__(self):
        return hash(self.key)

    def conjugated(self, u) -> "Context":
        """``U V U†``."""
        u = as_matrix(u)
        raw = None if self._raw is None else np.einsum("ij,kjl,ml->kim", u, self._raw, u.conj())
        return Context(u @ self._basis, self._groups, raw_projections=raw, validate=False)

    def __repr__(self):
        return f"Context(dim={self.dim}, ranks={self.ranks})"


class MaximalContext(Context):
    """Context of ``n`` rank-one projections onto the columns of a unitary."""

    __slots__ = ()

    @property
    def generating_unitary(self) -> np.ndarray:
        return self._basis

    def conjugated(self, u) -> "MaximalContext":
        return MaximalContext(as_matrix(u) @ self._basis, self._groups, validate=False)

    def __repr__(self):
        return f"MaximalContext(dim={self.dim})"


def context_from_projections(ps, tol: Tolerances = DEFAULT) -> Context:
    """Validate a projection family and build the context it generates.

    Raises NotOrthogonal, NotComplete, ZeroProjection or TrivialContext.
    """
    ps = [p if isinstance(p, Projection) else validate_projection(p, tol) for p in ps]
    if not ps:
        raise ZeroProjection("empty projection list")
    n = ps[0].dim
    if any(p.dim != n for p in ps):
        raise DimensionMismatch("projections have different dimensions")
    for i, p in enumerate(ps):
        if p.rank < 1:
            raise ZeroProjection(f"projection {i} is zero")
    for i, j in itertools.combinations(range(len(ps)), 2):
        r = maxabs(ps[i].matrix @ ps[j].matrix)
        if r > tol.proj:
            raise NotOrthogonal(f"projections {i} and {j} overlap (residual {r:.3e})")
    r = maxabs(sum(p.matrix for p in ps) - np.eye(n))
    if r > tol.proj:
        raise NotComplete(f"projections sum to identity only within {r:.3e}")
    if len(ps) == 1:
        raise TrivialContext("the single projection I generates the trivial context")

    cols, groups, start = [], [], 0
    for p in ps:
        w, v = np.linalg.eigh(p.matrix)
        cols.append(v[:, w > 0.5])
        groups.append(tuple(range(start, start + p.rank)))
        start += p.rank
    basis = np.hstack(cols)
    # polar cleanup: eigenvectors of distinct projections are orthogonal only to tol
    x, _, y = np.linalg.svd(basis)
    basis = x @ y
    raw = np.stack([p.matrix for p in ps])
    raw.setflags(write=False)
    return Context(basis, groups, raw_projections=raw, tol=tol.with_(unitary=max(tol.unitary, 1e-9)))


def context_from_unitary(u, partition, tol: Tolerances = DEFAULT) -> Context:
    """Coarse-graining of the basis given by the columns of ``u``."""
    groups = _check_groups(partition, as_matrix(u).shape[0])
    if all(len(g) == 1 for g in groups):
        return MaximalContext(u, groups, tol=tol)
    return Context(u, groups, tol=tol)


def maximal_context_from_unitary(u, tol: Tolerances = DEFAULT) -> MaximalContext:
    """Maximal context of the rank-one projections onto the columns of ``u``."""
    b = as_matrix(u)
    return MaximalContext(b, tuple((i,) for i in range(b.shape[0])), tol=tol)


def computational_context(n: int) -> MaximalContext:
    """The diagonal context ``D_n``."""
    return maximal_context_from_unitary(np.eye(n))


def coarsen(v: Context, partition) -> Context:
    """Merge the canonical projections of ``v`` along ``partition``."""
    parts = _check_groups(partition, v.k)
    groups = v.groups
    merged = [tuple(i for j in part for i in groups[j]) for part in parts]
    return context_from_unitary(v.basis, merged)


def binary_context(p) -> Context:
    """``{P, I - P}''`` for a nontrivial projection ``P``."""
    p = as_matrix(p)
    return context_from_projections([p, np.eye(p.shape[0]) - p])


def refines(v_fine: Context, v_coarse: Context, tol: Tolerances = DEFAULT):
    """Refinement map from ``v_fine`` onto ``v_coarse``, or None.

    Returns a list with one entry per canonical projection of ``v_coarse``:
    the canonical indices of the fine projections summing to it.
    """
    if v_fine.dim != v_coarse.dim:
        raise DimensionMismatch("contexts act on different dimensions")
    fine, coarse = v_fine.stack, v_coarse.stack
    if len(fine) < len(coarse):
        return None
    # Tr(P Q) / rank(Q) is 1 when Q <= P and < 1 otherwise
    overlap = np.einsum("aij,bji->ab", coarse, fine).real / np.array(v_fine.ranks)
    owner = np.argmax(overlap, axis=0)
    parts = [[] for _ in coarse]
    for b, a in enumerate(owner):
        parts[a].append(b)
    for a, part in enumerate(parts):
        if not part:
            return None
        if maxabs(fine[part].sum(axis=0) - coarse[a]) > max(tol.proj, 1e-9):
            return None
    return parts


def split_context(v: Context, w: Context) -> Context:
    """The split context ``V ⊗ W`` generated by all ``P_i ⊗ Q_j``."""
    m = w.dim
    basis = tensor(v.basis, w.basis)
    groups = [tuple(a * m + b for a in g for b in h) for g in v.groups for h in w.groups]
    return context_from_unitary(basis, groups, tol=DEFAULT.with_(unitary=1e-9))


def trivial_tensor(v: Context, m: int, first: bool = True) -> Context:
    """``V ⊗ ℂI_m`` (``first``) or ``ℂI_m ⊗ V``."""
    n = v.dim
    if first:
        basis = tensor(v.basis, np.eye(m))
        groups = [tuple(a * m + b for a in g for b in range(m)) for g in v.groups]
    else:
        basis = tensor(np.eye(m), v.basis)
        groups = [tuple(b * n + a for b in range(m) for a in g) for g in v.groups]
    return context_from_unitary(basis, groups, tol=DEFAULT.with_(unitary=1e-9))


# --------------------------------------------------------------------------
# distance between unitarily equivalent contexts
# --------------------------------------------------------------------------

def _polar_unitary(m: np.ndarray) -> np.ndarray:
    x, _, yh = np.linalg.svd(m)
    return x @ yh


def _assemble(v_blocks, w_blocks, sigma, gauges) -> np.ndarray:
    return sum(w_blocks[sigma[j]] @ gauges[j] @ v_blocks[j].conj().T for j in range(len(v_blocks)))


def _hermitian(x: np.ndarray, r: int) -> np.ndarray:
    """Hermitian ``r x r`` matrix from ``r*r`` real parameters."""
    h = np.diag(x[:r]).astype(complex)
    iu = np.triu_indices(r, 1)
    m = len(iu[0])
    h[iu] = x[r:r + m] + 1j * x[r + m:r + 2 * m]
    return h + np.triu(h, 1).conj().T


def _cayley(h: np.ndarray) -> np.ndarray:
    """Unitary ``(I - iH/2)^-1 (I + iH/2)``; cheaper than expm for tiny blocks."""
    eye = np.eye(h.shape[0])
    return np.linalg.solve(eye - 0.5j * h, eye + 0.5j * h)


def _phase_sweep(v_blocks, w_blocks, sigma, gauges, best):
    """Exact 1-D search over the phase of each rank-one block."""
    eye = np.eye(v_blocks[0].shape[0])
    for j, g in enumerate(gauges):
        if g.shape[0] != 1:
            continue
        term = w_blocks[sigma[j]] @ v_blocks[j].conj().T
        rest = _assemble(v_blocks, w_blocks, sigma, gauges) - g[0, 0] * term
        z0 = g[0, 0]

        def f(phi):
            return maxabs(rest + np.exp(1j * phi) * z0 * term - eye)

        grid = np.linspace(-np.pi, np.pi, 65)
        t0 = grid[int(np.argmin([f(t) for t in grid]))]
        res = minimize_scalar(f, bounds=(t0 - 2 * np.pi / 64, t0 + 2 * np.pi / 64),
                              method="bounded", options={"xatol": 1e-12})
        if res.fun < best:
            gauges[j] = np.exp(1j * res.x) * g
            best = float(res.fun)
    return best


def _refine_gauges(v_blocks, w_blocks, sigma, gauges, sweeps: int = 2, joint: bool = True):
    """Descent of ``max|U - I|`` over the per-block gauge unitaries.

    Alternates exact phase sweeps on rank-one blocks with a joint search
    over the generators of all gauges.  The joint step is posed in epigraph
    form (minimise ``t`` subject to ``|U_ij - I_ij|^2 <= t^2``) so SLSQP sees
    smooth constraints instead of the kinked max norm.
    """
    eye = np.eye(v_blocks[0].shape[0])
    gauges = [g.copy() for g in gauges]
    ranks = [g.shape[0] for g in gauges]
    offsets = np.cumsum([0] + [r * r for r in ranks])
    best = maxabs(_assemble(v_blocks, w_blocks, sigma, gauges) - eye)
    for _ in range(sweeps):
        start = best
        best = _phase_sweep(v_blocks, w_blocks, sigma, gauges, best)
        if joint:
            base = [g.copy() for g in gauges]

            def moved(x):
                return [g @ _cayley(_hermitian(x[offsets[j]:offsets[j + 1]], ranks[j]))
                        for j, g in enumerate(base)]

            def slack(z):
                d = _assemble(v_blocks, w_blocks, sigma, moved(z[:-1])) - eye
                return z[-1] ** 2 - (d.real ** 2 + d.imag ** 2).ravel()

            z0 = np.append(np.zeros(offsets[-1]), best)
            res = minimize(lambda z: z[-1], z0, method="SLSQP",
                           jac=lambda z: np.eye(len(z))[-1],
                           constraints=[{"type": "ineq", "fun": slack}],
                           options={"ftol": 1e-14, "maxiter": 200})
            value = maxabs(_assemble(v_blocks, w_blocks, sigma, moved(res.x[:-1])) - eye)
            if value < best:
                gauges, best = moved(res.x[:-1]), float(value)
        if best > start - 1e-13:
            break
    return best


def _one_way_distance(v: Context, w: Context) -> float:
    vb = [v.basis[:, list(g)] for g in v.groups]
    wb = [w.basis[:, list(g)] for g in w.groups]
    k = len(vb)
    ranks_v = [b.shape[1] for b in vb]
    ranks_w = [b.shape[1] for b in wb]
    eye = np.eye(v.dim)

    def start(sigma):
        gauges = [_polar_unitary(wb[sigma[j]].conj().T @ vb[j]) for j in range(k)]
        u = _assemble(vb, wb, sigma, gauges)
        return maxabs(u - eye), gauges

    if k <= 8:
        sigmas = [s for s in itertools.permutations(range(k))
                  if all(ranks_w[s[j]] == ranks_v[j] for j in range(k))]
    else:
        cost = np.array([[-abs(np.trace(wb[b].conj().T @ vb[a])) if ranks_v[a] == ranks_w[b] else 1e9
                          for b in range(k)] for a in range(k)])
        _, cols = linear_sum_assignment(cost)
        sigmas = [tuple(cols)]
    scored = sorted((start(s) + (s,) for s in sigmas), key=lambda t: t[0])
    best = math.inf
    for rank, (value, gauges, sigma) in enumerate(scored[:3]):
        # joint polish only on the most promising relabelling
        best = min(best, value, _refine_gauges(vb, wb, sigma, gauges, joint=rank == 0))
    return best


def context_distance(v: Context, w: Context, seed: int = 0):
    """Approximate ``d(V, W)``: min of ``max_ij |U - I|`` over unitaries
    conjugating ``v`` onto ``w`` up to relabelling and per-projection gauge.

    Returns None when the contexts have different rank profiles (no
    conjugating unitary exists).  Both directions are searched and the
    smaller upper bound returned, so the result is symmetric.  The search
    is deterministic; ``seed`` is accepted for call-site compatibility.
    """
    if v.dim != w.dim:
        raise DimensionMismatch("contexts act on different dimensions")
    if sorted(v.ranks) != sorted(w.ranks):
        return None
    return min(_one_way_distance(v, w), _one_way_distance(w, v))
