import math

import numpy as np
import pytest

from ctxent.context import computational_context, maximal_context_from_unitary
from ctxent.entropy import CHEBYSHEV, HARTLEY, LN2, SHANNON, EntropyKind, EntropyOracle
from ctxent.errors import MultipleZeroContexts, NoZeroContext, TargetOutOfRange, UnsupportedKind
from ctxent.matrixcore import (
    density_from_spectrum,
    eig_hermitian,
    haar_random_unitary,
    pure_state,
    random_density,
    trace_distance,
    validate_density,
)
from ctxent.reconstruct import (
    AmbiguousPair,
    Infeasible,
    InfeasibleReason,
    ReconstructionConfig,
    Unique,
    assign_eigenvalues,
    complement_rotation,
    reconstruct,
    reconstruct_dim2,
    reconstruct_pure,
    reconstruct_state,
    verify_candidate,
    zero_threshold,
)


def rt(rho, cfg, kind=SHANNON):
    res = reconstruct_state(rho, kind, cfg)
    assert isinstance(res, Unique), res
    return res, trace_distance(res.rho, rho)


class TestPure:
    def test_basis_projection(self, fast_recon):
        rho = np.diag([1.0, 0, 0])
        got = reconstruct_pure(EntropyOracle.from_state(rho), computational_context(3), fast_recon)
        np.testing.assert_allclose(got.matrix, rho, atol=1e-15)

    def test_haar_vector(self, fast_recon, rng):
        u = haar_random_unitary(4, rng).matrix
        rho = pure_state(u[:, 2])
        got = reconstruct_pure(EntropyOracle.from_state(rho), maximal_context_from_unitary(u), fast_recon)
        assert trace_distance(got, rho) <= 1e-8

    def test_mixed_state_has_no_zero_context(self, fast_recon):
        with pytest.raises(NoZeroContext):
            reconstruct_pure(EntropyOracle.from_state(np.eye(2) / 2), computational_context(2), fast_recon)
        with pytest.raises(NoZeroContext):
            reconstruct_pure(EntropyOracle.from_state(np.diag([0.9, 0.1, 0])), computational_context(3),
                             fast_recon)

    def test_qubit_is_ambiguous(self, fast_recon):
        with pytest.raises(MultipleZeroContexts):
            reconstruct_pure(EntropyOracle.from_state(np.diag([1.0, 0])), computational_context(2), fast_recon)

    def test_rotation_does_not_permute(self, rng):
        for fixed in range(4):
            u = complement_rotation(4, fixed, rng)
            np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
            assert u[fixed, fixed] == 1
            rest = [i for i in range(4) if i != fixed]
            assert np.max(np.abs(u[np.ix_(rest, rest)]) ** 2) <= 0.95


class TestAssignment:
    def test_sum_one(self):
        np.testing.assert_allclose(assign_eigenvalues([0.4, 0.35, 0.25]), [0.4, 0.35, 0.25])

    def test_one_match(self):
        # spectrum (0.6, 0.3, 0.1): p = (0.4, 0.3, 0.1), S = 0.8, S/2 = 0.4
        np.testing.assert_allclose(assign_eigenvalues([0.4, 0.3, 0.1]), [0.6, 0.3, 0.1], atol=1e-15)
        np.testing.assert_allclose(assign_eigenvalues([0.3, 0.2, 0.1]), [0.7, 0.2, 0.1], atol=1e-15)

    def test_tie_and_failures(self):
        from ctxent.reconstruct import _NoSolution, _Tie
        with pytest.raises(_Tie) as tie:
            assign_eigenvalues([0.2, 0.2, 0, 0])
        assert (tie.value.j1, tie.value.j2) == (0, 1)
        cases = [([0.5, 0.5, 0.5], InfeasibleReason.SUM_EXCEEDS_ONE),
                 ([0.3, 0.25, 0.1], InfeasibleReason.NO_HALF_SUM_MATCH),
                 # two indices at S/2 within tie_tol, but the rest is not negligible
                 ([0.2, 0.2, 1.5e-7], InfeasibleReason.TIE_WITH_NONZERO_REST),
                 ([0.0, 0.0, 0.0], InfeasibleReason.TOO_MANY_MATCHES)]
        for p, reason in cases:
            with pytest.raises(_NoSolution) as exc:
                assign_eigenvalues(p)
            assert exc.value.reason is reason
            assert "p" in exc.value.detail


class TestGeneral:
    def test_sum_one_branch(self, fast_recon):
        u = haar_random_unitary(3, 1).matrix
        rho = density_from_spectrum([0.45, 0.35, 0.2], u)
        res, d = rt(rho, fast_recon)
        assert d <= 1e-6 and res.diagnostics["branch"] == "S=1"

    def test_one_match_branch(self, fast_recon):
        res, d = rt(np.diag([0.6, 0.3, 0.1]).astype(complex), fast_recon)
        assert d <= 1e-6 and res.diagnostics["branch"] == "S<1"

    def test_tie_branch(self, fast_recon):
        u = haar_random_unitary(4, 2).matrix
        rho = density_from_spectrum([0.2, 0.8, 0, 0], u)
        res, d = rt(rho, fast_recon)
        assert d <= 1e-6
        assert res.diagnostics["branch"] == "tie"
        assert res.diagnostics["tie_break"]["attempts"] >= 1

    def test_forced_infeasible(self, fast_recon):
        oracle = EntropyOracle(lambda v: LN2 if v.k == 2 else math.log(3), 3)
        res = reconstruct(oracle, 3, fast_recon)
        assert isinstance(res, Infeasible) and res.reason is InfeasibleReason.SUM_EXCEEDS_ONE
        assert res.detail["S"] == pytest.approx(1.5)
        assert res.exit_code == 4

    def test_binary_above_ln2(self, fast_recon):
        oracle = EntropyOracle(lambda v: 0.9 if v.k == 2 else math.log(3), 3)
        res = reconstruct(oracle, 3, fast_recon)
        assert res.reason is InfeasibleReason.BINARY_ABOVE_LN2
        assert res.diagnostics["branch"] == "binary_contexts"

    def test_verification_catches_non_section(self, fast_recon):
        # agrees with a state everywhere except on contexts of rank profile (2, 2)
        real = EntropyOracle.from_state(np.diag([0.4, 0.3, 0.2, 0.1]))
        fake = EntropyOracle(lambda v: 0.0 if v.ranks == (2, 2) else real(v), 4)
        res = reconstruct(fake, 4, fast_recon)
        assert isinstance(res, Infeasible) and res.reason is InfeasibleReason.VERIFICATION_FAILED
        assert res.detail["max_residual"] > 1e-6

    def test_equivariance(self, fast_recon):
        rho = random_density(3, 2, seed=3)
        u = haar_random_unitary(3, 4)
        moved = validate_density(u.matrix @ rho.matrix @ u.H)
        res, d = rt(moved, fast_recon)
        assert d <= 1e-6

    def test_degenerate_spectrum(self, fast_recon):
        u = haar_random_unitary(4, 5).matrix
        _, d = rt(density_from_spectrum([0.3, 0.3, 0.3, 0.1], u), fast_recon)
        assert d <= 1e-6
        _, d = rt(np.eye(3) / 3, fast_recon)
        assert d <= 1e-6

    @pytest.mark.parametrize("q", [0.5, 2.0, 3.0])
    def test_renyi(self, fast_recon, q):
        for rank in (1, 3):
            _, d = rt(random_density(3, rank, seed=int(10 * q) + rank), fast_recon, EntropyKind.renyi(q))
            assert d <= 1e-6

    def test_unsupported_kinds(self, fast_recon):
        for kind in (HARTLEY, CHEBYSHEV):
            with pytest.raises(UnsupportedKind):
                reconstruct_state(np.eye(3) / 3, kind, fast_recon)

    def test_zero_threshold_scale(self):
        assert zero_threshold(SHANNON, 1e-8) == pytest.approx(1e-8, rel=1e-9)
        assert zero_threshold(EntropyKind.renyi(0.5), 1e-8) > 1e-6
        assert zero_threshold(EntropyKind.renyi(2), 1e-8) < 1e-8


class TestDim2:
    def test_pair(self, fast_recon):
        res = reconstruct_state(np.diag([0.7, 0.3]), SHANNON, fast_recon)
        assert isinstance(res, AmbiguousPair) and res.exit_code == 3
        spectra = sorted(tuple(np.round(eig_hermitian(r)[0], 8)) for r in (res.rho_a, res.rho_b))
        assert spectra == [(0.7, 0.3), (0.7, 0.3)]
        np.testing.assert_allclose(res.rho_a.matrix + res.rho_b.matrix, np.eye(2), atol=1e-12)
        assert min(trace_distance(r, np.diag([0.7, 0.3])) for r in (res.rho_a, res.rho_b)) <= 1e-6

    def test_maximally_mixed(self, fast_recon):
        res = reconstruct_state(np.eye(2) / 2, SHANNON, fast_recon)
        assert isinstance(res, Unique)
        np.testing.assert_allclose(res.rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_pure(self, fast_recon):
        rho = pure_state([0.6, 0.8j])
        res = reconstruct_state(rho, SHANNON, fast_recon)
        assert isinstance(res, AmbiguousPair)
        assert min(trace_distance(r, rho) for r in (res.rho_a, res.rho_b)) <= 1e-6

    def test_out_of_range(self, fast_recon):
        with pytest.raises(TargetOutOfRange):
            reconstruct_dim2(EntropyOracle(lambda v: LN2 + 5e-10, 2), fast_recon)


class TestVerify:
    def test_self(self):
        rho = random_density(3, seed=6)
        rep = verify_candidate(rho, EntropyOracle.from_state(rho), 64, 1e-6)
        assert rep.passed and rep.max_residual <= 1e-10

    def test_rotated_fails(self):
        rho = random_density(3, seed=7)
        u = haar_random_unitary(3, 8)
        other = validate_density(u.matrix @ rho.matrix @ u.H)
        assert not verify_candidate(rho, EntropyOracle.from_state(other), 64, 1e-6).passed

    def test_qubit_complement_passes(self):
        rho = random_density(2, seed=9)
        comp = validate_density(np.eye(2) - rho.matrix)
        assert verify_candidate(comp, EntropyOracle.from_state(rho), 50, 1e-6).passed


def test_result_json(fast_recon):
    res = reconstruct_state(np.diag([0.6, 0.3, 0.1]), SHANNON, fast_recon)
    d = res.to_json()
    assert d["outcome"] == "unique" and d["diagnostics"]["verification"]["pass"]


def test_config_validation():
    from ctxent.errors import InvalidInput
    with pytest.raises(InvalidInput):
        ReconstructionConfig(tol_zero=0)
