import numpy as np
import pytest

from ctxent.context import refines
from ctxent.entropy import EntropyKind, contextual_entropy
from ctxent.errors import InvalidInput
from ctxent.matrixcore import partial_trace, random_density, tensor
from ctxent.properties import (
    BATTERIES,
    battery_concavity,
    bell_state,
    entangled_counterexample_search,
    random_refinement_pair,
    run_batteries,
    set_partitions,
    uniform_diagonal_basis,
)


def test_set_partitions_bell_numbers():
    assert [sum(1 for _ in set_partitions(range(n))) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]


def test_refinement_pairs(rng):
    for n in (2, 3, 5):
        fine, coarse = random_refinement_pair(n, rng)
        assert refines(fine, coarse) is not None


@pytest.mark.parametrize("name", sorted(BATTERIES))
def test_each_battery_passes(name):
    reports = BATTERIES[name](3, 0, 20)
    assert reports and all(r.passed for r in reports), reports


def test_run_batteries_merges():
    reps = run_batteries(["recursion", "subadditivity"], 3, [1, 2], 10)
    assert [r.check for r in reps] == ["recursion", "split_subadditivity"]
    assert all(r.trials == 20 for r in reps)
    with pytest.raises(InvalidInput):
        run_batteries(["nope"], 3, [0])


def test_concavity_not_claimed_for_large_q():
    with pytest.raises(InvalidInput):
        battery_concavity(3, 0, 5, kinds=(EntropyKind.renyi(2),))


def test_uniform_diagonal_basis():
    rho = random_density(5, 3, seed=1)
    u = uniform_diagonal_basis(rho)
    diag = np.einsum("ji,jk,ki->i", u.conj(), rho.matrix, u).real
    np.testing.assert_allclose(diag, np.full(5, 0.2), atol=1e-14)


def test_bell_counterexample():
    res = entangled_counterexample_search(bell_state(), (2, 2), seed=0)
    assert res.found
    # reduced product is I/4; the violation is strict and is never at a maximal context
    prod = tensor(partial_trace(bell_state(), (2, 2)).matrix,
                  partial_trace(bell_state(), (2, 2), "second").matrix)
    gap = contextual_entropy(bell_state(), res.context) - contextual_entropy(prod, res.context)
    assert gap == pytest.approx(res.excess) and gap > 1e-6
    assert res.context.k < 4


def test_product_state_has_no_counterexample():
    rho = tensor(random_density(2, seed=2).matrix, random_density(2, seed=3).matrix)
    res = entangled_counterexample_search(rho, (2, 2), seed=0, random_bases=5)
    assert not res.found and abs(res.excess) <= 1e-12
