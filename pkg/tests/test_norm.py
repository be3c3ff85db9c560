import math

import numpy as np
import pytest

from lglasso.exceptions import NotConverged, TopologyMismatch, UncoveredMass
from lglasso.groups import build_group_set, groups_from_chain_windows_upto
from lglasso.norm import (
    canonical_alpha,
    canonical_decomposition,
    decomposition_from_lambda,
    group_support,
    in_balanced_region,
    is_decomposition_unique,
    omega,
    omega_dual,
    omega_oracle,
)

from oracles import even_split_cost

TWO = build_group_set(3, [{1, 2}, {2, 3}])
CYCLE3 = build_group_set(3, [{1, 2}, {1, 3}, {2, 3}])
CYCLE4 = build_group_set(4, [{1, 2}, {1, 3}, {2, 4}, {3, 4}])


def test_dual_examples():
    assert omega_dual([3, 4, 0], TWO) == pytest.approx(5.0)
    assert omega_dual([0, 0, 0], TWO) == 0.0
    assert omega_dual([1, 1, 1], CYCLE3) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize(
    "gs, w, expected",
    [
        (TWO, [1, 0, 1], 2.0),
        (CYCLE3, [1, 1, 1], 3 / math.sqrt(2)),
        (CYCLE4, [1, 2, 3, 4], math.sqrt(50)),
    ],
)
def test_omega_examples(gs, w, expected):
    res = omega(w, gs)
    assert res.converged
    assert res.value == pytest.approx(expected, abs=1e-9)
    assert res.gap <= 1e-9
    assert res.value - res.alpha @ np.asarray(w, float) == pytest.approx(res.gap, abs=1e-12)
    assert np.allclose(res.decomposition.sum(axis=0), w, atol=1e-12)


def test_zero_vector():
    res = omega(np.zeros(3), TWO)
    assert res.value == 0.0 and res.converged
    sup = group_support(res, TWO)
    assert sup.strong == frozenset() and sup.weak == frozenset()


def test_bad_input():
    with pytest.raises(ValueError):
        omega([1.0, 2.0], TWO)
    with pytest.raises(ValueError):
        omega([1.0, np.nan, 0.0], TWO)
    with pytest.raises(ValueError):
        omega([1.0, 1.0, 1.0], TWO, lambda0=[-1.0, 1.0])


def test_not_converged_carries_result():
    with pytest.raises(NotConverged) as exc:
        omega([1.0, 2.0, 3.0, 4.0], CYCLE4, tol=1e-15, max_iter=1, check_every=1)
    res = exc.value.result
    assert not res.converged
    assert res.gap > 0
    assert res.iterations == 1


def test_not_converged_no_raise():
    res = omega([1.0, 2.0, 3.0, 4.0], CYCLE4, tol=1e-15, max_iter=1, check_every=1, raise_on_failure=False)
    assert not res.converged


@pytest.mark.parametrize("topology, gs", [("two_overlapping", TWO), ("cycle3", CYCLE3), ("cycle4", CYCLE4)])
def test_oracle_agreement(topology, gs):
    rng = np.random.default_rng(11)
    for _ in range(100):
        w = rng.standard_normal(gs.p) * rng.choice([0.0, 1.0], size=gs.p, p=[0.2, 0.8])
        assert omega(w, gs).value == pytest.approx(omega_oracle(w, topology), abs=1e-6)


def test_oracle_examples():
    assert not in_balanced_region([3, 1, 1])
    assert in_balanced_region([2, 1, 1])
    assert omega_oracle([2, 1, 1], "cycle3") == pytest.approx(2 * math.sqrt(2))
    assert omega_oracle([3, 1, 1], "cycle3") == pytest.approx(math.sqrt(13))
    assert omega_oracle([0, 5, 0], "two_overlapping") == pytest.approx(5.0)
    with pytest.raises(TopologyMismatch):
        omega_oracle([1, 2, 3], "cycle4")
    with pytest.raises(TopologyMismatch):
        omega_oracle([1, 2, 3], "star")


def test_upper_bound_by_even_split(rng):
    gs = groups_from_chain_windows_upto(12, 4)
    for _ in range(20):
        w = rng.standard_normal(12)
        assert omega(w, gs).value <= even_split_cost(w, gs) + 1e-9


class TestDecompositionFromLambda:
    def test_equal_split(self):
        V = decomposition_from_lambda([1, 2, 1], [1, 1], TWO)
        assert V.tolist() == [[1, 1, 0], [0, 1, 1]]

    def test_one_group(self):
        V = decomposition_from_lambda([1, 1, 0], [1, 0], TWO)
        assert V.tolist() == [[1, 1, 0], [0, 0, 0]]

    def test_uncovered(self):
        with pytest.raises(UncoveredMass):
            decomposition_from_lambda([1, 0, 0], [0, 0], TWO)


class TestGroupSupport:
    def test_interior(self):
        sup = group_support(omega([1, 1, 1], CYCLE3), CYCLE3)
        assert sup.strong == sup.weak == frozenset(range(3))

    def test_boundary(self):
        sup = group_support(omega([2, 1, 1], CYCLE3), CYCLE3)
        names = {CYCLE3.groups[g] for g in sup.strong}
        assert names == {(1, 2), (1, 3)}
        assert sup.weak == frozenset(range(3))
        assert sup.support_weak == frozenset({1, 2, 3})

    def test_outside_balanced_region(self):
        # (3,1,1): the optimum routes all mass through {1,2} and {1,3}
        sup = group_support(omega([3, 1, 1], CYCLE3), CYCLE3)
        assert {CYCLE3.groups[g] for g in sup.strong} == {(1, 2), (1, 3)}
        assert sup.strong <= sup.weak

    def test_requires_convergence(self):
        res = omega([1.0, 2.0, 3.0, 4.0], CYCLE4, tol=1e-15, max_iter=1, check_every=1, raise_on_failure=False)
        with pytest.raises(NotConverged):
            group_support(res, CYCLE4)

    def test_partition(self):
        gs = build_group_set(4, [[1, 2], [3, 4]], [1.0, 2.0])
        res = omega([1, -1, 0, 0], gs)
        sup = group_support(res, gs)
        assert sup.strong == frozenset({0})
        assert sup.support_strong == frozenset({1, 2})
        assert res.value == pytest.approx(math.sqrt(2), abs=1e-10)


class TestUniqueness:
    def test_cycle4(self):
        assert not is_decomposition_unique({1, 2, 3, 4}, range(4), CYCLE4)

    def test_partition(self):
        gs = build_group_set(5, [[1, 2], [3], [4, 5]])
        assert is_decomposition_unique({1, 2, 3, 4, 5}, range(3), gs)
        assert is_decomposition_unique({1, 4}, [gs.index_of([1, 2]), gs.index_of([4, 5])], gs)

    def test_two_overlapping_full_support(self):
        assert is_decomposition_unique({1, 2, 3}, [0, 1], TWO)
        # the literal row-rank reading disagrees (3 rows, rank 2)
        assert not is_decomposition_unique({1, 2, 3}, [0, 1], TWO, rank="row")

    def test_row_rank_square_case(self):
        assert not is_decomposition_unique({1, 2, 3, 4}, range(4), CYCLE4, rank="row")

    def test_bad_rank(self):
        with pytest.raises(ValueError):
            is_decomposition_unique({1}, [0], TWO, rank="diagonal")

    def test_empty(self):
        assert is_decomposition_unique(set(), [], TWO)
        assert not is_decomposition_unique({1}, [], TWO)


class TestCycle4:
    def test_two_initializations_agree(self):
        w = np.array([1.0, 2.0, 3.0, 4.0])
        a = omega(w, CYCLE4, lambda0=[5.0, 0.1, 0.1, 5.0])
        b = omega(w, CYCLE4, lambda0=[0.1, 5.0, 5.0, 0.1])
        assert not np.allclose(a.lam, b.lam, atol=1e-3)
        assert a.value == pytest.approx(b.value, abs=1e-9)
        ca = canonical_alpha(a, group_support(a, CYCLE4))
        cb = canonical_alpha(b, group_support(b, CYCLE4))
        assert np.allclose(ca, cb, atol=1e-7)


class TestCanonicalDecomposition:
    def test_prefers_small_groups_on_ties(self):
        gs = build_group_set(2, [[1], [2], [1, 2]], [1.0, 1.0, math.sqrt(2)])
        w = np.array([1.0, 1.0])
        res = omega(w, gs)
        V = canonical_decomposition(w, res.alpha, gs)
        assert np.allclose(V.sum(axis=0), w, atol=1e-8)
        assert np.linalg.norm(V[2]) < 1e-8
        assert np.sum(gs.weights * np.linalg.norm(V, axis=1)) == pytest.approx(res.value, rel=1e-7)

    def test_unique_case_matches_solver(self):
        w = np.array([2.0, 1.0, 1.0])
        res = omega(w, CYCLE3)
        V = canonical_decomposition(w, res.alpha, CYCLE3)
        assert np.allclose(V, res.decomposition, atol=1e-6)

    def test_zero(self):
        assert not canonical_decomposition(np.zeros(3), np.zeros(3), TWO).any()

    def test_no_saturated_group(self):
        with pytest.raises(UncoveredMass):
            canonical_decomposition(np.ones(3), np.zeros(3), TWO)
