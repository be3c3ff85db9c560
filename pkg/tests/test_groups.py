import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lglasso.exceptions import (
    CoverViolation,
    DuplicateGroup,
    GroupSetError,
    Infeasible,
    NonpositiveWeight,
    UncoveredCovariate,
)
from lglasso.groups import (
    WeightScheme,
    apply_weight_scheme,
    build_group_set,
    check_condition_C,
    domination_threshold_singletons,
    domination_value_P,
    group_set_from_dict,
    groups_from_chain_windows,
    groups_from_chain_windows_upto,
    groups_from_edges,
    groups_from_overlapping_chain,
    incidence_matrix,
    is_redundant_sufficient,
    load_group_set,
    restrict_group_size,
    save_group_set,
)

from oracles import domination_lp


class TestBuild:
    def test_two_overlapping(self):
        gs = build_group_set(3, [{1, 2}, {2, 3}], [1, 1])
        assert gs.m == 2
        assert gs.groups == ((1, 2), (2, 3))

    def test_uncovered(self):
        with pytest.raises(UncoveredCovariate) as exc:
            build_group_set(3, [{1, 2}], [1])
        assert exc.value.index == 3

    def test_cycle4(self):
        gs = build_group_set(4, [{1, 2}, {1, 3}, {2, 4}, {3, 4}], [1, 1, 1, 1])
        assert gs.m == 4

    @pytest.mark.parametrize("w", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_weight(self, w):
        with pytest.raises(NonpositiveWeight):
            build_group_set(2, [[1], [2]], [1.0, w])

    def test_duplicate(self):
        with pytest.raises(DuplicateGroup):
            build_group_set(2, [[1, 2], [2, 1]])

    @pytest.mark.parametrize(
        "p, groups",
        [(2, [[1, 3]]), (2, [[]]), (2, [[1, 1, 2]]), (0, [[1]]), (2, [[1.5, 2]])],
    )
    def test_invalid(self, p, groups):
        with pytest.raises(GroupSetError):
            build_group_set(p, groups)

    def test_weight_count(self):
        with pytest.raises(GroupSetError):
            build_group_set(2, [[1], [2]], [1.0])

    def test_canonical_order_keeps_weights_attached(self):
        gs = build_group_set(3, [[1, 2, 3], [2], [1]], [3.0, 2.0, 1.0])
        assert gs.groups == ((1,), (2,), (1, 2, 3))
        assert gs.weights.tolist() == [1.0, 2.0, 3.0]

    def test_weights_read_only(self):
        gs = build_group_set(2, [[1], [2]])
        with pytest.raises(ValueError):
            gs.weights[0] = 5.0

    def test_incidence(self):
        gs = build_group_set(3, [[1, 2], [2, 3]])
        B = incidence_matrix(gs)
        assert B.tolist() == [[1, 0], [1, 1], [0, 1]]
        assert (B.sum(axis=0) == gs.sizes).all()
        assert (B.sum(axis=1) >= 1).all()
        assert np.array_equal(gs.incidence_sparse.toarray(), B)

    def test_index_of(self):
        gs = build_group_set(3, [[1, 2], [2, 3]])
        assert gs.index_of([3, 2]) == 1
        with pytest.raises(KeyError):
            gs.index_of([1, 3])


class TestIO:
    def test_round_trip(self, tmp_path):
        gs = apply_weight_scheme(groups_from_chain_windows_upto(6, 3), WeightScheme("c_scheme", 1.0))
        path = tmp_path / "g.json"
        save_group_set(gs, path)
        assert load_group_set(path) == gs

    def test_unknown_key(self):
        with pytest.raises(GroupSetError, match="unknown"):
            group_set_from_dict({"p": 1, "groups": [[1]], "extra": 0})

    def test_missing_key(self):
        with pytest.raises(GroupSetError, match="groups"):
            group_set_from_dict({"p": 1})

    def test_json_has_one_based_groups(self, tmp_path):
        gs = build_group_set(2, [[1, 2]])
        save_group_set(gs, tmp_path / "g.json")
        data = json.loads((tmp_path / "g.json").read_text())
        assert data == {"p": 2, "groups": [[1, 2]], "weights": [1.0]}


class TestWeights:
    def test_examples(self):
        assert WeightScheme("c_scheme", 0.0)(4) == pytest.approx(2.0)
        assert WeightScheme("quartic_root")(4) == pytest.approx(math.sqrt(2))
        assert WeightScheme("c_scheme", 1.0)(9) == pytest.approx(math.sqrt(12))
        assert WeightScheme("uniform")(7) == 1.0
        assert WeightScheme("sqrt_size")(9) == pytest.approx(3.0)

    def test_apply(self):
        gs = apply_weight_scheme(groups_from_chain_windows_upto(5, 3), WeightScheme("sqrt_size"))
        assert np.allclose(gs.weights, np.sqrt(gs.sizes))

    def test_parse(self):
        assert WeightScheme.parse("c=4") == WeightScheme("c_scheme", 4.0)
        assert WeightScheme.parse("uniform") == WeightScheme("uniform")
        assert WeightScheme.parse("c=6").label == "c=6"
        with pytest.raises(ValueError):
            WeightScheme.parse("cubic")
        with pytest.raises(ValueError):
            WeightScheme("c_scheme", -1.0)

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 4.0, 6.0, 25.0])
    def test_c_scheme_increasing_and_bounded(self, c):
        k = np.arange(1, 10_001, dtype=float)
        d = WeightScheme("c_scheme", c)(k)
        assert np.all(np.diff(d) > 0)
        assert np.all(d <= (1 + c) * np.sqrt(k) * (1 + 1e-12))
        assert np.all(np.sqrt(c) * k**0.25 <= d * (1 + 1e-12))

    @pytest.mark.parametrize("c", [0.0, 0.3, 1.0])
    def test_c_scheme_quartic_lower_bound_small_c(self, c):
        k = np.arange(1, 10_001, dtype=float)
        assert np.all(c * k**0.25 <= WeightScheme("c_scheme", c)(k) * (1 + 1e-12))

    def test_c_scheme_quartic_lower_bound_fails_for_large_c(self):
        # c k^(1/4) <= d_k cannot hold at k = 1 once c > 1: d_1 = sqrt(1 + c) < c
        assert 4.0 > WeightScheme("c_scheme", 4.0)(1)


class TestConditionC:
    def test_quartic_root_holds(self):
        d = {k: k**0.25 for k in range(1, 200)}
        assert all(r.holds for r in check_condition_C(d).values())

    def test_sqrt_fails_upper(self):
        d = {k: math.sqrt(k) for k in range(1, 200)}
        rep = check_condition_C(d)
        assert all(r.lower and not r.upper for r in rep.values())

    def test_uniform_fails_lower(self):
        rep = check_condition_C({k: 1.0 for k in range(1, 50)})
        assert all(not r.lower and r.upper for r in rep.values())

    @pytest.mark.parametrize("c", [1e-3, 0.5, 1.0, 4.0, 6.0, 100.0])
    def test_c_scheme_holds(self, c):
        s = WeightScheme("c_scheme", c)
        d = {k: s(k) for k in range(1, 10_001)}
        assert all(r.holds for r in check_condition_C(d).values())

    def test_missing_size(self):
        with pytest.raises(ValueError, match="missing"):
            check_condition_C({1: 1.0, 3: 2.0})


class TestRedundancyAndDomination:
    def setup_method(self):
        self.gs = build_group_set(2, [[1], [2], [1, 2]], [1.0, 1.0, 1.5])

    def test_redundant(self):
        assert is_redundant_sufficient(self.gs, 2, [0, 1])

    def test_not_redundant(self):
        gs = self.gs.with_weights([1.0, 1.0, 1.2])
        assert not is_redundant_sufficient(gs, 2, [0, 1])

    def test_cover_violation(self):
        with pytest.raises(CoverViolation):
            is_redundant_sufficient(self.gs, 2, [0])

    @pytest.mark.parametrize("size, d1, expected", [(3, 1.0, math.sqrt(2)), (2, 1.0, 1.0), (10, 2.0, 6.0)])
    def test_threshold(self, size, d1, expected):
        assert domination_threshold_singletons(size, d1) == pytest.approx(expected)

    def test_P_two_singletons(self):
        gs = build_group_set(3, [[1], [2], [3], [1, 2, 3]])
        g = gs.index_of([1, 2, 3])
        assert domination_value_P(gs, g, [0, 1]) == pytest.approx(math.sqrt(2))

    def test_P_self(self):
        gs = build_group_set(3, [[1, 2, 3]], [2.5])
        assert domination_value_P(gs, 0, [0]) == pytest.approx(2.5)

    def test_P_two_pairs(self):
        gs = build_group_set(3, [[1, 2], [2, 3], [1, 2, 3]])
        g = gs.index_of([1, 2, 3])
        # x1 + x2 = 1 and x2 + x3 = 1, the minimum of x1 + x2 + x3 puts all mass on x2
        assert domination_value_P(gs, g, [0, 1]) == pytest.approx(1.0)

    def test_infeasible(self):
        # x1 + x2 = 1 and x3 = 1 contradict x1 + x2 + x3 = 4
        gs = build_group_set(3, [[1, 2], [3], [1, 2, 3]], [1.0, 1.0, 2.0])
        with pytest.raises(Infeasible):
            domination_value_P(gs, gs.index_of([1, 2, 3]), range(3))

    def test_not_contained(self):
        gs = build_group_set(3, [[1, 2], [2, 3]])
        with pytest.raises(ValueError):
            domination_value_P(gs, 0, [1])

    @pytest.mark.parametrize("size", range(2, 13))
    def test_P_matches_singleton_threshold(self, size):
        gs = build_group_set(size, [[i] for i in range(1, size + 1)] + [list(range(1, size + 1))])
        g = gs.m - 1
        H = list(range(size - 1))
        assert domination_value_P(gs, g, H) == pytest.approx(domination_threshold_singletons(size, 1.0), rel=1e-12)

    def test_P_simplex_branch_agrees(self):
        gs = build_group_set(4, [[1], [2], [3], [4], [1, 2], [2, 3], [1, 2, 3, 4]],
                             [1.0, 0.7, 1.3, 1.1, 1.6, 1.5, 3.0])
        g = gs.index_of([1, 2, 3, 4])
        H = [gs.index_of(h) for h in ([1], [4], [1, 2], [2, 3])]
        enum = domination_value_P(gs, g, H)
        simplex = domination_value_P(gs, g, H, max_vertex_bases=0)
        assert enum == pytest.approx(simplex, rel=1e-10)

    @given(st.integers(0, 10_000))
    def test_P_against_scipy(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 7))
        subsets = set()
        while len(subsets) < int(rng.integers(1, 5)):
            size = int(rng.integers(1, k))
            subsets.add(tuple(sorted(rng.choice(np.arange(1, k + 1), size, replace=False).tolist())))
        singles = [(i,) for i in range(1, k + 1) if (i,) not in subsets]
        groups = list(subsets) + singles + [tuple(range(1, k + 1))]
        # weights chosen so that the constraint system is feasible: x drawn first
        x = rng.uniform(0.1, 2.0, size=k)
        weights = [math.sqrt(sum(x[i - 1] for i in g)) for g in groups]
        gs = build_group_set(k, groups, weights)
        g = gs.index_of(range(1, k + 1))
        H = [gs.index_of(h) for h in subsets]
        assert domination_value_P(gs, g, H) == pytest.approx(domination_lp(gs, g, H), rel=1e-8)


class TestGenerators:
    def test_edges(self):
        gs = groups_from_edges(3, [(1, 2), (2, 3)])
        assert gs.groups == ((1, 2), (2, 3))

    def test_edges_cycle4(self):
        gs = groups_from_edges(4, [(1, 2), (1, 3), (2, 4), (3, 4)])
        assert gs == build_group_set(4, [{1, 2}, {1, 3}, {2, 4}, {3, 4}])

    def test_edges_isolated(self):
        with pytest.raises(UncoveredCovariate):
            groups_from_edges(2, [])

    def test_windows(self):
        assert groups_from_chain_windows(5, 2).groups == ((1, 2), (2, 3), (3, 4), (4, 5))
        assert groups_from_chain_windows(100, 1).m == 100
        with pytest.raises(GroupSetError):
            groups_from_chain_windows(3, 4)

    def test_windows_upto(self):
        assert groups_from_chain_windows_upto(3, 2).groups == ((1,), (2,), (3,), (1, 2), (2, 3))
        assert groups_from_chain_windows_upto(100, 20).m == 1810
        assert groups_from_chain_windows_upto(1, 1).groups == ((1,),)

    @given(st.integers(1, 40), st.integers(1, 40))
    def test_windows_upto_count(self, p, k):
        k = min(k, p)
        assert groups_from_chain_windows_upto(p, k).m == sum(p - j + 1 for j in range(1, k + 1))

    def test_overlap_chain(self):
        gs = groups_from_overlapping_chain(10, 2, 10)
        assert gs.p == 82
        assert gs.groups[3] == tuple(range(25, 35))
        assert gs.groups[4] == tuple(range(33, 43))

    def test_restrict(self):
        gs = groups_from_chain_windows_upto(10, 4)
        small = restrict_group_size(gs, 2)
        assert set(small.sizes) == {1, 2}
        assert restrict_group_size(gs, None) is gs
