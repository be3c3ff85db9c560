import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lglasso.groups import WeightScheme
from lglasso.synth import (
    ReplicateRecord,
    SynthSpec,
    abs_sum_event,
    abs_sum_event_probability,
    cv_folds,
    generate,
    grid_from_spec,
    replicate_rng,
    run_recovery_experiment,
    run_weight_experiment,
)

# value of P(|e1| + |e2| < |e3|) by two-dimensional quadrature of
# 8 phi(a) phi(b) (1 - Phi(a + b)) over the positive quadrant
MU = 0.21634689593878553

CHAIN = SynthSpec(p=82, layout={"kind": "overlap_chain", "group_size": 10, "overlap": 2, "n_groups": 10},
                  support={"groups": [4, 5]}, n=100, seed=2024)
SMALL = SynthSpec(p=12, layout={"kind": "windows_upto", "kmax": 3}, support={"intervals": [[3, 6]]}, n=30,
                  seed=5, n_test=20)


class TestSpec:
    def test_chain_support(self):
        assert CHAIN.true_support() == frozenset(range(25, 43))
        assert len(CHAIN.true_support()) == 18
        assert CHAIN.group_set().p == 82

    def test_windows_upto_support(self):
        spec = SynthSpec(p=100, layout={"kind": "windows_upto", "kmax": 20},
                         support={"intervals": [[5, 24], [90, 92]]}, n=100, noise=0.1**0.5)
        assert len(spec.true_support()) == 23
        assert spec.group_set().m == 1810

    def test_windows_support(self):
        spec = SynthSpec(p=100, layout={"kind": "windows", "k": 4}, support={"intervals": [[20, 40]]}, n=50)
        assert spec.true_support() == frozenset(range(20, 41))

    def test_weights(self):
        gs = SMALL.with_(weights="c=4").group_set()
        assert np.allclose(gs.weights, WeightScheme("c_scheme", 4.0)(gs.sizes))

    @pytest.mark.parametrize(
        "changes",
        [
            {"n": 0},
            {"layout": {"kind": "tree"}},
            {"support": {"intervals": [[0, 3]]}},
            {"support": {"groups": [1]}},
            {"support": {}},
            {"noise": "loud"},
            {"weights": "cubic"},
        ],
    )
    def test_invalid(self, changes):
        with pytest.raises(ValueError):
            SMALL.with_(**changes)

    def test_chain_p_mismatch(self):
        with pytest.raises(ValueError):
            CHAIN.with_(p=80).group_set()


class TestGenerate:
    def test_shapes_and_support(self):
        data = generate(CHAIN)
        assert data.X.shape == (100, 82)
        assert data.X_test.shape == (100, 82)
        assert {int(i) + 1 for i in np.flatnonzero(data.w_true)} == set(CHAIN.true_support())
        assert data.sigma == pytest.approx(abs(np.mean(data.X @ data.w_true + data.b_true)))

    def test_deterministic(self):
        a, b = generate(SMALL, 3), generate(SMALL, 3)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
        assert not np.array_equal(a.X, generate(SMALL, 4).X)

    def test_fixed_noise(self):
        data = generate(SMALL.with_(noise=0.0))
        assert np.allclose(data.y, data.X @ data.w_true + data.b_true)
        assert data.sigma == 0.0

    def test_replicate_stream_independent_of_count(self):
        a = replicate_rng(1, 5).standard_normal(3)
        b = replicate_rng(1, 5).standard_normal(3)
        assert np.array_equal(a, b)


@given(st.integers(2, 200), st.integers(0, 10**6))
def test_cv_folds_partition(n, seed):
    k = min(5, n)
    folds = cv_folds(n, k, np.random.default_rng(seed))
    assert len(folds) == k
    allidx = np.concatenate(folds)
    assert np.array_equal(np.sort(allidx), np.arange(n))
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_cv_folds_invalid():
    with pytest.raises(ValueError):
        cv_folds(3, 4, np.random.default_rng(0))


def test_grid_from_spec():
    g = grid_from_spec({"lo": 2**-7, "hi": 8, "n_points": 51})
    assert g.size == 51 and g[0] == pytest.approx(8)
    assert np.array_equal(grid_from_spec([3.0, 1.0]), [3.0, 1.0])
    for bad in [{"lo": 1, "hi": 2, "n_points": 3, "scale": "lin"}, [1.0, 3.0], [0.0]]:
        with pytest.raises(ValueError):
            grid_from_spec(bad)


class TestExperiment:
    def test_trivial_grid(self):
        rep = run_recovery_experiment(SMALL, [1e3], 1, cv=0)
        rec = rep.replicates[0]
        assert rec.supports == [set()]
        assert rec.recovery_errors == [0.5]
        assert not rep.selection_frequency().any()

    def test_deterministic_and_jobs_invariant(self):
        grid = {"lo": 0.01, "hi": 2.0, "n_points": 6}
        a = run_recovery_experiment(SMALL, grid, 3, cv=3)
        b = run_recovery_experiment(SMALL, grid, 3, cv=3)
        c = run_recovery_experiment(SMALL, grid, 3, cv=3, jobs=2)
        assert [r.to_dict() for r in a.replicates] == [r.to_dict() for r in b.replicates]
        assert [r.to_dict() for r in a.replicates] == [r.to_dict() for r in c.replicates]

    def test_adding_replicates_keeps_earlier_ones(self):
        grid = [1.0, 0.1]
        a = run_recovery_experiment(SMALL, grid, 2, cv=0)
        b = run_recovery_experiment(SMALL, grid, 3, cv=0)
        assert [r.to_dict() for r in a.replicates] == [r.to_dict() for r in b.replicates[:2]]

    def test_aggregates_recomputable(self):
        rep = run_recovery_experiment(SMALL, {"lo": 0.01, "hi": 2.0, "n_points": 6}, 3, cv=3)
        F = rep.selection_frequency()
        assert F.shape == (12, 6)
        T = set(SMALL.true_support())
        exact = np.mean([[s == T for s in r.supports] for r in rep.replicates], axis=0)
        assert np.array_equal(rep.exact_pattern_frequency(), exact)
        summary = rep.summary()
        assert summary["n_replicates"] == 3
        assert 0 <= summary["rec_err"] <= 1
        assert summary["rec_err_min"] <= summary["rec_err"]
        for r in rep.replicates:
            assert all(0 <= e <= 1 for e in r.recovery_errors)
            assert r.max_kkt_residual <= 1e-6
            assert ReplicateRecord.from_dict(r.to_dict()) == r

    def test_weight_experiment_labels(self):
        out = run_weight_experiment(SMALL, ["uniform", "c=4", WeightScheme("sqrt_size")], [1.0, 0.1], 1, cv=0)
        assert list(out) == ["uniform", "c=4", "sqrt_size"]
        assert out["c=4"].spec.weights == "c=4"
        with pytest.raises(ValueError):
            run_weight_experiment(SMALL, [], [1.0], 1)


class TestAbsSumEvent:
    def test_estimate(self):
        assert abs_sum_event_probability(10**6, seed=7) == pytest.approx(MU, abs=0.005)

    def test_single_sample(self):
        assert abs_sum_event_probability(1) in (0.0, 1.0)

    def test_event_degenerate(self):
        eps = np.random.default_rng(0).standard_normal((1000, 3))
        eps[:, 2] = 0.0
        assert not abs_sum_event(eps).any()

    def test_chunking_does_not_change_result(self):
        assert abs_sum_event_probability(5000, seed=3, chunk=700) == abs_sum_event_probability(5000, seed=3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            abs_sum_event_probability(0)
