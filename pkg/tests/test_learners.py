"""The competing learners against independent oracles and their contracts."""

import numpy as np
import pytest

from mlcm.exceptions import NotFittedError
from mlcm.learners import (
    LEARNER_KINDS,
    LEARNER_ORDER,
    GradientBoosting,
    Lasso,
    PartialLeastSquares,
    RandomForest,
    RegressionTree,
    clone,
    make_learner,
    model_from_dict,
    model_to_dict,
    variable_importance,
)

from conftest import ols_fit, ols_predict


def _random_regression(rng, n=40, d=5, noise=0.5):
    X = rng.normal(0.0, 1.0, (n, d))
    beta = rng.normal(0.0, 2.0, d)
    y = X @ beta + rng.normal(0.0, noise, n)
    return X, y


# ---------------------------------------------------------------------------
# registry and base API
# ---------------------------------------------------------------------------

class TestRegistry:
    def test_make_learner_constructs_each_kind(self):
        for kind in LEARNER_KINDS:
            est = make_learner(kind)
            assert est.kind == kind

    def test_unknown_kind_is_named(self):
        with pytest.raises(ValueError, match="quantile"):
            make_learner("quantile")

    def test_order_prefers_linear_models(self):
        assert LEARNER_ORDER[:2] == ("lasso", "pls")

    def test_params_round_trip_through_get_set(self):
        est = GradientBoosting(n_trees=7, learning_rate=0.3)
        params = est.get_params()
        other = GradientBoosting().set_params(**params)
        assert other.get_params() == params

    def test_clone_drops_fitted_state(self):
        rng = np.random.default_rng(0)
        X, y = _random_regression(rng)
        est = Lasso(penalty=0.0).fit(X, y)
        fresh = clone(est)
        assert fresh.get_params() == est.get_params()
        with pytest.raises(NotFittedError):
            fresh.predict(X)

    def test_predict_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            RegressionTree().predict(np.ones((2, 2)))

    def test_feature_name_mismatch_names_offenders(self):
        rng = np.random.default_rng(1)
        X, y = _random_regression(rng, d=2)
        est = Lasso(penalty=0.1).fit(X, y, feature_names=("a", "b"))
        with pytest.raises(ValueError, match="b"):
            est.predict(X, feature_names=("a", "c"))

    def test_non_finite_training_data_rejected(self):
        X = np.ones((4, 2))
        y = np.array([1.0, np.nan, 3.0, 4.0])
        with pytest.raises(ValueError):
            Lasso().fit(X, y)


# ---------------------------------------------------------------------------
# LASSO
# ---------------------------------------------------------------------------

class TestLasso:
    def test_zero_penalty_matches_normal_equations(self):
        # the core oracle equivalence, run on several draws here and on 20
        # in the acceptance suite
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X, y = _random_regression(rng, n=30, d=4)
            est = Lasso(penalty=0.0).fit(X, y)
            b0, b = ols_fit(X, y)
            np.testing.assert_allclose(est.coef_, b, atol=1e-8)
            np.testing.assert_allclose(est.intercept_, b0, atol=1e-8)

    def test_huge_penalty_shrinks_to_the_mean(self):
        rng = np.random.default_rng(2)
        X, y = _random_regression(rng)
        est = Lasso(penalty=1e6).fit(X, y)
        assert np.all(est.coef_ == 0.0)
        np.testing.assert_allclose(est.predict(X), np.full(len(y), y.mean()))

    def test_penalty_monotone_in_sparsity(self):
        rng = np.random.default_rng(3)
        X, y = _random_regression(rng, n=60, d=6)
        nnz = [
            int(np.sum(Lasso(penalty=lam).fit(X, y).coef_ != 0.0))
            for lam in (0.0, 0.3, 0.9, 3.0)
        ]
        assert nnz[0] >= nnz[1] >= nnz[2] >= nnz[3]

    def test_solution_satisfies_kkt_conditions(self):
        # stationarity of the penalized objective on standardized features
        rng = np.random.default_rng(4)
        X, y = _random_regression(rng, n=50, d=5)
        lam = 0.2
        est = Lasso(penalty=lam).fit(X, y)
        Z = (X - est.x_mean_) / est.x_scale_
        beta_std = est.coef_ * est.x_scale_
        n = len(y)
        grad = (Z.T @ (Z @ beta_std - (y - y.mean()))) / n
        active = beta_std != 0.0
        np.testing.assert_allclose(
            grad[active], -lam * np.sign(beta_std[active]), atol=1e-7
        )
        assert np.all(np.abs(grad[~active]) <= lam + 1e-7)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(5)
        X, y = _random_regression(rng)
        scaled = X.copy()
        scaled[:, 0] *= 100.0
        a = Lasso(penalty=0.4).fit(X, y)
        b = Lasso(penalty=0.4).fit(scaled, y)
        np.testing.assert_allclose(a.predict(X), b.predict(scaled), atol=1e-9)
        np.testing.assert_allclose(a.coef_[0], b.coef_[0] * 100.0, atol=1e-9)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError, match="penalty"):
            Lasso(penalty=-0.1).fit(np.ones((3, 1)), np.arange(3.0))

    def test_constant_feature_gets_zero_coefficient(self):
        rng = np.random.default_rng(6)
        X, y = _random_regression(rng, d=3)
        X[:, 1] = 7.0
        est = Lasso(penalty=0.0).fit(X, y)
        assert est.coef_[1] == 0.0


# ---------------------------------------------------------------------------
# PLS
# ---------------------------------------------------------------------------

class TestPartialLeastSquares:
    def test_full_components_match_ols_predictions(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X, y = _random_regression(rng, n=30, d=4)
            est = PartialLeastSquares(n_components=4).fit(X, y)
            np.testing.assert_allclose(
                est.predict(X), ols_predict(X, y, X), atol=1e-8
            )

    def test_constant_target_predicts_the_constant(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (20, 3))
        y = np.full(20, 4.25)
        est = PartialLeastSquares(n_components=2).fit(X, y)
        np.testing.assert_allclose(est.predict(X), y)

    def test_component_count_validated(self):
        rng = np.random.default_rng(2)
        X, y = _random_regression(rng, d=3)
        with pytest.raises(ValueError):
            PartialLeastSquares(n_components=0).fit(X, y)
        # requests beyond the column count clamp (feature subsets may be
        # smaller than the grid was sized for) and still match OLS
        est = PartialLeastSquares(n_components=9).fit(X, y)
        assert est.effective_components_ <= 3
        np.testing.assert_allclose(
            est.predict(X), ols_predict(X, y, X), atol=1e-8
        )

    def test_one_component_beats_mean_on_a_linear_target(self):
        rng = np.random.default_rng(3)
        X, y = _random_regression(rng, n=60, d=4, noise=0.1)
        est = PartialLeastSquares(n_components=1).fit(X, y)
        mse = np.mean((est.predict(X) - y) ** 2)
        assert mse < np.var(y) * 0.9

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        X, y = _random_regression(rng)
        scaled = X.copy()
        scaled[:, 2] *= 50.0
        a = PartialLeastSquares(n_components=2).fit(X, y)
        b = PartialLeastSquares(n_components=2).fit(scaled, y)
        np.testing.assert_allclose(a.predict(X), b.predict(scaled), atol=1e-9)


# ---------------------------------------------------------------------------
# regression tree
# ---------------------------------------------------------------------------

class TestRegressionTree:
    def test_interpolates_training_data_with_min_node_one(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 1, (25, 3))
        y = rng.normal(0, 1, 25)
        est = RegressionTree(min_node=1).fit(X, y)
        np.testing.assert_allclose(est.predict(X), y)

    def test_min_node_at_n_returns_the_mean(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (20, 2))
        y = rng.normal(0, 1, 20)
        est = RegressionTree(min_node=20).fit(X, y)
        np.testing.assert_allclose(est.predict(X), np.full(20, y.mean()))

    def test_depth_zero_is_the_mean(self):
        rng = np.random.default_rng(2)
        X = rng.normal(0, 1, (20, 2))
        y = rng.normal(0, 1, 20)
        est = RegressionTree(max_depth=0).fit(X, y)
        np.testing.assert_allclose(est.predict(X), np.full(20, y.mean()))

    def test_recovers_a_step_function(self):
        X = np.linspace(0, 1, 40)[:, None]
        y = np.where(X[:, 0] < 0.5, -1.0, 1.0)
        est = RegressionTree(max_depth=1, min_node=2).fit(X, y)
        np.testing.assert_allclose(est.predict(X), y)

    def test_deterministic_across_refits(self):
        rng = np.random.default_rng(3)
        X, y = _random_regression(rng, n=50, d=4)
        a = RegressionTree(min_node=3).fit(X, y).predict(X)
        b = RegressionTree(min_node=3).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------

class TestRandomForest:
    def test_one_tree_no_bootstrap_equals_single_cart(self):
        rng = np.random.default_rng(0)
        X, y = _random_regression(rng, n=40, d=3)
        forest = RandomForest(
            n_trees=1, mtry=3, bootstrap=False, min_node=5
        ).fit(X, y)
        tree = RegressionTree(min_node=5).fit(X, y)
        np.testing.assert_allclose(forest.predict(X), tree.predict(X))

    def test_seeded_determinism(self):
        rng = np.random.default_rng(1)
        X, y = _random_regression(rng, n=40, d=4)
        a = RandomForest(n_trees=12, seed=9).fit(X, y).predict(X)
        b = RandomForest(n_trees=12, seed=9).fit(X, y).predict(X)
        c = RandomForest(n_trees=12, seed=10).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_mtry_validated(self):
        rng = np.random.default_rng(2)
        X, y = _random_regression(rng, d=3)
        with pytest.raises(ValueError, match="mtry"):
            RandomForest(mtry=9).fit(X, y)

    def test_importance_ranks_the_planted_driver_first(self):
        rng = np.random.default_rng(3)
        X = rng.normal(0, 1, (120, 2))
        y = 3.0 * X[:, 0] + rng.normal(0, 0.3, 120)
        est = RandomForest(n_trees=40, seed=0).fit(
            X, y, feature_names=("driver", "noise")
        )
        ranking = variable_importance(est)
        assert ranking[0][0] == "driver"
        assert ranking[0][1] > ranking[1][1]

    def test_single_feature_holds_all_importance(self):
        rng = np.random.default_rng(4)
        X = rng.normal(0, 1, (60, 1))
        y = X[:, 0] + rng.normal(0, 0.1, 60)
        est = RandomForest(n_trees=10, seed=0).fit(X, y)
        ranking = variable_importance(est)
        assert len(ranking) == 1
        assert ranking[0][1] > 0.0

    def test_constant_target_gives_zero_importances(self):
        rng = np.random.default_rng(5)
        X = rng.normal(0, 1, (30, 3))
        y = np.full(30, 2.0)
        est = RandomForest(n_trees=5, seed=0).fit(X, y)
        assert all(score == 0.0 for _, score in variable_importance(est))
        np.testing.assert_allclose(est.predict(X), y)

    def test_importance_rejected_for_linear_models(self):
        rng = np.random.default_rng(6)
        X, y = _random_regression(rng)
        est = Lasso().fit(X, y)
        with pytest.raises(TypeError, match="importance"):
            variable_importance(est)


# ---------------------------------------------------------------------------
# gradient boosting
# ---------------------------------------------------------------------------

class TestGradientBoosting:
    def test_zero_learning_rate_predicts_the_mean(self):
        rng = np.random.default_rng(0)
        X, y = _random_regression(rng)
        est = GradientBoosting(n_trees=5, learning_rate=0.0).fit(X, y)
        np.testing.assert_allclose(est.predict(X), np.full(len(y), y.mean()))

    def test_seeded_determinism(self):
        rng = np.random.default_rng(1)
        X, y = _random_regression(rng, n=50, d=3)
        a = GradientBoosting(n_trees=20, seed=4).fit(X, y).predict(X)
        b = GradientBoosting(n_trees=20, seed=4).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)

    def test_staged_property_prefix_trees_agree(self):
        # per-tree seeds depend only on (seed, tree index), so an n-tree fit
        # reproduces the (n-1)-tree fit exactly on its first n-1 trees;
        # truncating the serialized ensemble must equal the shorter fit
        rng = np.random.default_rng(2)
        X, y = _random_regression(rng, n=50, d=3)
        full = GradientBoosting(n_trees=5, seed=7).fit(X, y)
        short = GradientBoosting(n_trees=4, seed=7).fit(X, y)
        doc = model_to_dict(full)
        doc["fitted"]["offsets_"] = doc["fitted"]["offsets_"][:5]
        truncated = model_from_dict(doc)
        np.testing.assert_array_equal(
            truncated.predict(X), short.predict(X)
        )

    def test_fitting_reduces_training_error(self):
        rng = np.random.default_rng(3)
        X, y = _random_regression(rng, n=80, d=4, noise=0.2)
        est = GradientBoosting(
            n_trees=100, learning_rate=0.1, max_depth=2, seed=0
        ).fit(X, y)
        assert np.mean((est.predict(X) - y) ** 2) < np.var(y) * 0.5

    def test_subsample_bounds_validated(self):
        rng = np.random.default_rng(4)
        X, y = _random_regression(rng)
        with pytest.raises(ValueError, match="subsample"):
            GradientBoosting(subsample=0.0).fit(X, y)
        with pytest.raises(ValueError, match="subsample"):
            GradientBoosting(subsample=1.5).fit(X, y)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

class TestModelDocuments:
    @pytest.mark.parametrize("kind,params", [
        ("lasso", {"penalty": 0.3}),
        ("pls", {"n_components": 2}),
        ("tree", {"min_node": 4}),
        ("forest", {"n_trees": 8, "seed": 3}),
        ("gbm", {"n_trees": 8, "seed": 3}),
    ])
    def test_round_trip_preserves_predictions(self, kind, params):
        rng = np.random.default_rng(8)
        X, y = _random_regression(rng, n=40, d=3)
        est = make_learner(kind, **params).fit(
            X, y, feature_names=("a", "b", "c")
        )
        rebuilt = model_from_dict(model_to_dict(est))
        np.testing.assert_array_equal(rebuilt.predict(X), est.predict(X))
        assert rebuilt.feature_names_in_ == ("a", "b", "c")

    def test_unknown_format_version_rejected(self):
        rng = np.random.default_rng(9)
        X, y = _random_regression(rng, d=2)
        doc = model_to_dict(Lasso(penalty=0.0).fit(X, y))
        doc["format"] = 99
        with pytest.raises(ValueError, match="format"):
            model_from_dict(doc)
