"""The synthetic-panel generator and the Monte Carlo harness."""

import math

import numpy as np
import pytest

from mlcm import (
    LagSpec,
    SimConfig,
    gen_covariates,
    gen_panel,
    run_monte_carlo,
    run_pipeline,
    scenario_grid,
)
from mlcm._seeds import TAG_SIM_PANEL, derive_rng
from mlcm.simulation import (
    BETA_DEFAULT,
    BURN_IN,
    default_estimation_config,
)

from conftest import LASSO_ONLY


def tiny_config(**overrides):
    base = dict(
        N=20, T=7, t0=4, phi=0.8, sigma_eps=1.0, sigma_u=0.5, seed=0
    )
    base.update(overrides)
    if "effect_sd_multipliers" not in overrides:
        n_post = max(base["T"] - base["t0"], 0)
        base["effect_sd_multipliers"] = (2.0, 1.5, 1.0, 0.5, 0.25)[:n_post]
    return SimConfig(**base)


# ---------------------------------------------------------------------------
# covariates
# ---------------------------------------------------------------------------

class TestGenCovariates:
    def test_shape_and_interactions(self):
        cfg = tiny_config(N=40, T=6)
        X = gen_covariates(cfg, derive_rng(0))
        assert X.shape == (40, 6, 11)
        np.testing.assert_array_equal(X[:, :, 9], X[:, :, 2] * X[:, :, 8])
        np.testing.assert_array_equal(X[:, :, 10], X[:, :, 1] * X[:, :, 7])

    def test_discrete_columns_have_the_right_support(self):
        cfg = tiny_config(N=300, T=5)
        X = gen_covariates(cfg, derive_rng(1))
        assert set(np.unique(X[:, :, 7])) == {0.0, 1.0}
        assert set(np.unique(X[:, :, 8])) == {1.0, 2.0, 3.0}

    def test_shared_trend_moves_the_level_columns(self):
        cfg = tiny_config(N=4000, T=5, sigma_u=1.0)
        X = gen_covariates(cfg, derive_rng(2))
        for t in range(5):
            expected = 0.1 * (t + 1) + 1.0  # trend plus E[u] = 1
            assert X[:, t, 0].mean() == pytest.approx(expected, abs=0.06)
            assert X[:, t, 1].mean() == pytest.approx(expected, abs=0.06)

    def test_x3_x5_correlation_without_heterogeneity(self):
        # with sigma_u = 0 the only dependence is the MVN block's 0.7
        cfg = tiny_config(N=3000, T=6, t0=3, sigma_u=0.0)
        X = gen_covariates(cfg, derive_rng(3), n_periods=4)
        r = np.corrcoef(X[:, :, 2].ravel(), X[:, :, 4].ravel())[0, 1]
        assert r == pytest.approx(0.7, abs=0.03)

    def test_x3_x5_correlation_with_heterogeneity(self):
        # the shared unit intercept u adds sigma_u^2 to both the covariance
        # and the variances: corr = (0.7 + 1) / (1 + 1) = 0.85 at sigma_u=1
        cfg = tiny_config(N=3000, T=6, t0=3, sigma_u=1.0)
        X = gen_covariates(cfg, derive_rng(4), n_periods=4)
        r = np.corrcoef(X[:, :, 2].ravel(), X[:, :, 4].ravel())[0, 1]
        assert r == pytest.approx(0.85, abs=0.03)

    def test_fixed_discrete_columns_freeze_per_unit(self):
        cfg = tiny_config(N=50, T=6, x89_fixed_per_unit=True)
        X = gen_covariates(cfg, derive_rng(5))
        for j in (7, 8):
            assert np.all(X[:, :, j] == X[:, :1, j])

    def test_default_discrete_columns_redraw_each_period(self):
        cfg = tiny_config(N=50, T=6)
        X = gen_covariates(cfg, derive_rng(6))
        assert not np.all(X[:, :, 7] == X[:, :1, 7])


# ---------------------------------------------------------------------------
# panels
# ---------------------------------------------------------------------------

class TestGenPanel:
    def test_linear_recursion_matches_a_replayed_oracle(self):
        # replay the documented draw order and recursion independently
        cfg = tiny_config(seed=7)
        panel = gen_panel(cfg)
        rng = derive_rng(cfg.seed, TAG_SIM_PANEL)
        total = BURN_IN + cfg.T
        X = gen_covariates(cfg, rng, n_periods=total)
        eps = rng.normal(0.0, cfg.sigma_eps, (cfg.N, total))
        beta = np.asarray(cfg.beta)
        y = np.zeros(cfg.N)
        path = []
        for t in range(total):
            drive = cfg.phi * y
            if t > 0:
                drive = drive + X[:, t - 1, :] @ beta
            y = drive + eps[:, t]
            path.append(y.copy())
        y0 = np.stack(path, axis=1)[:, BURN_IN:]
        np.testing.assert_array_equal(
            panel.dataset.outcome[:, : cfg.t0], y0[:, : cfg.t0]
        )
        np.testing.assert_array_equal(panel.y0_post, y0[:, cfg.t0 :])

    def test_nonlinear_recursion_matches_a_replayed_oracle(self):
        cfg = tiny_config(dgp="nonlinear", seed=8)
        panel = gen_panel(cfg)
        rng = derive_rng(cfg.seed, TAG_SIM_PANEL)
        total = BURN_IN + cfg.T
        X = gen_covariates(cfg, rng, n_periods=total)
        eps = rng.normal(0.0, cfg.sigma_eps, (cfg.N, total))
        beta = np.asarray(cfg.beta)
        y = np.zeros(cfg.N)
        path = []
        for t in range(total):
            drive = cfg.phi * y
            if t > 0:
                drive = drive + X[:, t - 1, :] @ beta
            y = np.sin(drive) + eps[:, t]
            path.append(y.copy())
        y0 = np.stack(path, axis=1)[:, BURN_IN:]
        np.testing.assert_array_equal(
            panel.dataset.outcome[:, : cfg.t0], y0[:, : cfg.t0]
        )

    def test_treatment_adds_scaled_effects_exactly(self):
        cfg = tiny_config(seed=9)
        panel = gen_panel(cfg)
        np.testing.assert_array_equal(
            panel.dataset.outcome[:, cfg.t0 :],
            panel.y0_post + panel.true_effects,
        )

    def test_true_effects_scale_with_unit_volatility(self):
        cfg = tiny_config(seed=10, effect_sd_multipliers=(2.0, 1.5, 1.0))
        panel = gen_panel(cfg)
        sd_i = panel.dataset.outcome[:, : cfg.t0].std(axis=1, ddof=1)
        np.testing.assert_array_equal(
            panel.true_effects,
            sd_i[:, None] * np.array([2.0, 1.5, 1.0])[None, :],
        )
        np.testing.assert_array_equal(
            panel.true_ate, panel.true_effects.mean(axis=0)
        )

    def test_autoregression_coefficient_is_recoverable(self):
        # beta = 0 turns the outcome into a pure AR(1); pooled OLS of y_t
        # on y_{t-1} over the kept window recovers phi
        cfg = tiny_config(
            N=2000, T=8, t0=7, phi=0.6, beta=(0.0,) * 11, seed=11,
            effect_sd_multipliers=(1.0,),
        )
        panel = gen_panel(cfg)
        y = panel.dataset.outcome[:, : cfg.t0]
        prev = y[:, :-1].ravel()
        curr = y[:, 1:].ravel()
        slope = np.cov(prev, curr)[0, 1] / np.var(prev)
        assert slope == pytest.approx(0.6, abs=0.03)

    def test_nonlinear_outcomes_are_bounded_when_noise_is_small(self):
        cfg = tiny_config(
            N=100, dgp="nonlinear", sigma_eps=0.001, seed=12
        )
        panel = gen_panel(cfg)
        assert np.max(np.abs(panel.dataset.outcome[:, : cfg.t0])) <= 1.01
        assert np.max(np.abs(panel.y0_post)) <= 1.01

    def test_same_config_regenerates_bit_identically(self):
        cfg = tiny_config(seed=13)
        a = gen_panel(cfg)
        b = gen_panel(cfg)
        np.testing.assert_array_equal(a.dataset.outcome, b.dataset.outcome)
        np.testing.assert_array_equal(
            a.dataset.covariates, b.dataset.covariates
        )
        np.testing.assert_array_equal(a.true_effects, b.true_effects)

    def test_different_seeds_differ(self):
        a = gen_panel(tiny_config(seed=14))
        b = gen_panel(tiny_config(seed=15))
        assert not np.array_equal(a.dataset.outcome, b.dataset.outcome)

    def test_covariate_names_follow_the_generator(self):
        panel = gen_panel(tiny_config(seed=16))
        assert panel.dataset.covariate_names == tuple(
            f"X{j}" for j in range(1, 12)
        )

    def test_config_validation(self):
        with pytest.raises(ValueError, match="N"):
            tiny_config(N=1)
        with pytest.raises(ValueError, match="T > t0"):
            tiny_config(T=4, t0=4, effect_sd_multipliers=())
        with pytest.raises(ValueError, match="sigma_eps"):
            tiny_config(sigma_eps=0.0)
        with pytest.raises(ValueError, match="beta"):
            tiny_config(beta=(1.0, 2.0))
        with pytest.raises(ValueError, match="dgp"):
            tiny_config(dgp="quadratic")
        with pytest.raises(ValueError, match="multipliers"):
            tiny_config(effect_sd_multipliers=(1.0,))

    def test_config_replace(self):
        cfg = tiny_config(seed=17)
        other = cfg.replace(phi=1.2, seed=3)
        assert other.phi == 1.2 and other.seed == 3
        assert cfg.phi == 0.8


# ---------------------------------------------------------------------------
# scenario grid
# ---------------------------------------------------------------------------

class TestScenarioGrid:
    def test_sixteen_scenarios_cover_the_design(self):
        grid = scenario_grid()
        assert len(grid) == 16
        combos = {(c.N, c.phi, c.sigma_u, c.t0) for c in grid}
        assert len(combos) == 16
        assert {c.N for c in grid} == {400, 200}
        assert {c.phi for c in grid} == {0.8, 1.2}
        assert {c.sigma_u for c in grid} == {1.0, 0.1}
        assert {c.t0 for c in grid} == {4, 9}
        assert all(c.T == c.t0 + 3 for c in grid)
        assert all(c.dgp == "linear" for c in grid)

    def test_seeds_are_distinct_and_stable(self):
        a = scenario_grid(seed=0)
        b = scenario_grid(seed=0)
        assert len({c.seed for c in a}) == 16
        assert [c.seed for c in a] == [c.seed for c in b]
        c = scenario_grid(seed=1)
        assert [x.seed for x in a] != [x.seed for x in c]

    def test_dgp_propagates(self):
        grid = scenario_grid(dgp="nonlinear")
        assert all(c.dgp == "nonlinear" for c in grid)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _interval_free_estimator(panel, est_config, B, seed):
    """Run the pipeline, skip the bootstrap: infinite intervals."""
    config = est_config.replace(seed=seed)
    ate = run_pipeline(panel.dataset, config).effects.ate
    K = ate.size
    return ate, np.full(K, -np.inf), np.full(K, np.inf)


def _oracle_estimator(panel, est_config, B, seed):
    """Truth plus unit Normal noise with the exact 95% Normal interval."""
    rng = np.random.default_rng(seed)
    est = panel.true_ate + rng.normal(0.0, 1.0, panel.true_ate.size)
    half = 1.959963984540054
    return est, est - half, est + half


def _truth_teller(panel, est_config, B, seed):
    return panel.true_ate, panel.true_ate - 1.0, panel.true_ate + 1.0


class TestRunMonteCarlo:
    def test_noiseless_scenario_recovers_the_truth(self):
        # with vanishing noise the default lag set spans the generator, so
        # a plain OLS race forecasts exactly and bias is numerical
        cfg = tiny_config(N=30, sigma_eps=1e-8, seed=18)
        est_config = default_estimation_config(candidates=LASSO_ONLY)
        report = run_monte_carlo(
            cfg, R=1, est_config=est_config, B=0,
            estimate_fn=_interval_free_estimator,
        )
        assert report.R == 1 and report.failures == 0
        for row in report.rows:
            assert row["rel_bias"] < 1e-6
            assert row["coverage"] == 1.0

    def test_oracle_estimator_gets_nominal_coverage(self):
        cfg = tiny_config(N=4, seed=19)
        report = run_monte_carlo(
            cfg, R=300, B=0, estimate_fn=_oracle_estimator
        )
        for row in report.rows:
            assert row["coverage"] == pytest.approx(0.95, abs=0.045)

    def test_zero_truth_makes_relative_bias_infinite(self):
        cfg = tiny_config(seed=20, effect_sd_multipliers=(0.0, 0.0, 0.0))
        report = run_monte_carlo(cfg, R=2, B=0, estimate_fn=_truth_teller)
        for row in report.rows:
            assert row["true_ate"] == 0.0
            assert math.isinf(row["rel_bias"])
            assert row["coverage"] == 1.0

    def test_aggregates_match_the_raw_records(self):
        cfg = tiny_config(seed=21)
        report = run_monte_carlo(cfg, R=5, B=0, estimate_fn=_oracle_estimator)
        for row in report.rows:
            k = row["horizon"]
            ests = [e for r, h, e, t, c in report.raw if h == k]
            trues = [t for r, h, e, t, c in report.raw if h == k]
            covs = [c for r, h, e, t, c in report.raw if h == k]
            assert len(ests) == 5
            assert row["true_ate"] == pytest.approx(np.mean(trues), rel=1e-12)
            bias = np.mean(np.array(ests) - np.array(trues))
            assert row["bias"] == pytest.approx(bias, rel=1e-12)
            assert row["coverage"] == pytest.approx(np.mean(covs), rel=1e-12)

    def test_failed_replications_are_excluded_and_counted(self):
        cfg = tiny_config(seed=22)
        state = {"calls": 0}

        def flaky(panel, est_config, B, seed):
            state["calls"] += 1
            if state["calls"] == 2:
                raise RuntimeError("solver blew up")
            return _truth_teller(panel, est_config, B, seed)

        report = run_monte_carlo(cfg, R=4, B=0, estimate_fn=flaky)
        assert report.failures == 1
        assert report.R == 3
        assert all(row["R"] == 3 for row in report.rows)

    def test_all_failures_raise(self):
        cfg = tiny_config(seed=23)

        def broken(panel, est_config, B, seed):
            raise RuntimeError("nope")

        with pytest.raises(RuntimeError, match="all 3 replications failed"):
            run_monte_carlo(cfg, R=3, B=0, estimate_fn=broken)

    def test_replication_count_validated(self):
        with pytest.raises(ValueError, match="R"):
            run_monte_carlo(tiny_config(), R=0)

    def test_worker_count_never_changes_the_numbers(self):
        cfg = tiny_config(seed=24)
        one = run_monte_carlo(
            cfg, R=4, B=0, estimate_fn=_oracle_estimator, threads=1
        )
        two = run_monte_carlo(
            cfg, R=4, B=0, estimate_fn=_oracle_estimator, threads=2
        )
        assert one.rows == two.rows
        assert one.raw == two.raw

    def test_scenario_label_defaults_to_the_config(self):
        cfg = tiny_config(seed=25)
        report = run_monte_carlo(cfg, R=1, B=0, estimate_fn=_truth_teller)
        assert "N=20" in report.scenario
        assert "phi=0.8" in report.scenario
        named = run_monte_carlo(
            cfg, R=1, B=0, estimate_fn=_truth_teller, scenario="baseline"
        )
        assert named.scenario == "baseline"

    def test_exports(self, tmp_path):
        cfg = tiny_config(seed=26)
        report = run_monte_carlo(
            cfg, R=2, B=0, estimate_fn=_oracle_estimator, scenario="demo"
        )
        report.to_csv(tmp_path / "mc.csv")
        lines = (tmp_path / "mc.csv").read_text().splitlines()
        assert lines[0] == "scenario,horizon,true_ate,bias,rel_bias,coverage,R,B"
        assert len(lines) == 1 + 3
        assert lines[1].split(",")[0] == "demo"
        report.raw_csv(tmp_path / "raw.csv")
        raw_lines = (tmp_path / "raw.csv").read_text().splitlines()
        assert raw_lines[0] == "replication,horizon,estimate,truth,covered"
        assert len(raw_lines) == 1 + 2 * 3
        doc = report.summary_dict()
        assert doc["scenario"] == "demo"
        assert len(doc["rows"]) == 3
        report.to_json(tmp_path / "mc.json")
        import json

        assert json.loads((tmp_path / "mc.json").read_text()) == doc


class TestDefaultEstimationConfig:
    def test_recipe_matches_the_generator_information_set(self):
        config = default_estimation_config()
        assert config.lags == LagSpec(p=0, q=1, contemporaneous=False)
        assert config.covariate_mode == "observed_post"
        from mlcm import compact_grids

        assert config.candidates == compact_grids(12)

    def test_overrides_and_seed(self):
        config = default_estimation_config(seed=9, K=2)
        assert config.seed == 9
        assert config.K == 2
