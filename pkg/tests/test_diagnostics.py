"""In-time placebo tests, error summaries, and sensitivity trimming."""

import numpy as np
import pytest

from mlcm import (
    DesignError,
    LagSpec,
    PipelineConfig,
    error_distribution,
    placebo_test,
    sensitivity_trim,
)
from mlcm.diagnostics import placebo_dataset
from mlcm.panel import poison_after

from conftest import LASSO_ONLY, SMALL_RACE, ar1_panel, make_effects


def lasso_config(seed=0):
    return PipelineConfig(lags=LagSpec(p=0), candidates=LASSO_ONLY, seed=seed)


# ---------------------------------------------------------------------------
# the placebo panel
# ---------------------------------------------------------------------------

class TestPlaceboDataset:
    def test_geometry_of_the_fake_date(self):
        ds = ar1_panel(N=5, T=9, t0=6, noise=0.4, seed=0)
        sub = placebo_dataset(ds, 2)
        assert sub.n_periods == 6  # true post periods are gone entirely
        assert sub.t0 == 4
        assert sub.unit_ids == ds.unit_ids
        np.testing.assert_array_equal(sub.outcome, ds.outcome[:, :6])

    def test_true_post_periods_are_physically_absent(self):
        ds = ar1_panel(N=5, T=9, t0=6, noise=0.4, seed=1)
        a = placebo_dataset(ds, 2)
        b = placebo_dataset(poison_after(ds, ds.t0), 2)
        np.testing.assert_array_equal(a.outcome, b.outcome)

    def test_holdout_validated(self):
        ds = ar1_panel(seed=2)
        with pytest.raises(ValueError, match="n_holdout"):
            placebo_dataset(ds, 0)


# ---------------------------------------------------------------------------
# the placebo test
# ---------------------------------------------------------------------------

class TestPlaceboTest:
    def test_noiseless_panel_gives_zero_placebo_effects(self):
        # nothing happened at the fake date and the process is exactly
        # learnable, so the placebo "effects" are numerical zeros
        ds = ar1_panel(N=8, T=9, t0=6, noise=0.0, seed=3, effect=5.0)
        res = placebo_test(ds, lasso_config(), n_holdout=2)
        np.testing.assert_allclose(res.effects.individual, 0.0, atol=1e-7)
        assert res.pseudo_t0 == 4
        assert res.n_holdout == 2
        assert res.effects.n_horizons == 2

    def test_placebo_never_reads_beyond_the_real_t0(self):
        ds = ar1_panel(N=6, T=9, t0=6, noise=0.5, seed=4, effect=3.0)
        config = PipelineConfig(
            lags=LagSpec(p=0), candidates=SMALL_RACE, seed=7
        )
        a = placebo_test(ds, config, n_holdout=2)
        b = placebo_test(poison_after(ds, ds.t0), config, n_holdout=2)
        np.testing.assert_array_equal(
            a.effects.individual, b.effects.individual
        )
        assert a.pipeline.report.winner.kind == b.pipeline.report.winner.kind

    def test_placebo_runs_its_own_race(self):
        ds = ar1_panel(N=6, T=10, t0=7, noise=0.5, seed=5)
        config = PipelineConfig(
            lags=LagSpec(p=0), candidates=SMALL_RACE, seed=8
        )
        res = placebo_test(ds, config, n_holdout=1)
        # the placebo pipeline carries a full report raced at the fake date
        assert res.pipeline.report.folds[-1] == res.pseudo_t0 - 1
        assert res.pipeline.report.winner is not None

    def test_infeasible_holdout_names_the_largest_feasible(self):
        ds = ar1_panel(N=5, T=8, t0=5, seed=6)
        with pytest.raises(DesignError, match="largest feasible n_holdout here is 2"):
            placebo_test(ds, lasso_config(), n_holdout=3)

    def test_no_feasible_placebo_at_all(self):
        ds = ar1_panel(N=5, T=8, t0=3, seed=7)
        with pytest.raises(DesignError, match="no placebo is feasible"):
            placebo_test(ds, lasso_config(), n_holdout=1)

    def test_summary_and_json(self, tmp_path):
        ds = ar1_panel(N=6, T=9, t0=6, noise=0.3, seed=8)
        res = placebo_test(ds, lasso_config(), n_holdout=2)
        doc = res.summary_dict()
        assert doc["pseudo_t0"] == 4
        assert doc["n_holdout"] == 2
        assert len(doc["placebo_ate"]) == 2
        assert "ate" not in doc
        res.to_json(tmp_path / "placebo.json")
        import json

        assert json.loads((tmp_path / "placebo.json").read_text()) == doc


# ---------------------------------------------------------------------------
# error distribution
# ---------------------------------------------------------------------------

class TestErrorDistribution:
    def test_all_zero_errors(self):
        dist = error_distribution(make_effects(np.zeros((6, 2))))
        assert dist.n == 12
        assert dist.mean == 0.0
        assert dist.sd == 0.0
        assert dist.skewness == 0.0
        assert dist.excess_kurtosis == 0.0
        assert dist.frac_below_neg1 == 0.0
        assert dist.frac_above_pos1 == 0.0

    def test_bernoulli_moments_match_closed_form(self):
        # values {0,0,0,1}: skewness 2/sqrt(3), excess kurtosis -2/3
        dist = error_distribution(make_effects([[0.0], [0.0], [0.0], [1.0]]))
        assert dist.mean == 0.25
        assert dist.skewness == pytest.approx(2.0 / np.sqrt(3.0), rel=1e-12)
        assert dist.excess_kurtosis == pytest.approx(-2.0 / 3.0, rel=1e-12)
        assert dist.sd == pytest.approx(0.5, rel=1e-12)  # ddof=1 on n=4

    def test_large_symmetric_sample_is_nearly_unskewed(self):
        rng = np.random.default_rng(9)
        sample = rng.normal(0.0, 0.5, (2000, 2))
        dist = error_distribution(make_effects(sample))
        assert abs(dist.mean) < 0.03
        assert dist.sd == pytest.approx(0.5, abs=0.03)
        assert abs(dist.skewness) < 0.1
        assert abs(dist.excess_kurtosis) < 0.2

    def test_tail_fractions_count_past_one_outcome_unit(self):
        dist = error_distribution(
            make_effects([[-2.0], [-0.5], [0.0], [0.5], [2.0]])
        )
        assert dist.frac_below_neg1 == 0.2
        assert dist.frac_above_pos1 == 0.2

    def test_histogram_covers_every_observation(self):
        rng = np.random.default_rng(10)
        dist = error_distribution(
            make_effects(rng.normal(0, 1, (40, 3))), bins=7
        )
        assert len(dist.bin_edges) == 8
        assert len(dist.bin_counts) == 7
        assert sum(dist.bin_counts) == 120

    def test_exports(self, tmp_path):
        rng = np.random.default_rng(11)
        dist = error_distribution(
            make_effects(rng.normal(0, 1, (15, 2))), bins=5
        )
        dist.histogram_csv(tmp_path / "hist.csv")
        lines = (tmp_path / "hist.csv").read_text().splitlines()
        assert lines[0] == "bin_lower,bin_upper,count"
        assert len(lines) == 6
        assert sum(int(r.split(",")[2]) for r in lines[1:]) == 30
        doc = dist.summary_dict()
        assert doc["n"] == 30
        dist.to_json(tmp_path / "dist.json")
        import json

        assert json.loads((tmp_path / "dist.json").read_text()) == doc


# ---------------------------------------------------------------------------
# sensitivity trimming
# ---------------------------------------------------------------------------

class TestSensitivityTrim:
    def test_zero_fraction_changes_nothing(self):
        eff = make_effects([[1.0], [2.0], [3.0]])
        plc = make_effects([[0.5], [0.1], [0.9]])
        (row,) = sensitivity_trim(eff, plc, [0.0])
        assert row.n_dropped == 0
        assert row.n_kept == 3
        assert row.dropped_units == ()
        np.testing.assert_array_equal(row.ate, eff.ate)
        assert row.temporal_ate == eff.temporal_ate

    def test_worst_forecast_unit_goes_first(self):
        eff = make_effects([[1.0], [2.0], [3.0], [4.0]])
        plc = make_effects([[0.1], [0.2], [5.0], [0.3]])
        (row,) = sensitivity_trim(eff, plc, [0.25])
        assert row.dropped_units == ("u3",)
        np.testing.assert_allclose(row.ate, [(1.0 + 2.0 + 4.0) / 3.0])

    def test_ranking_uses_absolute_temporal_placebo_error(self):
        eff = make_effects([[1.0], [2.0], [3.0]])
        plc = make_effects([[-4.0], [0.5], [1.0]])  # unit 1 worst by |.|
        (row,) = sensitivity_trim(eff, plc, [0.34])
        assert row.dropped_units == ("u1",)

    def test_kept_count_is_monotone_in_the_fraction(self):
        rng = np.random.default_rng(12)
        eff = make_effects(rng.normal(0, 1, (20, 2)))
        plc = make_effects(rng.normal(0, 1, (20, 2)))
        rows = sensitivity_trim(eff, plc, [0.0, 0.1, 0.25, 0.5, 0.9])
        kept = [r.n_kept for r in rows]
        assert kept == sorted(kept, reverse=True)
        assert all(r.n_dropped + r.n_kept == 20 for r in rows)

    def test_rounding_of_the_drop_count(self):
        eff = make_effects(np.ones((4, 1)))
        plc = make_effects([[4.0], [3.0], [2.0], [1.0]])
        rows = sensitivity_trim(eff, plc, [0.5])
        assert rows[0].n_dropped == 2
        assert rows[0].dropped_units == ("u1", "u2")

    def test_never_drops_every_unit(self):
        eff = make_effects(np.ones((4, 1)))
        plc = make_effects([[4.0], [3.0], [2.0], [1.0]])
        (row,) = sensitivity_trim(eff, plc, [0.99])
        assert row.n_kept == 1

    def test_ties_break_by_unit_position(self):
        eff = make_effects(np.ones((3, 1)))
        plc = make_effects([[1.0], [1.0], [1.0]])
        (row,) = sensitivity_trim(eff, plc, [0.67])
        assert row.dropped_units == ("u1", "u2")

    def test_fraction_validation(self):
        eff = make_effects(np.ones((3, 1)))
        with pytest.raises(ValueError, match="fraction"):
            sensitivity_trim(eff, eff, [1.0])
        with pytest.raises(ValueError, match="fraction"):
            sensitivity_trim(eff, eff, [-0.1])

    def test_unit_count_mismatch(self):
        eff = make_effects(np.ones((3, 1)))
        plc = make_effects(np.ones((4, 1)))
        with pytest.raises(ValueError, match="units"):
            sensitivity_trim(eff, plc, [0.1])

    def test_trim_after_a_real_run(self):
        # end to end: a noiseless panel trims to the same (exact) answer
        from mlcm import run_pipeline

        ds = ar1_panel(N=8, T=9, t0=6, noise=0.0, seed=13, effect=2.0)
        result = run_pipeline(ds, lasso_config())
        plc = placebo_test(ds, lasso_config(), n_holdout=2)
        rows = sensitivity_trim(result.effects, plc.effects, [0.0, 0.25])
        for row in rows:
            np.testing.assert_allclose(
                row.ate, np.full(3, 2.0), atol=1e-6
            )
