"""Shared fixtures and independent oracles used across the test suite.

The oracles here deliberately avoid the library's own code paths: OLS via
normal equations, AR(1) forecasts via closed form, quantiles via sorting by
hand. Tests compare library output against these.
"""

import numpy as np
import pytest

from mlcm import LagSpec, PanelDataset


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def ols_fit(X, y):
    """Normal-equations least squares with intercept: (intercept, coefs)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.column_stack([np.ones(len(y)), X])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(sol[0]), sol[1:]


def ols_predict(X_train, y_train, X_new):
    """Predictions of the normal-equations OLS fit."""
    b0, b = ols_fit(X_train, y_train)
    return np.asarray(X_new) @ b + b0


def sorted_quantile(values, prob):
    """Type-1 empirical quantile: order statistic at ceil(B * prob)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    k = max(1, int(np.ceil(len(v) * prob)))
    return float(v[min(k, len(v)) - 1])


# ---------------------------------------------------------------------------
# panel builders
# ---------------------------------------------------------------------------

def ar1_panel(N=6, T=8, t0=5, phi=0.6, noise=0.0, seed=0, level=5.0,
              effect=0.0):
    """AR(1) panel y_t = phi * y_{t-1} (+ noise), random start near `level`.

    ``effect`` is added to every post-t0 outcome, so the true effect of the
    "intervention" is exactly that constant.
    """
    rng = np.random.default_rng(seed)
    y = np.empty((N, T))
    y[:, 0] = level + rng.normal(0.0, 1.0, N)
    for t in range(1, T):
        y[:, t] = phi * y[:, t - 1] + noise * rng.normal(0.0, 1.0, N)
    if effect:
        y[:, t0:] += effect
    return PanelDataset(y, t0)


def linear_cov_panel(N=8, T=8, t0=5, b1=0.5, b2=2.0, seed=0):
    """Noiseless panel y_t = b1 * y_{t-1} + b2 * x_t with one covariate.

    The generating model uses the contemporaneous covariate, so the exact
    fit needs LagSpec(p=0, q=0, contemporaneous=True) and a post-treatment
    covariate mode.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(1.0, 1.0, (N, T))
    y = np.empty((N, T))
    y[:, 0] = 3.0 + rng.normal(0.0, 1.0, N)
    for t in range(1, T):
        y[:, t] = b1 * y[:, t - 1] + b2 * x[:, t]
    return PanelDataset(y, t0, covariates=x[:, :, None],
                        covariate_names=("x",))


def make_effects(individual):
    """EffectSet with the given per-unit effect matrix (cf fixed at 0)."""
    from mlcm import EffectSet

    individual = np.asarray(individual, dtype=np.float64)
    N, K = individual.shape
    ate = individual.mean(axis=0)
    return EffectSet(
        horizons=tuple(range(1, K + 1)),
        observed=individual.copy(),
        counterfactuals=np.zeros_like(individual),
        individual=individual,
        ate=ate,
        temporal_ate=float(ate.mean()),
        unit_ids=tuple(f"u{i + 1}" for i in range(N)),
    )


def random_panel(rng, N=None, T=None, t0=None, m=None):
    """A random well-formed panel for property-style tests."""
    N = N or int(rng.integers(3, 9))
    T = T or int(rng.integers(6, 11))
    t0 = t0 or int(rng.integers(3, T - 1))
    m = m if m is not None else int(rng.integers(0, 3))
    outcome = rng.normal(0.0, 2.0, (N, T)) + rng.normal(0, 1, (N, 1))
    cov = rng.normal(0.0, 1.0, (N, T, m)) if m else None
    return PanelDataset(outcome, t0, covariates=cov)


@pytest.fixture
def small_panel():
    """2 units x 5 periods, t0=3, one covariate; tiny hand-checkable case."""
    outcome = np.array([
        [1.0, 2.0, 3.0, 4.0, 5.0],
        [2.0, 4.0, 6.0, 8.0, 10.0],
    ])
    cov = np.array([
        [[10.0], [20.0], [30.0], [40.0], [50.0]],
        [[1.0], [2.0], [3.0], [4.0], [5.0]],
    ])
    return PanelDataset(outcome, 3, covariates=cov, covariate_names=("gdp",))


LASSO_ONLY = {"lasso": [{"penalty": 0.0}]}
SMALL_RACE = {
    "lasso": [{"penalty": 0.0}, {"penalty": 0.3}],
    "tree": [{"max_depth": 2, "min_node": 4}],
}
