"""Synthetic panels with known ground truth, and Monte Carlo studies.

The generator builds autoregressive panels whose untreated path is known
exactly, adds a treatment effect of known size after t0, and hands both to
the estimator; bias and interval coverage are then measured against the
simulated truth. Two outcome recursions are available:

- linear:     Y_t(0) = phi * Y_{t-1}(0) + X_{t-1} beta + eps_t
- nonlinear:  Y_t(0) = sin(phi * Y_{t-1}(0) + X_{t-1} beta) + eps_t

Eleven covariates with heterogeneous scales, correlations, a shared trend,
an interaction, and discrete columns accompany the outcome; several have
zero coefficients so the races face genuinely irrelevant inputs. The
recursion starts at zero and discards a burn-in window, decoupling results
from the (otherwise arbitrary) initial condition. The intervention raises
each unit's outcome by per-horizon multiples of that unit's own
pre-treatment standard deviation, so effect sizes track each unit's scale.
"""

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._parallel import run_tasks
from ._seeds import TAG_SIM_PANEL, TAG_SIM_RUN, derive_rng, derive_seed
from .panel import LagSpec, PanelDataset
from .pipeline import PipelineConfig, run_pipeline

__all__ = [
    "SimConfig",
    "SimPanel",
    "MonteCarloReport",
    "gen_covariates",
    "gen_panel",
    "run_monte_carlo",
    "scenario_grid",
    "default_estimation_config",
    "BETA_DEFAULT",
    "BURN_IN",
]

BETA_DEFAULT = (0.0, 2.0, 1.0, 2.5, 0.1, 2.0, 1.0, 0.0, 0.0, 2.0, 1.5)
BURN_IN = 10
_COV_NAMES = tuple(f"X{j}" for j in range(1, 12))
_MVN_COV = np.array([
    [1.0, 0.5, 0.7],
    [0.5, 1.0, 0.3],
    [0.7, 0.3, 1.0],
])


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one synthetic-panel scenario.

    ``effect_sd_multipliers`` must cover every post-treatment period
    (length T - t0); horizon k's true effect for unit i is
    ``multipliers[k-1] * sd_i`` with ``sd_i`` the unit's pre-treatment
    outcome standard deviation. ``x89_fixed_per_unit`` freezes the two
    discrete covariates at their period-1 draws (they redraw every period
    by default).
    """

    N: int = 400
    T: int = 7
    t0: int = 4
    phi: float = 0.8
    sigma_eps: float = 1.0
    sigma_u: float = 1.0
    beta: Sequence[float] = BETA_DEFAULT
    dgp: str = "linear"
    effect_sd_multipliers: Sequence[float] = (2.0, 1.5, 1.0)
    x89_fixed_per_unit: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if not self.T > self.t0 >= 2:
            raise ValueError(
                f"need T > t0 >= 2, got T={self.T}, t0={self.t0}"
            )
        if self.sigma_eps <= 0:
            raise ValueError(f"sigma_eps must be > 0, got {self.sigma_eps}")
        if len(tuple(self.beta)) != 11:
            raise ValueError(
                f"beta must have 11 entries, got {len(tuple(self.beta))}"
            )
        if self.dgp not in ("linear", "nonlinear"):
            raise ValueError(
                f"dgp must be 'linear' or 'nonlinear', got {self.dgp!r}"
            )
        if len(tuple(self.effect_sd_multipliers)) != self.T - self.t0:
            raise ValueError(
                f"effect_sd_multipliers must cover the {self.T - self.t0} "
                f"post-treatment periods, got "
                f"{len(tuple(self.effect_sd_multipliers))}"
            )
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(
            self,
            "effect_sd_multipliers",
            tuple(float(m) for m in self.effect_sd_multipliers),
        )

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SimPanel:
    """A generated panel plus the hidden truth the estimator must recover.

    ``dataset.outcome`` holds the observed path (treated after t0);
    ``y0_post`` the untreated path it replaced; ``true_effects`` their
    exact difference; ``true_ate`` its unit average per horizon.
    """

    dataset: PanelDataset
    y0_post: np.ndarray
    true_effects: np.ndarray
    true_ate: np.ndarray
    config: SimConfig


def gen_covariates(
    cfg: SimConfig,
    rng: np.random.Generator,
    *,
    n_periods: Optional[int] = None,
) -> np.ndarray:
    """Draw the (N, T, 11) covariate tensor.

    Per unit, a heterogeneity intercept u ~ Normal(1, sigma_u^2) is drawn
    once and shared across the covariates. Per period t (1-based), with
    fresh independent shocks each period:

    - X1 = 0.1 t + u + nu1,            nu1 ~ N(0, 1)
    - X2 = 0.1 t + u + nu2,            nu2 ~ N(0, 0.2)
    - (X3, X4, X5) = u + MVN(0, S),    S = [[1,.5,.7],[.5,1,.3],[.7,.3,1]]
    - X6 = u - nu6,                    nu6 ~ N(0, 1)
    - X7 = (0.1 t + nu1)^2 + u + nu7,  nu7 ~ N(0, 0.2), same nu1 as X1
    - X8 in {0, 1} (fair coin), X9 uniform on {1, 2, 3}
    - X10 = X3 * X9, X11 = X2 * X8

    Draw order is fixed, so a given generator state yields the same tensor
    on every platform.
    """
    N = cfg.N
    T = cfg.T if n_periods is None else int(n_periods)
    u = rng.normal(1.0, cfg.sigma_u, N)
    X = np.empty((N, T, 11))
    chol = np.linalg.cholesky(_MVN_COV)
    x8_fixed = x9_fixed = None
    for t in range(1, T + 1):
        nu1 = rng.normal(0.0, 1.0, N)
        nu2 = rng.normal(0.0, 0.2, N)
        z = rng.standard_normal((N, 3)) @ chol.T
        nu6 = rng.normal(0.0, 1.0, N)
        nu7 = rng.normal(0.0, 0.2, N)
        x8 = rng.integers(0, 2, N).astype(np.float64)
        x9 = rng.integers(1, 4, N).astype(np.float64)
        if cfg.x89_fixed_per_unit:
            if x8_fixed is None:
                x8_fixed, x9_fixed = x8, x9
            x8, x9 = x8_fixed, x9_fixed
        trend = 0.1 * t
        col = X[:, t - 1, :]
        col[:, 0] = trend + u + nu1
        col[:, 1] = trend + u + nu2
        col[:, 2:5] = u[:, None] + z
        col[:, 5] = u - nu6
        col[:, 6] = (trend + nu1) ** 2 + u + nu7
        col[:, 7] = x8
        col[:, 8] = x9
        col[:, 9] = col[:, 2] * x9
        col[:, 10] = col[:, 1] * x8
    return X


def gen_panel(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> SimPanel:
    """Generate one panel with its ground truth.

    The outcome recursion runs from zero through a burn-in window plus the
    T kept periods; burn-in is discarded. The treatment adds
    ``multipliers[k-1] * sd_i`` to unit i's outcome at horizon k, where
    ``sd_i`` is the unit's pre-treatment standard deviation of the kept
    outcome path.
    """
    if rng is None:
        rng = derive_rng(cfg.seed, TAG_SIM_PANEL)
    total = BURN_IN + cfg.T
    X = gen_covariates(cfg, rng, n_periods=total)
    eps = rng.normal(0.0, cfg.sigma_eps, (cfg.N, total))
    beta = np.asarray(cfg.beta)
    y0 = np.empty((cfg.N, total))
    prev = np.zeros(cfg.N)
    for t in range(total):
        drive = cfg.phi * prev
        if t > 0:
            drive = drive + X[:, t - 1, :] @ beta
        if cfg.dgp == "linear":
            y0[:, t] = drive + eps[:, t]
        else:
            y0[:, t] = np.sin(drive) + eps[:, t]
        prev = y0[:, t]

    y0 = y0[:, BURN_IN:]
    X = X[:, BURN_IN:, :]
    sd_i = y0[:, : cfg.t0].std(axis=1, ddof=1)
    K = cfg.T - cfg.t0
    multipliers = np.asarray(cfg.effect_sd_multipliers)
    true_effects = sd_i[:, None] * multipliers[None, :]
    observed = y0.copy()
    observed[:, cfg.t0 :] += true_effects
    ds = PanelDataset(
        observed,
        cfg.t0,
        covariates=X,
        covariate_names=_COV_NAMES,
    )
    return SimPanel(
        dataset=ds,
        y0_post=y0[:, cfg.t0 :],
        true_effects=true_effects,
        true_ate=true_effects.mean(axis=0),
        config=cfg,
    )


def default_estimation_config(seed: int = 0, **overrides) -> PipelineConfig:
    """The estimation recipe the Monte Carlo studies use by default.

    One outcome lag and one lag of every covariate (matching the
    generator's information set without revealing coefficients), with
    post-treatment covariates read as observed — the generator's covariates
    are unaffected by treatment, so the mode's exogeneity premise holds by
    construction.
    """
    from .model_selection import compact_grids

    config = PipelineConfig(
        lags=LagSpec(p=0, q=1, contemporaneous=False),
        candidates=compact_grids(12),
        covariate_mode="observed_post",
        seed=seed,
    )
    return config.replace(**overrides) if overrides else config


@dataclass(frozen=True)
class MonteCarloReport:
    """Bias and coverage of one scenario, horizon by horizon.

    ``rows`` carry dicts with horizon, true_ate (mean over replications),
    bias, rel_bias (|bias| / |mean true ATE|), coverage, R, B.
    ``failures`` counts replications that errored and were excluded.
    """

    scenario: str
    rows: tuple
    R: int
    B: int
    failures: int
    raw: tuple  # per replication: (r, horizon, est, true, covered)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["scenario", "horizon", "true_ate", "bias", "rel_bias",
                 "coverage", "R", "B"]
            )
            for row in self.rows:
                writer.writerow([
                    self.scenario,
                    row["horizon"],
                    repr(row["true_ate"]),
                    repr(row["bias"]),
                    repr(row["rel_bias"]),
                    repr(row["coverage"]),
                    row["R"],
                    row["B"],
                ])

    def raw_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["replication", "horizon", "estimate", "truth", "covered"]
            )
            for r, k, est, true, covered in self.raw:
                writer.writerow([r, k, repr(est), repr(true), int(covered)])

    def summary_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "rows": [dict(r) for r in self.rows],
            "R": self.R,
            "B": self.B,
            "failures": self.failures,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


def _mc_replicate(task) -> tuple:
    """One replication: generate, estimate, bootstrap; returns row data."""
    (cfg, est_config, B, alpha, r, estimate_fn) = task
    from .bootstrap import bootstrap_ate

    panel_seed = derive_seed(cfg.seed, TAG_SIM_RUN, r)
    panel = gen_panel(cfg.replace(seed=panel_seed))
    est_seed = derive_seed(cfg.seed, TAG_SIM_RUN, r, 1)
    try:
        if estimate_fn is not None:
            est, lower, upper = estimate_fn(panel, est_config, B, est_seed)
            est = np.asarray(est, dtype=np.float64)
            lower = np.asarray(lower, dtype=np.float64)
            upper = np.asarray(upper, dtype=np.float64)
        else:
            config = est_config.replace(seed=est_seed)
            point = run_pipeline(panel.dataset, config)
            boot = bootstrap_ate(
                panel.dataset, config, B=B, alpha=alpha,
                point_result=point, threads=1,
            )
            est, lower, upper = point.effects.ate, boot.lower, boot.upper
    except Exception as exc:
        return ("fail", r, repr(exc))
    covered = (lower <= panel.true_ate) & (panel.true_ate <= upper)
    return ("ok", r, est, panel.true_ate, covered)


def run_monte_carlo(
    cfg: SimConfig,
    R: int,
    est_config: Optional[PipelineConfig] = None,
    B: int = 200,
    *,
    alpha: float = 0.05,
    threads: Optional[int] = None,
    scenario: Optional[str] = None,
    estimate_fn: Optional[Callable] = None,
) -> MonteCarloReport:
    """Replicate generate-estimate-cover R times and aggregate.

    Each replication generates a fresh panel from a derived seed, runs the
    pipeline, bootstraps the per-horizon ATE interval, and records estimate
    versus truth and interval coverage. Failed replications are excluded
    and counted. ``estimate_fn(panel, est_config, B, seed) -> (ate, lower,
    upper)`` substitutes a custom estimator — used to validate the
    coverage accounting with a known-distribution oracle.
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if est_config is None:
        est_config = default_estimation_config()
    if scenario is None:
        scenario = (
            f"{cfg.dgp} N={cfg.N} T={cfg.T} t0={cfg.t0} phi={cfg.phi} "
            f"sigma_u={cfg.sigma_u}"
        )
    tasks = [(cfg, est_config, B, alpha, r, estimate_fn) for r in range(R)]
    results = run_tasks(_mc_replicate, tasks, threads=threads)

    K = cfg.T - cfg.t0
    est = []
    true = []
    covered = []
    raw = []
    failures = 0
    for res in results:
        if res[0] == "fail":
            failures += 1
            continue
        _, r, e, tr, cov = res
        est.append(e)
        true.append(tr)
        covered.append(cov)
        for k in range(K):
            raw.append((r, k + 1, float(e[k]), float(tr[k]), bool(cov[k])))
    if not est:
        raise RuntimeError(
            f"all {R} replications failed; first failure: "
            f"{next(r[2] for r in results if r[0] == 'fail')}"
        )
    est = np.stack(est)
    true = np.stack(true)
    covered = np.stack(covered)
    rows = []
    for k in range(K):
        true_mean = float(true[:, k].mean())
        bias = float((est[:, k] - true[:, k]).mean())
        rows.append({
            "horizon": k + 1,
            "true_ate": true_mean,
            "bias": bias,
            "rel_bias": abs(bias) / abs(true_mean) if true_mean != 0 else math.inf,
            "coverage": float(covered[:, k].mean()),
            "R": int(est.shape[0]),
            "B": int(B),
        })
    return MonteCarloReport(
        scenario=scenario,
        rows=tuple(rows),
        R=int(est.shape[0]),
        B=int(B),
        failures=failures,
        raw=tuple(raw),
    )


def scenario_grid(*, dgp: str = "linear", seed: int = 0) -> list:
    """The 16 benchmark scenarios.

    N in {400, 200} x phi in {0.8, 1.2} x sigma_u in {1, 0.1}, each with a
    short (t0=4) and a long (t0=9) pre-treatment window; T = t0 + 3
    throughout. Each scenario gets its own derived seed.
    """
    configs = []
    idx = 0
    for N in (400, 200):
        for phi in (0.8, 1.2):
            for sigma_u in (1.0, 0.1):
                for t0 in (4, 9):
                    configs.append(
                        SimConfig(
                            N=N,
                            T=t0 + 3,
                            t0=t0,
                            phi=phi,
                            sigma_u=sigma_u,
                            dgp=dgp,
                            seed=derive_seed(seed, TAG_SIM_PANEL, idx),
                        )
                    )
                    idx += 1
    return configs
