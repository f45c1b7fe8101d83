"""End-to-end estimation pipeline: selection, forecasting, effects.

``run_pipeline`` chains the two stages — the selection stage (optional
pilot feature screening, the expanding-window cross-validation race, the
winner refit, the multi-step forecast chain) and the analysis stage
(counterfactual forecasting past t0 and effect aggregation) — under one
config object with a single master seed. :class:`MLCM` wraps the same flow
in a fit/attributes estimator facade.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .effects import (
    EffectSet,
    _forecast_with_chain,
    individual_effects,
    resolve_cov_post,
)
from .model_selection import (
    CvReport,
    ForecastChain,
    default_grids,
    panel_cv,
    pilot_select_features,
    refit_winner,
)
from .panel import LagSpec, PanelDataset, design_columns

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "run_pipeline",
    "run_frozen_pipeline",
    "FrozenSelection",
    "MLCM",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one estimation run needs besides the data.

    ``candidates`` maps learner kind to a list of hyperparameter dicts
    (None = full default grids). ``K`` is the number of post-treatment
    horizons to estimate (None = all available). ``pilot_keep`` switches on
    forest-importance feature screening with those candidate subset sizes.
    All stage-level randomness derives from ``seed``.
    """

    lags: LagSpec = field(default_factory=lambda: LagSpec(p=1))
    candidates: Optional[Mapping[str, Sequence[Mapping]]] = None
    K: Optional[int] = None
    covariate_mode: str = "lags_only"
    pilot_keep: Optional[Sequence[int]] = None
    pilot_forest: Optional[Mapping] = None
    rolling_window: Optional[int] = None
    chain_candidates: Optional[Mapping[str, Sequence[Mapping]]] = None
    cov_lags: Optional[LagSpec] = None
    cov_candidates: Optional[Mapping[str, Sequence[Mapping]]] = None
    seed: int = 0

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PipelineResult:
    """Artifacts of one pipeline run, selection through effects."""

    report: CvReport
    model: object
    chain: ForecastChain
    counterfactuals: np.ndarray
    effects: EffectSet
    config: PipelineConfig

    def summary_dict(self) -> dict:
        out = self.report.summary_dict()
        out.update(self.effects.summary_dict())
        out["chain_notes"] = list(self.chain.notes)
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


def run_pipeline(ds: PanelDataset, config: PipelineConfig) -> PipelineResult:
    """Run selection + analysis on one panel and return all artifacts.

    Steps: (optional) pilot feature screening, the cross-validation race,
    winner refit on all pre-treatment data, multi-step chain construction,
    counterfactual forecasting for horizons 1..K, and effect aggregation.
    Post-treatment covariates are resolved once according to
    ``config.covariate_mode`` and shared by the chain and the forecasts.
    """
    ds.require_split("run_pipeline")
    lags = config.lags
    K = ds.n_post if config.K is None else int(config.K)
    if K < 1 or K > ds.n_post:
        raise ValueError(
            f"K = {K} outside the panel's {ds.n_post} post-treatment periods"
        )
    candidates = config.candidates
    if candidates is None:
        candidates = default_grids(len(design_columns(ds, lags)[0]))

    pilot = None
    if config.pilot_keep is not None:
        pilot = pilot_select_features(
            ds, lags, config.pilot_keep,
            forest_params=config.pilot_forest, seed=config.seed,
        )
    report = panel_cv(
        ds, lags, candidates,
        pilot=pilot, rolling_window=config.rolling_window, seed=config.seed,
    )
    model = refit_winner(ds, report)
    cov_post = resolve_cov_post(
        ds, K, config.covariate_mode,
        cov_candidates=config.cov_candidates, cov_lags=config.cov_lags,
        seed=config.seed,
    )
    from .model_selection import build_forecast_chain

    chain = build_forecast_chain(
        ds, model, report, K,
        candidates_g=config.chain_candidates, cov_post=cov_post,
    )
    counterfactuals = _forecast_with_chain(ds, chain, K, cov_post)
    effects = individual_effects(ds, counterfactuals)
    return PipelineResult(report, model, chain, counterfactuals, effects,
                          config)


class FrozenSelection:
    """Stand-in for a CV report when the winner is already decided.

    Carries just enough for chain construction and summaries: the frozen
    winner's kind, hyperparameters, and feature subset, plus the lag
    specification and seed.
    """

    def __init__(self, lags, kind, params, features, seed):
        self.lags = lags
        self.seed = seed
        self._kind = kind
        self._params = dict(params)
        self._features = tuple(features)

    class _Winner:
        def __init__(self, kind, params):
            self.kind = kind
            self.params = params

    @property
    def winner(self):
        return self._Winner(self._kind, dict(self._params))

    @property
    def winner_features(self):
        return self._features

    def summary_dict(self) -> dict:
        return {
            "winner": {
                "kind": self._kind,
                "params": dict(self._params),
                "features": list(self._features),
            },
            "frozen": True,
            "lags": {
                "p": self.lags.p,
                "q": self.lags.q,
                "contemporaneous": self.lags.contemporaneous,
            },
            "seed": self.seed,
        }


def run_frozen_pipeline(
    ds: PanelDataset,
    config: PipelineConfig,
    kind: str,
    params: Mapping,
    features: Sequence[str],
    chain_candidates: Optional[Mapping[str, Sequence[Mapping]]] = None,
) -> PipelineResult:
    """Analysis with a pre-decided winner: re-estimate, never re-select.

    The winner's kind, hyperparameters, and feature subset stay fixed;
    only model parameters are re-estimated on this panel. A non-linear
    winner's per-horizon chain races run over ``chain_candidates``
    (default: the frozen winner alone). Used by the fixed-model bootstrap
    and when re-running an estimation from a stored selection report.
    """
    from .model_selection import LINEAR_KINDS, build_forecast_chain, fit_frozen

    ds.require_split("run_frozen_pipeline")
    lags = config.lags
    K = ds.n_post if config.K is None else int(config.K)
    if K < 1 or K > ds.n_post:
        raise ValueError(
            f"K = {K} outside the panel's {ds.n_post} post-treatment periods"
        )
    model = fit_frozen(ds, lags, kind, params, features, seed=config.seed)
    cov_post = resolve_cov_post(
        ds, K, config.covariate_mode,
        cov_candidates=config.cov_candidates, cov_lags=config.cov_lags,
        seed=config.seed,
    )
    report = FrozenSelection(lags, kind, params, features, config.seed)
    if chain_candidates is None and kind not in LINEAR_KINDS:
        chain_candidates = {kind: [dict(params)]}
    chain = build_forecast_chain(
        ds, model, report, K,
        candidates_g=chain_candidates, cov_post=cov_post,
    )
    counterfactuals = _forecast_with_chain(ds, chain, K, cov_post)
    effects = individual_effects(ds, counterfactuals)
    return PipelineResult(report, model, chain, counterfactuals, effects,
                          config)


class MLCM:
    """Estimator facade over :func:`run_pipeline`.

    Construct with config fields as keyword arguments, ``fit`` on a
    :class:`PanelDataset`, then read ``report_``, ``model_``, ``chain_``,
    ``counterfactuals_``, and ``effects_``.
    """

    def __init__(
        self,
        lags: Optional[LagSpec] = None,
        candidates: Optional[Mapping[str, Sequence[Mapping]]] = None,
        K: Optional[int] = None,
        covariate_mode: str = "lags_only",
        pilot_keep: Optional[Sequence[int]] = None,
        rolling_window: Optional[int] = None,
        seed: int = 0,
    ):
        self.lags = lags
        self.candidates = candidates
        self.K = K
        self.covariate_mode = covariate_mode
        self.pilot_keep = pilot_keep
        self.rolling_window = rolling_window
        self.seed = seed

    def get_params(self) -> dict:
        return {
            "lags": self.lags,
            "candidates": self.candidates,
            "K": self.K,
            "covariate_mode": self.covariate_mode,
            "pilot_keep": self.pilot_keep,
            "rolling_window": self.rolling_window,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "MLCM":
        for name, value in params.items():
            if name not in self.get_params():
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def config(self) -> PipelineConfig:
        return PipelineConfig(
            lags=self.lags if self.lags is not None else LagSpec(p=1),
            candidates=self.candidates,
            K=self.K,
            covariate_mode=self.covariate_mode,
            pilot_keep=self.pilot_keep,
            rolling_window=self.rolling_window,
            seed=self.seed,
        )

    def fit(self, ds: PanelDataset) -> "MLCM":
        result = run_pipeline(ds, self.config())
        self.result_ = result
        self.report_ = result.report
        self.model_ = result.model
        self.chain_ = result.chain
        self.counterfactuals_ = result.counterfactuals
        self.effects_ = result.effects
        return self

    @property
    def ate_(self) -> np.ndarray:
        return self.effects_.ate
