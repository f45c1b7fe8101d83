"""Counterfactual forecasting and treatment-effect estimands.

Individual effects are the gap between each unit's observed post-treatment
outcome and its forecast untreated counterfactual; everything else (ATE,
group CATEs, temporal averages, treated/untreated decompositions,
cohort-time tables) is an average of those gaps, and the corresponding
aggregation identities hold exactly by construction.
"""

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ._seeds import TAG_COV_FORECAST, derive_seed
from .exceptions import DesignError, MlcmError
from .model_selection import (
    ForecastChain,
    _chain_lagspec,
    assemble_rows,
    build_forecast_chain,
    panel_cv,
    refit_winner,
)
from .panel import LagSpec, PanelDataset, design_columns, take_units

__all__ = [
    "EffectSet",
    "GroupSpec",
    "COVARIATE_MODES",
    "forecast_counterfactuals",
    "forecast_covariates",
    "resolve_cov_post",
    "individual_effects",
    "cate",
    "temporal_averages",
    "att_asa",
    "group_time_effects",
    "GroupTimeResult",
]

COVARIATE_MODES = ("lags_only", "observed_post", "forecasted_post")


# --------------------------------------------------------------------------
# effect containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectSet:
    """Per-unit, per-horizon effects and their aggregates.

    ``individual = observed - counterfactuals`` holds exactly for every
    cell; ``ate`` is the unit mean per horizon and ``temporal_ate`` the mean
    of ``ate`` over horizons.
    """

    horizons: tuple
    observed: np.ndarray
    counterfactuals: np.ndarray
    individual: np.ndarray
    ate: np.ndarray
    temporal_ate: float
    unit_ids: tuple

    @property
    def n_units(self) -> int:
        return self.individual.shape[0]

    @property
    def n_horizons(self) -> int:
        return self.individual.shape[1]

    def to_csv(self, path) -> None:
        """Rows of (unit, horizon, observed, counterfactual, effect)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["unit", "horizon", "observed", "counterfactual", "effect"]
            )
            for i, uid in enumerate(self.unit_ids):
                for kk, k in enumerate(self.horizons):
                    writer.writerow(
                        [
                            uid,
                            k,
                            repr(float(self.observed[i, kk])),
                            repr(float(self.counterfactuals[i, kk])),
                            repr(float(self.individual[i, kk])),
                        ]
                    )

    def summary_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "ate": [float(v) for v in self.ate],
            "temporal_ate": float(self.temporal_ate),
            "n_units": self.n_units,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


class GroupSpec:
    """A partition of the units by a categorical (or discretized) variable.

    Parameters
    ----------
    values : sequence of hashables, one per unit
        Group membership; labels are the sorted distinct values.
    """

    def __init__(self, values: Sequence):
        values = list(values)
        if not values:
            raise ValueError("GroupSpec needs at least one unit")
        self.values = tuple(values)
        self.labels = tuple(sorted(set(values), key=lambda v: (str(type(v)), v)))
        self.sizes = {
            g: sum(1 for v in values if v == g) for g in self.labels
        }

    def members(self, label) -> np.ndarray:
        """Indices of the units in the given group."""
        return np.array(
            [i for i, v in enumerate(self.values) if v == label], dtype=np.intp
        )

    def __len__(self) -> int:
        return len(self.values)


# --------------------------------------------------------------------------
# counterfactual forecasting
# --------------------------------------------------------------------------

def _model_reads(ds: PanelDataset, lags: LagSpec, model):
    """Column names + reads matching the model's fitted feature subset."""
    names, reads = design_columns(ds, lags)
    picked = model.feature_names_in_
    if picked is not None and tuple(picked) != tuple(names):
        lookup = dict(zip(names, reads))
        missing = [c for c in picked if c not in lookup]
        if missing:
            raise DesignError(
                f"fitted model uses columns {missing} that the lag "
                f"specification does not generate"
            )
        names = tuple(picked)
        reads = tuple(lookup[c] for c in names)
    return names, reads


def forecast_covariates(
    ds: PanelDataset,
    K: int,
    candidates: Mapping[str, Sequence[Mapping]],
    *,
    lags: Optional[LagSpec] = None,
    seed: int = 0,
) -> np.ndarray:
    """Forecast each covariate K periods past t0 from its own lags.

    Every covariate is treated as the outcome of its own autoregressive
    panel and gets the full selection machinery (CV race, refit, multi-step
    chain), independently of the other covariates.

    Returns
    -------
    ndarray (n_units, K, n_covariates)
    """
    if ds.n_covariates == 0:
        raise ValueError("panel has no covariates to forecast")
    lags = lags if lags is not None else LagSpec(p=1)
    if lags.q != 0:
        raise ValueError(
            "covariate forecasting races are autoregressive; use a LagSpec "
            "with q = 0"
        )
    out = np.empty((ds.n_units, K, ds.n_covariates))
    for j, name in enumerate(ds.covariate_names):
        sub = PanelDataset(
            ds.covariates[:, :, j],
            ds.t0,
            unit_ids=ds.unit_ids,
            time_points=ds.time_points,
            outcome_name=name,
        )
        sub_seed = derive_seed(seed, TAG_COV_FORECAST, j)
        report = panel_cv(sub, lags, candidates, seed=sub_seed)
        base = refit_winner(sub, report)
        chain = build_forecast_chain(sub, base, report, K)
        out[:, :, j] = _forecast_with_chain(sub, chain, K, cov_post=None)
    return out


def _forecast_with_chain(
    ds: PanelDataset,
    chain: ForecastChain,
    K: int,
    cov_post: Optional[np.ndarray],
) -> np.ndarray:
    """Horizon-by-horizon forecasts, never reading post-treatment outcomes.

    Horizon 1 (and every horizon, for a linear winner) applies the base
    model with earlier forecasts substituted into the outcome-lag slots;
    a non-linear winner's horizons k >= 2 apply the re-estimated
    per-horizon models instead.
    """
    base_names, base_reads = _model_reads(ds, chain.lags, chain.base)
    fc = np.empty((ds.n_units, K))
    for k in range(1, K + 1):
        if chain.is_recursive or k == 1:
            model, names, reads = chain.base, base_names, base_reads
        else:
            model = chain.models[k]
            names = chain.model_columns[k]
            all_names, all_reads = design_columns(ds, _chain_lagspec(chain.lags, k))
            lookup = dict(zip(all_names, all_reads))
            reads = tuple(lookup[c] for c in names)
        X = assemble_rows(
            ds, names, reads, ds.t0 + k,
            forecasts=fc[:, : k - 1],
            cov_post=cov_post,
        )
        fc[:, k - 1] = model.predict(X, feature_names=names)
    return fc


def forecast_counterfactuals(
    ds: PanelDataset,
    chain: ForecastChain,
    K: Optional[int] = None,
    covariate_mode: str = "lags_only",
    *,
    cov_candidates: Optional[Mapping[str, Sequence[Mapping]]] = None,
    cov_lags: Optional[LagSpec] = None,
    seed: int = 0,
) -> np.ndarray:
    """Forecast untreated outcomes for horizons 1..K after t0.

    Parameters
    ----------
    ds : PanelDataset
        Full panel; post-treatment outcomes are never read.
    chain : ForecastChain
        Fitted forecasting recipe from the selection stage.
    K : int, optional
        Horizons to forecast; defaults to ``chain.K``.
    covariate_mode : str
        How covariate features may reach past t0:

        - ``"lags_only"`` (default): never; a feature that would read a
          post-treatment covariate raises :class:`DesignError`.
        - ``"observed_post"``: read observed post-treatment covariate
          values. Only valid when covariates are unaffected by the
          treatment (exogeneity); choosing this mode asserts that.
        - ``"forecasted_post"``: replace post-treatment covariate values
          with forecasts from per-covariate autoregressive races.
    cov_candidates : mapping, optional
        Grids for ``forecasted_post`` races (defaults to compact grids).
    cov_lags : LagSpec, optional
        Lag spec for those races (default ``LagSpec(p=1)``).
    seed : int
        Seed for covariate-forecast races (unused by other modes).

    Returns
    -------
    ndarray (n_units, K): counterfactual forecasts.
    """
    ds.require_split("forecast_counterfactuals")
    K = chain.K if K is None else int(K)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > chain.K and not chain.is_recursive:
        raise ValueError(
            f"chain was built for K = {chain.K}; cannot forecast horizon {K}"
        )
    cov_post = resolve_cov_post(
        ds, K, covariate_mode,
        cov_candidates=cov_candidates, cov_lags=cov_lags, seed=seed,
    )
    return _forecast_with_chain(ds, chain, K, cov_post)


def resolve_cov_post(
    ds: PanelDataset,
    K: int,
    covariate_mode: str,
    *,
    cov_candidates: Optional[Mapping[str, Sequence[Mapping]]] = None,
    cov_lags: Optional[LagSpec] = None,
    seed: int = 0,
) -> Optional[np.ndarray]:
    """Post-treatment covariate values per ``covariate_mode``.

    Returns None (features may not read past t0), the observed post slice,
    or per-covariate forecasts — shape (n_units, K, n_covariates).
    """
    if covariate_mode not in COVARIATE_MODES:
        raise ValueError(
            f"unknown covariate_mode {covariate_mode!r}; expected one of "
            f"{COVARIATE_MODES}"
        )
    if covariate_mode == "lags_only" or ds.n_covariates == 0:
        return None
    if covariate_mode == "observed_post":
        if ds.t0 + K > ds.n_periods:
            raise DesignError(
                f"observed_post needs covariates through period "
                f"{ds.t0 + K}, but the panel ends at {ds.n_periods}"
            )
        return ds.covariates[:, ds.t0 : ds.t0 + K, :]
    if cov_candidates is None:
        from .model_selection import compact_grids

        cov_candidates = compact_grids(max(1, (cov_lags or LagSpec(p=1)).p + 1))
    return forecast_covariates(
        ds, K, cov_candidates, lags=cov_lags, seed=seed
    )


# --------------------------------------------------------------------------
# estimands
# --------------------------------------------------------------------------

def individual_effects(ds: PanelDataset, counterfactuals) -> EffectSet:
    """Effects as observed minus counterfactual, with aggregates.

    ``counterfactuals`` must be (n_units, K) with K within the panel's
    post-treatment window.
    """
    ds.require_split("individual_effects")
    cf = np.asarray(counterfactuals, dtype=np.float64)
    if cf.ndim != 2 or cf.shape[0] != ds.n_units:
        raise ValueError(
            f"counterfactuals must be (n_units, K); got {cf.shape} for "
            f"{ds.n_units} units"
        )
    K = cf.shape[1]
    if K < 1 or K > ds.n_post:
        raise ValueError(
            f"counterfactual horizon {K} outside the panel's "
            f"{ds.n_post} post-treatment periods"
        )
    observed = np.array(ds.outcome[:, ds.t0 : ds.t0 + K])
    individual = observed - cf
    ate = individual.mean(axis=0)
    return EffectSet(
        horizons=tuple(range(1, K + 1)),
        observed=observed,
        counterfactuals=cf,
        individual=individual,
        ate=ate,
        temporal_ate=float(ate.mean()),
        unit_ids=ds.unit_ids,
    )


def cate(effects: EffectSet, groups: GroupSpec, k: int) -> dict:
    """Group-average effects at horizon ``k`` (1-based)."""
    if len(groups) != effects.n_units:
        raise ValueError(
            f"groups cover {len(groups)} units, effects have "
            f"{effects.n_units}"
        )
    if k not in effects.horizons:
        raise ValueError(f"horizon {k} not in {effects.horizons}")
    col = effects.individual[:, k - 1]
    return {g: float(col[groups.members(g)].mean()) for g in groups.labels}


def temporal_averages(effects: EffectSet, groups: Optional[GroupSpec] = None):
    """Temporal-average ATE, and per-group temporal CATEs when asked.

    Returns the scalar when ``groups`` is None, else ``(scalar, dict)``.
    """
    tau_bar = float(effects.temporal_ate)
    if groups is None:
        return tau_bar
    if len(groups) != effects.n_units:
        raise ValueError(
            f"groups cover {len(groups)} units, effects have "
            f"{effects.n_units}"
        )
    unit_means = effects.individual.mean(axis=1)
    per_group = {
        g: float(unit_means[groups.members(g)].mean()) for g in groups.labels
    }
    return tau_bar, per_group


def att_asa(effects: EffectSet, mask) -> tuple:
    """Treated / untreated per-horizon averages.

    ``mask`` marks exposed units (True). Returns ``(att, asa)`` where each
    is a K-vector; ``asa`` is None when no unit is untreated (the spillover
    average is undefined without untreated units). For full-strength
    estimates the two groups should come from separate pipeline runs — this
    helper only splits an existing effect matrix.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (effects.n_units,):
        raise ValueError(
            f"mask must have shape ({effects.n_units},), got {mask.shape}"
        )
    if not mask.any():
        raise MlcmError("no treated units: the treated average is undefined")
    att = effects.individual[mask].mean(axis=0)
    if mask.all():
        return att, None
    asa = effects.individual[~mask].mean(axis=0)
    return att, asa


# --------------------------------------------------------------------------
# staggered adoption
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupTimeResult:
    """Cohort-by-period effect table for staggered adoption.

    ``rows`` holds (cohort, period, n_units, effect); ``period_averages``
    maps each calendar period to the cohort-size-weighted mean effect of
    the cohorts observed at that period; ``overall`` weights each cohort's
    temporal-average effect by its size. ``skipped`` lists cohorts without
    enough pre-treatment periods, with reasons.
    """

    rows: tuple
    period_averages: dict
    overall: float
    skipped: tuple

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cohort", "period", "n_units", "effect"])
            for cohort, period, n, eff in self.rows:
                writer.writerow([cohort, period, n, repr(float(eff))])


def group_time_effects(
    ds: PanelDataset,
    cohorts: Sequence[int],
    candidates: Mapping[str, Sequence[Mapping]],
    lags: LagSpec,
    *,
    covariate_mode: str = "lags_only",
    seed: int = 0,
) -> GroupTimeResult:
    """Average effects per (adoption cohort, calendar period).

    ``cohorts[i]`` is the 1-based period position at which unit ``i`` first
    receives treatment. Each cohort runs its own full selection + analysis
    pipeline (its own winner and hyperparameters) on its own units with
    ``t0 = cohort - 1``; cohorts whose ``t0`` leaves fewer than two usable
    pre-treatment periods are skipped with a warning and listed in the
    result. The overall figure weights cohort temporal averages by cohort
    size.
    """
    from .pipeline import PipelineConfig, run_pipeline

    cohorts = np.asarray(list(cohorts))
    if cohorts.shape != (ds.n_units,):
        raise ValueError(
            f"cohorts must give one adoption period per unit "
            f"({ds.n_units}), got shape {cohorts.shape}"
        )
    labels = sorted(int(c) for c in set(cohorts.tolist()))
    rows = []
    skipped = []
    totals = []
    for ci, c in enumerate(labels):
        members = np.where(cohorts == c)[0]
        t0_c = c - 1
        if t0_c < 1 or t0_c >= ds.n_periods:
            skipped.append((c, f"adoption period {c} leaves no pre/post window"))
            continue
        sub = take_units(ds, members).with_t0(t0_c)
        config = PipelineConfig(
            lags=lags,
            candidates=candidates,
            K=ds.n_periods - t0_c,
            covariate_mode=covariate_mode,
            seed=derive_seed(seed, ci),
        )
        try:
            result = run_pipeline(sub, config)
        except DesignError as exc:
            skipped.append((c, str(exc)))
            continue
        eff = result.effects
        for kk, k in enumerate(eff.horizons):
            rows.append(
                (c, t0_c + k, len(members), float(eff.ate[kk]))
            )
        totals.append((c, len(members), float(eff.temporal_ate)))
    if skipped:
        warnings.warn(
            "skipped cohorts without a feasible design: " +
            "; ".join(f"{c} ({why})" for c, why in skipped),
            stacklevel=2,
        )
    if not totals:
        raise DesignError("no cohort had a feasible design")

    period_avg = {}
    for period in sorted({r[1] for r in rows}):
        hits = [(n, eff) for _, p, n, eff in rows if p == period]
        w = sum(n for n, _ in hits)
        period_avg[period] = sum(n * eff for n, eff in hits) / w
    w_all = sum(n for _, n, _ in totals)
    overall = sum(n * eff for _, n, eff in totals) / w_all
    return GroupTimeResult(
        rows=tuple(rows),
        period_averages=period_avg,
        overall=float(overall),
        skipped=tuple(skipped),
    )
