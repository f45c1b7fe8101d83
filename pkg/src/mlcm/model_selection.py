"""Expanding-window panel cross-validation and the learner race.

The selection stage trains every candidate (learner kind x hyperparameter
point x optional feature subset) on identical expanding panels: for each
fold ``s`` the pooled design rows with period <= s form the training set and
the rows at ``s + 1`` are forecast one step ahead. The winner minimizes the
mean validation MSE across folds; exact ties prefer fewer features, then the
learner order in :data:`~mlcm.learners.LEARNER_ORDER`, then the smaller
hyperparameter index.

Multi-step forecasting: a linear winner is simply iterated (each horizon's
forecast feeds the next lag). A non-linear winner gets one re-estimated
model per horizon ``k >= 2`` whose outcome lags reach back to the last
pre-treatment observation, so that at forecast time every unobserved lag
slot is filled by an earlier-horizon forecast rather than a post-treatment
outcome.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ._seeds import (
    TAG_CHAIN,
    TAG_CHAIN_RETRAIN,
    TAG_CV_FIT,
    TAG_PILOT,
    TAG_REFIT,
    derive_seed,
)
from .exceptions import DesignError
from .learners import (
    LEARNER_KINDS,
    LEARNER_ORDER,
    RandomForest,
    make_learner,
    variable_importance,
)
from .panel import (
    LagSpec,
    PanelDataset,
    build_design,
    design_columns,
    min_feasible_time,
)

__all__ = [
    "CvCandidate",
    "CvReport",
    "PilotSelection",
    "ForecastChain",
    "default_grids",
    "compact_grids",
    "pilot_select_features",
    "panel_cv",
    "refit_winner",
    "build_forecast_chain",
    "assemble_rows",
]

#: learner kinds whose multi-step forecasts may use plain recursive plug-in
LINEAR_KINDS = ("lasso", "pls")

_SEEDED_KINDS = ("forest", "gbm")


# --------------------------------------------------------------------------
# candidate grids
# --------------------------------------------------------------------------

def default_grids(n_features: int) -> dict:
    """Full hyperparameter grids for the learner race.

    LASSO penalties 0.1..0.9, PLS components up to the feature count, a
    stochastic-GBM grid over size/depth/node/learning-rate, and a forest
    with 1000 trees racing three per-split subset sizes.
    """
    m = int(n_features)
    if m < 1:
        raise ValueError("n_features must be >= 1")
    mtry = sorted({max(1, m // 2), max(1, m // 3), max(1, m // 4)})
    return {
        "lasso": [{"penalty": round(0.1 * i, 1)} for i in range(1, 10)],
        "pls": [{"n_components": k} for k in range(1, m + 1)],
        "gbm": [
            {
                "n_trees": nt,
                "max_depth": depth,
                "min_node": node,
                "learning_rate": lr,
                "subsample": 0.5,
            }
            for nt in (1000, 2000)
            for depth in (1, 2)
            for node in (5, 10)
            for lr in (0.001, 0.002, 0.005)
        ],
        "forest": [{"n_trees": 1000, "mtry": k} for k in mtry],
    }


def compact_grids(n_features: int) -> dict:
    """Small grids for quick runs and large simulation batches.

    Same learner kinds as :func:`default_grids` with far fewer points, sized
    so a full pipeline stays fast on one core.
    """
    m = int(n_features)
    if m < 1:
        raise ValueError("n_features must be >= 1")
    return {
        "lasso": [{"penalty": lam} for lam in (0.1, 0.3, 0.5, 0.7, 0.9)],
        "pls": [{"n_components": k} for k in range(1, min(m, 6) + 1)],
        "gbm": [
            {
                "n_trees": 100,
                "max_depth": depth,
                "min_node": 10,
                "learning_rate": 0.1,
                "subsample": 0.5,
            }
            for depth in (1, 2)
        ],
        "forest": [{"n_trees": 30, "mtry": max(1, m // 3), "min_node": 10}],
    }


def _ordered_kinds(candidates: Mapping[str, Sequence[Mapping]]):
    """Candidate kinds in deterministic precedence order."""
    unknown = set(candidates) - set(LEARNER_KINDS)
    if unknown:
        raise ValueError(
            f"unknown learner kinds {sorted(unknown)}; known: "
            f"{sorted(LEARNER_KINDS)}"
        )
    return [k for k in LEARNER_ORDER if k in candidates]


# --------------------------------------------------------------------------
# report types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CvCandidate:
    """One raced configuration and its per-fold validation errors."""

    subset_index: int
    kind: str
    hp_index: int
    params: dict
    fold_mse: tuple
    aggregate_mse: float
    n_features: int


@dataclass(frozen=True)
class PilotSelection:
    """Pilot-forest feature ranking and the candidate subsets it induces."""

    ranked_features: tuple
    importances: tuple
    keep_grid: tuple
    feature_sets: tuple


@dataclass(frozen=True)
class CvReport:
    """Everything the selection stage decided, and why.

    ``candidates`` holds one entry per (feature subset, learner kind,
    hyperparameter point); ``winner_index`` points at the minimizer.
    """

    lags: LagSpec
    folds: tuple
    feature_sets: tuple
    candidates: tuple
    winner_index: int
    seed: int
    rolling_window: Optional[int] = None
    pilot: Optional[PilotSelection] = None

    @property
    def winner(self) -> CvCandidate:
        return self.candidates[self.winner_index]

    @property
    def winner_features(self) -> tuple:
        return self.feature_sets[self.winner.subset_index]

    def summary_dict(self) -> dict:
        """JSON-ready summary naming the winner and the race layout."""
        w = self.winner
        return {
            "winner": {
                "kind": w.kind,
                "params": dict(w.params),
                "aggregate_mse": w.aggregate_mse,
                "n_features": w.n_features,
                "features": list(self.winner_features),
            },
            "folds": list(self.folds),
            "n_candidates": len(self.candidates),
            "rolling_window": self.rolling_window,
            "lags": {
                "p": self.lags.p,
                "q": self.lags.q,
                "contemporaneous": self.lags.contemporaneous,
            },
            "feature_sets": [list(s) for s in self.feature_sets],
            "pilot_ranking": (
                list(self.pilot.ranked_features) if self.pilot else None
            ),
            "seed": self.seed,
        }

    def to_csv(self, path) -> None:
        """Write per-fold scores: (learner, hyperparams, fold, mse) rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["learner", "hyperparams", "fold", "mse"])
            for cand in self.candidates:
                hp = json.dumps(dict(cand.params), sort_keys=True)
                if len(self.feature_sets) > 1:
                    hp = json.dumps(
                        {**dict(cand.params), "n_features": cand.n_features},
                        sort_keys=True,
                    )
                for s, mse in zip(self.folds, cand.fold_mse):
                    writer.writerow([cand.kind, hp, s, repr(float(mse))])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


# --------------------------------------------------------------------------
# pilot feature pre-selection
# --------------------------------------------------------------------------

def pilot_select_features(
    ds: PanelDataset,
    lags: LagSpec,
    keep_grid: Sequence[int],
    *,
    forest_params: Optional[Mapping] = None,
    seed: int = 0,
) -> PilotSelection:
    """Rank design columns with a pilot forest and build candidate subsets.

    A random forest is fit on the pooled pre-treatment design; columns are
    ranked by its variance-reduction importance (ties keep column order).
    Each entry ``k`` of ``keep_grid`` yields the top-``k`` subset, giving
    the race an extra tuned dimension. Sizes beyond the available column
    count are clamped with a warning; duplicates after clamping collapse.
    """
    if not keep_grid:
        raise ValueError("keep_grid must name at least one subset size")
    ds.require_split("pilot_select_features")
    if min_feasible_time(ds, lags) + 1 > ds.t0:
        raise DesignError(
            "pilot selection needs at least two usable pre-treatment "
            "periods after lagging"
        )
    design = build_design(ds, lags, t_hi=ds.t0)
    params = {"seed": derive_seed(seed, TAG_PILOT)}
    params.update(forest_params or {})
    forest = RandomForest(**params)
    forest.fit(design.X, design.y, feature_names=design.columns)
    ranking = variable_importance(forest)
    ranked = tuple(name for name, _ in ranking)
    importances = tuple(score for _, score in ranking)

    m = len(ranked)
    clamped = []
    for k in keep_grid:
        k = int(k)
        if k < 1:
            raise ValueError(f"keep_grid sizes must be >= 1, got {k}")
        if k > m:
            warnings.warn(
                f"keep_grid size {k} exceeds the {m} available design "
                f"columns; clamped to {m}",
                stacklevel=2,
            )
            k = m
        clamped.append(k)
    sizes = tuple(sorted(set(clamped)))
    return PilotSelection(
        ranked_features=ranked,
        importances=importances,
        keep_grid=sizes,
        feature_sets=tuple(ranked[:k] for k in sizes),
    )


# --------------------------------------------------------------------------
# panel cross-validation
# --------------------------------------------------------------------------

def _fit_candidate(kind, params, seed_parts, X, y, names, master_seed):
    """Instantiate and fit one candidate, injecting a derived seed where the
    learner is stochastic and the grid did not pin one."""
    use = dict(params)
    if kind in _SEEDED_KINDS and "seed" not in use:
        use["seed"] = derive_seed(master_seed, *seed_parts)
    model = make_learner(kind, **use)
    model.fit(X, y, feature_names=names)
    return model


def panel_cv(
    ds: PanelDataset,
    lags: LagSpec,
    candidates: Mapping[str, Sequence[Mapping]],
    *,
    pilot: Optional[PilotSelection] = None,
    rolling_window: Optional[int] = None,
    seed: int = 0,
) -> CvReport:
    """Race the candidate learners with expanding-window panel CV.

    For each fold ``s`` from the first lag-feasible period through
    ``t0 - 1``, every candidate trains on the pooled design rows with period
    <= ``s`` and is scored on its one-step-ahead forecast of period
    ``s + 1``. Scores aggregate as the unweighted mean MSE over folds;
    hyperparameters are chosen globally (one point per learner across all
    folds), and the winner is the overall minimizer.

    Parameters
    ----------
    ds : PanelDataset
        Panel whose ``t0`` bounds the usable periods (all folds validate at
        or before ``t0``, so the race never sees post-treatment data).
    lags : LagSpec
    candidates : mapping learner kind -> sequence of hyperparameter dicts
    pilot : PilotSelection, optional
        Adds its feature subsets as an extra raced dimension.
    rolling_window : int, optional
        Train each fold on at most this many trailing periods instead of
        the full expanding window (None, the default, keeps expanding).
    seed : int
        Master seed; stochastic candidates get per-(subset, candidate, fold)
        derived seeds, so results never depend on evaluation order.

    Returns
    -------
    CvReport
    """
    ds.require_split("panel_cv")
    kinds = _ordered_kinds(candidates)
    if not kinds:
        raise ValueError("candidates must name at least one learner kind")
    if rolling_window is not None and rolling_window < 1:
        raise ValueError(f"rolling_window must be >= 1, got {rolling_window}")

    s_min = min_feasible_time(ds, lags)
    folds = tuple(range(s_min, ds.t0))
    if not folds:
        raise DesignError(
            f"no feasible CV folds: the first lag-feasible period is "
            f"{s_min} but t0 = {ds.t0}; reduce the outcome/covariate lag "
            f"orders (p, q) or move t0 later"
        )

    design = build_design(ds, lags, t_hi=ds.t0)
    if pilot is not None:
        feature_sets = pilot.feature_sets
    else:
        feature_sets = (design.columns,)

    results = []
    for subset_index, subset in enumerate(feature_sets):
        dsub = design.select_columns(subset)
        fold_views = []
        for s in folds:
            t_lo = s_min
            if rolling_window is not None:
                t_lo = max(s_min, s - rolling_window + 1)
            fold_views.append((dsub.rows_in(t_lo, s), dsub.rows_in(s + 1, s + 1)))
        for kind_index, kind in enumerate(kinds):
            grid = candidates[kind]
            if not grid:
                raise ValueError(f"empty hyperparameter grid for {kind!r}")
            for hp_index, params in enumerate(grid):
                fold_mse = []
                for fold_index, (train, val) in enumerate(fold_views):
                    model = _fit_candidate(
                        kind,
                        params,
                        (TAG_CV_FIT, subset_index, kind_index, hp_index, fold_index),
                        train.X,
                        train.y,
                        subset,
                        seed,
                    )
                    pred = model.predict(val.X)
                    fold_mse.append(float(np.mean((pred - val.y) ** 2)))
                results.append(
                    CvCandidate(
                        subset_index=subset_index,
                        kind=kind,
                        hp_index=hp_index,
                        params=dict(params),
                        fold_mse=tuple(fold_mse),
                        aggregate_mse=float(np.mean(fold_mse)),
                        n_features=len(subset),
                    )
                )

    order = {k: i for i, k in enumerate(LEARNER_ORDER)}
    winner_index = min(
        range(len(results)),
        key=lambda i: (
            results[i].aggregate_mse,
            results[i].n_features,
            order[results[i].kind],
            results[i].hp_index,
            results[i].subset_index,
        ),
    )
    return CvReport(
        lags=lags,
        folds=folds,
        feature_sets=tuple(tuple(s) for s in feature_sets),
        candidates=tuple(results),
        winner_index=winner_index,
        seed=seed,
        rolling_window=rolling_window,
        pilot=pilot,
    )


def fit_frozen(
    ds: PanelDataset,
    lags: LagSpec,
    kind: str,
    params: Mapping,
    features: Sequence[str],
    *,
    seed: int = 0,
):
    """Fit a fixed (kind, hyperparameters, feature subset) choice.

    No selection happens — this re-estimates model parameters only, on the
    pooled pre-treatment rows. Used where a race already ran and its choice
    must be held fixed (e.g. fixed-model bootstrap replicates).
    """
    ds.require_split("fit_frozen")
    design = build_design(ds, lags, t_hi=ds.t0)
    dsub = design.select_columns(tuple(features))
    return _fit_candidate(
        kind, dict(params), (TAG_REFIT,), dsub.X, dsub.y, dsub.columns, seed
    )


def refit_winner(ds: PanelDataset, report: CvReport, *, seed: Optional[int] = None):
    """Refit the race winner on every pre-treatment design row.

    Hyperparameters are frozen at their selected values; only the model
    parameters are re-estimated on the pooled rows with period <= ``t0``.
    Returns the fitted learner (its feature names are the winner's subset).
    """
    master = report.seed if seed is None else seed
    design = build_design(ds, report.lags, t_hi=ds.t0)
    dsub = design.select_columns(report.winner_features)
    w = report.winner
    return _fit_candidate(
        w.kind,
        w.params,
        (TAG_REFIT,),
        dsub.X,
        dsub.y,
        dsub.columns,
        master,
    )


# --------------------------------------------------------------------------
# feature assembly at and beyond t0 (shared with the forecasting stage)
# --------------------------------------------------------------------------

def assemble_rows(
    ds: PanelDataset,
    columns: Sequence[str],
    reads: Sequence[tuple],
    t: int,
    forecasts: Optional[np.ndarray] = None,
    cov_post: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Feature rows for all units at period ``t``, without outcome leakage.

    Outcome lags that land at or before ``t0`` read observed pre-treatment
    values; later ones read earlier-horizon ``forecasts`` (shape
    ``(n_units, >= t - t0 - 1)``) — observed post-treatment outcomes are
    never consulted. Covariate lags landing after ``t0`` read ``cov_post``
    (shape ``(n_units, horizon, n_covariates)``); if that is None the
    configuration is lags-only and such a read raises
    :class:`~mlcm.exceptions.DesignError`.
    """
    n = ds.n_units
    out = np.empty((n, len(reads)))
    for col, (name, (kind, j, lag)) in enumerate(zip(columns, reads)):
        tt = t - lag
        if tt < 1:
            raise DesignError(
                f"feature {name!r} at period {t} would read period {tt}, "
                f"before the panel starts"
            )
        if kind == "y":
            if tt <= ds.t0:
                out[:, col] = ds.outcome[:, tt - 1]
            else:
                if forecasts is None or forecasts.shape[1] < tt - ds.t0:
                    raise DesignError(
                        f"feature {name!r} at period {t} needs the "
                        f"horizon-{tt - ds.t0} forecast, which is not "
                        f"available yet"
                    )
                out[:, col] = forecasts[:, tt - ds.t0 - 1]
        else:
            if tt <= ds.t0:
                out[:, col] = ds.covariates[:, tt - 1, j]
            else:
                if cov_post is None:
                    raise DesignError(
                        f"feature {name!r} at period {t} reads covariate "
                        f"values from post-treatment period {tt}, but the "
                        f"configuration is lags-only; increase the "
                        f"covariate lag q, drop contemporaneous terms, or "
                        f"choose a post-treatment covariate mode"
                    )
                if tt - ds.t0 > cov_post.shape[1]:
                    raise DesignError(
                        f"feature {name!r} at period {t} needs covariate "
                        f"values {tt - ds.t0} periods past t0, beyond the "
                        f"provided horizon {cov_post.shape[1]}"
                    )
                out[:, col] = cov_post[:, tt - ds.t0 - 1, j]
    return out


# --------------------------------------------------------------------------
# multi-step forecast chain
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainCandidate:
    """One raced configuration for a per-horizon model."""

    kind: str
    hp_index: int
    params: dict
    mse: float


@dataclass(frozen=True)
class ForecastChain:
    """The fitted forecasting recipe for horizons 1..K.

    ``models`` is empty when the winner is linear or K = 1 (plain recursive
    plug-in of the base model); otherwise it maps each horizon k >= 2 to a
    re-estimated model whose outcome-lag features reach back to observed
    pre-treatment periods, with the gap filled by earlier-horizon forecasts.
    """

    base: object
    lags: LagSpec
    K: int
    models: dict = field(default_factory=dict)
    model_columns: dict = field(default_factory=dict)
    races: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def is_recursive(self) -> bool:
        """True when forecasting iterates the base model directly."""
        return not self.models


def _chain_lagspec(lags: LagSpec, k: int) -> LagSpec:
    """Lag layout for the horizon-``k`` model: outcome lags 1..k+p."""
    return LagSpec(p=lags.p + k - 1, q=lags.q, contemporaneous=lags.contemporaneous)


def build_forecast_chain(
    ds: PanelDataset,
    base,
    report: CvReport,
    K: int,
    candidates_g: Optional[Mapping[str, Sequence[Mapping]]] = None,
    *,
    cov_post: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> ForecastChain:
    """Prepare the multi-step forecaster for horizons 1..K.

    Linear winners (or K = 1) forecast by recursive substitution into the
    refit base model, so the chain holds only ``base``. A non-linear winner
    gets one re-estimated model per horizon k >= 2: candidates are fit on
    pooled pre-treatment rows whose outcome lags span 1..k+p, scored on
    their prediction at period ``t0 + 1`` against the base model's direct
    forecast for that period, and the minimizer is retrained with that
    validation row (pseudo-target) included.

    Parameters
    ----------
    ds : PanelDataset
        Full panel (post periods only supply covariates, per ``cov_post``).
    base : fitted learner returned by :func:`refit_winner`
    report : CvReport
    K : int
        Maximum forecast horizon (>= 1).
    candidates_g : mapping, optional
        Grids for the per-horizon race; defaults to the grids raced in
        ``report``.
    cov_post : ndarray (n_units, horizon, n_covariates), optional
        Post-treatment covariate values (observed or forecast); None means
        lags-only.
    seed : int, optional
        Defaults to ``report.seed``.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    ds.require_split("build_forecast_chain")
    master = report.seed if seed is None else seed
    lags = report.lags
    notes = []

    if report.winner.kind in LINEAR_KINDS or K == 1:
        return ForecastChain(base=base, lags=lags, K=K)

    if candidates_g is None:
        candidates_g = {}
        for cand in report.candidates:
            if cand.subset_index != report.winner.subset_index:
                continue
            candidates_g.setdefault(cand.kind, [])
            if cand.params not in candidates_g[cand.kind]:
                candidates_g[cand.kind].append(cand.params)
    kinds = _ordered_kinds(candidates_g)

    full_names, full_reads = design_columns(ds, lags)
    yhat1 = base_forecast_one_step(ds, base, lags, cov_post=cov_post)
    notes.append(
        "per-horizon models validate against the base model's direct "
        "period-(t0+1) forecast (pseudo-target), and the winner retrains "
        "with that row included"
    )
    if K > 2:
        notes.append(
            "horizons beyond 2 reuse the same period-(t0+1) validation "
            "template; the generalization to k > 2 is a documented choice"
        )

    order = {k: i for i, k in enumerate(LEARNER_ORDER)}
    models, model_columns, races = {}, {}, {}
    for k in range(2, K + 1):
        lag_k = _chain_lagspec(lags, k)
        t_lo = min_feasible_time(ds, lag_k)
        if t_lo > ds.t0:
            raise DesignError(
                f"horizon-{k} model needs outcome lags back to "
                f"{lag_k.p + 1} periods, infeasible with t0 = {ds.t0}; "
                f"reduce the horizon or the lag order"
            )
        train = build_design(ds, lag_k, t_hi=ds.t0)
        names_k, reads_k = design_columns(ds, lag_k)
        X_val = assemble_rows(ds, names_k, reads_k, ds.t0 + 1, cov_post=cov_post)

        raced = []
        for kind_index, kind in enumerate(kinds):
            for hp_index, params in enumerate(candidates_g[kind]):
                model = _fit_candidate(
                    kind,
                    params,
                    (TAG_CHAIN, k, kind_index, hp_index),
                    train.X,
                    train.y,
                    names_k,
                    master,
                )
                pred = model.predict(X_val)
                raced.append(
                    ChainCandidate(
                        kind=kind,
                        hp_index=hp_index,
                        params=dict(params),
                        mse=float(np.mean((pred - yhat1) ** 2)),
                    )
                )
        best = min(
            range(len(raced)),
            key=lambda i: (raced[i].mse, order[raced[i].kind], raced[i].hp_index),
        )
        w = raced[best]
        X_full = np.vstack([train.X, X_val])
        y_full = np.concatenate([train.y, yhat1])
        models[k] = _fit_candidate(
            w.kind,
            w.params,
            (TAG_CHAIN_RETRAIN, k),
            X_full,
            y_full,
            names_k,
            master,
        )
        model_columns[k] = tuple(names_k)
        races[k] = tuple(raced)

    return ForecastChain(
        base=base,
        lags=lags,
        K=K,
        models=models,
        model_columns=model_columns,
        races=races,
        notes=tuple(notes),
    )


def base_forecast_one_step(
    ds: PanelDataset,
    base,
    lags: LagSpec,
    *,
    cov_post: Optional[np.ndarray] = None,
) -> np.ndarray:
    """The base model's direct forecast for period ``t0 + 1``."""
    names, reads = design_columns(ds, lags)
    picked = base.feature_names_in_
    if picked is not None and tuple(picked) != tuple(names):
        lookup = dict(zip(names, reads))
        names = tuple(picked)
        reads = tuple(lookup[c] for c in names)
    X1 = assemble_rows(ds, names, reads, ds.t0 + 1, cov_post=cov_post)
    return base.predict(X1, feature_names=names)
