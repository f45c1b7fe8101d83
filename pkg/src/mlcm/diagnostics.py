"""Validity diagnostics: in-time placebo tests, error-distribution
summaries, and sensitivity trimming.

The placebo test moves the intervention date back by ``n_holdout``
periods, drops every true post-treatment period, and runs the full
selection + analysis machinery as if the held-out pre-treatment periods
were post-treatment. Because nothing actually happened at the fake date,
the estimated "effects" are pure forecast errors — their distribution
should be centered near zero, and their intervals should cover zero. The
trimming check re-averages the main effects after excluding the units
whose placebo errors were largest, showing how much the headline numbers
lean on the worst-forecast units.
"""

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .effects import EffectSet
from .exceptions import DesignError
from .panel import PanelDataset, min_feasible_time
from .pipeline import PipelineConfig, PipelineResult, run_pipeline

__all__ = [
    "PlaceboResult",
    "placebo_test",
    "ErrorDistribution",
    "error_distribution",
    "TrimRow",
    "sensitivity_trim",
    "placebo_dataset",
]


# --------------------------------------------------------------------------
# in-time placebo
# --------------------------------------------------------------------------

def placebo_dataset(ds: PanelDataset, n_holdout: int) -> PanelDataset:
    """The pre-treatment panel with a fake intervention ``n_holdout``
    periods before the real one.

    All true post-treatment periods are dropped, so no placebo computation
    can read them even by accident.
    """
    ds.require_split("placebo_dataset")
    n_holdout = int(n_holdout)
    if n_holdout < 1:
        raise ValueError(f"n_holdout must be >= 1, got {n_holdout}")
    pseudo_t0 = ds.t0 - n_holdout
    return PanelDataset(
        ds.outcome[:, : ds.t0],
        pseudo_t0,
        covariates=ds.covariates[:, : ds.t0, :],
        unit_ids=ds.unit_ids,
        time_points=ds.time_points[: ds.t0],
        covariate_names=ds.covariate_names,
        covariate_kinds=ds.covariate_kinds,
        treated=ds.treated,
        outcome_name=ds.outcome_name,
    )


@dataclass(frozen=True)
class PlaceboResult:
    """Placebo effects at a fake intervention date.

    ``effects`` holds per-unit placebo "effects" (forecast errors) for the
    held-out pre-treatment periods; ``pipeline`` is the full placebo run
    (its own winner, chain, forecasts). ``pseudo_t0`` is the fake
    intervention position in the original period indexing.
    """

    effects: EffectSet
    pseudo_t0: int
    n_holdout: int
    pipeline: PipelineResult

    def summary_dict(self) -> dict:
        out = self.effects.summary_dict()
        out["pseudo_t0"] = self.pseudo_t0
        out["n_holdout"] = self.n_holdout
        out["placebo_ate"] = out.pop("ate")
        out["placebo_temporal_ate"] = out.pop("temporal_ate")
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


def placebo_test(
    ds: PanelDataset,
    config: PipelineConfig,
    n_holdout: int = 1,
) -> PlaceboResult:
    """Estimate fake effects at ``t0 - n_holdout`` on pre-treatment data.

    The selection race reruns from scratch at the fake date (reusing the
    real winner would let the fake-date design peek at periods it is
    supposed to treat as future). Raises :class:`DesignError` with the
    largest feasible ``n_holdout`` when the fake date leaves too little
    history for cross-validation.
    """
    sub = placebo_dataset(ds, n_holdout)
    s_min = min_feasible_time(sub, config.lags)
    if s_min + 1 > sub.t0:
        max_holdout = ds.t0 - s_min - 1
        raise DesignError(
            f"placebo date t0 - {n_holdout} = {sub.t0} leaves no "
            f"cross-validation fold (first feasible validation period is "
            f"{s_min + 1}); largest feasible n_holdout here is "
            f"{max_holdout}"
            if max_holdout >= 1
            else f"placebo date t0 - {n_holdout} = {sub.t0} leaves no "
            f"cross-validation fold, and no placebo is feasible for this "
            f"panel and lag specification"
        )
    result = run_pipeline(sub, config.replace(K=n_holdout))
    return PlaceboResult(
        effects=result.effects,
        pseudo_t0=sub.t0,
        n_holdout=n_holdout,
        pipeline=result,
    )


# --------------------------------------------------------------------------
# forecast-error distribution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorDistribution:
    """Descriptive statistics of placebo effects (no test verdict).

    Moments are computed over all unit × held-out-period placebo effects;
    ``frac_below_neg1`` / ``frac_above_pos1`` report tails beyond ±1 in the
    outcome's units (for standardized outcomes, ±1 SD).
    """

    n: int
    mean: float
    sd: float
    skewness: float
    excess_kurtosis: float
    frac_below_neg1: float
    frac_above_pos1: float
    bin_edges: tuple
    bin_counts: tuple

    def summary_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "frac_below_neg1": self.frac_below_neg1,
            "frac_above_pos1": self.frac_above_pos1,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")

    def histogram_csv(self, path) -> None:
        """Bins as (lower, upper, count) rows for external plotting."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lower", "bin_upper", "count"])
            for i, count in enumerate(self.bin_counts):
                writer.writerow([
                    repr(float(self.bin_edges[i])),
                    repr(float(self.bin_edges[i + 1])),
                    int(count),
                ])


def error_distribution(placebo: EffectSet, bins: int = 20) -> ErrorDistribution:
    """Moments, tail fractions, and histogram of placebo effects."""
    values = placebo.individual.ravel()
    n = values.size
    mean = float(values.mean())
    centered = values - mean
    m2 = float(np.mean(centered**2))
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    if m2 > 0:
        skew = float(np.mean(centered**3) / m2**1.5)
        kurt = float(np.mean(centered**4) / m2**2 - 3.0)
    else:
        skew = 0.0
        kurt = 0.0
    counts, edges = np.histogram(values, bins=bins)
    return ErrorDistribution(
        n=n,
        mean=mean,
        sd=sd,
        skewness=skew,
        excess_kurtosis=kurt,
        frac_below_neg1=float(np.mean(values < -1.0)),
        frac_above_pos1=float(np.mean(values > 1.0)),
        bin_edges=tuple(float(e) for e in edges),
        bin_counts=tuple(int(c) for c in counts),
    )


# --------------------------------------------------------------------------
# sensitivity trimming
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrimRow:
    """Re-averaged effects after dropping the worst-forecast units."""

    fraction: float
    n_dropped: int
    n_kept: int
    dropped_units: tuple
    ate: np.ndarray
    temporal_ate: float


def sensitivity_trim(
    effects: EffectSet,
    placebo: EffectSet,
    fractions: Sequence[float],
) -> list:
    """ATE after excluding the units with the largest placebo errors.

    Units are ranked by the absolute value of their temporal-average
    placebo effect (the most imprecisely forecast units first); for each
    fraction ``f``, the ``round(f * N)`` worst units are dropped and the
    ATE re-averaged over the rest. The counterfactuals are NOT refit — the
    question is how much the existing estimates lean on badly-forecast
    units, not what a different model would say.
    """
    if effects.n_units != placebo.n_units:
        raise ValueError(
            f"effects cover {effects.n_units} units but the placebo run "
            f"covers {placebo.n_units}"
        )
    n = effects.n_units
    placebo_size = np.abs(placebo.individual.mean(axis=1))
    # worst units first; ties broken by unit position for determinism
    order = np.lexsort((np.arange(n), -placebo_size))
    rows = []
    for f in fractions:
        f = float(f)
        if f < 0 or f >= 1:
            raise ValueError(
                f"trim fraction must be in [0, 1), got {f}"
            )
        n_drop = int(math.floor(f * n + 0.5))
        if n_drop >= n:
            n_drop = n - 1
        dropped = order[:n_drop]
        kept = np.setdiff1d(np.arange(n), dropped)
        ate = effects.individual[kept].mean(axis=0)
        rows.append(
            TrimRow(
                fraction=f,
                n_dropped=int(n_drop),
                n_kept=int(kept.size),
                dropped_units=tuple(effects.unit_ids[i] for i in dropped),
                ate=ate,
                temporal_ate=float(ate.mean()),
            )
        )
    return rows
