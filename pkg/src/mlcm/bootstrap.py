"""Unit block-bootstrap confidence intervals for effect estimates.

Resampling draws whole units with replacement — each resampled unit keeps
its complete time path, preserving within-unit temporal dependence. The
default mode re-runs the entire selection + analysis pipeline on every
replicate so the intervals carry model-selection uncertainty; a cheaper
``fixed_model`` mode freezes the selected learner and hyperparameters and
only re-estimates model parameters per replicate (a labeled
approximation). Intervals are percentile intervals from the empirical
replicate distribution; they may exclude the point estimate under strong
skew — that is a property of percentile intervals, not a defect.

Every replicate's randomness derives from (master seed, replicate index,
attempt), so results are bit-identical at any worker count.
"""

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._parallel import run_tasks
from ._seeds import TAG_BOOTSTRAP, TAG_CATE_BOOT, derive_rng, derive_seed
from .cate_tree import CateTree
from .exceptions import BootstrapError
from .panel import PanelDataset, take_units
from .pipeline import PipelineConfig, run_frozen_pipeline, run_pipeline

__all__ = [
    "BootstrapResult",
    "CateBootstrap",
    "bootstrap_ate",
    "bootstrap_cate",
    "empirical_quantile",
    "BOOTSTRAP_MODES",
]

BOOTSTRAP_MODES = ("full_pipeline", "fixed_model")
_MAX_ATTEMPTS = 8


def empirical_quantile(values: np.ndarray, prob: float) -> float:
    """Lowest-order-statistic empirical quantile.

    With B sorted values, returns the ``max(1, ceil(B * prob))``-th
    (1-indexed). Monotone in ``prob``, so intervals at nested levels nest.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    b = v.size
    if b == 0:
        raise ValueError("no values")
    idx = max(1, math.ceil(b * prob))
    return float(v[min(idx, b) - 1])


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate distribution and percentile interval for one estimand.

    ``replicates`` is (B,) for a scalar estimand or (B, K) per horizon;
    ``lower``/``upper`` match the trailing shape. ``n_failures`` counts
    failed replicate attempts that were retried with fresh derived seeds.
    """

    estimand: str
    mode: str
    B: int
    alpha: float
    point: np.ndarray
    replicates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_failures: int
    seed: int

    @property
    def interval(self):
        return self.lower, self.upper

    def covers(self, value) -> np.ndarray:
        """Elementwise: does the interval contain ``value``?"""
        v = np.asarray(value, dtype=np.float64)
        return (self.lower <= v) & (v <= self.upper)

    def temporal_result(self) -> "BootstrapResult":
        """Interval for the across-horizon average, from the same replicates."""
        if self.replicates.ndim != 2:
            raise ValueError("already a scalar estimand")
        reps = self.replicates.mean(axis=1)
        return BootstrapResult(
            estimand=f"temporal_{self.estimand}",
            mode=self.mode,
            B=self.B,
            alpha=self.alpha,
            point=np.float64(np.asarray(self.point).mean()),
            replicates=reps,
            lower=np.float64(empirical_quantile(reps, self.alpha / 2)),
            upper=np.float64(empirical_quantile(reps, 1 - self.alpha / 2)),
            n_failures=self.n_failures,
            seed=self.seed,
        )

    def replicates_csv(self, path) -> None:
        """One row per replicate; one column per horizon (or one column)."""
        reps = np.atleast_2d(self.replicates.T).T
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if reps.shape[1] == 1:
                header = [self.estimand]
            else:
                header = [f"{self.estimand}_h{k + 1}" for k in range(reps.shape[1])]
            writer.writerow(["replicate"] + header)
            for b in range(reps.shape[0]):
                writer.writerow([b] + [repr(float(v)) for v in reps[b]])

    def summary_dict(self) -> dict:
        return {
            "estimand": self.estimand,
            "mode": self.mode,
            "B": self.B,
            "alpha": self.alpha,
            "point": np.asarray(self.point).ravel().tolist(),
            "lower": np.asarray(self.lower).ravel().tolist(),
            "upper": np.asarray(self.upper).ravel().tolist(),
            "n_failures": self.n_failures,
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


# --------------------------------------------------------------------------
# ATE bootstrap
# --------------------------------------------------------------------------

def _frozen_chain_candidates(chain) -> Optional[dict]:
    """Candidate grids that pin the chain races to already-chosen models."""
    if chain.is_recursive:
        return None
    grids: dict = {}
    for model in chain.models.values():
        params = model.get_params()
        bucket = grids.setdefault(model.kind, [])
        if params not in bucket:
            bucket.append(params)
    return grids or None


def _ate_replicate(task) -> tuple:
    """One bootstrap replicate; returns (ate Kvector, failed_attempts)."""
    (ds, config, frozen, K, b, seed) = task
    failures = 0
    last_error = None
    for attempt in range(_MAX_ATTEMPTS):
        rng = derive_rng(seed, TAG_BOOTSTRAP, b, attempt)
        idx = rng.integers(0, ds.n_units, ds.n_units)
        rep_seed = derive_seed(seed, TAG_BOOTSTRAP, b, attempt, 1)
        try:
            sub = take_units(ds, idx)
            rep_config = config.replace(seed=rep_seed, K=K)
            if frozen is None:
                result = run_pipeline(sub, rep_config)
            else:
                kind, params, features, chain_grids = frozen
                result = run_frozen_pipeline(
                    sub, rep_config, kind, params, features,
                    chain_candidates=chain_grids,
                )
            return result.effects.ate, failures
        except Exception as exc:  # retried with a fresh derived seed
            failures += 1
            last_error = exc
    raise BootstrapError(
        f"replicate {b} failed {_MAX_ATTEMPTS} times; last error: "
        f"{last_error!r}"
    )


def bootstrap_ate(
    ds: PanelDataset,
    config: PipelineConfig,
    B: int = 1000,
    *,
    seed: Optional[int] = None,
    alpha: float = 0.05,
    mode: str = "full_pipeline",
    threads: Optional[int] = None,
    point_result=None,
) -> BootstrapResult:
    """Percentile intervals for the per-horizon ATE by unit resampling.

    Parameters
    ----------
    ds : PanelDataset
    config : PipelineConfig
        The estimation recipe; the point estimate comes from running it on
        the original panel (pass ``point_result`` to reuse a finished run).
    B : int
        Replicates, at least 2.
    seed : int, optional
        Master seed (defaults to ``config.seed``); replicate b's draws
        derive from (seed, b, attempt) regardless of worker count.
    alpha : float
        Two-sided miscoverage; 0.05 gives a 95% interval.
    mode : str
        ``"full_pipeline"`` re-runs selection + analysis per replicate
        (selection uncertainty included); ``"fixed_model"`` freezes the
        winner (kind, hyperparameters, features, chain choices) and only
        re-estimates parameters — faster, approximate, and labeled as such
        in the result.
    threads : int, optional
        Worker processes (default: MLCM_THREADS or 1). Never changes the
        numbers.
    point_result : PipelineResult, optional
        A finished run of ``config`` on ``ds``, to avoid repeating it.

    A failed replicate attempt is retried with the next derived seed and
    counted; more than 5% failed attempts abort with
    :class:`BootstrapError`.
    """
    if B < 2:
        raise ValueError(f"B must be >= 2, got {B}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if mode not in BOOTSTRAP_MODES:
        raise ValueError(
            f"unknown mode {mode!r}; expected one of {BOOTSTRAP_MODES}"
        )
    seed = config.seed if seed is None else int(seed)

    base_run = point_result
    if base_run is None:
        base_run = run_pipeline(ds, config)
    K = base_run.effects.n_horizons

    frozen = None
    if mode == "fixed_model":
        w = base_run.report.winner
        frozen = (
            w.kind,
            dict(w.params),
            tuple(base_run.report.winner_features),
            _frozen_chain_candidates(base_run.chain),
        )

    tasks = [(ds, config, frozen, K, b, seed) for b in range(B)]
    results = run_tasks(_ate_replicate, tasks, threads=threads)
    replicates = np.stack([r[0] for r in results])
    n_failures = int(sum(r[1] for r in results))
    if n_failures > 0.05 * B:
        raise BootstrapError(
            f"{n_failures} failed replicate attempts out of {B} replicates "
            f"(> 5%); the estimation recipe is unstable under resampling"
        )
    lower = np.array([
        empirical_quantile(replicates[:, k], alpha / 2) for k in range(K)
    ])
    upper = np.array([
        empirical_quantile(replicates[:, k], 1 - alpha / 2) for k in range(K)
    ])
    return BootstrapResult(
        estimand="ate",
        mode=mode,
        B=B,
        alpha=alpha,
        point=np.array(base_run.effects.ate),
        replicates=replicates,
        lower=lower,
        upper=upper,
        n_failures=n_failures,
        seed=seed,
    )


# --------------------------------------------------------------------------
# CATE bootstrap
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CateBootstrap:
    """Per-leaf intervals from within-node resampling of member effects.

    The tree is NOT regrown per replicate — replicates resample each
    terminal node's member effects and recompute the node mean, holding the
    discovered partition fixed (regrown trees would not be comparable).
    ``degenerate`` flags single-member leaves, whose interval has zero
    width by construction.
    """

    node_ids: tuple
    point: np.ndarray
    replicates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    B: int
    alpha: float
    degenerate: tuple
    seed: int

    def summary_dict(self) -> dict:
        return {
            "estimand": "cate",
            "B": self.B,
            "alpha": self.alpha,
            "nodes": [
                {
                    "node": int(nid),
                    "point": float(self.point[i]),
                    "lower": float(self.lower[i]),
                    "upper": float(self.upper[i]),
                    "degenerate": bool(self.degenerate[i]),
                }
                for i, nid in enumerate(self.node_ids)
            ],
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")

    def replicates_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["replicate"] + [f"node_{nid}" for nid in self.node_ids]
            )
            for b in range(self.B):
                writer.writerow(
                    [b] + [repr(float(v)) for v in self.replicates[b]]
                )


def bootstrap_cate(
    effects,
    tree: CateTree,
    B: int = 1000,
    *,
    seed: int = 0,
    alpha: float = 0.05,
) -> CateBootstrap:
    """Bootstrap each terminal node's mean effect within the node.

    ``effects`` must be the unit-level vector the tree was grown on (or
    agree with it in length). Replicates resample each leaf's members with
    replacement; intervals are percentile intervals of the resampled node
    means. Intervals are stamped onto the tree's leaves so later renderings
    show them.
    """
    if B < 2:
        raise ValueError(f"B must be >= 2, got {B}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    eff = np.asarray(effects, dtype=np.float64)
    if eff.shape != (tree.n_units,):
        raise ValueError(
            f"effects must match the tree's {tree.n_units} units, got "
            f"shape {eff.shape}"
        )
    leaves = tree.leaves()
    L = len(leaves)
    replicates = np.empty((B, L))
    point = np.empty(L)
    degenerate = []
    for li, leaf in enumerate(leaves):
        members = np.asarray(leaf.members, dtype=np.intp)
        vals = eff[members]
        point[li] = vals.mean()
        degenerate.append(members.size == 1)
        for b in range(B):
            rng = derive_rng(seed, TAG_CATE_BOOT, li, b)
            draw = rng.integers(0, members.size, members.size)
            replicates[b, li] = vals[draw].mean()
    lower = np.array([
        empirical_quantile(replicates[:, li], alpha / 2) for li in range(L)
    ])
    upper = np.array([
        empirical_quantile(replicates[:, li], 1 - alpha / 2) for li in range(L)
    ])
    for li, leaf in enumerate(leaves):
        leaf.interval = (float(lower[li]), float(upper[li]))
    return CateBootstrap(
        node_ids=tuple(leaf.node_id for leaf in leaves),
        point=point,
        replicates=replicates,
        lower=lower,
        upper=upper,
        B=B,
        alpha=alpha,
        degenerate=tuple(degenerate),
        seed=seed,
    )
