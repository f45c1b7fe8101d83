"""Balanced-panel containers, lagged design matrices, and CSV ingestion.

The package works on balanced panels: ``N`` units observed at the same ``T``
integer time points, with an intervention that splits the axis into pre
(positions ``1..t0``) and post (``t0+1..T``) periods. All estimation happens
on lagged design matrices built here; every feature column records which
period it reads so that leakage audits can re-derive it independently.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import DesignError, PanelFormatError

__all__ = [
    "LagSpec",
    "PanelDataset",
    "PanelSchema",
    "DesignMatrix",
    "load_panel_csv",
    "to_panel_csv",
    "build_design",
    "split_pre_post",
    "min_feasible_time",
    "take_units",
    "poison_after",
]

#: Sentinel magnitude used by :func:`poison_after` for leakage audits.
POISON_VALUE = 1.0e12


@dataclass(frozen=True)
class LagSpec:
    """Lag structure of the one-step-ahead forecasting model.

    Parameters
    ----------
    p : int
        Outcome-lag depth: lags ``Y_{t-1}, ..., Y_{t-1-p}`` enter the design
        (``p + 1`` outcome columns). Must be >= 0.
    q : int
        Covariate-lag depth: lags ``X_t, ..., X_{t-q}`` enter the design.
        Must be >= 0.
    contemporaneous : bool
        Whether the lag-0 covariate value ``X_t`` is included. Turn this off
        when same-period covariates cannot be assumed unaffected by the
        intervention; covariate lags are then ``X_{t-1}, ..., X_{t-q}``.
    """

    p: int = 0
    q: int = 0
    contemporaneous: bool = True

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 0:
            raise ValueError(f"p must be a non-negative integer, got {self.p!r}")
        if not isinstance(self.q, int) or self.q < 0:
            raise ValueError(f"q must be a non-negative integer, got {self.q!r}")

    @property
    def covariate_lags(self) -> Tuple[int, ...]:
        """Covariate lags actually included, ascending."""
        start = 0 if self.contemporaneous else 1
        return tuple(range(start, self.q + 1))

    @property
    def outcome_lags(self) -> Tuple[int, ...]:
        """Outcome lags included, ascending (always ``1..p+1``)."""
        return tuple(range(1, self.p + 2))


class PanelDataset:
    """Immutable balanced panel with a pre/post split.

    Parameters
    ----------
    outcome : np.ndarray of shape (N, T)
        Observed outcome per unit and period.
    t0 : int
        1-based position of the last pre-intervention period. Pipeline entry
        points require ``1 <= t0 < T``; period views produced by
        :func:`split_pre_post` may carry the degenerate values ``0`` (all
        post) or ``T`` (all pre).
    covariates : np.ndarray of shape (N, T, m), optional
        Time-varying covariates. ``m = 0`` (or ``None``) means a pure
        autoregressive panel.
    unit_ids : sequence of hashable, optional
        Unique unit labels; defaults to ``"u1".."uN"``.
    time_points : sequence of int, optional
        Strictly increasing integer labels; defaults to ``1..T``.
    covariate_names, covariate_kinds : sequences of str, optional
        Names and kinds (``"continuous"`` or ``"binary"``); kinds are
        inferred from the data when omitted.
    treated : np.ndarray of shape (N,) of bool, optional
        Exposure mask (True = exposed to the intervention). Defaults to all
        True; only consulted by treated/untreated decompositions.
    outcome_name : str
        Column label used for the outcome in designs and exports.

    Notes
    -----
    All arrays are stored as read-only float64; views derived from a dataset
    share its storage.
    """

    def __init__(
        self,
        outcome,
        t0: int,
        covariates=None,
        unit_ids: Optional[Sequence] = None,
        time_points: Optional[Sequence[int]] = None,
        covariate_names: Optional[Sequence[str]] = None,
        covariate_kinds: Optional[Sequence[str]] = None,
        treated=None,
        outcome_name: str = "y",
    ):
        outcome = np.asarray(outcome, dtype=np.float64)
        if outcome.ndim != 2:
            raise PanelFormatError(
                f"outcome must have shape (N, T), got ndim={outcome.ndim}"
            )
        n_units, n_periods = outcome.shape
        if n_units == 0 or n_periods == 0:
            raise PanelFormatError("panel must contain at least one unit and period")
        if not np.all(np.isfinite(outcome)):
            i, t = np.argwhere(~np.isfinite(outcome))[0]
            raise PanelFormatError(
                f"outcome contains a non-finite value for unit index {i}, "
                f"period position {t + 1}"
            )

        if covariates is None:
            covariates = np.zeros((n_units, n_periods, 0), dtype=np.float64)
        covariates = np.asarray(covariates, dtype=np.float64)
        if covariates.ndim != 3 or covariates.shape[:2] != (n_units, n_periods):
            raise PanelFormatError(
                "covariates must have shape (N, T, m) matching the outcome, "
                f"got {covariates.shape}"
            )
        if covariates.size and not np.all(np.isfinite(covariates)):
            i, t, j = np.argwhere(~np.isfinite(covariates))[0]
            raise PanelFormatError(
                f"covariate column {j} contains a non-finite value for unit "
                f"index {i}, period position {t + 1}"
            )
        m = covariates.shape[2]

        if not isinstance(t0, (int, np.integer)) or isinstance(t0, bool):
            raise PanelFormatError(f"t0 must be an integer position, got {t0!r}")
        if not 0 <= t0 <= n_periods:
            raise PanelFormatError(
                f"t0 position {t0} outside the valid range 0..{n_periods}"
            )

        if unit_ids is None:
            unit_ids = tuple(f"u{i + 1}" for i in range(n_units))
        else:
            unit_ids = tuple(unit_ids)
            if len(unit_ids) != n_units:
                raise PanelFormatError(
                    f"{len(unit_ids)} unit ids for {n_units} outcome rows"
                )
            if len(set(unit_ids)) != n_units:
                raise PanelFormatError("unit ids must be unique")

        if time_points is None:
            time_points = np.arange(1, n_periods + 1, dtype=np.int64)
        else:
            time_points = np.asarray(time_points, dtype=np.int64)
            if time_points.shape != (n_periods,):
                raise PanelFormatError(
                    f"{time_points.shape[0]} time points for {n_periods} columns"
                )
            if np.any(np.diff(time_points) <= 0):
                raise PanelFormatError("time points must be strictly increasing")

        if covariate_names is None:
            covariate_names = tuple(f"x{j + 1}" for j in range(m))
        else:
            covariate_names = tuple(str(c) for c in covariate_names)
            if len(covariate_names) != m:
                raise PanelFormatError(
                    f"{len(covariate_names)} covariate names for {m} columns"
                )
            if len(set(covariate_names)) != m:
                raise PanelFormatError("covariate names must be unique")

        if covariate_kinds is None:
            covariate_kinds = tuple(
                "binary"
                if covariates.size
                and np.all((covariates[:, :, j] == 0) | (covariates[:, :, j] == 1))
                else "continuous"
                for j in range(m)
            )
        else:
            covariate_kinds = tuple(covariate_kinds)
            if len(covariate_kinds) != m:
                raise PanelFormatError(
                    f"{len(covariate_kinds)} covariate kinds for {m} columns"
                )
            bad = [k for k in covariate_kinds if k not in ("continuous", "binary")]
            if bad:
                raise PanelFormatError(f"unknown covariate kinds: {bad}")

        if treated is None:
            treated = np.ones(n_units, dtype=bool)
        else:
            treated = np.asarray(treated, dtype=bool)
            if treated.shape != (n_units,):
                raise PanelFormatError(
                    f"treated mask must have shape ({n_units},), got {treated.shape}"
                )

        for arr in (outcome, covariates, time_points, treated):
            arr.setflags(write=False)

        self.outcome = outcome
        self.covariates = covariates
        self.t0 = int(t0)
        self.unit_ids = unit_ids
        self.time_points = time_points
        self.covariate_names = covariate_names
        self.covariate_kinds = covariate_kinds
        self.treated = treated
        self.outcome_name = str(outcome_name)

    # -- basic geometry ----------------------------------------------------

    @property
    def n_units(self) -> int:
        return self.outcome.shape[0]

    @property
    def n_periods(self) -> int:
        return self.outcome.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[2]

    @property
    def n_post(self) -> int:
        """Number of post-intervention periods."""
        return self.n_periods - self.t0

    @property
    def has_split(self) -> bool:
        """True when the dataset has at least one pre and one post period."""
        return 1 <= self.t0 < self.n_periods

    def require_split(self, context: str = "this operation") -> None:
        """Raise unless ``1 <= t0 < T``."""
        if not self.has_split:
            raise PanelFormatError(
                f"{context} needs both pre- and post-intervention periods; "
                f"t0={self.t0} with T={self.n_periods}"
            )

    def position_of(self, time_value: int) -> int:
        """1-based position of a time label."""
        idx = np.searchsorted(self.time_points, time_value)
        if idx >= self.n_periods or self.time_points[idx] != time_value:
            raise PanelFormatError(
                f"time point {time_value!r} not observed in this panel"
            )
        return int(idx) + 1

    def with_t0(self, t0: int) -> "PanelDataset":
        """Same data with a different intervention position (shared storage)."""
        return PanelDataset(
            self.outcome,
            t0,
            covariates=self.covariates,
            unit_ids=self.unit_ids,
            time_points=self.time_points,
            covariate_names=self.covariate_names,
            covariate_kinds=self.covariate_kinds,
            treated=self.treated,
            outcome_name=self.outcome_name,
        )

    def __repr__(self) -> str:
        return (
            f"PanelDataset(N={self.n_units}, T={self.n_periods}, "
            f"m={self.n_covariates}, t0={self.t0})"
        )


# -- schema + CSV ingestion ---------------------------------------------------


@dataclass
class PanelSchema:
    """Column roles for :func:`load_panel_csv`.

    Parameters
    ----------
    t0 : int
        Time label (not position) of the last pre-intervention period.
    unit_col, time_col, outcome_col : str
        Column names for the unit id, integer time point, and outcome.
    covariate_cols : sequence of str, optional
        Covariate columns, in the order they should appear. Defaults to every
        remaining column.
    categorical_cols : sequence of str
        Columns to one-hot encode as ``<col>__<level>`` binary indicators
        (levels sorted lexicographically). Non-numeric values anywhere else
        are an error.
    treated_col : str, optional
        Time-invariant 0/1 column marking exposed units; excluded from the
        covariates.
    drop_incomplete_units : bool
        Drop units with missing periods instead of failing. Never imputes.
    """

    t0: int = 0
    unit_col: str = "unit"
    time_col: str = "time"
    outcome_col: str = "outcome"
    covariate_cols: Optional[Sequence[str]] = None
    categorical_cols: Sequence[str] = field(default_factory=tuple)
    treated_col: Optional[str] = None
    drop_incomplete_units: bool = False


def _format_level(value) -> str:
    """Stable text form of a categorical level (\"3\" rather than \"3.0\")."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def load_panel_csv(path, schema: PanelSchema) -> PanelDataset:
    """Load a long-format CSV (one row per unit-period) into a panel.

    The file must describe a balanced panel: every unit observed at every
    time point, no duplicates. Gaps are a hard error unless
    ``schema.drop_incomplete_units`` is set, in which case incomplete units
    are dropped with a warning; values are never imputed.

    Parameters
    ----------
    path : str or Path
        CSV location.
    schema : PanelSchema
        Column roles and the intervention time label.

    Returns
    -------
    PanelDataset

    Raises
    ------
    PanelFormatError
        Missing columns, duplicate or missing (unit, time) pairs,
        non-integer time points, non-numeric cells outside declared
        categorical columns, or a t0 label without both pre and post periods.
    """
    # round_trip parsing so exported panels reload to the exact same floats
    df = pd.read_csv(path, float_precision="round_trip")
    for col in (schema.unit_col, schema.time_col, schema.outcome_col):
        if col not in df.columns:
            raise PanelFormatError(f"required column {col!r} not found in {path}")

    if schema.covariate_cols is None:
        reserved = {schema.unit_col, schema.time_col, schema.outcome_col}
        if schema.treated_col:
            reserved.add(schema.treated_col)
        covariate_cols = [c for c in df.columns if c not in reserved]
    else:
        covariate_cols = list(schema.covariate_cols)
        missing = [c for c in covariate_cols if c not in df.columns]
        if missing:
            raise PanelFormatError(f"covariate columns not found: {missing}")

    categorical = set(schema.categorical_cols)
    unknown_cat = categorical - set(covariate_cols)
    if unknown_cat:
        raise PanelFormatError(
            f"categorical columns not among the covariates: {sorted(unknown_cat)}"
        )

    units_raw = df[schema.unit_col].astype(str)
    times_raw = pd.to_numeric(df[schema.time_col], errors="coerce")
    if times_raw.isna().any():
        row = int(times_raw.isna().idxmax())
        raise PanelFormatError(
            f"non-numeric time point {df[schema.time_col].iloc[row]!r} at row {row}"
        )
    if not np.all(np.mod(times_raw.to_numpy(dtype=float), 1) == 0):
        bad = times_raw[np.mod(times_raw.to_numpy(dtype=float), 1) != 0].iloc[0]
        raise PanelFormatError(f"time points must be integers, got {bad!r}")
    times = times_raw.astype(np.int64)

    dup = df.duplicated([schema.unit_col, schema.time_col], keep="first")
    if dup.any():
        pairs = list(
            zip(units_raw[dup].head(5).tolist(), times[dup].head(5).tolist())
        )
        raise PanelFormatError(f"duplicate (unit, time) rows, e.g. {pairs}")

    unit_labels = np.array(sorted(units_raw.unique()))
    time_values = np.array(sorted(times.unique()), dtype=np.int64)
    n_units, n_periods = len(unit_labels), len(time_values)

    unit_pos = {u: i for i, u in enumerate(unit_labels)}
    time_pos = {t: k for k, t in enumerate(time_values)}
    row_i = units_raw.map(unit_pos).to_numpy()
    row_k = times.map(time_pos).to_numpy()

    seen = np.zeros((n_units, n_periods), dtype=bool)
    seen[row_i, row_k] = True
    if not seen.all():
        incomplete = ~seen.all(axis=1)
        if schema.drop_incomplete_units:
            if incomplete.all():
                raise PanelFormatError(
                    "every unit has missing periods; nothing left to keep"
                )
            warnings.warn(
                f"dropping {int(incomplete.sum())} unit(s) with missing periods",
                stacklevel=2,
            )
        else:
            miss = np.argwhere(~seen)[:5]
            pairs = [(unit_labels[i], int(time_values[k])) for i, k in miss]
            raise PanelFormatError(
                "panel is unbalanced; missing (unit, time) pairs include "
                f"{pairs}. Set drop_incomplete_units to drop such units "
                "(values are never imputed)."
            )
    else:
        incomplete = np.zeros(n_units, dtype=bool)

    # Expand categorical columns into sorted one-hot indicators.
    expanded_cols: list = []  # (name, kind, values (n_rows,))
    for col in covariate_cols:
        series = df[col]
        if col in categorical:
            levels = sorted({_format_level(v) for v in series.tolist()})
            as_text = series.map(_format_level)
            for lvl in levels:
                expanded_cols.append(
                    (f"{col}__{lvl}", "binary", (as_text == lvl).to_numpy(float))
                )
        else:
            numeric = pd.to_numeric(series, errors="coerce")
            if numeric.isna().to_numpy().any() and not series.isna().to_numpy().any():
                row = int(numeric.isna().idxmax())
                raise PanelFormatError(
                    f"column {col!r} has non-numeric value {series.iloc[row]!r} "
                    f"at row {row}; declare it categorical to one-hot encode"
                )
            if numeric.isna().to_numpy().any():
                row = int(numeric.isna().idxmax())
                raise PanelFormatError(f"column {col!r} has a missing value at row {row}")
            vals = numeric.to_numpy(dtype=np.float64)
            kind = "binary" if np.all((vals == 0) | (vals == 1)) else "continuous"
            expanded_cols.append((col, kind, vals))

    outcome_vals = pd.to_numeric(df[schema.outcome_col], errors="coerce")
    if outcome_vals.isna().to_numpy().any():
        row = int(outcome_vals.isna().idxmax())
        raise PanelFormatError(
            f"outcome column has a missing/non-numeric value at row {row}"
        )

    outcome = np.full((n_units, n_periods), np.nan)
    outcome[row_i, row_k] = outcome_vals.to_numpy(dtype=np.float64)
    m = len(expanded_cols)
    covariates = np.full((n_units, n_periods, m), np.nan)
    names, kinds = [], []
    for j, (name, kind, vals) in enumerate(expanded_cols):
        covariates[row_i, row_k, j] = vals
        names.append(name)
        kinds.append(kind)

    treated = None
    if schema.treated_col is not None:
        if schema.treated_col not in df.columns:
            raise PanelFormatError(f"treated column {schema.treated_col!r} not found")
        tvals = pd.to_numeric(df[schema.treated_col], errors="coerce")
        if tvals.isna().to_numpy().any() or not np.isin(tvals.dropna(), [0, 1]).all():
            raise PanelFormatError(
                f"treated column {schema.treated_col!r} must be 0/1"
            )
        tmat = np.full((n_units, n_periods), np.nan)
        tmat[row_i, row_k] = tvals.to_numpy(dtype=float)
        per_unit = np.nanmax(tmat, axis=1)
        if np.any(np.nanmin(tmat, axis=1) != per_unit):
            bad = unit_labels[np.nanmin(tmat, axis=1) != per_unit][0]
            raise PanelFormatError(
                f"treated column must be constant within unit; unit {bad!r} varies"
            )
        treated = per_unit == 1

    if incomplete.any():
        keep = ~incomplete
        unit_labels = unit_labels[keep]
        outcome = outcome[keep]
        covariates = covariates[keep]
        treated = treated[keep] if treated is not None else None

    if schema.t0 not in time_pos:
        raise PanelFormatError(
            f"t0 label {schema.t0!r} is not an observed time point "
            f"(observed: {time_values[0]}..{time_values[-1]})"
        )
    t0_position = time_pos[schema.t0] + 1
    if t0_position >= n_periods:
        raise PanelFormatError(
            f"t0 label {schema.t0!r} is the final period; at least one "
            "post-intervention period is required"
        )

    return PanelDataset(
        outcome,
        t0_position,
        covariates=covariates,
        unit_ids=unit_labels.tolist(),
        time_points=time_values,
        covariate_names=names,
        covariate_kinds=kinds,
        treated=treated,
        outcome_name=schema.outcome_col,
    )


def to_panel_csv(ds: PanelDataset, path) -> None:
    """Write a panel back to long CSV with full float precision.

    Numeric cells are written with ``repr`` so a reload reproduces every
    value exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["unit", "time", ds.outcome_name, *ds.covariate_names]
        )
        for i, uid in enumerate(ds.unit_ids):
            for k in range(ds.n_periods):
                row = [uid, int(ds.time_points[k]), repr(float(ds.outcome[i, k]))]
                row.extend(repr(float(v)) for v in ds.covariates[i, k])
                writer.writerow(row)


# -- design matrices ----------------------------------------------------------


@dataclass(frozen=True)
class DesignMatrix:
    """One-step-ahead design: target ``Y_t``, lagged feature columns.

    Rows are ordered time-major (period position ascending, units ascending
    within a period), so expanding-window folds are contiguous blocks.

    Attributes
    ----------
    X : np.ndarray of shape (n_rows, d)
    y : np.ndarray of shape (n_rows,)
    columns : tuple of str
        Feature names, e.g. ``y_lag1``, ``gdp_lag0``.
    col_reads : tuple of (str, int, int)
        Per column: variable kind (``"y"`` or ``"x"``), covariate index
        (-1 for the outcome), and lag. Row at time ``t`` reads period
        ``t - lag``; audits rely on this.
    row_units, row_times : np.ndarray
        Unit index and 1-based period position per row.
    """

    X: np.ndarray
    y: np.ndarray
    columns: Tuple[str, ...]
    col_reads: Tuple[Tuple[str, int, int], ...]
    row_units: np.ndarray
    row_times: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def rows_in(self, t_lo: int, t_hi: int) -> "DesignMatrix":
        """Sub-design with rows whose period position lies in [t_lo, t_hi]."""
        mask = (self.row_times >= t_lo) & (self.row_times <= t_hi)
        return DesignMatrix(
            self.X[mask],
            self.y[mask],
            self.columns,
            self.col_reads,
            self.row_units[mask],
            self.row_times[mask],
        )

    def select_columns(self, names: Sequence[str]) -> "DesignMatrix":
        """Sub-design keeping the named columns (in the given order)."""
        pos = {c: j for j, c in enumerate(self.columns)}
        missing = [c for c in names if c not in pos]
        if missing:
            raise KeyError(f"unknown design columns: {missing}")
        idx = [pos[c] for c in names]
        return DesignMatrix(
            np.ascontiguousarray(self.X[:, idx]),
            self.y,
            tuple(names),
            tuple(self.col_reads[j] for j in idx),
            self.row_units,
            self.row_times,
        )


def min_feasible_time(ds: PanelDataset, lags: LagSpec) -> int:
    """Earliest period position that can serve as a design row's target.

    A row at position ``t`` reads outcome lags back to ``t - 1 - p`` and
    covariate lags back to ``t - q``; both must reach at least position 1.
    """
    t_min = lags.p + 2
    if ds.n_covariates > 0 and lags.covariate_lags:
        t_min = max(t_min, max(lags.covariate_lags) + 1)
    return t_min


def design_columns(ds: PanelDataset, lags: LagSpec):
    """Deterministic column layout: outcome lags, then covariates x lags."""
    names = [f"{ds.outcome_name}_lag{L}" for L in lags.outcome_lags]
    reads = [("y", -1, L) for L in lags.outcome_lags]
    for j, cov in enumerate(ds.covariate_names):
        for L in lags.covariate_lags:
            names.append(f"{cov}_lag{L}")
            reads.append(("x", j, L))
    return tuple(names), tuple(reads)


def build_design(
    ds: PanelDataset,
    lags: LagSpec,
    t_lo: Optional[int] = None,
    t_hi: Optional[int] = None,
) -> DesignMatrix:
    """Pool lagged rows across units into a supervised design.

    Parameters
    ----------
    ds : PanelDataset
    lags : LagSpec
    t_lo, t_hi : int, optional
        Inclusive 1-based period positions of the target rows. Defaults to
        the full feasible range ``[min_feasible_time, T]``.

    Returns
    -------
    DesignMatrix

    Raises
    ------
    DesignError
        When the window is empty or reaches before the first observed period.
    """
    t_min = min_feasible_time(ds, lags)
    if t_lo is None:
        t_lo = t_min
    if t_hi is None:
        t_hi = ds.n_periods
    if t_lo < t_min:
        raise DesignError(
            f"rows at position {t_lo} would read before period 1 with lags "
            f"p={lags.p}, q={lags.q}; earliest feasible target is {t_min}"
        )
    if t_hi > ds.n_periods:
        raise DesignError(
            f"t_hi={t_hi} beyond the last observed period {ds.n_periods}"
        )
    if t_lo > t_hi:
        raise DesignError(f"empty design window [{t_lo}, {t_hi}]")

    ts = np.arange(t_lo, t_hi + 1)
    n_t, n = len(ts), ds.n_units
    names, reads = design_columns(ds, lags)

    cols = np.empty((len(names), n_t * n), dtype=np.float64)
    for c, (kind, j, L) in enumerate(reads):
        if kind == "y":
            block = ds.outcome[:, ts - 1 - L]  # (N, n_t)
        else:
            block = ds.covariates[:, ts - 1 - L, j]
        cols[c] = block.T.ravel()  # time-major

    X = np.ascontiguousarray(cols.T)
    y = ds.outcome[:, ts - 1].T.ravel().copy()
    row_units = np.tile(np.arange(n, dtype=np.int64), n_t)
    row_times = np.repeat(ts.astype(np.int64), n)
    return DesignMatrix(X, y, names, reads, row_units, row_times)


def split_pre_post(ds: PanelDataset) -> Tuple[PanelDataset, PanelDataset]:
    """Views of the pre (positions ``1..t0``) and post (``t0+1..T``) periods.

    Both views share the parent's read-only storage. The pre view carries
    ``t0 = its T`` ("all pre"); the post view carries ``t0 = 0``.
    """
    ds.require_split("split_pre_post")
    t0 = ds.t0
    pre = PanelDataset(
        ds.outcome[:, :t0],
        t0,
        covariates=ds.covariates[:, :t0],
        unit_ids=ds.unit_ids,
        time_points=ds.time_points[:t0],
        covariate_names=ds.covariate_names,
        covariate_kinds=ds.covariate_kinds,
        treated=ds.treated,
        outcome_name=ds.outcome_name,
    )
    post = PanelDataset(
        ds.outcome[:, t0:],
        0,
        covariates=ds.covariates[:, t0:],
        unit_ids=ds.unit_ids,
        time_points=ds.time_points[t0:],
        covariate_names=ds.covariate_names,
        covariate_kinds=ds.covariate_kinds,
        treated=ds.treated,
        outcome_name=ds.outcome_name,
    )
    return pre, post


def take_units(ds: PanelDataset, indices) -> PanelDataset:
    """Dataset containing the units at ``indices`` (repeats allowed).

    Whole time paths are kept intact — this is the resampling primitive for
    the unit block bootstrap. Repeated units get suffixed labels
    (``label#2``, ``label#3``, ...) so ids stay unique.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or indices.size == 0:
        raise PanelFormatError("indices must be a non-empty 1-D integer array")
    if indices.min() < 0 or indices.max() >= ds.n_units:
        raise PanelFormatError(
            f"unit index out of range 0..{ds.n_units - 1}"
        )
    counts: dict = {}
    labels = []
    for i in indices:
        uid = ds.unit_ids[int(i)]
        counts[uid] = counts.get(uid, 0) + 1
        labels.append(uid if counts[uid] == 1 else f"{uid}#{counts[uid]}")
    return PanelDataset(
        ds.outcome[indices],
        ds.t0,
        covariates=ds.covariates[indices],
        unit_ids=labels,
        time_points=ds.time_points,
        covariate_names=ds.covariate_names,
        covariate_kinds=ds.covariate_kinds,
        treated=ds.treated[indices],
        outcome_name=ds.outcome_name,
    )


def poison_after(
    ds: PanelDataset,
    t_outcome_after: int,
    t_covariates_after: Optional[int] = None,
    value: float = POISON_VALUE,
) -> PanelDataset:
    """Copy of the panel with all data after given positions overwritten.

    Used by leakage audits: rebuild a design from the poisoned copy and
    compare — any feature or target that reads a poisoned period changes by
    an enormous amount, so byte-identical results prove the original never
    touched those periods.

    Parameters
    ----------
    ds : PanelDataset
    t_outcome_after : int
        Outcome values at positions > this are replaced.
    t_covariates_after : int, optional
        Same for covariates; defaults to ``t_outcome_after``.
    value : float
        Sentinel written into the poisoned cells.
    """
    if t_covariates_after is None:
        t_covariates_after = t_outcome_after
    outcome = ds.outcome.copy()
    covariates = ds.covariates.copy()
    outcome[:, t_outcome_after:] = value
    if covariates.size:
        covariates[:, t_covariates_after:, :] = value
    return PanelDataset(
        outcome,
        ds.t0,
        covariates=covariates,
        unit_ids=ds.unit_ids,
        time_points=ds.time_points,
        covariate_names=ds.covariate_names,
        covariate_kinds=ds.covariate_kinds,
        treated=ds.treated,
        outcome_name=ds.outcome_name,
    )
