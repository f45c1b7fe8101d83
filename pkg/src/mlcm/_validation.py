"""Input-validation helpers shared by estimators and pipeline stages."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .exceptions import NotFittedError


def check_array(X, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a 2-D, C-contiguous float64 array with finite entries.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
        Input matrix.
    name : str
        Label used in error messages.

    Returns
    -------
    np.ndarray
        Validated array (a copy only when coercion requires one).
    """
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} has no rows")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(
            f"{name} contains a non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return arr


def check_vector(y, n_rows: Optional[int] = None, name: str = "y") -> np.ndarray:
    """Coerce ``y`` to a 1-D float64 array, optionally checking its length."""
    arr = np.ascontiguousarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(
            f"{name} has length {arr.shape[0]}, expected {n_rows} to match X"
        )
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise ValueError(f"{name} contains a non-finite value at position {bad}")
    return arr


def check_is_fitted(estimator, attribute: str) -> None:
    """Raise ``NotFittedError`` unless ``estimator`` carries ``attribute``."""
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() before "
            "using this method"
        )


def check_feature_names(
    fitted_names: Optional[Sequence[str]],
    given_names: Optional[Sequence[str]],
    n_given: int,
) -> None:
    """Verify that prediction-time columns line up with the fitted ones.

    Both name lists are optional; the check only fires when the estimator was
    fitted with names and the caller supplies names too. A bare count check
    always applies.
    """
    if fitted_names is not None and len(fitted_names) != n_given:
        raise ValueError(
            f"X has {n_given} columns but the model was fitted with "
            f"{len(fitted_names)}"
        )
    if fitted_names is None or given_names is None:
        return
    if list(fitted_names) != list(given_names):
        fitted_set = set(fitted_names)
        given_set = set(given_names)
        missing = [c for c in fitted_names if c not in given_set]
        extra = [c for c in given_names if c not in fitted_set]
        detail = []
        if missing:
            detail.append(f"missing: {missing}")
        if extra:
            detail.append(f"unexpected: {extra}")
        if not detail:  # same set, different order
            detail.append("columns are ordered differently")
        raise ValueError(
            "feature names at predict time do not match fit time ("
            + "; ".join(detail)
            + ")"
        )


def check_random_seed(seed) -> int:
    """Validate an integer seed (numpy Generators are derived from it)."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return int(seed)
