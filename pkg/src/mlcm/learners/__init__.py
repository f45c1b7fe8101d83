"""Competing supervised learners and their registry.

``LEARNER_KINDS`` maps short names to classes; ``LEARNER_ORDER`` is the
deterministic precedence used to break exact ties in model selection
(parsimony order: penalized linear, latent linear, boosting, forest).
"""

import numpy as np

from ._base import BaseLearner, clone
from .boosting import GradientBoosting
from .forest import RandomForest
from .linear import Lasso, PartialLeastSquares
from .tree import RegressionTree

__all__ = [
    "BaseLearner",
    "clone",
    "Lasso",
    "PartialLeastSquares",
    "GradientBoosting",
    "RandomForest",
    "RegressionTree",
    "LEARNER_KINDS",
    "LEARNER_ORDER",
    "make_learner",
    "variable_importance",
    "model_to_dict",
    "model_from_dict",
]

LEARNER_KINDS = {
    "lasso": Lasso,
    "pls": PartialLeastSquares,
    "gbm": GradientBoosting,
    "forest": RandomForest,
    "tree": RegressionTree,
}

LEARNER_ORDER = ("lasso", "pls", "gbm", "forest", "tree")


def make_learner(kind: str, **params) -> BaseLearner:
    """Instantiate a learner by registry name with the given hyperparameters."""
    if kind not in LEARNER_KINDS:
        raise ValueError(
            f"unknown learner kind {kind!r}; known kinds: "
            f"{sorted(LEARNER_KINDS)}"
        )
    return LEARNER_KINDS[kind](**params)


_MODEL_FORMAT = 1

_LINEAR_FIELDS = ("coef_", "intercept_", "x_mean_", "x_scale_")
_TREE_FIELDS = (
    "feature_",
    "threshold_",
    "left_",
    "right_",
    "value_",
    "offsets_",
    "feature_importances_",
)


def model_to_dict(estimator) -> dict:
    """Fitted model as a JSON-compatible dict (audit format, version-tagged).

    Round-trips through :func:`model_from_dict`. The format is for
    inspection and reproducibility records, not a stability guarantee.
    """
    from .._validation import check_is_fitted

    check_is_fitted(estimator, estimator._fitted_attr)
    doc = {
        "format": _MODEL_FORMAT,
        "kind": estimator.kind,
        "params": estimator.get_params(),
        "n_features_in": estimator.n_features_in_,
        "feature_names": (
            list(estimator.feature_names_in_)
            if estimator.feature_names_in_ is not None
            else None
        ),
        "fitted": {},
    }
    fields = _LINEAR_FIELDS if estimator.kind in ("lasso", "pls") else _TREE_FIELDS
    for field in fields:
        val = getattr(estimator, field)
        doc["fitted"][field] = val.tolist() if isinstance(val, np.ndarray) else val
    for extra in ("n_sweeps_", "effective_components_", "base_", "mtry_"):
        if hasattr(estimator, extra):
            doc["fitted"][extra] = getattr(estimator, extra)
    return doc


_FITTED_DTYPES = {
    "coef_": np.float64,
    "x_mean_": np.float64,
    "x_scale_": np.float64,
    "feature_": np.int32,
    "threshold_": np.float64,
    "left_": np.int32,
    "right_": np.int32,
    "value_": np.float64,
    "offsets_": np.int64,
    "feature_importances_": np.float64,
}


def model_from_dict(doc: dict):
    """Rebuild a fitted model from :func:`model_to_dict` output."""
    if doc.get("format") != _MODEL_FORMAT:
        raise ValueError(
            f"unsupported model document format {doc.get('format')!r}"
        )
    est = make_learner(doc["kind"], **doc["params"])
    est.n_features_in_ = int(doc["n_features_in"])
    names = doc.get("feature_names")
    est.feature_names_in_ = tuple(names) if names is not None else None
    for field, val in doc["fitted"].items():
        if field in _FITTED_DTYPES:
            val = np.asarray(val, dtype=_FITTED_DTYPES[field])
        setattr(est, field, val)
    return est


def variable_importance(estimator) -> list:
    """Feature importances of a fitted tree-based learner, largest first.

    Returns ``[(name, importance), ...]`` sorted by decreasing importance;
    exact ties keep column order. Names fall back to ``x0, x1, ...`` when the
    model was fitted without feature names.
    """
    imp = getattr(estimator, "feature_importances_", None)
    if imp is None:
        raise TypeError(
            f"{type(estimator).__name__} does not expose feature importances"
        )
    names = estimator.feature_names_in_
    if names is None:
        names = tuple(f"x{i}" for i in range(len(imp)))
    order = np.argsort(-np.asarray(imp), kind="stable")
    return [(names[i], float(imp[i])) for i in order]
