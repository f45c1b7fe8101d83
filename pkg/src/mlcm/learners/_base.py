"""Shared estimator behaviour for the competing learners.

Learners follow the familiar estimator protocol: hyperparameters are
``__init__`` keyword arguments mirrored as attributes, ``fit(X, y)`` returns
``self`` and stores everything it learned in trailing-underscore attributes,
and ``get_params`` / ``set_params`` / ``clone`` make models re-buildable from
their configuration alone.
"""

import inspect

import numpy as np

from .._validation import (
    check_array,
    check_feature_names,
    check_is_fitted,
    check_vector,
)

__all__ = ["BaseLearner", "clone"]


def clone(estimator):
    """Unfitted copy of ``estimator`` with identical hyperparameters."""
    return type(estimator)(**estimator.get_params())


class BaseLearner:
    """Base class: parameter introspection plus the fit/predict contract.

    Subclasses implement ``_fit(X, y)`` and ``_predict(X)`` on validated
    float64 arrays and declare ``_fitted_attr``, the attribute whose presence
    marks the model as fitted.
    """

    #: short registry name, set by subclasses (e.g. ``"lasso"``)
    kind = ""
    _fitted_attr = ""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self) -> dict:
        """Hyperparameters as a name -> value dict (init signature order)."""
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseLearner":
        """Update hyperparameters in place; unknown names raise ValueError."""
        valid = self._param_names()
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"unknown parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {valid}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def fit(self, X, y, feature_names=None) -> "BaseLearner":
        """Fit the learner on rows ``X`` against targets ``y``.

        Parameters
        ----------
        X : array-like (n_rows, n_features)
        y : array-like (n_rows,)
        feature_names : sequence of str, optional
            Stored when given; later ``predict`` calls that also pass names
            are checked against them.

        Returns
        -------
        self
        """
        X = check_array(X, "X")
        y = check_vector(y, X.shape[0], "y")
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty design matrix")
        self.n_features_in_ = X.shape[1]
        if feature_names is not None:
            names = tuple(str(n) for n in feature_names)
            if len(names) != X.shape[1]:
                raise ValueError(
                    f"feature_names has {len(names)} entries for "
                    f"{X.shape[1]} columns"
                )
            self.feature_names_in_ = names
        else:
            self.feature_names_in_ = None
        self._fit(X, y)
        return self

    def predict(self, X, feature_names=None) -> np.ndarray:
        """Predict targets for rows ``X`` (must match the fitted columns)."""
        check_is_fitted(self, self._fitted_attr)
        X = check_array(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features; {type(self).__name__} was "
                f"fitted with {self.n_features_in_}"
            )
        if feature_names is not None and self.feature_names_in_ is not None:
            check_feature_names(
                self.feature_names_in_, tuple(feature_names), X.shape[1]
            )
        return self._predict(X)

    # subclass hooks -------------------------------------------------------
    def _fit(self, X, y):
        raise NotImplementedError

    def _predict(self, X):
        raise NotImplementedError
