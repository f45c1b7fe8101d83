"""Stochastic gradient boosting (squared loss) on the shared CART kernel."""

import numpy as np

from . import _kernel as _k
from ._base import BaseLearner
from .tree import TreeEnsembleMixin, _alloc_packed, _node_capacity

__all__ = ["GradientBoosting"]


class GradientBoosting(TreeEnsembleMixin, BaseLearner):
    """Additive stagewise trees fit to residuals, shrunk by a learning rate.

    The model starts from the training mean; each stage fits one shallow
    tree to the current residuals on a fresh without-replacement subsample
    of the rows, then adds ``learning_rate`` times its prediction. Stage ``i``
    draws its subsample from a stream derived from ``(seed, i)``.

    Parameters
    ----------
    n_trees : int
        Number of boosting stages.
    max_depth : int
        Depth of each stage's tree (interaction depth).
    min_node : int
        Minimum rows in each child of a split.
    learning_rate : float
        Shrinkage applied to every stage.
    subsample : float
        Fraction of rows drawn (without replacement) for each stage.
    seed : int
        Master seed for the per-stage streams.

    Attributes
    ----------
    base_ : float
        The initial prediction (training mean).
    feature_importances_ : ndarray (n_features,)
        Squared-error reduction per feature, summed over all stages.
    """

    kind = "gbm"
    _fitted_attr = "value_"

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int = 2,
        min_node: int = 10,
        learning_rate: float = 0.1,
        subsample: float = 0.5,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_node = min_node
        self.learning_rate = learning_rate
        self.subsample = subsample
        self.seed = seed

    def _fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError(
                f"subsample must be in (0, 1], got {self.subsample}"
            )
        if self.learning_rate < 0.0:
            # zero is allowed: stages contribute nothing and the model
            # predicts the training mean
            raise ValueError(
                f"learning_rate must be >= 0, got {self.learning_rate}"
            )
        n, d = X.shape
        XT = np.ascontiguousarray(X.T)
        rows = np.arange(n, dtype=np.int32)
        base_sorted = _k.presort_columns(XT, rows)
        k = max(1, int(round(self.subsample * n)))
        cap = self.n_trees * _node_capacity(k, self.min_node, self.max_depth)
        arrays = _alloc_packed(cap, self.n_trees, d)
        n_nodes, base = _k.grow_gbm(
            XT,
            y,
            rows,
            base_sorted,
            int(self.n_trees),
            int(self.min_node),
            int(self.max_depth),
            float(self.learning_rate),
            k,
            _k.tree_seeds(self.seed, self.n_trees),
            *arrays,
        )
        self.base_ = float(base)
        self._store(*arrays, n_nodes)

    def _predict(self, X):
        out = np.full(X.shape[0], self.base_)
        return self._predict_sum(X, out, self.learning_rate)
