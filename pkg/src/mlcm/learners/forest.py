"""Random forest regressor on the shared CART kernel."""

import numpy as np

from . import _kernel as _k
from ._base import BaseLearner
from .tree import TreeEnsembleMixin, _alloc_packed, _node_capacity

__all__ = ["RandomForest"]


class RandomForest(TreeEnsembleMixin, BaseLearner):
    """Bagged CART trees with per-split feature subsampling.

    Each tree is grown on a bootstrap resample of the rows; at every split a
    random subset of ``mtry`` features is scanned. Predictions average the
    trees. Tree ``i`` draws its randomness from a stream derived from
    ``(seed, i)``, so fits are reproducible and independent of thread count.

    Parameters
    ----------
    n_trees : int
        Number of trees.
    mtry : int or None
        Candidate features per split; None means ``max(1, n_features // 3)``.
    min_node : int
        Minimum rows in each child of a split.
    max_depth : int or None
        Depth cap; None grows to the ``min_node`` limit.
    seed : int
        Master seed for the per-tree streams.
    bootstrap : bool
        Grow each tree on a bootstrap resample (default). With False every
        tree sees all rows, so a single-tree forest with ``mtry`` = all
        features reduces exactly to :class:`~mlcm.learners.RegressionTree`.

    Attributes
    ----------
    feature_importances_ : ndarray (n_features,)
        Squared-error reduction per feature, summed over all trees.
    mtry_ : int
        The per-split subset size actually used.
    """

    kind = "forest"
    _fitted_attr = "value_"

    def __init__(
        self,
        n_trees: int = 1000,
        mtry=None,
        min_node: int = 5,
        max_depth=None,
        seed: int = 0,
        bootstrap: bool = True,
    ):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node = min_node
        self.max_depth = max_depth
        self.seed = seed
        self.bootstrap = bootstrap

    def _fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_node < 1:
            raise ValueError(f"min_node must be >= 1, got {self.min_node}")
        n, d = X.shape
        mtry = max(1, d // 3) if self.mtry is None else int(self.mtry)
        if not 1 <= mtry <= d:
            raise ValueError(f"mtry must be in [1, {d}], got {mtry}")
        self.mtry_ = mtry
        XT = np.ascontiguousarray(X.T)
        rows = np.arange(n, dtype=np.int32)
        base_sorted = _k.presort_columns(XT, rows)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        cap = self.n_trees * _node_capacity(n, self.min_node, self.max_depth)
        arrays = _alloc_packed(cap, self.n_trees, d)
        n_nodes = _k.grow_forest(
            XT,
            y,
            rows,
            base_sorted,
            int(self.n_trees),
            int(self.min_node),
            depth,
            mtry,
            _k.tree_seeds(self.seed, self.n_trees),
            _k.SAMPLE_BOOTSTRAP if self.bootstrap else _k.SAMPLE_NONE,
            *arrays,
        )
        self._store(*arrays, n_nodes)

    def _predict(self, X):
        return self._predict_sum(X, np.zeros(X.shape[0]), 1.0 / self.n_trees)
