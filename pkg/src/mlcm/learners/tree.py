"""Single CART regression tree (exhaustive variance-reduction splits)."""

import numpy as np

from . import _kernel as _k
from ._base import BaseLearner

__all__ = ["RegressionTree"]


def _node_capacity(n_rows: int, min_node: int, max_depth) -> int:
    """Upper bound on nodes for one tree (used to size packed arrays)."""
    leaves = max(1, n_rows // max(1, min_node))
    if max_depth is not None and max_depth >= 0:
        leaves = min(leaves, 2**max_depth)
    return 2 * leaves + 3


class TreeEnsembleMixin:
    """Packed-array storage and prediction shared by the tree learners.

    Fitted trees live in flat parallel arrays (``feature_``, ``threshold_``,
    ``left_``, ``right_``, ``value_``) with ``offsets_`` marking tree starts,
    the layout the compiled kernels produce and consume.
    """

    def _store(self, feature, threshold, left, right, value, offsets, importance, n_nodes):
        self.feature_ = feature[:n_nodes].copy()
        self.threshold_ = threshold[:n_nodes].copy()
        self.left_ = left[:n_nodes].copy()
        self.right_ = right[:n_nodes].copy()
        self.value_ = value[:n_nodes].copy()
        self.offsets_ = offsets.copy()
        self.feature_importances_ = importance

    def _predict_sum(self, X, out, scale):
        XT = np.ascontiguousarray(X.T)
        _k.predict_ensemble(
            self.feature_,
            self.threshold_,
            self.left_,
            self.right_,
            self.value_,
            self.offsets_,
            XT,
            out,
            scale,
        )
        return out

    @property
    def n_nodes_(self) -> int:
        return int(self.offsets_[-1])


def _alloc_packed(cap: int, n_trees: int, n_features: int):
    return (
        np.empty(cap, np.int32),
        np.empty(cap, np.float64),
        np.empty(cap, np.int32),
        np.empty(cap, np.int32),
        np.empty(cap, np.float64),
        np.empty(n_trees + 1, np.int64),
        np.zeros(n_features, np.float64),
    )


class RegressionTree(TreeEnsembleMixin, BaseLearner):
    """CART regression tree grown to purity or the given limits.

    Splits minimize within-node squared error via an exhaustive scan over
    every feature's sorted values; ties go to the lowest feature index, then
    the lowest threshold. No pruning.

    Parameters
    ----------
    max_depth : int or None
        Depth cap; None grows until ``min_node`` stops splitting.
    min_node : int
        Minimum rows in each child of a split.

    Attributes
    ----------
    feature_importances_ : ndarray (n_features,)
        Total squared-error reduction contributed by splits on each feature.
    """

    kind = "tree"
    _fitted_attr = "value_"

    def __init__(self, max_depth=None, min_node: int = 5):
        self.max_depth = max_depth
        self.min_node = min_node

    def _fit(self, X, y):
        if self.min_node < 1:
            raise ValueError(f"min_node must be >= 1, got {self.min_node}")
        n, d = X.shape
        XT = np.ascontiguousarray(X.T)
        rows = np.arange(n, dtype=np.int32)
        base_sorted = _k.presort_columns(XT, rows)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        cap = _node_capacity(n, self.min_node, self.max_depth)
        arrays = _alloc_packed(cap, 1, d)
        n_nodes = _k.grow_forest(
            XT,
            y,
            rows,
            base_sorted,
            1,
            int(self.min_node),
            depth,
            d,
            np.zeros(1, np.uint64),
            _k.SAMPLE_NONE,
            *arrays,
        )
        self._store(*arrays, n_nodes)

    def _predict(self, X):
        return self._predict_sum(X, np.zeros(X.shape[0]), 1.0)
