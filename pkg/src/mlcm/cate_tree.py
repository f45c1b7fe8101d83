"""Effect-heterogeneity trees: CART on estimated unit-level effects.

After the main analysis produces one effect per unit, a small unpruned
regression tree of those effects against candidate moderator covariates
yields interpretable group-average effects: each terminal node is a group
and its mean is the group effect. There is no train/test split and no
pruning — the tree is a descriptive partition, not a predictive model — so
growth is bounded only by the minimum node size and a shallow depth cap.

Continuous moderators split at midpoints between adjacent observed values.
Categorical moderators split on category subsets, found by ordering the
categories by their mean effect and scanning prefixes of that order (the
optimal binary partition for a one-dimensional response).
"""

import csv
import json
import math
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CateNode",
    "CateTree",
    "grow_cate_tree",
    "describe_tree",
    "default_min_node",
]


def default_min_node(n_units: int) -> int:
    """max(10, 5% of the units) — keeps leaves large enough to interpret."""
    return max(10, math.ceil(0.05 * n_units))


class CateNode:
    """One tree node; leaves carry their member units and mean effect.

    Split nodes hold either a numeric ``threshold`` (goes left when
    ``value <= threshold``) or a ``categories`` set (goes left when the
    value is in the set).
    """

    def __init__(self, node_id, depth, members, mean, size):
        self.node_id = int(node_id)
        self.depth = int(depth)
        self.members = tuple(int(i) for i in members)
        self.mean = float(mean)
        self.size = int(size)
        self.feature: Optional[str] = None
        self.feature_index: Optional[int] = None
        self.threshold: Optional[float] = None
        self.categories: Optional[tuple] = None
        self.left: Optional["CateNode"] = None
        self.right: Optional["CateNode"] = None
        self.interval: Optional[tuple] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def condition(self) -> str:
        if self.is_leaf:
            return "<leaf>"
        if self.categories is not None:
            cats = ", ".join(repr(c) for c in self.categories)
            return f"{self.feature} in {{{cats}}}"
        return f"{self.feature} <= {self.threshold!r}"


class CateTree:
    """A grown effect-heterogeneity tree.

    ``leaves()`` lists terminal nodes left-to-right; they partition the
    units, every leaf holds at least ``min_node`` of them, and the
    size-weighted mean of leaf means reproduces the overall mean effect.
    """

    def __init__(self, root, effects, feature_names, categorical, min_node,
                 max_depth):
        self.root = root
        self.effects = np.asarray(effects, dtype=np.float64)
        self.feature_names = tuple(feature_names)
        self.categorical = tuple(sorted(categorical))
        self.min_node = int(min_node)
        self.max_depth = max_depth

    @property
    def n_units(self) -> int:
        return self.effects.shape[0]

    def leaves(self):
        out = []

        def walk(node):
            if node.is_leaf:
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def nodes(self):
        out = []

        def walk(node):
            out.append(node)
            if not node.is_leaf:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def leaf_paths(self):
        """[(leaf, [condition strings from root])] in left-to-right order."""
        out = []

        def walk(node, path):
            if node.is_leaf:
                out.append((node, list(path)))
                return
            cond = node.condition()
            walk(node.left, path + [cond])
            walk(node.right, path + [f"not ({cond})"])

        walk(self.root, [])
        return out

    # -- serialization ----------------------------------------------------

    def _node_dict(self, node) -> dict:
        d = {
            "node_id": node.node_id,
            "depth": node.depth,
            "size": node.size,
            "mean": node.mean,
            "members": list(node.members),
        }
        if node.interval is not None:
            d["interval"] = [node.interval[0], node.interval[1]]
        if not node.is_leaf:
            d["feature"] = node.feature
            d["feature_index"] = node.feature_index
            if node.categories is not None:
                d["categories"] = list(node.categories)
            else:
                d["threshold"] = node.threshold
            d["left"] = self._node_dict(node.left)
            d["right"] = self._node_dict(node.right)
        return d

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "categorical": list(self.categorical),
            "min_node": self.min_node,
            "max_depth": self.max_depth,
            "effects": [float(v) for v in self.effects],
            "root": self._node_dict(self.root),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CateTree":
        def build(d):
            node = CateNode(d["node_id"], d["depth"], d["members"],
                            d["mean"], d["size"])
            if "interval" in d:
                node.interval = (d["interval"][0], d["interval"][1])
            if "left" in d:
                node.feature = d["feature"]
                node.feature_index = d["feature_index"]
                if "categories" in d:
                    node.categories = tuple(d["categories"])
                else:
                    node.threshold = d["threshold"]
                node.left = build(d["left"])
                node.right = build(d["right"])
            return node

        return cls(
            build(data["root"]),
            np.asarray(data["effects"], dtype=np.float64),
            data["feature_names"],
            data["categorical"],
            data["min_node"],
            data["max_depth"],
        )

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "CateTree":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def leaf_table(self):
        """[(node_id, size, mean, lower, upper, path)] per leaf."""
        rows = []
        for leaf, path in self.leaf_paths():
            lo, hi = leaf.interval if leaf.interval is not None else ("", "")
            rows.append((leaf.node_id, leaf.size, leaf.mean, lo, hi,
                         " and ".join(path) or "(all units)"))
        return rows

    def leaf_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "size", "mean_effect", "lower", "upper",
                             "path"])
            for node_id, size, mean, lo, hi, path_s in self.leaf_table():
                writer.writerow([
                    node_id, size, repr(float(mean)),
                    repr(float(lo)) if lo != "" else "",
                    repr(float(hi)) if hi != "" else "",
                    path_s,
                ])


def _best_numeric_split(values, effects, order, min_node):
    """Best midpoint threshold by SSE reduction; None when nothing admissible."""
    n = order.size
    v = values[order]
    e = effects[order]
    csum = np.cumsum(e)
    csq = np.cumsum(e * e)
    total_sse = csq[-1] - csum[-1] ** 2 / n
    best = None
    for i in range(min_node - 1, n - min_node):
        if v[i + 1] <= v[i]:
            continue
        nl = i + 1
        nr = n - nl
        sse = (csq[i] - csum[i] ** 2 / nl) + (
            (csq[-1] - csq[i]) - (csum[-1] - csum[i]) ** 2 / nr
        )
        gain = total_sse - sse
        if gain > 1e-12 * (abs(total_sse) + 1.0) and (
            best is None or gain > best[0]
        ):
            thr = v[i] + (v[i + 1] - v[i]) / 2.0
            if thr >= v[i + 1]:
                thr = v[i]
            best = (gain, float(thr))
    return best


def _best_categorical_split(values, effects, min_node):
    """Best category subset: order categories by mean effect, scan prefixes."""
    cats = {}
    for i, c in enumerate(values):
        key = c.item() if hasattr(c, "item") else c
        cats.setdefault(key, []).append(i)
    if len(cats) < 2:
        return None
    ordered = sorted(
        cats, key=lambda c: (float(np.mean(effects[cats[c]])), str(c))
    )
    n = effects.size
    total_sse = float(np.sum(effects ** 2) - np.sum(effects) ** 2 / n)
    best = None
    for cut in range(1, len(ordered)):
        left_idx = np.concatenate([cats[c] for c in ordered[:cut]])
        if left_idx.size < min_node or n - left_idx.size < min_node:
            continue
        mask = np.zeros(n, dtype=bool)
        mask[left_idx] = True
        el, er = effects[mask], effects[~mask]
        sse = float(
            np.sum(el ** 2) - np.sum(el) ** 2 / el.size
            + np.sum(er ** 2) - np.sum(er) ** 2 / er.size
        )
        gain = total_sse - sse
        if gain > 1e-12 * (abs(total_sse) + 1.0) and (
            best is None or gain > best[0]
        ):
            best = (gain, tuple(sorted(ordered[:cut], key=str)))
    return best


def grow_cate_tree(
    effects,
    H,
    *,
    min_node: Optional[int] = None,
    max_depth: Optional[int] = 4,
    feature_names: Optional[Sequence[str]] = None,
    categorical: Sequence = (),
) -> CateTree:
    """Grow an unpruned effect-heterogeneity tree.

    Parameters
    ----------
    effects : array-like (n_units,)
        One estimated effect per unit (pick a horizon or use each unit's
        temporal average before calling).
    H : array-like (n_units, d) or None
        Candidate moderator covariates; these need not be the covariates
        used for forecasting. Categorical columns may hold arbitrary
        (comparable) values; list them in ``categorical``.
    min_node : int, optional
        Minimum units per leaf; default ``max(10, ceil(0.05 * n))``.
    max_depth : int or None
        Depth cap (None = unlimited); the default keeps trees readable.
    feature_names : sequence of str, optional
    categorical : sequence
        Column names (or indices when unnamed) treated as categorical.

    Splits must strictly reduce within-node variance; constant effects (or
    no admissible split) give a root-only tree whose mean is the overall
    average effect.
    """
    effects = np.asarray(effects, dtype=np.float64)
    if effects.ndim != 1 or effects.size == 0:
        raise ValueError("effects must be a non-empty 1-D vector")
    n = effects.size
    Harr = np.asarray(H if H is not None else np.empty((n, 0)))
    if Harr.ndim != 2 or Harr.shape[0] != n:
        raise ValueError(
            f"H must have one row per unit ({n}), got shape {Harr.shape}"
        )
    d = Harr.shape[1]
    if feature_names is None:
        feature_names = tuple(f"h{j}" for j in range(d))
    else:
        feature_names = tuple(str(c) for c in feature_names)
        if len(feature_names) != d:
            raise ValueError(
                f"{len(feature_names)} feature names for {d} columns"
            )
    cat_set = set()
    for c in categorical:
        if c in feature_names:
            cat_set.add(feature_names.index(c))
        elif isinstance(c, (int, np.integer)) and 0 <= c < d:
            cat_set.add(int(c))
        else:
            raise ValueError(f"categorical column {c!r} not found")
    if min_node is None:
        min_node = default_min_node(n)
    min_node = int(min_node)
    if min_node < 1:
        raise ValueError("min_node must be >= 1")

    counter = [0]

    def make_node(members, depth):
        node = CateNode(
            counter[0], depth, members,
            effects[members].mean(), members.size,
        )
        counter[0] += 1
        return node

    def grow(node, members, depth):
        if members.size < 2 * min_node:
            return
        if max_depth is not None and depth >= max_depth:
            return
        e = effects[members]
        best = None  # (gain, feature_index, threshold, categories)
        for j in range(d):
            col = Harr[members, j]
            if j in cat_set:
                res = _best_categorical_split(col, e, min_node)
                if res is not None and (best is None or res[0] > best[0]):
                    best = (res[0], j, None, res[1])
            else:
                vals = col.astype(np.float64)
                order = np.argsort(vals, kind="stable")
                res = _best_numeric_split(vals, e, order, min_node)
                if res is not None and (best is None or res[0] > best[0]):
                    best = (res[0], j, res[1], None)
        if best is None:
            return
        _, j, thr, cats = best
        node.feature_index = j
        node.feature = feature_names[j]
        col = Harr[members, j]
        if cats is not None:
            node.categories = cats
            go_left = np.isin(col, np.array(cats, dtype=col.dtype))
        else:
            node.threshold = thr
            go_left = col.astype(np.float64) <= thr
        left_members = members[go_left]
        right_members = members[~go_left]
        node.left = make_node(left_members, depth + 1)
        node.right = make_node(right_members, depth + 1)
        grow(node.left, left_members, depth + 1)
        grow(node.right, right_members, depth + 1)

    all_members = np.arange(n, dtype=np.intp)
    root = make_node(all_members, 0)
    grow(root, all_members, 0)
    return CateTree(root, effects, feature_names, cat_set, min_node,
                    max_depth)


def describe_tree(tree: CateTree) -> str:
    """Indented text diagram: split conditions, leaf means, sizes, intervals."""
    lines = []

    def fmt_interval(node):
        if node.interval is None:
            return ""
        lo, hi = node.interval
        return f"  CI=[{lo:.6g}, {hi:.6g}]"

    def walk(node, indent, label):
        pad = "  " * indent
        if node.is_leaf:
            lines.append(
                f"{pad}{label}leaf #{node.node_id}: mean={node.mean:.6g} "
                f"n={node.size}{fmt_interval(node)}"
            )
        else:
            lines.append(
                f"{pad}{label}node #{node.node_id}: {node.condition()} "
                f"(mean={node.mean:.6g} n={node.size})"
            )
            walk(node.left, indent + 1, "yes: ")
            walk(node.right, indent + 1, "no:  ")

    walk(tree.root, 0, "")
    return "\n".join(lines)
