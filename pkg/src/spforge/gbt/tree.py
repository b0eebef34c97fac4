"""Regression tree with the regularized second-order split gain.

Split search is exact: for every allowed feature, candidates are the
midpoints between consecutive distinct sorted values, scored by

    gain = 1/2 * (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) - gamma

with candidates rejected when either child's hessian sum falls below
min_child_weight. Ties on gain break toward the lowest feature index,
then the lowest threshold. Rows route left when x[feature] < threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (weight)."""

    feature: int | None = None
    threshold: float | None = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    weight: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.weight is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"weight": self.weight}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeNode":
        if "weight" in obj:
            return cls(weight=float(obj["weight"]))
        return cls(
            feature=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            left=cls.from_dict(obj["left"]),
            right=cls.from_dict(obj["right"]),
        )


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def leaf_weight(G: float, H: float, reg_lambda: float) -> float:
    """Optimal leaf value -G/(H + lambda) under the second-order loss."""
    denom = H + reg_lambda
    if denom <= 0:
        raise ValueError(f"H + lambda must be positive, got {denom}")
    return -G / denom


def _gain_term(G: np.ndarray | float, H: np.ndarray | float, reg_lambda: float):
    return G * G / (H + reg_lambda)


def best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    *,
    reg_lambda: float,
    gamma: float,
    min_child_weight: float,
    feature_indices: Sequence[int] | None = None,
) -> Split | None:
    """Best (feature, threshold) over exact enumeration, or None.

    None means the node should stay a leaf: every candidate either fails the
    min_child_weight constraint or the best gain is <= 0.
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot split an empty node")
    if feature_indices is None:
        feature_indices = range(X.shape[1])

    G = float(g.sum())
    H = float(h.sum())
    parent_term = _gain_term(G, H, reg_lambda)

    best: Split | None = None
    for feature in feature_indices:
        values = X[:, feature]
        order = np.argsort(values, kind="stable")
        v = values[order]
        cg = np.cumsum(g[order])[:-1]
        ch = np.cumsum(h[order])[:-1]

        thresholds = (v[:-1] + v[1:]) / 2.0
        # Strictly-interior midpoints only: equal adjacent values yield no
        # candidate, and a midpoint that rounds onto either value would not
        # partition the rows it was scored on.
        valid = (thresholds > v[:-1]) & (thresholds < v[1:])
        valid &= (ch >= min_child_weight) & ((H - ch) >= min_child_weight)
        if not valid.any():
            continue

        gains = 0.5 * (
            _gain_term(cg, ch + 0.0, reg_lambda)
            + _gain_term(G - cg, H - ch, reg_lambda)
            - parent_term
        ) - gamma
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[pos])
        if best is None or gain > best.gain:
            best = Split(feature=int(feature), threshold=float(thresholds[pos]), gain=gain)

    if best is None or best.gain <= 0:
        return None
    return best


def grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    *,
    max_depth: int,
    reg_lambda: float,
    gamma: float,
    min_child_weight: float,
    feature_indices: Sequence[int] | None = None,
) -> TreeNode:
    """Grow a depth-limited tree; unsplittable nodes become leaves."""

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        G = float(g[rows].sum())
        H = float(h[rows].sum())
        if depth >= max_depth or rows.size < 2:
            return TreeNode(weight=leaf_weight(G, H, reg_lambda))
        split = best_split(
            X[rows],
            g[rows],
            h[rows],
            reg_lambda=reg_lambda,
            gamma=gamma,
            min_child_weight=min_child_weight,
            feature_indices=feature_indices,
        )
        if split is None:
            return TreeNode(weight=leaf_weight(G, H, reg_lambda))
        mask = X[rows, split.feature] < split.threshold
        return TreeNode(
            feature=split.feature,
            threshold=split.threshold,
            left=build(rows[mask], depth + 1),
            right=build(rows[~mask], depth + 1),
        )

    return build(np.arange(X.shape[0]), 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf weights for every row of X."""
    X = np.atleast_2d(X)
    out = np.empty(X.shape[0], dtype=float)
    for i, row in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if row[cur.feature] < cur.threshold else cur.right
        out[i] = cur.weight
    return out


def tree_depth(node: TreeNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))
