"""Independent reference implementations used to check the real ones.

These deliberately avoid the library's code paths: split gains come from
direct sums over boolean partitions (not prefix sums), derivatives come
from finite differences of the raw loss, and ensemble scores come from a
standalone recursive tree walk.
"""

from __future__ import annotations

import numpy as np


def cross_entropy(scores: np.ndarray, true_class: int) -> float:
    """-log softmax(scores)[true_class], computed stably."""
    s = np.asarray(scores, dtype=float)
    shifted = s - s.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[true_class])


def fd_grad_hess(scores: np.ndarray, true_class: int, eps: float = 3e-4):
    """Central finite differences of the cross-entropy, per class."""
    s = np.asarray(scores, dtype=float)
    g = np.empty_like(s)
    h = np.empty_like(s)
    base = cross_entropy(s, true_class)
    for c in range(s.size):
        up = s.copy()
        up[c] += eps
        down = s.copy()
        down[c] -= eps
        lu = cross_entropy(up, true_class)
        ld = cross_entropy(down, true_class)
        g[c] = (lu - ld) / (2 * eps)
        h[c] = (lu - 2 * base + ld) / (eps * eps)
    return g, h


def exhaustive_best_split(X, g, h, *, reg_lambda, gamma, min_child_weight):
    """Score every (feature, midpoint threshold) pair by direct summation.

    Same candidate set and tie-break rule as the production search (lowest
    feature index, then lowest threshold), but gains come from independent
    np.sum calls over each partition.
    """

    def term(G, H):
        return G * G / (H + reg_lambda)

    G_total = float(np.sum(g))
    H_total = float(np.sum(h))
    best = None  # (gain, feature, threshold)
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for lo, hi in zip(values[:-1], values[1:]):
            threshold = (lo + hi) / 2.0
            if not lo < threshold < hi:
                continue
            left = X[:, feature] < threshold
            GL = float(np.sum(g[left]))
            HL = float(np.sum(h[left]))
            GR = G_total - GL
            HR = H_total - HL
            if HL < min_child_weight or HR < min_child_weight:
                continue
            gain = 0.5 * (term(GL, HL) + term(GR, HR) - term(G_total, H_total)) - gamma
            if best is None or gain > best[0]:
                best = (gain, feature, threshold)
    if best is None or best[0] <= 0:
        return None
    return best


def walk_tree(node_dict: dict, row: np.ndarray) -> float:
    """Route one row through a serialized tree dict."""
    node = node_dict
    while "weight" not in node:
        if row[node["feature"]] < node["threshold"]:
            node = node["left"]
        else:
            node = node["right"]
    return node["weight"]


def ensemble_scores(model_dict: dict, row: np.ndarray) -> np.ndarray:
    """Re-walk every stored tree independently and sum per class."""
    n_classes = model_dict["n_classes"]
    scores = np.zeros(n_classes)
    for round_trees in model_dict["trees"][: model_dict["best_round"]]:
        for c, tree in enumerate(round_trees):
            scores[c] += walk_tree(tree, row)
    return model_dict["learning_rate"] * scores


def make_separable_dataset(n_rows=200, n_features=10, n_classes=5, seed=99):
    """Linearly separable multiclass blobs: class c spikes features 2c, 2c+1."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n_rows)
    X = rng.normal(0.0, 0.3, size=(n_rows, n_features))
    for i, c in enumerate(labels):
        X[i, 2 * c] += 3.0
        X[i, (2 * c + 1) % n_features] += 1.5
    return X, labels
