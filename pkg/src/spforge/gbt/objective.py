"""Softmax multiclass objective: probabilities, loss, and second-order stats."""

from __future__ import annotations

import numpy as np

# Probabilities are clipped away from 0 before taking logs.
_EPS = 1e-15


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shift-invariant (max subtracted before exp).

    Accepts a single score vector or an (n, C) matrix.
    """
    s = np.asarray(scores, dtype=float)
    shifted = s - s.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean multiclass cross-entropy of raw scores against integer labels."""
    probs = softmax(np.atleast_2d(scores))
    picked = probs[np.arange(probs.shape[0]), np.asarray(labels, dtype=int)]
    return float(-np.mean(np.log(np.clip(picked, _EPS, None))))


def grad_hess(probs: np.ndarray, true_class: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class gradient and diagonal hessian of the cross-entropy at one row.

    g_c = p_c - [c == true_class], h_c = p_c * (1 - p_c).
    """
    p = np.asarray(probs, dtype=float)
    if not 0 <= true_class < p.shape[-1]:
        raise ValueError(f"true_class {true_class} out of range for {p.shape[-1]} classes")
    g = p.copy()
    g[true_class] -= 1.0
    h = p * (1.0 - p)
    return g, h


def grad_hess_matrix(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized grad_hess over an (n, C) probability matrix."""
    p = np.asarray(probs, dtype=float)
    g = p.copy()
    g[np.arange(p.shape[0]), np.asarray(labels, dtype=int)] -= 1.0
    h = p * (1.0 - p)
    return g, h
