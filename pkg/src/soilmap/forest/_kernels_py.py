"""Pure-numpy fallbacks for the tree kernels.

Kept in exact numerical lockstep with the compiled versions: identical
integer accumulators and the same float evaluation order, so either
backend grows identical forests from the same seed.
"""

from __future__ import annotations

import numpy as np


def gini_sweep(values: np.ndarray, labels: np.ndarray, n_classes: int):
    """Best binary split of a sorted run by weighted Gini impurity.

    Returns (threshold, weighted_gini, valid); see the compiled kernel.
    """
    n = len(values)
    if n < 2:
        return 0.0, np.inf, False
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]

    left = cum[:-1]
    right = total[None, :] - left
    sl = (left * left).sum(axis=1)
    sr = (right * right).sum(axis=1)
    nl = np.arange(1, n, dtype=np.float64)
    nr = np.arange(n - 1, 0, -1, dtype=np.float64)
    score = sl / nl + sr / nr

    valid = values[:-1] < values[1:]
    if not valid.any():
        return 0.0, np.inf, False
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    threshold = 0.5 * (values[i] + values[i + 1])
    weighted = 1.0 - score[i] / float(n)
    return float(threshold), float(weighted), True


def tree_apply(X: np.ndarray, feature: np.ndarray, threshold: np.ndarray,
               left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Leaf index per row, routed level by level."""
    m = X.shape[0]
    nodes = np.zeros(m, dtype=np.int64)
    while True:
        f = feature[nodes]
        active = f >= 0
        if not active.any():
            return nodes
        rows = np.flatnonzero(active)
        vals = X[rows, f[rows]]
        go_left = vals <= threshold[nodes[rows]]
        nodes[rows] = np.where(go_left, left[nodes[rows]], right[nodes[rows]])
