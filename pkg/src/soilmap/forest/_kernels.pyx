# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot loops of tree building and prediction.

Both kernels mirror the numpy fallback in soilmap.forest._kernels_py
bit-for-bit: integer class-count accumulators and an identical floating
point evaluation order make the two backends pick identical splits.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def gini_sweep(double[::1] values, int[::1] labels, int n_classes):
    """Best binary split of a sorted run by weighted Gini impurity.

    values must be ascending; labels ride along. Candidate splits sit
    between strictly increasing neighbors; left child takes
    x <= threshold. Returns (threshold, weighted_gini, valid).
    """
    cdef Py_ssize_t n = values.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] left_counts = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] right_counts = np.zeros(n_classes, dtype=np.int64)
    cdef long long[::1] lc = left_counts
    cdef long long[::1] rc = right_counts
    cdef Py_ssize_t i
    cdef int c
    cdef long long sl = 0, sr = 0
    cdef double best = np.inf
    cdef double best_thr = 0.0
    cdef double score, nl, nr, weighted
    cdef bint found = False

    if n < 2:
        return 0.0, np.inf, False
    for i in range(n):
        rc[labels[i]] += 1
    for c in range(n_classes):
        sr += rc[c] * rc[c]

    for i in range(n - 1):
        c = labels[i]
        # move sample i from right to left; update sums of squared counts
        sl += 2 * lc[c] + 1
        sr -= 2 * rc[c] - 1
        lc[c] += 1
        rc[c] -= 1
        if values[i] < values[i + 1]:
            nl = <double> (i + 1)
            nr = <double> (n - i - 1)
            score = (<double> sl) / nl + (<double> sr) / nr
            # maximizing sl/nl + sr/nr minimizes weighted child Gini
            if (not found) or score > best:
                best = score
                best_thr = 0.5 * (values[i] + values[i + 1])
                found = True

    if not found:
        return 0.0, np.inf, False
    weighted = 1.0 - best / (<double> n)
    return best_thr, weighted, True


def tree_apply(double[:, ::1] X, int[::1] feature, double[::1] threshold,
               int[::1] left, int[::1] right):
    """Leaf index for every row; internal nodes have feature >= 0."""
    cdef Py_ssize_t m = X.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    cdef long long[::1] leaf = out
    cdef Py_ssize_t i
    cdef int node, f

    for i in range(m):
        node = 0
        f = feature[node]
        while f >= 0:
            if X[i, f] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        leaf[i] = node
    return out
