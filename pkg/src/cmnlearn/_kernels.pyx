# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled hot kernel: per-node class/value count accumulation.

Single pass over the data matrix; no temporary arrays.  Must stay
behaviourally identical to ``cmnlearn._kernels_py.class_counts_kernel``.
"""

import numpy as np


def class_counts_kernel(const int[:, ::1] codes, Py_ssize_t node,
                        const long long[::1] blanket, const long long[::1] weights,
                        const int[::1] class_lut, Py_ssize_t q, Py_ssize_t r_node):
    """Return the q x r_node table counting (class of blanket config, node value)."""
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t k = blanket.shape[0]
    cdef Py_ssize_t row, t
    cdef long long idx
    cdef int cls
    counts_arr = np.zeros((q, r_node), dtype=np.int64)
    cdef long long[:, ::1] counts = counts_arr
    for row in range(n):
        idx = 0
        for t in range(k):
            idx += codes[row, blanket[t]] * weights[t]
        cls = class_lut[idx]
        counts[cls, codes[row, node]] += 1
    return counts_arr
