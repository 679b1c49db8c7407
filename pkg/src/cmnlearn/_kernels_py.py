"""NumPy fallback for the counting kernel; same contract as the compiled one."""

import numpy as np


def class_counts_kernel(codes, node, blanket, weights, class_lut, q, r_node):
    """Return the q x r_node table counting (class of blanket config, node value)."""
    if blanket.size:
        idx = codes[:, blanket].astype(np.int64) @ weights
    else:
        idx = np.zeros(codes.shape[0], dtype=np.int64)
    cls = class_lut[idx].astype(np.int64)
    flat = cls * r_node + codes[:, node]
    return np.bincount(flat, minlength=q * r_node).reshape(q, r_node)
