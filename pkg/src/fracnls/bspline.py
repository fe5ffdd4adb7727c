"""Cardinal B-splines B_p on [0, p] (p-fold self-convolution of 1_[0,1])."""

from __future__ import annotations

import numpy as np


def cardinal_bspline(p: int, x) -> np.ndarray:
    """Cox-de Boor recursion B_p(x) = (x B_{p-1}(x) + (p - x) B_{p-1}(x - 1)) / (p - 1)."""
    if p < 1:
        raise ValueError("order must be >= 1")
    x = np.asarray(x, dtype=float)
    # B_1 on the shifted arguments x - i, i = 0..p-1
    shifts = x[..., None] - np.arange(p)
    vals = ((shifts >= 0) & (shifts < 1)).astype(float)
    for q in range(2, p + 1):
        y = shifts[..., : p - q + 1]
        vals = (y * vals[..., :-1] + (q - y) * vals[..., 1:]) / (q - 1)
    return vals[..., 0]
