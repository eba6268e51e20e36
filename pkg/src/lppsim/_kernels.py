"""Compiled line step for two paths, bit-identical to the array version in ``lpp``.

numba is optional; without it ``step_two`` is None and callers use numpy.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:     # pragma: no cover
    njit = None


def _step_two(f, b, out, run):
    n = b.shape[0]
    neg = -np.inf
    for a2 in range(n):
        run[a2] = neg
    # out[b1, a2] holds max_{a1 <= b1} f[a1, a2] - B(a1) - B(a2), for a2 >= b1
    for b1 in range(n):
        bb = b[b1]
        for a2 in range(b1, n):
            v = (f[b1, a2] - bb) - b[a2]
            if v > run[a2]:
                run[a2] = v
            out[b1, a2] = run[a2]
    for b1 in range(n):
        best = neg
        for b2 in range(b1):
            out[b1, b2] = neg
        for b2 in range(b1, n):
            v = out[b1, b2]
            if v > best:
                best = v
            out[b1, b2] = (best + b[b1]) + b[b2]
    return out


step_two = njit(cache=True, nogil=True)(_step_two) if njit is not None else None
