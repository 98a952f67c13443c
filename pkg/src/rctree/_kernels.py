"""Compiled inner loop for the Gini correction factor."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

FIXED = 0
ADAPTIVE = 1


@njit(cache=True, inline="always")
def _gini(p):
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return 2.0 * p * (1.0 - p)


@njit(cache=True)
def gini_node_log_lambda(u, a0, a1, b0, b1, c0, c1, w, mode, param, tol, out):
    """Log mechanism probability of candidate 0 at each ``u``.

    Affine proportions: parent ``a0 + a1*u``; per candidate ``k`` child
    ``b0[k] + b1[k]*u`` and complement ``c0[k] + c1[k]*u``; ``w[k]`` is the
    child's share of the parent.  Gains leaving [0, 1] count as zero.
    """
    k = b0.size
    g = np.empty(k)
    lo = -tol
    hi = 1.0 + tol
    for i in range(u.size):
        x = u[i]
        a = a0 + a1 * x
        total = 0.0
        gmax = -np.inf
        if a < lo or a > hi:
            for j in range(k):
                g[j] = 0.0
            gmax = 0.0
        else:
            ia = _gini(a)
            for j in range(k):
                b = b0[j] + b1[j] * x
                c = c0[j] + c1[j] * x
                if b < lo or b > hi or c < lo or c > hi:
                    v = 0.0
                else:
                    v = ia - w[j] * _gini(b) - (1.0 - w[j]) * _gini(c)
                g[j] = v
                total += v
                if v > gmax:
                    gmax = v
        if mode == FIXED:
            scale = param
        elif total > 0.0:
            scale = param * k / total
        else:
            scale = 0.0
        shift = scale * gmax
        acc = 0.0
        for j in range(k):
            acc += math.exp(scale * g[j] - shift)
        out[i] = scale * g[0] - shift - math.log(acc)
