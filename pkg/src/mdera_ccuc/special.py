"""Digamma and trigamma for positive arguments.

Upward recurrence to x >= 10, then the asymptotic (Bernoulli) series; both are
accurate to ~1e-14 there.
"""
from __future__ import annotations

import math

import numpy as np

_SHIFT_TO = 10.0

# B_2k / (2k) for the digamma tail, k = 1..7
_DIGAMMA_TAIL = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
# B_2k for the trigamma tail, k = 1..7
_TRIGAMMA_TAIL = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _prepare(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("digamma/trigamma implemented for x > 0 only")
    return x


def digamma(x):
    x = _prepare(x)
    x = x.copy()
    acc = np.zeros_like(x)
    while np.any(small := x < _SHIFT_TO):
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for coef in reversed(_DIGAMMA_TAIL):
        series = (series + coef) * inv2
    out = acc + np.log(x) - 0.5 / x - series
    return out if out.ndim else float(out)


def trigamma(x):
    x = _prepare(x)
    x = x.copy()
    acc = np.zeros_like(x)
    while np.any(small := x < _SHIFT_TO):
        acc[small] += 1.0 / (x[small] * x[small])
        x[small] += 1.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for coef in reversed(_TRIGAMMA_TAIL):
        series = (series + coef) * inv2
    out = acc + 1.0 / x + 0.5 * inv2 + series / x
    return out if out.ndim else float(out)


def gammaln(x):
    return np.vectorize(math.lgamma, otypes=[float])(x) if np.ndim(x) else math.lgamma(x)


def gamma(x):
    return np.vectorize(math.gamma, otypes=[float])(x) if np.ndim(x) else math.gamma(x)
