"""Log-domain helpers.

Quantities like the persistence time span hundreds of orders of magnitude
(e^{m F}), so sums of positive weights are accumulated as logs, anchored at
the running maximum.  +inf encodes an infinite quantity, -inf encodes zero.
"""

from __future__ import annotations

import math

import numpy as np


def log_sum_exp(values) -> float:
    """ln(sum(exp(values))) for a 1-d array of logs.

    Handles empty input (-inf), -inf entries (zero weight) and +inf entries
    (the sum is infinite).
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return -math.inf
    anchor = float(np.max(arr))
    if math.isinf(anchor):
        # all -inf, or at least one +inf
        return anchor
    return anchor + math.log(float(np.sum(np.exp(arr - anchor))))


def log_add(a: float, b: float) -> float:
    """ln(exp(a) + exp(b)) for two scalars."""
    if a < b:
        a, b = b, a
    if math.isinf(a):
        return a
    return a + math.log1p(math.exp(b - a))
