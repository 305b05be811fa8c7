"""The lumped two-type birth-death chain and its exact persistence time.

The master-sequence count performs a lazy birth-death walk on {0, ..., m}.
This module builds the jump probabilities, evaluates the closed-form expected
extinction time started from one master in log domain, and cross-checks it
with an independent tridiagonal first-step solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .numerics import log_sum_exp

# Dense first-step oracle refuses chains above this size.
ORACLE_MAX_STATES = 10_000


@dataclass(frozen=True)
class BirthDeathSpec:
    """Jump probabilities of the master count.

    up[k]   = P(k -> k+1), defined for 0 <= k <= m-1; up[m] is padded with 0.
    down[k] = P(k -> k-1), defined for 1 <= k <= m;   down[0] is padded with 0.

    The remaining mass 1 - up[k] - down[k] is a self loop.
    """

    up: np.ndarray
    down: np.ndarray

    @property
    def m(self) -> int:
        return len(self.up) - 1

    def __post_init__(self) -> None:
        if len(self.up) != len(self.down) or len(self.up) < 2:
            raise ValueError("up and down must both have length m + 1 >= 2")
        if np.any(self.up < 0) or np.any(self.up > 1):
            raise ValueError("up probabilities outside [0, 1]")
        if np.any(self.down < 0) or np.any(self.down > 1):
            raise ValueError("down probabilities outside [0, 1]")
        if np.any(self.up + self.down > 1 + 1e-12):
            raise ValueError("up[k] + down[k] exceeds 1")


def transition_probabilities(params: ModelParams) -> BirthDeathSpec:
    """Jump probabilities of the lumped chain for one parameter point.

    The raw two-term forms are canonical; the factored forms below are kept
    as a test-only identity.
    """
    m, sigma = params.m, params.sigma
    s = params.survival
    conv = params.conversion_prob
    one_minus_s = params.loss_prob

    k = np.arange(m + 1)
    x = k / m
    denom = sigma * x + 1.0 - x

    up = (sigma * x * (1.0 - x) * s + (1.0 - x) ** 2 * conv) / denom
    down = (sigma * x**2 * one_minus_s + x * (1.0 - x) * (1.0 - conv)) / denom
    up[m] = 0.0
    down[0] = 0.0
    return BirthDeathSpec(up=up, down=down)


def birth_factor(x, params: ModelParams):
    """Affine factor of the up probability: Q^theta/sigma + (1 - Q^theta/sigma) x."""
    r = params.odds_power / params.sigma
    return r + (1.0 - r) * np.asarray(x, dtype=float)


def death_factor(x, params: ModelParams):
    """Affine factor of the down probability:
    1 - conversion + (deficit + conversion) x."""
    conv = params.conversion_prob
    slope = params.replication_deficit + conv
    return 1.0 - conv + slope * np.asarray(x, dtype=float)


def factored_transition_probabilities(params: ModelParams) -> BirthDeathSpec:
    """Same chain via the factored forms; used to cross-check the raw ones."""
    m, sigma = params.m, params.sigma
    k = np.arange(m + 1)
    x = k / m
    denom = sigma * x + 1.0 - x
    up = (1.0 - x) * sigma * params.survival * birth_factor(x, params) / denom
    down = x * death_factor(x, params) / denom
    up[m] = 0.0
    down[0] = 0.0
    return BirthDeathSpec(up=up, down=down)


def _log_jump_arrays(spec: BirthDeathSpec):
    """(ln up[1..m-1], ln down[1..m]) with -inf for zero probabilities."""
    with np.errstate(divide="ignore"):
        log_up = np.log(spec.up[1 : spec.m])
        log_down = np.log(spec.down[1 : spec.m + 1])
    return log_up, log_down


def log_path_weights(spec: BirthDeathSpec):
    """ln pi_i for i = 1..m-1 plus the separate boundary ratio.

    pi_i is the product of the first i up/down ratios; the boundary quantity
    is ln(up_1 ... up_{m-1} / (down_1 ... down_m)), which stays defined even
    though up_m does not exist.  Entries are +inf wherever a down probability
    vanishes (upward absorption).
    """
    log_up, log_down = _log_jump_arrays(spec)
    diffs = log_up - log_down[: spec.m - 1]
    log_pi = np.cumsum(diffs)
    boundary = float(np.sum(log_up) - np.sum(log_down))
    return log_pi, boundary


def log_expected_persistence_time(spec: BirthDeathSpec) -> float:
    """ln E(tau_0 | N_0 = 1) from the closed-form sum, in log domain.

    Returns +inf when some down probability is zero (for q = 0 the top state
    absorbs upward and the master count never dies).
    """
    m = spec.m
    log_up, log_down = _log_jump_arrays(spec)
    # term_i = sum_{k<i} ln up_k - sum_{k<=i} ln down_k, i = 1..m
    prefix_up = np.concatenate(([0.0], np.cumsum(log_up)))
    prefix_down = np.cumsum(log_down)
    terms = prefix_up - prefix_down
    return log_sum_exp(terms)


def persistence_time_oracle(spec: BirthDeathSpec, start: int) -> float:
    """ln of the expected time to reach 0 from `start`, via the first-step
    linear system solved by tridiagonal elimination.

    The system (delta_k + gamma_k) h_k - delta_k h_{k+1} - gamma_k h_{k-1} = 1
    (with h_0 = 0 and delta_m = 0) is eliminated from the top row downward in
    the jump differences u_k = h_k - h_{k-1}; that sweep keeps all arithmetic
    positive, where the bottom-up pivot cancels catastrophically on
    metastable chains.  Independent of the closed-form route.  Returns +inf
    when the system has no finite solution (upward absorption), -inf for
    start = 0.  Values past double range saturate to +inf.
    """
    m = spec.m
    if m > ORACLE_MAX_STATES:
        raise ValueError(f"oracle limited to m <= {ORACLE_MAX_STATES}, got {m}")
    if not 0 <= start <= m:
        raise ValueError(f"start must lie in [0, {m}], got {start}")
    if start == 0:
        return -math.inf

    up = spec.up
    down = spec.down
    # Row m gives gamma_m u_m = 1; row k gives gamma_k u_k = 1 + delta_k u_{k+1}.
    u_next = math.inf if down[m] == 0.0 else 1.0 / down[m]
    total = u_next if start == m else 0.0
    for k in range(m - 1, 0, -1):
        if down[k] == 0.0:
            u_next = math.inf
        else:
            u_next = (1.0 + up[k] * u_next) / down[k]
        if k <= start:
            total += u_next
    return math.log(total) if total > 0 else math.inf
