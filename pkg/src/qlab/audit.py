"""Numerical audit of the Laplace-method decomposition of the persistence time.

The exact log-lifetime splits into a boundary constant, a sum of weights
exp(m F(i/m) + G(i/m)) and bounded leftovers.  This module evaluates every
piece (Stirling defect, rate function F with derivatives, correction G,
boundary constant, full and truncated sums) and measures the leftovers that
the theory only bounds, so each claimed bound becomes a checkable number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .chain import birth_factor, death_factor, transition_probabilities
from .chain import log_expected_persistence_time
from .model import ModelParams
from .numerics import log_sum_exp

# sums refuse chains above this size
SUM_MAX_STATES = 100_000

# first m from which the "m large enough" envelopes (|G| bound, Gaussian
# window bounds) are expected to hold; below it they are reported, not relied on
LARGE_M = 64

# |death-factor slope| below which the weight-gap quotient switches to series
_SLOPE_CUTOFF = 1e-6


def stirling_defect(m: int, i: int) -> float:
    """Defect of the entropy-plus-half-log approximation of ln C(m, i).

    Uniformly bounded by 2 in absolute value for 1 <= i <= m-1.
    """
    if not 1 <= i <= m - 1:
        raise ValueError(f"i must lie in [1, m-1] = [1, {m - 1}], got {i}")
    x = i / m
    log_binom = math.lgamma(m + 1) - math.lgamma(i + 1) - math.lgamma(m - i + 1)
    return (
        log_binom
        + (m - i) * math.log1p(-x)
        + i * math.log(x)
        + 0.5 * math.log(m * x * (1.0 - x))
    )


def stirling_defect_all(m: int) -> np.ndarray:
    """Vectorized stirling_defect over i = 1..m-1."""
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    i = np.arange(1, m)
    x = i / m
    log_binom = gammaln(m + 1) - gammaln(i + 1) - gammaln(m - i + 1)
    return log_binom + (m - i) * np.log1p(-x) + i * np.log(x) + 0.5 * np.log(m * x * (1 - x))


def _log_sigma_survival(params: ModelParams) -> float:
    return math.log(params.sigma) + params.log_survival


def rate_maximizer(params: ModelParams) -> float:
    """Argmax of the rate function; the equilibrium master fraction, with the
    conversion-corrected variant in the degenerate branch."""
    sigma = params.sigma
    if params.is_degenerate:
        return 1.0 - sigma * params.loss_prob / (sigma - 1.0 + params.conversion_prob)
    return 1.0 - sigma * params.loss_prob / (sigma - 1.0)


def rate_function(x: float, params: ModelParams) -> float:
    """Per-capita log-weight rate F whose maximum drives the Laplace sum.

    F(0) = 0 and F is strictly concave.  In the degenerate branch (deficit
    near zero) the simplified form would divide by the deficit, so the exact
    death-factor form takes over; it no longer vanishes at 0 exactly but
    differs only at order of the conversion probability.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    value = x * _log_sigma_survival(params)
    if x < 1.0:
        value -= (1.0 - x) * math.log1p(-x)
    if params.is_degenerate:
        conv = params.conversion_prob
        slope = params.replication_deficit + conv
        death = 1.0 - conv + slope * x
        if death > 0.0:
            value -= death * math.log(death) / slope
    else:
        deficit = params.replication_deficit
        lin = 1.0 + deficit * x
        if lin > 0.0:
            value -= lin * math.log1p(deficit * x) / deficit
    return value


def rate_function_derivs(x: float, params: ModelParams) -> tuple[float, float, float]:
    """(F', F'', F''') at x, on the branch-appropriate form."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"x must lie in [0, 1), got {x}")
    if params.is_degenerate:
        conv = params.conversion_prob
        slope = params.replication_deficit + conv
        death = 1.0 - conv + slope * x
        f1 = math.log1p(-x) + _log_sigma_survival(params) - math.log(death)
        f2 = -1.0 / (1.0 - x) - slope / death
        f3 = -1.0 / (1.0 - x) ** 2 + (slope / death) ** 2
    else:
        deficit = params.replication_deficit
        lin = 1.0 + deficit * x
        f1 = math.log1p(-x) + _log_sigma_survival(params) - math.log1p(deficit * x)
        f2 = -1.0 / (1.0 - x) - deficit / lin
        f3 = -1.0 / (1.0 - x) ** 2 + (deficit / lin) ** 2
    return f1, f2, f3


def death_integral_gap(x: float, params: ModelParams) -> float:
    """Gap between the simplified and exact integrated death weights.

    Identically zero at zero mutation odds; uniformly of the order of the
    odds power otherwise (given the deficit stays away from zero).
    """
    deficit = params.replication_deficit
    conv = params.conversion_prob
    slope = deficit + conv
    if conv == 0.0:
        return 0.0
    first = float(_death_weight_gap(x, 1.0, deficit))
    if slope == 0.0:
        return math.inf
    death = 1.0 - conv + slope * x
    return first - death * math.log(death) / slope


def correction_term(x: float, params: ModelParams) -> float:
    """Sub-leading correction G accompanying m F in the Laplace weights.

    Defined on [1/m, 1 - 1/m]; in the stated regime its absolute value stays
    below 2 (1 + m Q^theta) ln m, which small m may violate.
    """
    m = params.m
    if not 1.0 / m <= x <= 1.0 - 1.0 / m:
        raise ValueError(f"x must lie in [1/m, 1-1/m], got {x}")
    sigma = params.sigma
    qt = params.odds_power
    psi = float(birth_factor(x, params))
    first = math.log((sigma - 1.0) * x + 1.0) - _log_sigma_survival(params)
    second = (m * qt / (sigma - qt) - 0.5) * math.log(psi)
    # m x ln(psi(x)/x) with the quotient evaluated as 1 + small
    third = m * x * math.log1p(qt / sigma * (1.0 / x - 1.0)) if qt > 0.0 else 0.0
    fourth = -0.5 * math.log(m * x * (1.0 - x))
    return first + second + third + fourth + m * death_integral_gap(x, params)


def correction_bound(params: ModelParams) -> float:
    """The asymptotic-regime envelope 2 (1 + m Q^theta) ln m for |G|."""
    return 2.0 * (1.0 + params.m * params.odds_power) * math.log(params.m)


def _death_weight_gap(x, phi0: float, slope: float):
    """((phi0 + slope x) ln(phi0 + slope x) - phi0 ln phi0) / slope.

    The stable building block of the integrated death weight; a series in the
    slope takes over when the quotient would cancel catastrophically.
    """
    x = np.asarray(x, dtype=float)
    if abs(slope) < _SLOPE_CUTOFF:
        log_phi0 = math.log(phi0)
        return x * (1.0 + log_phi0) + slope * x**2 / (2.0 * phi0) - slope**2 * x**3 / (
            6.0 * phi0**2
        ) + slope**3 * x**4 / (12.0 * phi0**3)
    death = phi0 + slope * x
    with np.errstate(divide="ignore", invalid="ignore"):
        prod = np.where(death > 0, death * np.log(np.where(death > 0, death, 1.0)), 0.0)
    return (prod - phi0 * math.log(phi0)) / slope


def log_boundary_constant(params: ModelParams) -> float:
    """ln K, the i-independent factor of the Laplace rewriting.

    Reduces to (1/2) ln m at zero mutation odds.  Diverges when the
    death-factor slope crosses zero; that is a grouping artifact and the sum
    routines below stay finite there.
    """
    m, sigma = params.m, params.sigma
    qt = params.odds_power
    conv = params.conversion_prob
    slope = params.replication_deficit + conv
    phi0 = 1.0 - conv
    psi_low = qt / sigma + (1.0 - qt / sigma) / m
    first = (-m * qt / (sigma - qt) - 0.5) * math.log(psi_low)
    if phi0 == 1.0:
        second = 0.0
    elif slope == 0.0:
        return math.inf if phi0 * math.log(phi0) > 0 else -math.inf
    else:
        second = m * phi0 * math.log(phi0) / slope
    return first + second


def _log_weighted_terms(params: ModelParams) -> tuple[np.ndarray, float]:
    """ln(K * weight_i) for i = 1..m-1 plus the boundary index-m term.

    Equals ln K + m F(i/m) + G(i/m) identically, but grouped so that it stays
    finite for every deficit, including the degenerate regime where ln K and
    m F + G diverge individually.
    """
    m, sigma = params.m, params.sigma
    log_ss = _log_sigma_survival(params)
    qt = params.odds_power
    conv = params.conversion_prob
    slope = params.replication_deficit + conv
    phi0 = 1.0 - conv

    i = np.arange(1, m)
    x = i / m
    psi = qt / sigma + (1.0 - qt / sigma) * x
    psi_low = qt / sigma + (1.0 - qt / sigma) / m
    shared = (-m * qt / (sigma - qt) - 0.5) * math.log(psi_low)

    terms = (
        shared
        + np.log((sigma - 1.0) * x + 1.0)
        - log_ss
        - m * ((1.0 - x) * np.log1p(-x) + x * np.log(x))
        - 0.5 * np.log(m * x * (1.0 - x))
        + i * log_ss
        + (m * qt / (sigma - qt) - 0.5 + i) * np.log(psi)
        - m * _death_weight_gap(x, phi0, slope)
    )
    boundary = (
        shared
        - params.log_survival
        + m * log_ss
        - m * float(_death_weight_gap(1.0, phi0, slope))
    )
    return terms, boundary


@dataclass(frozen=True)
class FullSum:
    """Log of the full Laplace sum and its boundary term."""

    log_sum: float  # ln sum_{i=1}^{m-1} exp(m F + G)
    log_boundary: float  # ln of the index-m term divided by K
    log_reconstructed: float  # ln K + ln(sum + boundary term)


def log_full_sum(params: ModelParams) -> FullSum:
    """Full sum of the Laplace weights plus the separate index-m term.

    ln K + ln(sum + boundary) reproduces the exact log-lifetime up to the
    measured leftover of the Stirling and Riemann replacements.
    """
    if params.m > SUM_MAX_STATES:
        raise ValueError(f"sum limited to m <= {SUM_MAX_STATES}, got {params.m}")
    log_k = log_boundary_constant(params)
    terms, boundary = _log_weighted_terms(params)
    reconstructed = log_sum_exp(np.append(terms, boundary))
    return FullSum(
        log_sum=log_sum_exp(terms) - log_k,
        log_boundary=boundary - log_k,
        log_reconstructed=reconstructed,
    )


@dataclass(frozen=True)
class WindowSum:
    """Laplace sum truncated to the window around the rate maximizer."""

    log_sum: float  # ln of the truncated weight sum
    gaussian_sum: float  # pure Gaussian comparison sum over the same window
    i_lo: int
    i_hi: int
    delta: float


def log_window_sum(params: ModelParams, delta: float | None = None) -> WindowSum:
    """Truncated sum over indices within `delta` of m times the maximizer.

    Default window width m^(2/3).  The upper edge is clamped to m-1 so the
    window always sits inside the full sum; an empty window is an error.
    """
    if params.m > SUM_MAX_STATES:
        raise ValueError(f"sum limited to m <= {SUM_MAX_STATES}, got {params.m}")
    m = params.m
    if delta is None:
        delta = m ** (2.0 / 3.0)
    rho = rate_maximizer(params)
    i_lo = max(math.floor(m * rho - delta), 0) + 1
    i_hi = min(math.floor(m * rho + delta), m - 1)
    if i_lo > i_hi:
        raise ValueError(
            f"empty window [{i_lo}, {i_hi}] for m={m}, delta={delta}, maximizer={rho}"
        )
    terms, _ = _log_weighted_terms(params)
    log_k = log_boundary_constant(params)
    window_terms = terms[i_lo - 1 : i_hi]

    i = np.arange(i_lo, i_hi + 1)
    f2 = rate_function_derivs(min(max(rho, 0.0), 1.0 - 1.0 / m), params)[1]
    gaussian = float(np.sum(np.exp(m * (i / m - rho) ** 2 * f2 / 2.0)))
    return WindowSum(
        log_sum=log_sum_exp(window_terms) - log_k,
        gaussian_sum=gaussian,
        i_lo=i_lo,
        i_hi=i_hi,
        delta=delta,
    )


def birth_sum_remainder(params: ModelParams, i: int) -> float:
    """Measured leftover of the closed form for sum_{k<=i} ln(birth factor).

    The theory bounds it by 1 in absolute value.
    """
    m, sigma = params.m, params.sigma
    if not 1 <= i <= m:
        raise ValueError(f"i must lie in [1, m], got {i}")
    qt = params.odds_power
    k = np.arange(1, i + 1)
    direct = float(np.sum(np.log(birth_factor(k / m, params))))
    x = i / m
    psi_x = float(birth_factor(x, params))
    psi_low = float(birth_factor(1.0 / m, params))
    closed = (
        m * sigma * (psi_x * math.log(psi_x) - psi_low * math.log(psi_low)) / (sigma - qt)
        - i
        + 1.0
        + 0.5 * math.log(psi_x)
        + 0.5 * math.log(psi_low)
    )
    return direct - closed


def death_sum_remainder(params: ModelParams, i: int) -> float:
    """Measured leftover of the closed form for sum_{k<=i} ln(death factor).

    Uniformly bounded by a constant across m.
    """
    m = params.m
    if not 1 <= i <= m:
        raise ValueError(f"i must lie in [1, m], got {i}")
    conv = params.conversion_prob
    slope = params.replication_deficit + conv
    k = np.arange(1, i + 1)
    direct = float(np.sum(np.log(death_factor(k / m, params))))
    closed = m * float(_death_weight_gap(i / m, 1.0 - conv, slope)) - i
    return direct - closed


@dataclass(frozen=True)
class AuditReport:
    """Decomposition of the exact log-lifetime with measured leftovers."""

    m: int
    ell: int
    kappa: int
    sigma: float
    q: float
    theta: int
    ln_exact: float
    ln_k: float
    m_f_rho: float
    rho_star: float
    residual: float  # ln_exact - m_f_rho
    residual_minus_k: float  # residual - ln_k
    reconstruction_gap: float  # ln_exact - (ln K + ln(full sum))
    remainder_scale: float  # (1 + m Q^theta) ln m
    residual_ratio: float  # |residual| / remainder_scale
    stirling_max: float
    g_sup: float
    g_bound: float
    g_bound_ok: bool
    truncation_share: float  # weight fraction outside the window
    window_lo: int
    window_hi: int
    delta: float
    degenerate: bool
    skipped: bool


_REPORT_FIELDS = [
    "m", "ell", "kappa", "sigma", "q", "theta",
    "ln_exact", "ln_k", "m_f_rho", "rho_star",
    "residual", "residual_minus_k", "reconstruction_gap",
    "remainder_scale", "residual_ratio",
    "stirling_max", "g_sup", "g_bound", "g_bound_ok",
    "truncation_share", "window_lo", "window_hi", "delta",
    "degenerate", "skipped",
]


def report_fields() -> list[str]:
    """Column order of the flat AuditReport record."""
    return list(_REPORT_FIELDS)


def report_row(report: AuditReport) -> dict:
    return {name: getattr(report, name) for name in _REPORT_FIELDS}


def audit_report(params: ModelParams, delta: float | None = None) -> AuditReport:
    """Run the full decomposition at one parameter point.

    At q = 0 the exact lifetime is infinite and the audit is skipped.
    """
    if params.m > SUM_MAX_STATES:
        raise ValueError(f"audit limited to m <= {SUM_MAX_STATES}, got {params.m}")
    base = dict(
        m=params.m, ell=params.ell, kappa=params.kappa,
        sigma=params.sigma, q=params.q, theta=params.theta,
    )
    if params.q == 0.0:
        nan = math.nan
        return AuditReport(
            **base,
            ln_exact=math.inf, ln_k=nan, m_f_rho=nan, rho_star=nan,
            residual=nan, residual_minus_k=nan, reconstruction_gap=nan,
            remainder_scale=nan, residual_ratio=nan,
            stirling_max=nan, g_sup=nan, g_bound=nan, g_bound_ok=False,
            truncation_share=nan, window_lo=0, window_hi=0,
            delta=0.0, degenerate=False, skipped=True,
        )

    m = params.m
    ln_exact = log_expected_persistence_time(transition_probabilities(params))
    ln_k = log_boundary_constant(params)
    rho = rate_maximizer(params)
    m_f_rho = m * rate_function(min(max(rho, 0.0), 1.0), params)
    full = log_full_sum(params)
    scale = (1.0 + m * params.odds_power) * math.log(m) if m > 1 else math.nan

    if m > 1:
        stirling_max = float(np.max(np.abs(stirling_defect_all(m))))
        g_vals = np.array(
            [correction_term(i / m, params) for i in range(1, m)]
        ) if m <= 2000 else None
        if g_vals is None:
            # large chains: sample the grid to keep the audit fast
            idx = np.unique(np.linspace(1, m - 1, 2000).astype(int))
            g_vals = np.array([correction_term(i / m, params) for i in idx])
        g_sup = float(np.max(np.abs(g_vals)))
        g_bound = correction_bound(params)
        g_bound_ok = g_sup <= g_bound
    else:
        stirling_max = math.nan
        g_sup, g_bound, g_bound_ok = math.nan, math.nan, False

    try:
        window = log_window_sum(params, delta)
        share = -math.expm1(window.log_sum - full.log_sum)
        share = min(max(share, 0.0), 1.0)
        win_lo, win_hi, win_delta = window.i_lo, window.i_hi, window.delta
    except ValueError:
        share, win_lo, win_hi = math.nan, 0, 0
        win_delta = delta if delta is not None else m ** (2.0 / 3.0)

    residual = ln_exact - m_f_rho
    return AuditReport(
        **base,
        ln_exact=ln_exact,
        ln_k=ln_k,
        m_f_rho=m_f_rho,
        rho_star=rho,
        residual=residual,
        residual_minus_k=residual - ln_k,
        reconstruction_gap=ln_exact - full.log_reconstructed,
        remainder_scale=scale,
        residual_ratio=abs(residual) / scale if scale and not math.isnan(scale) else math.nan,
        stirling_max=stirling_max,
        g_sup=g_sup,
        g_bound=g_bound,
        g_bound_ok=g_bound_ok,
        truncation_share=share,
        window_lo=win_lo,
        window_hi=win_hi,
        delta=win_delta,
        degenerate=params.is_degenerate,
        skipped=False,
    )


def smallest_m_for_correction_bound(make_params, m_values) -> int | None:
    """First m in `m_values` from which the |G| envelope holds onward.

    `make_params` maps an integer m to a ModelParams.  Returns None when the
    envelope keeps failing.
    """
    holding_from = None
    for m in m_values:
        params = make_params(m)
        xs = np.arange(1, params.m) / params.m
        sup = max(abs(correction_term(float(x), params)) for x in xs)
        if sup <= correction_bound(params):
            if holding_from is None:
                holding_from = m
        else:
            holding_from = None
    return holding_from
