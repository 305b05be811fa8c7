"""Closed-form asymptotics: persistence and discovery log-estimates, the
error-threshold expansion, and regime classification.

The central object is the persistence rate, the function of the error-free
replication probability whose value times the population size gives the
leading exponent of the expected persistence time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import DEGENERATE_DEFICIT, ModelParams

# below this distance from the removable singularity the rate switches to a
# cubic series; the direct quotient loses too many digits to cancellation
SERIES_CUTOFF = 1e-6


def persistence_rate(x: float, sigma: float) -> float:
    """Exponential rate of the persistence time per individual.

    Evaluated at x = (1-q)^ell.  Vanishes quadratically at x = 1/sigma and
    increases to ln(sigma) at x = 1.  The quotient has a removable zero at
    x = (sigma-1)/sigma, crossed via a series branch.
    """
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must lie in (0, 1], got {x}")
    u = sigma * (1.0 - x)
    d = 1.0 - u
    if abs(d) < SERIES_CUTOFF:
        return _persistence_rate_series(d, sigma)
    num = math.log(sigma * x)
    if u > 0.0:
        num += u * math.log(u / (sigma - 1.0))
    return num / d


def _persistence_rate_series(d: float, sigma: float) -> float:
    """Cubic expansion of the rate in d = 1 - sigma(1-x) around d = 0."""
    s1 = sigma - 1.0
    c0 = math.log(s1) + 1.0 / s1 - 1.0
    c1 = 0.5 * (1.0 - 1.0 / s1**2)
    c2 = 1.0 / 6.0 + 1.0 / (3.0 * s1**3)
    c3 = 1.0 / 12.0 - 1.0 / (4.0 * s1**4)
    return c0 + d * (c1 + d * (c2 + d * c3))


def persistence_rate_inverse(y: float, sigma: float) -> float:
    """The x in [1/sigma, 1] with persistence_rate(x) = y.

    The rate is a monotone bijection from [1/sigma, 1] onto [0, ln sigma];
    bisection brings |rate(x) - y| below 1e-12.  Endpoints come back exactly.
    """
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    top = math.log(sigma)
    if not 0.0 <= y <= top:
        raise ValueError(f"y must lie in [0, ln sigma] = [0, {top}], got {y}")
    if y == 0.0:
        return 1.0 / sigma
    if y == top:
        return 1.0
    lo, hi = 1.0 / sigma, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if persistence_rate(mid, sigma) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def persistence_rate_curvature(sigma: float) -> float:
    """Second derivative of the rate at its root 1/sigma: sigma^2/(sigma-1)."""
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    return sigma**2 / (sigma - 1.0)


def persistence_rate_quadratic(x: float, sigma: float) -> float:
    """Quadratic approximation of the rate near its root:
    (x - 1/sigma)^2 sigma^2 / (2 (sigma-1))."""
    return (x - 1.0 / sigma) ** 2 * persistence_rate_curvature(sigma) / 2.0


@dataclass(frozen=True)
class EquilibriumFraction:
    """Master fraction maximizing the chain's large-deviation weight."""

    value: float
    in_quasispecies: bool  # value >= 0, i.e. sigma (1-q)^ell >= 1
    degenerate_value: float  # modified maximizer used in the degenerate branch
    degenerate_coefficient: float  # first-order coefficient in odds_power


def equilibrium_fraction(params: ModelParams) -> float:
    """(sigma (1-q)^ell - 1) / (sigma - 1), the equilibrium master fraction.

    May be negative; then the quasispecies phase does not hold together and
    callers should treat estimates as out of hypothesis.
    """
    sigma = params.sigma
    return 1.0 - sigma * params.loss_prob / (sigma - 1.0)


def equilibrium_fraction_detail(params: ModelParams) -> EquilibriumFraction:
    """Equilibrium fraction plus its degenerate-branch expansion.

    The modified maximizer (sigma s - 1 + s Q^theta) / (sigma - 1 + s Q^theta)
    expands as value + coefficient * Q^theta; the coefficient is
    sigma s (1 - s) / (sigma - 1)^2 to first order.
    """
    sigma = params.sigma
    s = params.survival
    conv = params.conversion_prob
    value = equilibrium_fraction(params)
    modified = 1.0 - sigma * params.loss_prob / (sigma - 1.0 + conv)
    coefficient = sigma * s * params.loss_prob / (sigma - 1.0) ** 2
    return EquilibriumFraction(
        value=value,
        in_quasispecies=value >= 0.0,
        degenerate_value=modified,
        degenerate_coefficient=coefficient,
    )


@dataclass(frozen=True)
class PersistenceEstimate:
    """Leading exponent of E(tau_0 | N_0 = 1) and the scale of its remainder."""

    log_main: float  # m * persistence_rate((1-q)^ell)
    remainder_scale: float  # (1 + m Q^theta) ln m
    degenerate_term: float | None  # extra m q / (L (sigma L + (sigma-1) q))
    in_hypothesis: bool  # equilibrium fraction >= 0


def persistence_log_estimate(params: ModelParams) -> PersistenceEstimate:
    """Two-part estimate of ln E(tau_0): the main exponent plus the size of
    the uncontrolled remainder.  In the degenerate regime the extra term is
    reported separately with its sign."""
    m = params.m
    main = m * persistence_rate(params.survival, params.sigma)
    scale = (1.0 + m * params.odds_power) * math.log(m)
    extra = None
    if params.is_degenerate:
        deficit = params.replication_deficit
        denom = deficit * (params.sigma * deficit + (params.sigma - 1.0) * params.q)
        extra = math.inf if denom == 0.0 else m * params.q / denom
    return PersistenceEstimate(
        log_main=main,
        remainder_scale=scale,
        degenerate_term=extra,
        in_hypothesis=equilibrium_fraction(params) >= 0.0,
    )


def discovery_log_estimate(ell: int, kappa: int) -> float:
    """Leading exponent of the expected discovery time: ell * ln(kappa)."""
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    return ell * math.log(kappa)


def critical_offset(sigma: float, kappa: int) -> float:
    """The threshold constant sqrt(2 (sigma-1) ln kappa)."""
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    return math.sqrt(2.0 * (sigma - 1.0) * math.log(kappa))


@dataclass(frozen=True)
class ThresholdExpansion:
    """Two-term expansion q* = ln(sigma)/ell - c*/sqrt(ell m)."""

    q_star: float
    c_star: float
    leading: float  # ln(sigma)/ell
    correction: float  # c*/sqrt(ell m)
    population_ratio: float  # m/ell, should diverge for validity
    length_ratio: float  # ell^2/(m ln m), should diverge for validity
    regime_plausible: bool


def error_threshold(sigma: float, kappa: int, ell: int, m: int) -> ThresholdExpansion:
    """Finite-population error threshold in the large-population regime.

    The caller is responsible for m/ell and ell^2/(m ln m) both being large;
    the attached ratios and flag are a plausibility hint, not a guarantee.
    """
    if ell < 1 or m < 1:
        raise ValueError(f"ell and m must be >= 1, got ell={ell}, m={m}")
    c_star = critical_offset(sigma, kappa)
    leading = math.log(sigma) / ell
    correction = c_star / math.sqrt(ell * m)
    population_ratio = m / ell
    length_ratio = math.inf if m == 1 else ell * ell / (m * math.log(m))
    return ThresholdExpansion(
        q_star=leading - correction,
        c_star=c_star,
        leading=leading,
        correction=correction,
        population_ratio=population_ratio,
        length_ratio=length_ratio,
        regime_plausible=population_ratio > 1.0 and length_ratio > 1.0,
    )


def master_fraction(c: float, sigma: float, ell: int, m: int) -> float:
    """Equilibrium proportion of masters at offset c past the threshold:
    c / (sigma - 1) * sqrt(ell / m)."""
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    if ell < 1 or m < 1:
        raise ValueError(f"ell and m must be >= 1, got ell={ell}, m={m}")
    return c / (sigma - 1.0) * math.sqrt(ell / m)


def threshold_survival_target(sigma: float, kappa: int, alpha: float) -> float:
    """The limit of (1-q*)^ell when m/ell tends to alpha: the rate inverse of
    ln(kappa)/alpha.  Only defined past alpha = ln(kappa)/ln(sigma)."""
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    floor = math.log(kappa) / math.log(sigma)
    if not alpha > floor:
        raise ValueError(
            f"no threshold: alpha must exceed ln(kappa)/ln(sigma) = {floor}, got {alpha}"
        )
    return persistence_rate_inverse(math.log(kappa) / alpha, sigma)


def q_from_survival_target(x_star: float, ell: int) -> float:
    """Per-site mutation probability with (1-q)^ell = x_star:
    q = 1 - x_star^(1/ell), evaluated as -expm1(ln(x_star)/ell)."""
    if not 0.0 < x_star <= 1.0:
        raise ValueError(f"x_star must lie in (0, 1], got {x_star}")
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    return -math.expm1(math.log(x_star) / ell)


class PhaseLabel(enum.Enum):
    NEUTRAL = "neutral"
    QUASISPECIES = "quasispecies"
    CRITICAL = "critical"
    NO_THRESHOLD = "no_threshold"


# relative tolerance of the tie detection; exact ties are measure zero and the
# label is for reporting only
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeSpec:
    """Asymptotic-regime descriptors.

    a      limit of ell * q (positive)
    alpha  limit of m / ell (0, finite, or +inf)
    c      offset constant in q = ln(sigma)/ell - c/sqrt(ell m); used only
           when alpha is infinite
    """

    a: float
    alpha: float
    c: float = 0.0

    def __post_init__(self) -> None:
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a}")
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be >= 0 (possibly inf), got {self.alpha}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be non-negative and finite, got {self.c}")


@dataclass(frozen=True)
class RegimeDecision:
    label: PhaseLabel
    c_star: float | None  # critical offset, alpha = inf branch
    survival_target: float | None  # x*, finite-alpha branch
    rho_condition_ok: bool  # sigma e^{-a} - 1 >= 0
    degenerate: bool  # sigma e^{-a} - 1 == sigma - 2 at working precision


def _tie(u: float, v: float) -> bool:
    return abs(u - v) <= _TIE_RTOL * max(abs(u), abs(v))


def classify_regime(spec: RegimeSpec, sigma: float, kappa: int) -> RegimeDecision:
    """Phase of the regime described by `spec`.

    With alpha infinite the offset c is compared against the critical offset.
    With alpha finite the threshold exists only past ln(kappa)/ln(sigma); the
    side is then decided by comparing e^{-a} with the survival target.  The
    sigma e^{-a} < 1 regime is flagged, not decided, because the estimates do
    not reach the needed precision there.
    """
    if not sigma > 1:
        raise ValueError(f"sigma must be > 1, got {sigma}")
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    survival_limit = math.exp(-spec.a)
    rho_ok = sigma * survival_limit - 1.0 >= 0.0
    degenerate = _tie(sigma * survival_limit - 1.0, sigma - 2.0)

    if math.isinf(spec.alpha):
        c_star = critical_offset(sigma, kappa)
        if _tie(spec.c, c_star):
            label = PhaseLabel.CRITICAL
        elif spec.c < c_star:
            label = PhaseLabel.NEUTRAL
        else:
            label = PhaseLabel.QUASISPECIES
        return RegimeDecision(label, c_star, None, rho_ok, degenerate)

    floor = math.log(kappa) / math.log(sigma)
    if spec.alpha <= floor:
        return RegimeDecision(PhaseLabel.NO_THRESHOLD, None, None, rho_ok, degenerate)

    target = threshold_survival_target(sigma, kappa, spec.alpha)
    if _tie(survival_limit, target):
        label = PhaseLabel.CRITICAL
    elif survival_limit > target:
        label = PhaseLabel.QUASISPECIES
    else:
        label = PhaseLabel.NEUTRAL
    return RegimeDecision(label, None, target, rho_ok, degenerate)
