"""Parameters of the sharp-peak Moran model and derived scalar quantities.

Everything downstream (chain construction, asymptotics, audits, simulation)
consumes a single frozen :class:`ModelParams`.  Derived quantities that are
prone to catastrophic cancellation are computed once here in a safe form:
``(1-q)^ell`` goes through ``exp(ell * log1p(-q))`` and the mutation-odds
power through logs, so that ``q`` as small as 1e-6 with ``ell ~ 1e6`` stays
representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# |replication deficit| below this counts as the degenerate regime, where the
# persistence-time expansion needs an extra correction term and the audit
# switches to the modified rate function.
DEGENERATE_DEFICIT = 1e-3


@dataclass(frozen=True)
class ModelParams:
    """One instance of the lumped two-type model.

    m      population size
    ell    genome length
    kappa  alphabet size
    sigma  selective advantage of the master sequence (> 1)
    q      per-site mutation probability, in [0, 1)
    theta  number of mutations a non-master needs to become a master
    """

    m: int
    ell: int
    kappa: int
    sigma: float
    q: float
    theta: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell}")
        if self.kappa < 2:
            raise ValueError(f"kappa must be an integer >= 2, got {self.kappa}")
        if not self.sigma > 1:
            raise ValueError(f"sigma must be > 1, got {self.sigma}")
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        if not 1 <= self.theta <= self.ell:
            raise ValueError(
                f"theta must lie in [1, ell] = [1, {self.ell}], got {self.theta}"
            )

    @property
    def log_survival(self) -> float:
        """ln (1-q)^ell, log-probability that a replication is error free."""
        return self.ell * math.log1p(-self.q)

    @property
    def survival(self) -> float:
        """(1-q)^ell, probability that a replication is error free."""
        return math.exp(self.log_survival)

    @property
    def loss_prob(self) -> float:
        """1 - (1-q)^ell, computed without cancellation for small ell*q."""
        return -math.expm1(self.log_survival)

    @property
    def log_mutation_odds(self) -> float:
        """ln of q / ((1-q)(kappa-1)); -inf at q = 0."""
        if self.q == 0.0:
            return -math.inf
        return math.log(self.q) - math.log1p(-self.q) - math.log(self.kappa - 1)

    @property
    def mutation_odds(self) -> float:
        """Odds that a site mutates to one specific target letter."""
        if self.q == 0.0:
            return 0.0
        return math.exp(self.log_mutation_odds)

    @property
    def odds_power(self) -> float:
        """mutation_odds ** theta, the weight of the theta needed mutations."""
        if self.q == 0.0:
            return 0.0
        return math.exp(self.theta * self.log_mutation_odds)

    @property
    def conversion_prob(self) -> float:
        """(1-q)^(ell-theta) (q/(kappa-1))^theta, probability that a
        non-master offspring acquires exactly the mutations turning it into a
        master (equals survival * odds_power)."""
        if self.q == 0.0:
            return 0.0
        log_p = (self.ell - self.theta) * math.log1p(-self.q) + self.theta * (
            math.log(self.q) - math.log(self.kappa - 1)
        )
        return math.exp(log_p)

    @property
    def replication_deficit(self) -> float:
        """sigma - 1 - sigma (1-q)^ell, the margin by which error-free
        reproduction fails to cover the selective advantage.  Negative values
        mean masters replicate faithfully enough to persist easily."""
        return self.sigma * self.loss_prob - 1.0

    @property
    def is_degenerate(self) -> bool:
        """True when the deficit is so small that the degenerate expansion
        branch applies."""
        return abs(self.replication_deficit) < DEGENERATE_DEFICIT
