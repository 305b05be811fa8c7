"""Seeded Monte Carlo estimation of persistence and discovery times.

Two simulators: the lumped two-type chain (validating the closed formula) and
the full sequence-level Moran process (validating the lumping sandwich).
Replicas draw from independent streams spawned from the root seed, so results
are deterministic per (seed, replica index) no matter how replicas are
scheduled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .chain import BirthDeathSpec, transition_probabilities
from .model import ModelParams

DEFAULT_STEP_CAP = 10**9

# full-model populations refuse sizes above this many cells
FULL_MODEL_MAX_CELLS = 10**8

# uniform draws are pre-generated per replica in growing chunks
_CHUNK_START = 128
_CHUNK_MAX = 8192


@dataclass(frozen=True)
class HittingSamples:
    """Monte Carlo samples of a hitting time, in generation steps.

    Censored replicas (still running at the step cap) are counted but not
    included in `samples`; len(samples) + censored == n_runs.
    """

    samples: np.ndarray
    seed: int
    n_runs: int
    censored: int
    step_cap: int


@dataclass(frozen=True)
class Summary:
    mean: float
    variance: float
    std_error: float
    ci95: tuple[float, float]
    n: int
    censored_fraction: float


def summarize(samples: HittingSamples) -> Summary:
    """Sample statistics over the uncensored replicas, normal-approx CI."""
    n = len(samples.samples)
    if n < 2:
        raise ValueError(f"need at least 2 uncensored samples, got {n}")
    mean = float(np.mean(samples.samples))
    variance = float(np.var(samples.samples, ddof=1))
    std_error = math.sqrt(variance / n)
    half = 1.96 * std_error
    return Summary(
        mean=mean,
        variance=variance,
        std_error=std_error,
        ci95=(mean - half, mean + half),
        n=n,
        censored_fraction=samples.censored / samples.n_runs,
    )


def _replica_streams(seed: int, n_runs: int):
    return np.random.SeedSequence(seed).spawn(n_runs)


def simulate_lumped(
    params: ModelParams,
    n_runs: int,
    seed: int,
    start: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
) -> HittingSamples:
    """Persistence time of the lumped chain by direct stepping.

    Each replica performs the three-outcome step (up, down, self loop) from
    `start` until it hits 0 or the step cap.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if step_cap < 1:
        raise ValueError(f"step_cap must be >= 1, got {step_cap}")
    if not 0 <= start <= params.m:
        raise ValueError(f"start must lie in [0, {params.m}], got {start}")
    if start == 0:
        warnings.warn("start = 0 is already absorbed; returning zero samples")
        return HittingSamples(
            samples=np.zeros(n_runs, dtype=np.int64),
            seed=seed, n_runs=n_runs, censored=0, step_cap=step_cap,
        )

    spec = transition_probabilities(params)
    up = spec.up.tolist()
    updown = (spec.up + spec.down).tolist()

    times = []
    censored = 0
    for stream in _replica_streams(seed, n_runs):
        rng = np.random.default_rng(stream)
        k = start
        t = 0
        chunk = _CHUNK_START
        buf = rng.random(chunk).tolist()
        pos = 0
        size = chunk
        while k != 0 and t < step_cap:
            if pos == size:
                chunk = min(chunk * 4, _CHUNK_MAX)
                buf = rng.random(chunk).tolist()
                pos = 0
                size = chunk
            u = buf[pos]
            pos += 1
            if u < up[k]:
                k += 1
            elif u < updown[k]:
                k -= 1
            t += 1
        if k == 0:
            times.append(t)
        else:
            censored += 1
    return HittingSamples(
        samples=np.array(times, dtype=np.int64),
        seed=seed, n_runs=n_runs, censored=censored, step_cap=step_cap,
    )


class SequencePopulation:
    """Population of genome strings under selection, mutation and replacement.

    Letters are coded 0..kappa-1 and the master sequence is the all-zero
    string.  One step = one replacement event: a parent is drawn with weight
    sigma for masters and 1 otherwise, its offspring mutates each site
    independently (uniform over the other letters), and the offspring
    replaces a slot drawn uniformly over the population (optionally excluding
    the parent's slot).

    Genomes live in plain lists and uniforms come from a buffered stream;
    steps at toy sizes cost a couple of microseconds, but every operation is
    O(m + ell) so large populations are feasible only for short runs.
    """

    def __init__(
        self,
        m: int,
        ell: int,
        kappa: int,
        sigma: float,
        q: float,
        rng: np.random.Generator,
        init: str,
        replace_excludes_parent: bool = False,
        check_cache: bool = False,
    ):
        if m < 1 or ell < 1 or kappa < 2 or not sigma > 1 or not 0 <= q < 1:
            raise ValueError("invalid full-model parameters")
        if m * ell > FULL_MODEL_MAX_CELLS:
            raise ValueError(f"population of {m}x{ell} cells exceeds the cap")
        if init not in ("one_master", "no_master"):
            raise ValueError(f"init must be one_master or no_master, got {init!r}")
        self.m, self.ell, self.kappa = m, ell, kappa
        self.sigma, self.q = sigma, q
        self.rng = rng
        self.replace_excludes_parent = replace_excludes_parent
        self.check_cache = check_cache
        self._buf: list[float] = []
        self._pos = 0
        self._chunk = _CHUNK_START

        self.population: list[list[int]] = []
        if init == "one_master":
            self.population.append([0] * ell)
        while len(self.population) < m:
            self.population.append(self._random_non_master())
        self.is_master = [not any(g) for g in self.population]
        self.master_count = sum(self.is_master)

    def _draw(self) -> float:
        if self._pos == len(self._buf):
            self._chunk = min(self._chunk * 4, _CHUNK_MAX)
            self._buf = self.rng.random(self._chunk).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def _random_non_master(self) -> list[int]:
        # uniform over the kappa^ell - 1 non-master strings, by rejection
        while True:
            genome = [int(u * self.kappa) for u in (self._draw() for _ in range(self.ell))]
            if any(genome):
                return genome

    def step(self) -> None:
        m, ell, kappa, q = self.m, self.ell, self.kappa, self.q
        # rejection sampling on fitness: masters accepted always, others 1/sigma
        accept = 1.0 / self.sigma
        while True:
            parent = int(self._draw() * m)
            if self.is_master[parent] or self._draw() < accept:
                break

        child = self.population[parent][:]
        for site in range(ell):
            if self._draw() < q:
                if kappa == 2:
                    child[site] ^= 1
                else:
                    shift = 1 + int(self._draw() * (kappa - 1))
                    child[site] = (child[site] + shift) % kappa

        if self.replace_excludes_parent:
            slot = int(self._draw() * (m - 1))
            if slot >= parent:
                slot += 1
        else:
            slot = int(self._draw() * m)

        child_is_master = not any(child)
        self.master_count += child_is_master - self.is_master[slot]
        self.is_master[slot] = child_is_master
        self.population[slot] = child

        if self.check_cache:
            recount = sum(not any(g) for g in self.population)
            assert recount == self.master_count, "master count cache out of sync"


def simulate_full(
    m: int,
    ell: int,
    kappa: int,
    sigma: float,
    q: float,
    n_runs: int,
    seed: int,
    init: str = "one_master",
    step_cap: int = DEFAULT_STEP_CAP,
    replace_excludes_parent: bool = False,
    check_cache: bool = False,
) -> HittingSamples:
    """Hitting time of the full sequence model.

    init = one_master: one master plus m-1 uniform non-masters; records the
    persistence time (first step with no masters left).
    init = no_master: m uniform non-masters; records the discovery time
    (first step with at least one master).
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if step_cap < 1:
        raise ValueError(f"step_cap must be >= 1, got {step_cap}")
    times = []
    censored = 0
    for stream in _replica_streams(seed, n_runs):
        rng = np.random.default_rng(stream)
        pop = SequencePopulation(
            m, ell, kappa, sigma, q, rng, init,
            replace_excludes_parent=replace_excludes_parent,
            check_cache=check_cache,
        )
        t = 0
        if init == "one_master":
            while pop.master_count > 0 and t < step_cap:
                pop.step()
                t += 1
            hit = pop.master_count == 0
        else:
            while pop.master_count == 0 and t < step_cap:
                pop.step()
                t += 1
            hit = pop.master_count > 0
        if hit:
            times.append(t)
        else:
            censored += 1
    return HittingSamples(
        samples=np.array(times, dtype=np.int64),
        seed=seed, n_runs=n_runs, censored=censored, step_cap=step_cap,
    )
