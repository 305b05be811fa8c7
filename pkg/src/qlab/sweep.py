"""Parameter sweeps: flat key=value configs, point generation, deterministic
parallel execution, CSV / JSON-lines output.

Config format: one `key = value` pair per line, `#` comments, repeated keys
forming lists.  Range values `linspace:lo:hi:n` and `logspace:lo:hi:n` expand
to n points (logspace endpoints are the values themselves, not exponents).

Recognized keys:
    m, ell, kappa, sigma, theta, q, c, alpha   numeric lists
    q_rule   = explicit | threshold_offset     (offset: q = ln(sigma)/ell - c/sqrt(ell m))
    m_rule   = explicit | alpha_times_ell      (m = round(alpha * ell))
    exact    = true | false                    add the exact log-lifetime column
    simulate = <runs>                          add lumped Monte Carlo columns
    seed     = <int>
    format   = csv | json
    output   = <path>

Every generated point must satisfy the model invariants; offending points are
skipped with a logged reason, never silently.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .asymptotics import (
    critical_offset,
    discovery_log_estimate,
    equilibrium_fraction,
    persistence_log_estimate,
)
from .chain import log_expected_persistence_time, transition_probabilities
from .model import ModelParams
from .simulate import simulate_lumped, summarize

log = logging.getLogger("qlab")

THREADS_ENV_VAR = "QLAB_THREADS"

_LIST_KEYS = ("m", "ell", "kappa", "sigma", "theta", "q", "c", "alpha")
_INT_KEYS = {"m", "ell", "kappa", "theta"}


class SweepConfigError(ValueError):
    """Raised on malformed sweep configs, pointing at the offending line."""


@dataclass
class SweepConfig:
    m: list[int] = field(default_factory=list)
    ell: list[int] = field(default_factory=list)
    kappa: list[int] = field(default_factory=lambda: [2])
    sigma: list[float] = field(default_factory=lambda: [2.0])
    theta: list[int] = field(default_factory=lambda: [1])
    q: list[float] = field(default_factory=list)
    c: list[float] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    q_rule: str = "explicit"
    m_rule: str = "explicit"
    exact: bool = False
    simulate: int = 0
    step_cap: int = 1_000_000
    seed: int = 0
    format: str = "csv"
    output: str | None = None

    def validate(self) -> None:
        if self.q_rule not in ("explicit", "threshold_offset"):
            raise SweepConfigError(f"unknown q_rule {self.q_rule!r}")
        if self.m_rule not in ("explicit", "alpha_times_ell"):
            raise SweepConfigError(f"unknown m_rule {self.m_rule!r}")
        if self.format not in ("csv", "json"):
            raise SweepConfigError(f"unknown format {self.format!r}")
        if not self.ell:
            raise SweepConfigError("field ell: at least one value required")
        if self.m_rule == "explicit" and not self.m:
            raise SweepConfigError("field m: at least one value required")
        if self.m_rule == "alpha_times_ell" and not self.alpha:
            raise SweepConfigError("m_rule alpha_times_ell requires alpha values")
        if self.q_rule == "explicit" and not self.q:
            raise SweepConfigError("field q: at least one value required")
        if self.q_rule == "threshold_offset" and not self.c:
            raise SweepConfigError("q_rule threshold_offset requires c values")
        if self.simulate < 0:
            raise SweepConfigError("simulate must be >= 0")
        if self.step_cap < 1:
            raise SweepConfigError("step_cap must be >= 1")


def _expand_value(text: str, line_no: int, key: str) -> list[float]:
    text = text.strip()
    if text.startswith(("linspace:", "logspace:")):
        kind, *parts = text.split(":")
        if len(parts) != 3:
            raise SweepConfigError(
                f"line {line_no}: field {key}: {kind} needs lo:hi:n, got {text!r}"
            )
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise SweepConfigError(f"line {line_no}: field {key}: {exc}") from None
        if n < 1:
            raise SweepConfigError(f"line {line_no}: field {key}: n must be >= 1")
        if n == 1:
            return [lo]
        if kind == "linspace":
            step = (hi - lo) / (n - 1)
            return [lo + i * step for i in range(n)]
        if lo <= 0 or hi <= 0:
            raise SweepConfigError(f"line {line_no}: field {key}: logspace needs positive bounds")
        ratio = (hi / lo) ** (1.0 / (n - 1))
        return [lo * ratio**i for i in range(n)]
    try:
        return [float(text)]
    except ValueError:
        raise SweepConfigError(
            f"line {line_no}: field {key}: cannot parse number {text!r}"
        ) from None


def parse_config(text: str) -> SweepConfig:
    config = SweepConfig()
    seen_lists: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SweepConfigError(f"line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _LIST_KEYS:
            values = _expand_value(value, line_no, key)
            if key in _INT_KEYS:
                values = [int(round(v)) for v in values]
            target = getattr(config, key)
            if key not in seen_lists:
                target.clear()
                seen_lists.add(key)
            target.extend(values)
        elif key in ("q_rule", "m_rule", "format"):
            setattr(config, key, value)
        elif key == "exact":
            if value.lower() not in ("true", "false", "yes", "no"):
                raise SweepConfigError(f"line {line_no}: field exact: expected true/false")
            config.exact = value.lower() in ("true", "yes")
        elif key in ("simulate", "seed", "step_cap"):
            try:
                setattr(config, key, int(value))
            except ValueError:
                raise SweepConfigError(
                    f"line {line_no}: field {key}: expected integer, got {value!r}"
                ) from None
        elif key == "output":
            config.output = value
        else:
            raise SweepConfigError(f"line {line_no}: unknown field {key!r}")
    config.validate()
    return config


def load_config(path: str | Path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def sweep_columns(config: SweepConfig) -> list[str]:
    cols = ["index", "m", "ell", "kappa", "sigma", "q", "theta"]
    if config.q_rule == "threshold_offset":
        cols.append("c")
    if config.m_rule == "alpha_times_ell":
        cols.append("alpha")
    cols += [
        "survival",
        "equilibrium_fraction",
        "log_persistence_main",
        "remainder_scale",
        "log_discovery",
        "phase_by_times",
    ]
    if config.q_rule == "threshold_offset":
        cols += ["c_star", "phase_by_offset"]
    if config.exact:
        cols.append("log_e_tau0")
    if config.simulate:
        cols += ["mc_mean", "mc_std_error", "mc_censored"]
    return cols


def _points(config: SweepConfig):
    """Deterministic nested-loop generation; the coupling rules turn the
    (alpha, c) lists into (m, q) values per point."""
    for sigma in config.sigma:
        for kappa in config.kappa:
            for ell in config.ell:
                m_choices = (
                    [(m, None) for m in config.m]
                    if config.m_rule == "explicit"
                    else [(int(round(a * ell)), a) for a in config.alpha]
                )
                for m, alpha in m_choices:
                    for theta in config.theta:
                        if config.q_rule == "explicit":
                            q_choices = [(q, None) for q in config.q]
                        else:
                            q_choices = [
                                (
                                    math.log(sigma) / ell - c / math.sqrt(ell * m)
                                    if m >= 1
                                    else math.nan,
                                    c,
                                )
                                for c in config.c
                            ]
                        for q, c in q_choices:
                            yield dict(
                                m=m, ell=ell, kappa=kappa, sigma=sigma,
                                q=q, theta=theta, c=c, alpha=alpha,
                            )


def _evaluate_point(index: int, point: dict, config: SweepConfig) -> dict | None:
    try:
        params = ModelParams(
            m=point["m"], ell=point["ell"], kappa=point["kappa"],
            sigma=point["sigma"], q=point["q"], theta=point["theta"],
        )
    except ValueError as exc:
        log.warning("skipping point %d (%s): %s", index, point, exc)
        return None
    est = persistence_log_estimate(params)
    discovery = discovery_log_estimate(params.ell, params.kappa)
    row = dict(
        index=index,
        m=params.m, ell=params.ell, kappa=params.kappa,
        sigma=params.sigma, q=params.q, theta=params.theta,
        survival=params.survival,
        equilibrium_fraction=equilibrium_fraction(params),
        log_persistence_main=est.log_main,
        remainder_scale=est.remainder_scale,
        log_discovery=discovery,
        phase_by_times="quasispecies" if est.log_main > discovery else "neutral",
    )
    if config.q_rule == "threshold_offset":
        c_star = critical_offset(params.sigma, params.kappa)
        row["c"] = point["c"]
        row["c_star"] = c_star
        row["phase_by_offset"] = (
            "quasispecies" if point["c"] > c_star else "neutral"
        )
    if config.m_rule == "alpha_times_ell":
        row["alpha"] = point["alpha"]
    if config.exact:
        row["log_e_tau0"] = log_expected_persistence_time(
            transition_probabilities(params)
        )
    if config.simulate:
        samples = simulate_lumped(
            params, config.simulate, seed=config.seed + index, step_cap=config.step_cap
        )
        stats = summarize(samples)
        row["mc_mean"] = stats.mean
        row["mc_std_error"] = stats.std_error
        row["mc_censored"] = samples.censored
    return row


def thread_count() -> int:
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        try:
            n = int(value)
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {value!r}")
        if n < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def run_sweep(config: SweepConfig) -> list[dict]:
    """Evaluate every point; rows come back in generation order regardless of
    how the pool schedules them."""
    config.validate()
    points = list(_points(config))
    workers = thread_count()
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(lambda args: _evaluate_point(*args, config), enumerate(points))
            )
    else:
        rows = [_evaluate_point(i, p, config) for i, p in enumerate(points)]
    return [row for row in rows if row is not None]


def format_number(value) -> str:
    """Shortest round-trip decimal form; inf and nan spelled out."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _json_ready(value):
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return format_number(value)
    return value


def write_rows(rows: list[dict], columns: list[str], fmt: str, path) -> None:
    """CSV (header, comma, LF) or JSON-lines, 17-significant-digit safe."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if fmt == "csv":
            handle.write(",".join(columns) + "\n")
            for row in rows:
                handle.write(
                    ",".join(format_number(row.get(col, "")) for col in columns) + "\n"
                )
        else:
            for row in rows:
                record = {col: _json_ready(row.get(col)) for col in columns}
                handle.write(json.dumps(record) + "\n")


def read_csv_rows(path) -> list[dict]:
    """Re-parse a CSV written by write_rows; numbers come back as floats."""
    with open(path, encoding="utf-8", newline="\n") as handle:
        lines = handle.read().splitlines()
    if not lines:
        return []
    columns = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = []
        for cell in line.split(","):
            try:
                values.append(float(cell))
            except ValueError:
                values.append(cell)
        rows.append(dict(zip(columns, values)))
    return rows
