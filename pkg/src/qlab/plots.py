"""Figure rendering for the report paths.

Every report subcommand can render a PNG next to its delimited output when
asked to; the data files remain the primary interface and never depend on
these figures.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PHASE_COLORS = {
    "quasispecies": "tab:green",
    "neutral": "tab:orange",
    "critical": "tab:red",
    "no_threshold": "tab:gray",
}


def _finite(rows, key):
    out = []
    for row in rows:
        value = row.get(key)
        if isinstance(value, (int, float)) and math.isfinite(value):
            out.append(float(value))
        else:
            out.append(math.nan)
    return np.array(out)


def render_sweep(rows: list[dict], path) -> None:
    """Persistence vs discovery main exponents across the sweep, colored by
    the predicted phase."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    if rows:
        persistence = _finite(rows, "log_persistence_main")
        discovery = _finite(rows, "log_discovery")
        phases = [row.get("phase_by_offset", row.get("phase_by_times", "")) for row in rows]
        for phase in sorted(set(phases)):
            mask = np.array([p == phase for p in phases])
            ax.scatter(
                discovery[mask],
                persistence[mask],
                s=18,
                label=phase or "unlabeled",
                color=_PHASE_COLORS.get(phase, "tab:blue"),
            )
        lim = np.nanmax(np.concatenate([persistence, discovery, [1.0]]))
        line = np.linspace(0.0, lim * 1.05, 2)
        ax.plot(line, line, lw=0.8, color="k", ls="--", label="equal times")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("discovery exponent  ell ln kappa")
    ax.set_ylabel("persistence exponent  m phi((1-q)^ell)")
    ax.set_title("sweep: which time dominates")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_phase_diagram(rows: list[dict], path) -> None:
    """Offset constant c against the balance of the two log-times, with the
    critical offset marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    if rows:
        c_vals = _finite(rows, "c")
        balance = _finite(rows, "log_persistence_main") - _finite(rows, "log_discovery")
        phases = [row.get("phase_by_offset", "") for row in rows]
        for phase in sorted(set(phases)):
            mask = np.array([p == phase for p in phases])
            ax.scatter(
                c_vals[mask],
                balance[mask],
                s=20,
                label=phase or "unlabeled",
                color=_PHASE_COLORS.get(phase, "tab:blue"),
            )
        c_star = next(
            (row["c_star"] for row in rows if isinstance(row.get("c_star"), float)), None
        )
        if c_star is not None:
            ax.axvline(c_star, color="tab:red", lw=1.0, ls=":", label="critical offset")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("offset constant c")
    ax.set_ylabel("persistence exponent - discovery exponent")
    ax.set_title("phase diagram along the threshold offset")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_audit(rows: list[dict], path) -> None:
    """Residual-to-remainder ratio against the population size."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    live = [row for row in rows if not row.get("skipped")]
    if live:
        m_vals = _finite(live, "m")
        ratios = _finite(live, "residual_ratio")
        ax.plot(m_vals, ratios, "o-", ms=4)
        ax.set_xscale("log")
    ax.set_xlabel("population size m")
    ax.set_ylabel("|ln E - m F(rho*)| / ((1 + m Q^theta) ln m)")
    ax.set_title("audit: measured remainder ratio")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_samples(samples, mean: float, path) -> None:
    """Histogram of the hitting-time samples with the sample mean marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    if len(samples) > 0:
        ax.hist(samples, bins=min(60, max(10, len(samples) // 50)), color="tab:blue")
        ax.axvline(mean, color="tab:red", lw=1.2, label=f"mean = {mean:.4g}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("hitting time (steps)")
    ax.set_ylabel("replicas")
    ax.set_title("Monte Carlo hitting times")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
