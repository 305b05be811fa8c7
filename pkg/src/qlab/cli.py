"""Command-line front end.

Subcommands: exact, threshold, simulate, audit, sweep, phase-diagram.
Machine-readable output is CSV (header row, comma, LF) or JSON lines; floats
are serialized in shortest round-trip form.  Report subcommands can render a
PNG figure next to the delimited output via --plot.

Exit codes: 0 success, 2 usage error, 3 numeric-domain error,
4 no-threshold (informational, success class).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import plots
from .asymptotics import (
    critical_offset,
    error_threshold,
    q_from_survival_target,
    threshold_survival_target,
)
from .audit import audit_report, report_fields, report_row
from .chain import log_expected_persistence_time, persistence_time_oracle, transition_probabilities
from .model import ModelParams
from .simulate import simulate_full, simulate_lumped, summarize
from .sweep import (
    SweepConfig,
    SweepConfigError,
    format_number,
    load_config,
    run_sweep,
    sweep_columns,
    write_rows,
)

log = logging.getLogger("qlab")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NO_THRESHOLD = 4

# largest ln E(tau_0) whose exponential still fits a double
_MAX_LOG_DOUBLE = math.log(sys.float_info.max)


def _json_ready(record: dict) -> dict:
    out = {}
    for key, value in record.items():
        if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
            out[key] = format_number(value)
        else:
            out[key] = value
    return out


def _emit_records(records: list[dict], columns: list[str], args) -> None:
    """One record per line: text key=value blocks, JSON lines, or CSV."""
    fmt = args.format
    if args.output:
        write_rows(records, columns, "csv" if fmt == "text" else fmt, args.output)
        log.info("wrote %d row(s) to %s", len(records), args.output)
        return
    if fmt == "json":
        for record in records:
            print(json.dumps(_json_ready({c: record.get(c) for c in columns})))
    elif fmt == "csv":
        print(",".join(columns))
        for record in records:
            print(",".join(format_number(record.get(c, "")) for c in columns))
    else:
        for record in records:
            for column in columns:
                print(f"{column} = {format_number(record.get(column, ''))}")
            if len(records) > 1:
                print()


def _add_model_args(parser: argparse.ArgumentParser, repeat_m: bool = False) -> None:
    if repeat_m:
        parser.add_argument("--m", type=int, action="append", required=True,
                            help="population size (repeatable)")
    else:
        parser.add_argument("--m", type=int, required=True, help="population size")
    parser.add_argument("--ell", type=int, required=True, help="genome length")
    parser.add_argument("--kappa", type=int, required=True, help="alphabet size")
    parser.add_argument("--sigma", type=float, required=True, help="master fitness")
    parser.add_argument("--q", type=float, required=True, help="per-site mutation probability")
    parser.add_argument("--theta", type=int, default=1,
                        help="mutations needed to become a master (default 1)")


def _add_output_args(parser: argparse.ArgumentParser, with_plot: bool = False) -> None:
    parser.add_argument("--format", choices=("text", "csv", "json"), default="text")
    parser.add_argument("--output", help="write to this file instead of stdout (text becomes csv)")
    if with_plot:
        parser.add_argument("--plot", nargs="?", const="", metavar="PNG",
                            help="render a figure (default: next to --output)")


def _plot_path(args) -> str | None:
    if getattr(args, "plot", None) is None:
        return None
    if args.plot:
        return args.plot
    if args.output:
        base = args.output.rsplit(".", 1)[0]
        return base + ".png"
    raise ValueError("--plot needs a path when --output is not given")


def cmd_exact(args) -> int:
    params = ModelParams(m=args.m, ell=args.ell, kappa=args.kappa,
                         sigma=args.sigma, q=args.q, theta=args.theta)
    spec = transition_probabilities(params)
    if args.start == 1:
        log_e = log_expected_persistence_time(spec)
    else:
        log_e = persistence_time_oracle(spec, args.start)
    record = dict(m=params.m, ell=params.ell, kappa=params.kappa, sigma=params.sigma,
                  q=params.q, theta=params.theta, start=args.start, log_e_tau0=log_e)
    columns = list(record.keys())
    if math.isfinite(log_e) and log_e < _MAX_LOG_DOUBLE:
        record["e_tau0"] = math.exp(log_e)
        columns.append("e_tau0")
    if args.format == "json" and not args.output:
        nested = {
            "params": {k: record[k] for k in ("m", "ell", "kappa", "sigma", "q", "theta")},
            "start": args.start,
            "log_e_tau0": record["log_e_tau0"],
        }
        if "e_tau0" in record:
            nested["e_tau0"] = record["e_tau0"]
        print(json.dumps(_json_ready(nested)))
    else:
        _emit_records([record], columns, args)
    return EXIT_OK


def cmd_threshold(args) -> int:
    pair_given = args.ell is not None or args.m is not None
    if args.alpha is not None and pair_given:
        raise ValueError("give either --ell with --m, or --alpha, not both")
    if args.alpha is None and (args.ell is None or args.m is None):
        raise ValueError("give both --ell and --m, or --alpha")

    if args.alpha is not None:
        c_star = critical_offset(args.sigma, args.kappa)
        floor = math.log(args.kappa) / math.log(args.sigma)
        record = dict(sigma=args.sigma, kappa=args.kappa, alpha=args.alpha,
                      alpha_floor=floor, c_star=c_star)
        if args.alpha <= floor:
            record["phase"] = "no_threshold"
            _emit_records([record], list(record.keys()), args)
            log.info("no threshold: alpha <= ln(kappa)/ln(sigma)")
            return EXIT_NO_THRESHOLD
        x_star = threshold_survival_target(args.sigma, args.kappa, args.alpha)
        record["survival_target"] = x_star
        _emit_records([record], list(record.keys()), args)
        return EXIT_OK

    expansion = error_threshold(args.sigma, args.kappa, args.ell, args.m)
    record = dict(sigma=args.sigma, kappa=args.kappa, ell=args.ell, m=args.m,
                  q_star=expansion.q_star, c_star=expansion.c_star,
                  leading=expansion.leading, correction=expansion.correction,
                  population_ratio=expansion.population_ratio,
                  length_ratio=expansion.length_ratio,
                  regime_plausible=expansion.regime_plausible)
    _emit_records([record], list(record.keys()), args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.model == "lumped":
        params = ModelParams(m=args.m, ell=args.ell, kappa=args.kappa,
                             sigma=args.sigma, q=args.q, theta=args.theta)
        samples = simulate_lumped(params, args.runs, seed=args.seed,
                                  start=args.start, step_cap=args.step_cap)
    else:
        samples = simulate_full(m=args.m, ell=args.ell, kappa=args.kappa,
                                sigma=args.sigma, q=args.q, n_runs=args.runs,
                                seed=args.seed, init=args.init,
                                step_cap=args.step_cap,
                                replace_excludes_parent=args.exclude_parent)
    stats = summarize(samples)
    record = dict(model=args.model, m=args.m, ell=args.ell, kappa=args.kappa,
                  sigma=args.sigma, q=args.q, runs=args.runs, seed=args.seed,
                  step_cap=args.step_cap, n_uncensored=stats.n,
                  censored=samples.censored, mean=stats.mean,
                  variance=stats.variance, std_error=stats.std_error,
                  ci_lo=stats.ci95[0], ci_hi=stats.ci95[1])
    if args.model == "lumped":
        record["theta"] = args.theta
        record["start"] = args.start
    else:
        record["init"] = args.init
    _emit_records([record], list(record.keys()), args)
    figure = _plot_path(args)
    if figure:
        plots.render_samples(samples.samples, stats.mean, figure)
        log.info("wrote figure %s", figure)
    return EXIT_OK


def cmd_audit(args) -> int:
    rows = []
    for m in args.m:
        params = ModelParams(m=m, ell=args.ell, kappa=args.kappa,
                             sigma=args.sigma, q=args.q, theta=args.theta)
        rows.append(report_row(audit_report(params, delta=args.delta)))
    _emit_records(rows, report_fields(), args)
    figure = _plot_path(args)
    if figure:
        plots.render_audit(rows, figure)
        log.info("wrote figure %s", figure)
    return EXIT_OK


def _run_sweep_command(config: SweepConfig, args, phase_diagram: bool) -> int:
    rows = run_sweep(config)
    columns = sweep_columns(config)
    if args.output:
        config.output = args.output
    if config.output:
        write_rows(rows, columns, config.format, config.output)
        log.info("wrote %d row(s) to %s", len(rows), config.output)
    else:
        payload = [{c: row.get(c) for c in columns} for row in rows]
        if config.format == "json":
            for record in payload:
                print(json.dumps(_json_ready(record)))
        else:
            print(",".join(columns))
            for record in payload:
                print(",".join(format_number(record.get(c, "")) for c in columns))
    figure = _plot_path(args)
    if figure:
        if phase_diagram:
            plots.render_phase_diagram(rows, figure)
        else:
            plots.render_sweep(rows, figure)
        log.info("wrote figure %s", figure)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        config = load_config(args.config)
    except SweepConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.format is not None:
        config.format = args.format
    if args.seed is not None:
        config.seed = args.seed
    return _run_sweep_command(config, args, phase_diagram=False)


def cmd_phase_diagram(args) -> int:
    step = (args.c_max - args.c_min) / (args.c_steps - 1) if args.c_steps > 1 else 0.0
    config = SweepConfig(
        m=args.m, ell=args.ell, kappa=[args.kappa], sigma=[args.sigma],
        theta=[args.theta],
        c=[args.c_min + i * step for i in range(args.c_steps)],
        q_rule="threshold_offset",
        exact=args.exact,
        format=args.format or "csv",
        seed=args.seed or 0,
    )
    return _run_sweep_command(config, args, phase_diagram=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlab",
        description="Persistence times and error thresholds of the sharp-peak Moran model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_exact = sub.add_parser("exact", help="closed-form expected persistence time")
    _add_model_args(p_exact)
    p_exact.add_argument("--start", type=int, default=1,
                         help="starting master count (default 1; other values use the solver)")
    _add_output_args(p_exact)
    p_exact.set_defaults(func=cmd_exact)

    p_thr = sub.add_parser("threshold", help="finite-population error threshold")
    p_thr.add_argument("--sigma", type=float, required=True)
    p_thr.add_argument("--kappa", type=int, required=True)
    p_thr.add_argument("--ell", type=int)
    p_thr.add_argument("--m", type=int)
    p_thr.add_argument("--alpha", type=float, help="limit of m/ell (instead of --ell/--m)")
    _add_output_args(p_thr)
    p_thr.set_defaults(func=cmd_threshold)

    p_sim = sub.add_parser("simulate", help="Monte Carlo hitting times")
    p_sim.add_argument("--model", choices=("lumped", "full"), default="lumped")
    _add_model_args(p_sim)
    p_sim.add_argument("--runs", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--start", type=int, default=1, help="lumped starting count")
    p_sim.add_argument("--init", choices=("one_master", "no_master"), default="one_master",
                       help="full-model initial population")
    p_sim.add_argument("--step-cap", type=int, default=10**9, dest="step_cap")
    p_sim.add_argument("--exclude-parent", action="store_true",
                       help="full model: replacement never hits the parent slot")
    _add_output_args(p_sim, with_plot=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_audit = sub.add_parser("audit", help="Laplace-decomposition audit rows")
    _add_model_args(p_audit, repeat_m=True)
    p_audit.add_argument("--delta", type=float, help="truncation window width (default m^(2/3))")
    _add_output_args(p_audit, with_plot=True)
    p_audit.set_defaults(func=cmd_audit)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--output", help="override the config output path")
    p_sweep.add_argument("--format", choices=("csv", "json"))
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--plot", nargs="?", const="", metavar="PNG")
    p_sweep.set_defaults(func=cmd_sweep)

    p_phase = sub.add_parser("phase-diagram",
                             help="threshold-offset sweep preset at fixed sigma, kappa")
    p_phase.add_argument("--sigma", type=float, required=True)
    p_phase.add_argument("--kappa", type=int, required=True)
    p_phase.add_argument("--ell", type=int, action="append", required=True)
    p_phase.add_argument("--m", type=int, action="append", required=True)
    p_phase.add_argument("--theta", type=int, default=1)
    p_phase.add_argument("--c-min", type=float, default=0.5, dest="c_min")
    p_phase.add_argument("--c-max", type=float, default=1.8, dest="c_max")
    p_phase.add_argument("--c-steps", type=int, default=14, dest="c_steps")
    p_phase.add_argument("--exact", action="store_true",
                         help="add the exact log-lifetime column (costly for large m)")
    p_phase.add_argument("--seed", type=int)
    p_phase.add_argument("--output")
    p_phase.add_argument("--format", choices=("csv", "json"))
    p_phase.add_argument("--plot", nargs="?", const="", metavar="PNG")
    p_phase.set_defaults(func=cmd_phase_diagram)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SweepConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
