"""Command-line interface: one subcommand per experiment.

Each run writes a CSV (the data contract) plus a companion PNG figure into
the output directory. Exit codes: 0 ok, 1 config error, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys as _sys
from dataclasses import replace
from pathlib import Path

from . import harness, plots
from .configio import (
    ConfigError,
    default_estimated_trajectory_config,
    default_system_config,
    default_trajectory_config,
    dump_config,
    load_config_file,
)
from .estimator import EstimationError
from .gaindist import QuadratureError
from .harness import ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (overrides config)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predalloc",
        description="Energy-saving predictive resource allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pdf", help="equivalent-gain distribution validation")
    _add_common(p)
    p.add_argument("--ts", type=int, help="slots per frame (frame stays 1 s)")
    p.add_argument("--amplitude", type=float, help="estimated-trajectory error amplitude [m]")

    p = sub.add_parser("params", help="threshold/water-level statistics vs active ratio")
    _add_common(p)
    p.add_argument("--ts", type=int, nargs="+", help="slots-per-frame values")

    p = sub.add_parser("sweep", help="per-slot power vs active ratio")
    _add_common(p)
    p.add_argument("--ts", type=int, help="slots per frame")
    p.add_argument("--points", type=int, default=64, help="grid points")

    p = sub.add_parser("compare", help="energy vs deadline for all methods")
    _add_common(p)
    p.add_argument("--ts", type=int, help="slots per frame")
    p.add_argument("--deadlines", type=int, nargs="+", help="deadline frame counts")
    p.add_argument("--methods", nargs="+", help=f"subset of {harness.METHOD_ORDER}")
    p.add_argument("--slot-log", action="store_true", help="also dump per-slot logs")

    p = sub.add_parser("table1", help="deviation of realized optimum from estimate")
    _add_common(p)
    p.add_argument("--ts", type=int, nargs="+", help="slots-per-frame values")

    p = sub.add_parser("write-config", help="print the default config file")
    return parser


def _experiment_config(
    args: argparse.Namespace, experiment: str, default_trials: int = 200
) -> ExperimentConfig:
    sys_cfg = default_system_config()
    traj = default_trajectory_config()
    est = default_estimated_trajectory_config()
    run: dict = {}
    if args.config:
        sys_cfg, traj, est, run = load_config_file(args.config)
    seed = args.seed if args.seed is not None else run.get("seed", sys_cfg.rng_seed)
    trials = args.trials if args.trials is not None else run.get("trials", default_trials)
    cfg = ExperimentConfig(
        sys=sys_cfg,
        trajectory=traj,
        estimated_trajectory=est,
        n_trials=trials,
        experiment=experiment,
        output_path=args.out,
        seed=seed,
    )
    ts = getattr(args, "ts", None)
    if ts is not None:
        if isinstance(ts, list):
            cfg = replace(cfg, ts_values=tuple(ts))
        else:
            from .channel import with_slots_per_frame

            cfg = replace(cfg, sys=with_slots_per_frame(cfg.sys, ts))
    if getattr(args, "deadlines", None):
        cfg = replace(cfg, deadlines=tuple(args.deadlines))
    if getattr(args, "methods", None):
        cfg = replace(cfg, methods=tuple(args.methods))
    if getattr(args, "points", None):
        cfg = replace(cfg, kappa_grid_points=args.points)
    if getattr(args, "slot_log", False):
        cfg = replace(cfg, keep_slot_log=True)
    if getattr(args, "amplitude", None) is not None:
        cfg = replace(
            cfg, estimated_trajectory=replace(cfg.estimated_trajectory, amplitude_m=args.amplitude)
        )
    return cfg


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_pdf(args) -> int:
    cfg = _experiment_config(args, "pdf_validation", default_trials=10)
    result = harness.pdf_validation(cfg)
    out = _outdir(args)
    csv_path = out / "pdf_validation.csv"
    harness.write_csv(result.rows, str(csv_path))
    print(f"KS(true alphas)      = {result.ks_true:.5f}")
    print(f"KS(estimated alphas) = {result.ks_estimated:.5f}")
    print(f"wrote {csv_path}")
    if not args.no_plot:
        fig_path = out / "pdf_validation.png"
        plots.plot_pdf_validation(result.rows, result.ks_true, result.ks_estimated, str(fig_path))
        print(f"wrote {fig_path}")
    return EXIT_OK


def _cmd_params(args) -> int:
    cfg = _experiment_config(args, "param_stats")
    rows = harness.param_stats(cfg)
    out = _outdir(args)
    csv_path = out / "param_stats.csv"
    harness.write_csv(rows, str(csv_path))
    print(f"wrote {csv_path}")
    if not args.no_plot:
        fig_path = out / "param_stats.png"
        plots.plot_param_stats(rows, str(fig_path))
        print(f"wrote {fig_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args, "kappa_sweep")
    rows = harness.kappa_sweep(cfg)
    out = _outdir(args)
    csv_path = out / "kappa_sweep.csv"
    harness.write_csv(rows, str(csv_path))
    best = min((r for r in rows), key=lambda r: r["mu_omega"])
    print(f"analytic optimum near kappa = {best['kappa']:.4f} ({best['mu_omega']:.2f} W/slot)")
    print(f"wrote {csv_path}")
    if not args.no_plot:
        fig_path = out / "kappa_sweep.png"
        plots.plot_kappa_sweep(rows, str(fig_path))
        print(f"wrote {fig_path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _experiment_config(args, "energy_compare")
    trial_rows, agg_rows = harness.energy_compare(cfg)
    out = _outdir(args)
    agg_path = out / "energy_compare.csv"
    harness.write_csv(
        agg_rows,
        str(agg_path),
        fieldnames=[
            "deadline_frames",
            "method",
            "mean_energy_j",
            "mean_energy_above_sleep_j",
            "completion_rate",
            "mean_overtime_slots",
            "cap_hit_rate",
        ],
    )
    detail_path = out / "energy_compare_trials.csv"
    harness.write_csv(
        [dict(r.as_row(), deadline_frames=r.extras["deadline_frames"]) for r in trial_rows],
        str(detail_path),
        fieldnames=[
            "deadline_frames",
            "trial_id",
            "method",
            "energy_j",
            "deadline_met",
            "nu",
            "g_th",
            "kappa",
            "overtime_slots",
            "cap_hit_slots",
            "energy_above_sleep_j",
            "trace_checksum",
        ],
    )
    for row in agg_rows:
        print(
            f"T_f={row['deadline_frames']:>4} {row['method']:<7} "
            f"mean energy {row['mean_energy_j']:>12.1f} J  "
            f"completion {100 * row['completion_rate']:5.1f}%"
        )
    print(f"wrote {agg_path}")
    print(f"wrote {detail_path}")
    if cfg.keep_slot_log:
        _write_slot_log(cfg, out)
    if not args.no_plot:
        fig_path = out / "energy_compare.png"
        plots.plot_energy_compare(agg_rows, str(fig_path))
        print(f"wrote {fig_path}")
    return EXIT_OK


def _write_slot_log(cfg: ExperimentConfig, out: Path) -> None:
    log_cfg = replace(cfg, n_trials=min(cfg.n_trials, 3), keep_slot_log=True)
    records = harness.run_trials(log_cfg)
    rows = []
    for rec in records:
        log = rec.extras.get("per_slot_log")
        if log is None:
            continue
        active, power, rate = log
        for t in range(active.size):
            rows.append(
                {
                    "trial": rec.trial_id,
                    "method": rec.method,
                    "t": t + 1,
                    "m": int(active[t]),
                    "p_w": float(power[t]),
                    "rate_nats": float(rate[t]),
                }
            )
    path = out / "slot_log.csv"
    harness.write_csv(rows, str(path), fieldnames=["trial", "method", "t", "m", "p_w", "rate_nats"])
    print(f"wrote {path}")


def _cmd_table1(args) -> int:
    cfg = _experiment_config(args, "table1")
    detail, summaries = harness.table1_experiment(cfg)
    out = _outdir(args)
    csv_path = out / "table1.csv"
    harness.write_csv(detail, str(csv_path))
    for s in summaries:
        print(
            f"Ts={s.slots_per_frame:>5}: max dev nu {100 * s.max_dev_nu:.3f}%  "
            f"max dev g_th {100 * s.max_dev_gth:.3f}%  (n={s.n_trials})"
        )
    print(f"wrote {csv_path}")
    if not args.no_plot:
        fig_path = out / "table1.png"
        plots.plot_table1(detail, str(fig_path))
        print(f"wrote {fig_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "pdf":
            return _cmd_pdf(args)
        if args.command == "params":
            return _cmd_params(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "table1":
            return _cmd_table1(args)
        if args.command == "write-config":
            print(
                dump_config(
                    default_system_config(),
                    default_trajectory_config(),
                    default_estimated_trajectory_config(),
                ),
                end="",
            )
            return EXIT_OK
        parser.error(f"unknown command {args.command}")
    except ConfigError as err:
        print(f"config error: {err}", file=_sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, EstimationError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"I/O failure: {err}", file=_sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
