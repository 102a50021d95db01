"""Command line interface.

Subcommands: ``generate`` (write a random instance file), ``run`` (execute
an experiment grid), ``sweep-theta`` (re-run the grid over minimum
confidence levels), ``validate`` (audit trace archives) and ``report``
(render figures from the emitted CSVs). The exit code is nonzero only on
operational errors; mission failures are ordinary data.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ChargePlanError
from .harness import (
    ExperimentConfig,
    read_metrics_csv,
    run_experiment,
    theta_sensitivity_sweep,
    validate_traces,
)
from .instance import generate_instance, save_instance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chargeplan",
                                     description="UAV recharge mission planning and simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random instance file")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--area", type=float, default=1000.0, help="square side in meters")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--name", default="")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run an experiment grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--root-seed", type=int, default=None)

    p = sub.add_parser("sweep-theta", help="re-run the grid per minimum confidence level")
    p.add_argument("--config", required=True)
    p.add_argument("--theta-min", type=float, nargs="+", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--root-seed", type=int, default=None)

    p = sub.add_parser("validate", help="audit trace archives")
    p.add_argument("--traces", nargs="+", required=True,
                   help="trace .jsonl files or directories containing them")
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="render figures from metrics CSVs")
    p.add_argument("--metrics", required=True)
    p.add_argument("--sweep", default=None)
    p.add_argument("--out", required=True)
    return parser


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "output_dir", None) is not None:
        config = replace(config, output_dir=args.output_dir)
    if getattr(args, "workers", None) is not None:
        config = replace(config, n_workers=args.workers)
    if getattr(args, "root_seed", None) is not None:
        config = replace(config, root_seed=args.root_seed)
    return config


def _trace_files(paths) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.jsonl")))
        else:
            files.append(path)
    return files


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            inst = generate_instance(args.nodes, args.area, args.seed, name=args.name)
            save_instance(inst, args.out)
            print(f"wrote {args.out} ({args.nodes} nodes, seed {args.seed})")
        elif args.command == "run":
            config = _apply_overrides(ExperimentConfig.from_json_file(args.config), args)
            records, _ = run_experiment(config)
            for r in records:
                p = "N/A" if r.p_star_mean is None else f"{r.p_star_mean:.3f}"
                print(f"{r.instance} {r.planner} mu={r.delta_mu:+.2f} "
                      f"sd={r.delta_sigma:+.2f} msr={r.msr:.2f} p*={p}")
            if config.output_dir:
                print(f"outputs in {config.output_dir}")
        elif args.command == "sweep-theta":
            config = _apply_overrides(ExperimentConfig.from_json_file(args.config), args)
            rows = theta_sensitivity_sweep(config, args.theta_min)
            for theta_min, r in rows:
                print(f"theta_min={theta_min:g} {r.instance} {r.planner} "
                      f"mu={r.delta_mu:+.2f} sd={r.delta_sigma:+.2f} msr={r.msr:.2f}")
            if config.output_dir:
                print(f"outputs in {config.output_dir}")
        elif args.command == "validate":
            files = _trace_files(args.traces)
            count = validate_traces(files, sample=args.sample, seed=args.seed)
            print(f"validated {count} traces from {len(files)} archives: OK")
        elif args.command == "report":
            from .report import render_report

            metrics_rows = read_metrics_csv(args.metrics)
            sweep_rows = None
            if args.sweep:
                sweep_rows = read_metrics_csv(args.sweep)
            written = render_report(metrics_rows, args.out, sweep_rows=sweep_rows)
            for path in written:
                print(f"wrote {path}")
    except (ChargePlanError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
