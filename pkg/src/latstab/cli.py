"""Command-line entry points: run scenarios, build reports, sweep the speed
frontier, and regenerate solver oracle fixtures."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path as FsPath

from .config import ConfigError, ScenarioConfig, load_config, preset, save_config
from .harness import (MismatchedRunsError, RunResult, estimation_report,
                      format_estimation_table, read_trajectory_csv, run_scenario,
                      speed_frontier)

EXIT_CONFIG = 2
EXIT_IO = 3


def _load_or_preset(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.scenario or "dlc")
    if args.scenario:
        cfg = replace(cfg, scenario=args.scenario)
    if args.controller:
        cfg = replace(cfg, controller=args.controller)
    if args.mu is not None:
        cfg = replace(cfg, mu=args.mu)
    if args.v0 is not None:
        cfg = replace(cfg, v0_kmh=args.v0)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    return cfg


def _add_common(p):
    p.add_argument("--config", type=str, default=None, help="INI config file")
    p.add_argument("--scenario", choices=["dlc", "curve"], default=None)
    p.add_argument("--controller", choices=["nmpc_rhonn", "nmpc_mf", "lmpc", "off"], default=None)
    p.add_argument("--mu", type=float, default=None, help="road adhesion coefficient")
    p.add_argument("--v0", type=float, default=None, help="initial speed in km/h")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")


def cmd_run(args) -> int:
    cfg = _load_or_preset(args)
    if args.identification_only:
        cfg = replace(cfg, identification_only=True, estimators=True)
    if args.estimators:
        cfg = replace(cfg, estimators=True)
    res = run_scenario(cfg, out_dir=args.out)
    m = res.metrics
    print(f"scenario={m['scenario']} controller={m['controller']} mu={m['mu']} "
          f"v0={m['v0_kmh']} km/h")
    print(f"termination={m['termination']} completed={m['completed']} "
          f"ticks={m['n_ticks']} final_t={m['final_t']:.2f} s")
    print(f"max_deviation={m['max_deviation']:.3f} m  phase_area={m['phase_area']:.6f}  "
          f"mean_compute={m['mean_compute_ms']:.2f} ms  saturations={m['saturation_count']}")
    if m["estimation"]:
        print(format_estimation_table(m["estimation"]))
    if args.out:
        print(f"wrote {args.out}/trajectory.csv, summary.json, run.ini")
    return 0


def cmd_report(args) -> int:
    results = []
    for d in args.runs:
        run_dir = FsPath(d)
        summary = run_dir / "summary.json"
        csv_file = run_dir / "trajectory.csv"
        if not summary.exists() or not csv_file.exists():
            print(f"missing run outputs under {d}", file=sys.stderr)
            return EXIT_IO
        with open(summary) as fh:
            metrics = json.load(fh)
        rows, _ = read_trajectory_csv(csv_file)
        cfg = load_config(run_dir / "run.ini")
        results.append(RunResult(config=cfg, rows=rows, metrics=metrics,
                                 termination=metrics["termination"],
                                 completed=metrics["completed"]))
    try:
        table = estimation_report(results)
    except MismatchedRunsError as exc:
        print(f"cannot combine runs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if table:
        print(format_estimation_table(table))
    print(f"{'controller':<12} {'max_dev':>8} {'phase_area':>12} {'mean_ms':>8} {'completed':>9}")
    for r in results:
        m = r.metrics
        print(f"{m['controller']:<12} {m['max_deviation']:>8.3f} {m['phase_area']:>12.6f} "
              f"{m['mean_compute_ms']:>8.2f} {str(m['completed']):>9}")
    return 0


def cmd_frontier(args) -> int:
    cfg = _load_or_preset(args)
    v = speed_frontier(cfg, lo_kmh=args.lo, hi_kmh=args.hi)
    print(f"{cfg.controller}: max stable entry speed {v:.1f} km/h "
          f"(mu={cfg.mu}, resolution 0.5 km/h)")
    if args.out:
        FsPath(args.out).mkdir(parents=True, exist_ok=True)
        with open(FsPath(args.out) / f"frontier_{cfg.controller}.json", "w") as fh:
            json.dump({"controller": cfg.controller, "mu": cfg.mu,
                       "frontier_kmh": v}, fh, indent=2)
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_or_preset(args)
    cfg = replace(cfg, controller="nmpc_rhonn")
    sink: list = []
    run_scenario(cfg, instance_sink=sink)
    eligible = [s for s in sink if abs(s["steer_w"]) > 0.05]
    if len(eligible) < args.count:
        eligible = sink
    idx = [int(i * (len(eligible) - 1) / max(args.count - 1, 1)) for i in range(args.count)]
    picked = [eligible[i] for i in sorted(set(idx))]
    out = FsPath(args.fixture)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(picked, fh, indent=1)
    print(f"wrote {len(picked)} solver instances to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="latstab",
                                     description="lateral stability workbench")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    _add_common(p_run)
    p_run.add_argument("--identification-only", action="store_true",
                       help="controller off, physics estimators on")
    p_run.add_argument("--estimators", action="store_true",
                       help="also run the open-loop physics estimators")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="combine run directories into tables")
    p_rep.add_argument("runs", nargs="+", help="run output directories")
    p_rep.set_defaults(func=cmd_report)

    p_fr = sub.add_parser("frontier", help="max stable entry speed by bisection")
    _add_common(p_fr)
    p_fr.add_argument("--lo", type=float, default=40.0)
    p_fr.add_argument("--hi", type=float, default=110.0)
    p_fr.set_defaults(func=cmd_frontier)

    p_or = sub.add_parser("oracle", help="regenerate solver oracle fixtures")
    _add_common(p_or)
    p_or.add_argument("--fixture", type=str, default="tests/data/nmpc_instances.json")
    p_or.add_argument("--count", type=int, default=20)
    p_or.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
