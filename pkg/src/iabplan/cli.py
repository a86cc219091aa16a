"""Command line entry point: ``iabplan {scenario,plan,sweep}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import rng as _rng
from .planning import plan_to_dict
from .runner import ConfigError, ExperimentConfig, emit_results, load_config, plan_for, run_experiment
from .scenario import ScenarioError, sample_scenario, save_scenario


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg


def _scenario_seed(cfg: ExperimentConfig, args) -> int:
    # an explicit seed is the scenario seed itself, as printed in result rows
    return args.seed if args.seed is not None else _rng.derive_seed(cfg.scenario.seed, 0)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_scenario(args) -> None:
    cfg = _config(args)
    sc = cfg.scenario
    s = sample_scenario(sc.region, sc.n_mbs, sc.n_sbs, sc.n_ue, _scenario_seed(cfg, args))
    _write(save_scenario(s).decode() + "\n", args.out)


def cmd_plan(args) -> None:
    cfg = _config(args)
    graph, design, steps = plan_for(cfg, _scenario_seed(cfg, args))
    doc = plan_to_dict(graph, design, steps, cfg.cost)
    _write(json.dumps(doc, indent=1) + "\n", args.out)


def cmd_sweep(args) -> None:
    cfg = _config(args)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=args.seed))
    rows = run_experiment(cfg, threads=args.threads)
    if args.out:
        emit_results(rows, args.out, args.format)
    else:
        from .runner import rows_to_csv, rows_to_json

        sys.stdout.write(rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iabplan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="scenario seed (sweep: master seed)")
    common.add_argument("--out", help="output path (stdout when omitted)")

    s = sub.add_parser("scenario", parents=[common], help="generate and save a node layout")
    s.set_defaults(func=cmd_scenario)
    s = sub.add_parser("plan", parents=[common], help="export the backhaul plan of one configuration")
    s.set_defaults(func=cmd_plan)
    s = sub.add_parser("sweep", parents=[common], help="run the configured parameter sweep")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--threads", type=int, default=1, help="worker processes (speed only)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads", "must be >= 1")
        args.func(args)
    except ConfigError as exc:
        json.dump({"error": "config", "path": exc.path, "message": exc.message}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (ScenarioError, ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
