"""Command-line entry point: ``swarmdist <train|eval|baseline|sweep|oracle> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 infeasible scenario,
4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ..baselines import InstanceSpec, alternating_suboptimal, exhaustive_oracle, greedy_heuristic, random_policy
from ..errors import (
    ConfigError,
    ContractViolation,
    InfeasibleLinkError,
    InfeasiblePlacementError,
    InfeasiblePlanError,
    NumericFailure,
)
from .config import ExperimentConfig, load_config
from .runner import run_experiment
from .sweeps import device_sweep, dynamic_swarm_event, memory_sweep, uav_count_sweep

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("swarmdist")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--network", type=str, help="built-in network name or path to a layer table")
    common.add_argument("--uavs", type=int, help="swarm size (default roster)")
    common.add_argument("--sf", type=float, help="QoS factor")
    common.add_argument("--steps", type=int, help="training env steps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="swarmdist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a policy and replay the request schedule")
    ev = sub.add_parser("eval", parents=[common], help="replay the request schedule with a saved policy")
    ev.add_argument("--checkpoint", type=Path, required=True)
    bl = sub.add_parser("baseline", parents=[common], help="serve one request with the non-learning solvers")
    bl.add_argument("--source", type=int, default=0)
    bl.add_argument("--trials", type=int, default=100)
    sw = sub.add_parser("sweep", parents=[common], help="device, memory, swarm-size or dynamic-swarm sweep")
    sw.add_argument("--kind", choices=("device", "memory", "uavs", "dynamic"), required=True)
    sw.add_argument("--values", type=str, help="comma-separated sweep points")
    sw.add_argument("--solver", default="alternating", help="memory sweep solver: rl, greedy or alternating")
    sw.add_argument("--at-episode", type=int, default=2000, help="dynamic sweep: episode of the swarm change")
    sw.add_argument("--event", choices=("add", "remove"), default="add")
    orc = sub.add_parser("oracle", parents=[common], help="exhaustive optimum for a small instance")
    orc.add_argument("--source", type=int, default=0)
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        seed=args.seed,
        out_dir=args.out,
        network=args.network,
        n_uavs=args.uavs,
        qos_factor=args.sf,
        total_steps=args.steps,
    )


def _instance(config: ExperimentConfig, source: int) -> InstanceSpec:
    setup = config.setup()
    hot = list(setup.grid.hot_cells)
    rest = [q for q in range(setup.grid.cell_count) if q not in hot]
    return InstanceSpec(setup, source, tuple((hot + rest)[: setup.n_uavs]))


def _write_rows(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(dict.fromkeys(k for row in rows for k in row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _floats(text: str | None):
    return None if text is None else [float(v) for v in text.split(",") if v.strip()]


def run(args) -> int:
    config = resolve_config(args)
    out = Path(config.out_dir)
    if args.command == "train":
        report = run_experiment(config, out)
        print(json.dumps(report.summary(), indent=2))
    elif args.command == "eval":
        report = run_experiment(config, out, checkpoint=args.checkpoint)
        print(json.dumps(report.summary(), indent=2))
    elif args.command == "baseline":
        instance = _instance(config, args.source)
        results = [greedy_heuristic(instance), alternating_suboptimal(instance, seed=config.seed)]
        results.append(random_policy(instance, args.trials, seed=config.seed))
        rows = [r.as_row() for r in results]
        rows[-1]["mean_total"] = results[-1].extras["mean"]
        _write_rows(out / "baselines.csv", rows)
        print(json.dumps(rows, indent=2))
    elif args.command == "sweep":
        values = _floats(args.values)
        if args.kind == "device":
            rows = device_sweep(config, values) if values else device_sweep(config)
        elif args.kind == "memory":
            rows = memory_sweep(config, values, args.solver) if values else memory_sweep(config, solver=args.solver)
        elif args.kind == "uavs":
            counts = [int(v) for v in values] if values else [3, 4, 5]
            rows = uav_count_sweep(config, counts)
        else:
            rows = [dynamic_swarm_event(config, args.event, args.at_episode)]
        _write_rows(out / f"sweep_{args.kind}.csv", rows)
        print(json.dumps(rows, indent=2, default=str))
    elif args.command == "oracle":
        res = exhaustive_oracle(_instance(config, args.source))
        print(json.dumps({"assignment": res.plan.assignment, "placements": res.plan.placements, **res.latency.as_row()}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasiblePlanError, InfeasiblePlacementError, InfeasibleLinkError) as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
