"""Command-line entry point: ``uecomimo <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from uecomimo.composite import Structure
from uecomimo.harness.experiments import (
    run_distance_sweep,
    run_histogram_experiment,
    run_snr_sweep,
    run_trajectory_experiment,
)
from uecomimo.harness.output import OutputError, emit_outputs
from uecomimo.harness.scenario import ConfigError, ScenarioSpec, load_config
from uecomimo.optimize import Algorithm, power_consumption, trial_count
from uecomimo.svdanalysis import SecularProblem, secular_roots

log = logging.getLogger("uecomimo")

FULL_FIG2 = {"q": 8, "nc": 4, "max_evaluations": 8 ** 8}

# per-command base scenarios; a config file and flags are layered on top
DEFAULTS = {
    "histogram": dict(q=4, nc=3, structure=Structure.S2),
    "trajectory": dict(q=8, nc=4, structure=Structure.S2),
    "snr-sweep": dict(q=8, nc=4),
    "distance-sweep": dict(m=4, n1=2, n2=2, nc=4, q=4, path_loss=True, rho=100.0),
}

RUNNERS = {
    "histogram": run_histogram_experiment,
    "trajectory": run_trajectory_experiment,
    "snr-sweep": run_snr_sweep,
    "distance-sweep": run_distance_sweep,
}


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="flat key = value scenario file")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--trials", type=int, default=default)
    parser.add_argument("--out", type=Path, default=default, help="output directory")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1)
    parser.add_argument("--full-fig2", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="full-size histogram/trajectory run (q=8, nc=4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uecomimo", description=__doc__)
    _common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RUNNERS, "secular-demo", "tables"):
        p = sub.add_parser(name)
        _common(p, suppress=True)
    return parser


def scenario_for(command: str, args) -> ScenarioSpec:
    spec = ScenarioSpec(**DEFAULTS[command])
    if args.full_fig2 and command in ("histogram", "trajectory"):
        spec = spec.replace(**FULL_FIG2)
    if args.config is not None:
        spec = load_config(args.config, spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    return spec.replace(**changes) if changes else spec


def secular_demo(out=None):
    """Roots of the four-pole example with poles 1..4 and weights 1/4."""
    out = sys.stdout if out is None else out
    problem = SecularProblem(np.array([4.0, 3.0, 2.0, 1.0]), np.full(4, 0.25))
    roots = secular_roots(problem).values
    upper = ["inf", "4", "3", "2"]
    lower = ["4", "3", "2", "1"]
    print("poles: 4 3 2 1   weights: 0.25 0.25 0.25 0.25", file=out)
    for k, root in enumerate(roots):
        print(f"root {k + 1}: {root:.12f}  in ({lower[k]}, {upper[k]})", file=out)
    return roots


def tables(out=None):
    out = sys.stdout if out is None else out
    q, nc, rounds = 8, 4, 2
    print(f"trial counts (q={q}, nc={nc}, I={rounds})", file=out)
    for alg, label in ((Algorithm.JOINT_ES, "joint ES"), (Algorithm.SEPARATE_ES, "separate ES"),
                       (Algorithm.BG, "BG")):
        print(f"  {label:12s} {trial_count(alg, q, nc, rounds):>12,d}", file=out)
    print(f"power consumption (nc={nc})", file=out)
    for structure in Structure:
        print(f"  {structure.value:12s} {power_consumption(structure, nc):>10.1f} mW", file=out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "secular-demo":
        secular_demo()
        return 0
    if args.command == "tables":
        tables()
        return 0
    try:
        spec = scenario_for(args.command, args)
    except ConfigError as exc:
        parser.error(str(exc))
    out_dir = args.out if args.out is not None else Path("out") / args.command
    log.info("running %s with %d trials, seed %d", args.command, spec.trials, spec.seed)
    output = RUNNERS[args.command](spec, threads=max(1, args.threads))
    try:
        paths = emit_outputs(output, out_dir)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
