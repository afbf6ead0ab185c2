"""Command-line front end.

    sudas solve|sweep|trace --config CONFIG --out DIR [--seed N] [--set key=value ...]

Output files (every file starts with a ``# master_seed=N`` comment line):

``trace.csv``       iteration, objective, upper_bound, ratio
``sweep.csv``       sweep_value, system, mean_tp_bits_s, stderr, n_drops, n_failures
``allocation.csv``  subcarrier, ue, stream, p_bs, p_sudas, s
``summary.csv``     metric, value

Throughput columns are in bits/s.  Allocation powers are radiated powers
``s * p`` in watts.  Exit status is 2 for configuration errors, 3 for
solver or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .allocator import alternating_optimize, relaxed_objective, weighted_throughput, stream_arrays
from .channel import decompose, generate_channels
from .config import load_config
from .errors import ConfigError, NumericalError, RankError, SolverError, UnboundedError
from .sim import UPPER_BOUND_ITERATIONS, relaxed_upper_bound, run_sweep

log = logging.getLogger(__name__)

TRACE_HEADER = ("iteration", "objective", "upper_bound", "ratio")
SWEEP_HEADER = ("sweep_value", "system", "mean_tp_bits_s", "stderr", "n_drops", "n_failures")
ALLOCATION_HEADER = ("subcarrier", "ue", "stream", "p_bs", "p_sudas", "s")
SUMMARY_HEADER = ("metric", "value")


@dataclass
class RunManifest:
    command: str
    config_path: str
    output_dir: str
    seed: Optional[int] = None
    overrides: list = field(default_factory=list)
    jobs: int = 1


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, seed, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# master_seed={seed}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """Read a CSV written by this module; returns (seed, header, rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        seed = int(first.split("=", 1)[1])
        reader = csv.reader(fh)
        header = tuple(next(reader))
        return seed, header, [row for row in reader]


def _prepare(manifest: RunManifest):
    system, solver, sweep = load_config(manifest.config_path, manifest.overrides)
    if manifest.seed is not None:
        system = system.replace(rng_seed=int(manifest.seed))
        if sweep is not None:
            sweep = dataclasses.replace(sweep, base_config=system)
    os.makedirs(manifest.output_dir, exist_ok=True)
    return system, solver, sweep


def cmd_trace(manifest: RunManifest):
    """Objective per iteration against the converged value of the same solve."""
    system, solver, _ = _prepare(manifest)
    channel = generate_channels(system, system.rng_seed)
    decomp = decompose(channel)
    _, trace = alternating_optimize(decomp, system, solver)
    long_run = dataclasses.replace(solver, max_iterations=max(solver.max_iterations, UPPER_BOUND_ITERATIONS))
    bound = relaxed_upper_bound(decomp, system, long_run)
    # a converged run sits at its fixed point for the remaining iterations
    trace = list(trace) + [trace[-1]] * (solver.max_iterations - len(trace))
    bw = system.subcarrier_bandwidth
    rows = []
    for it, value in enumerate(trace, start=1):
        ratio = value / bound if bound > 0 else 1.0
        rows.append((it, value * bw, bound * bw, ratio))
    path = os.path.join(manifest.output_dir, "trace.csv")
    return [_write_csv(path, system.rng_seed, TRACE_HEADER, rows)]


def cmd_sweep(manifest: RunManifest):
    system, solver, sweep = _prepare(manifest)
    if sweep is None:
        raise ConfigError("the sweep command needs a [sweep] section", "sweep")
    report = run_sweep(sweep, solver, master_seed=system.rng_seed, n_jobs=manifest.jobs)
    rows = []
    for v, value in enumerate(report.values):
        for name in report.systems:
            rows.append((value, name, report.mean[v][name], report.stderr[v][name],
                         report.n_drops, report.n_failures[v][name]))
    path = os.path.join(manifest.output_dir, "sweep.csv")
    return [_write_csv(path, system.rng_seed, SWEEP_HEADER, rows)]


def cmd_solve(manifest: RunManifest):
    system, solver, _ = _prepare(manifest)
    channel = generate_channels(system, system.rng_seed)
    decomp = decompose(channel)
    policy, trace = alternating_optimize(decomp, system, solver)
    report = weighted_throughput(policy, decomp, system, trace=trace)

    n_f, k, n_s = policy.p_bs.shape
    rows = []
    for i in range(n_f):
        for ue in range(k):
            s = policy.assignment[i, ue]
            for n in range(n_s):
                rows.append((i, ue, n, s * policy.p_bs[i, ue, n], s * policy.p_sudas[i, ue, n], int(s)))

    bw = system.subcarrier_bandwidth
    g1, g2, w = stream_arrays(decomp, system)
    c1 = policy.bs_power_used()
    c2 = policy.sudas_power_used()
    summary = [(f"rho_ue{ue}_bits_s", report.per_ue[ue] * bw) for ue in range(k)]
    summary += [
        ("tp_bits_s", report.bits_per_second),
        ("relaxed_objective_bits_s", relaxed_objective(policy.p_bs, policy.p_sudas, policy.assignment, g1, g2, w) * bw),
        ("c1_used_w", c1),
        ("c1_budget_w", system.p_bs_max),
        ("c1_slack_w", system.p_bs_max - c1),
        ("c2_used_w", c2),
        ("c2_budget_w", system.sudas_budget),
        ("c2_slack_w", system.sudas_budget - c2),
        ("iterations", policy.iterations),
        ("converged", policy.converged),
    ]
    out = manifest.output_dir
    return [
        _write_csv(os.path.join(out, "allocation.csv"), system.rng_seed, ALLOCATION_HEADER, rows),
        _write_csv(os.path.join(out, "summary.csv"), system.rng_seed, SUMMARY_HEADER, summary),
    ]


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "trace": cmd_trace}


def build_parser():
    parser = argparse.ArgumentParser(prog="sudas", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="INI scenario file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set scenario.p_bs_max_dbm=40")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = RunManifest(args.command, args.config, args.out, args.seed, args.overrides, args.jobs)
    try:
        paths = COMMANDS[args.command](manifest)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, NumericalError, RankError, UnboundedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
