"""Objective per iteration of the alternating allocator on the desk scenario.

    python3 scripts/convergence_trace.py --seeds 20 --out results/trace
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from sudas.allocator import alternating_optimize
from sudas.channel import decompose, generate_channels
from sudas.config import load_config
from sudas.sim import UPPER_BOUND_ITERATIONS, relaxed_upper_bound

HERE = os.path.dirname(os.path.abspath(__file__))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", default=os.path.join(HERE, os.pardir, "configs", "desk.ini"))
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--out", default=None, help="directory for ratios.csv (optional)")
    args = parser.parse_args(argv)

    system, solver, _ = load_config(args.config)
    long_run = dataclasses.replace(solver, max_iterations=UPPER_BOUND_ITERATIONS)
    ratios = np.empty((args.seeds, solver.max_iterations))
    for seed in range(args.seeds):
        d = decompose(generate_channels(system, seed))
        _, trace = alternating_optimize(d, system, solver)
        trace = list(trace) + [trace[-1]] * (solver.max_iterations - len(trace))
        ratios[seed] = np.asarray(trace) / relaxed_upper_bound(d, system, long_run)

    mean = ratios.mean(axis=0)
    print("iteration  mean_ratio  min_ratio")
    for it in range(solver.max_iterations):
        print(f"{it + 1:9d}  {mean[it]:10.6f}  {ratios[:, it].min():9.6f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        np.savetxt(os.path.join(args.out, "ratios.csv"), ratios, delimiter=",", fmt="%.12g")
    return 0


if __name__ == "__main__":
    sys.exit(main())
