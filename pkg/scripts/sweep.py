"""Run a throughput sweep and print a table of mean throughput per system.

    python3 scripts/sweep.py configs/bs_power_sweep.ini --out results/bs_power
    python3 scripts/sweep.py configs/sudac_sweep.ini --out results/sudacs --jobs 4
"""

import argparse
import sys
from collections import defaultdict

from sudas.cli import main as cli_main, read_csv


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("config")
    parser.add_argument("--out", required=True)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--drops", type=int, default=None, help="override sweep.n_drops")
    args = parser.parse_args(argv)

    argv = ["sweep", "--config", args.config, "--out", args.out, "--jobs", str(args.jobs)]
    if args.drops is not None:
        argv += ["--set", f"sweep.n_drops={args.drops}"]
    status = cli_main(argv)
    if status:
        return status

    _, _, rows = read_csv(f"{args.out}/sweep.csv")
    table = defaultdict(dict)
    systems = []
    for value, system, mean, stderr, *_ in rows:
        table[float(value)][system] = (float(mean), float(stderr))
        if system not in systems:
            systems.append(system)
    print("value".rjust(12) + "".join(s.rjust(28) for s in systems))
    for value in sorted(table):
        cells = "".join(f"{m / 1e6:18.3f} +- {e / 1e6:5.3f}" for m, e in (table[value][s] for s in systems))
        print(f"{value:12.4g}{cells}")
    print("(Mbit/s, mean +- standard error)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
