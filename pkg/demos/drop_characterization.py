"""Drop tests for both stiffness modes at two heights.

Prints contact time, rebound speed and peak normal force for each run, and
optionally writes the trajectories as CSV next to this script.

    python3 demos/drop_characterization.py [--csv]
"""

import argparse
from pathlib import Path

from lcsdrone import Mode, contact_metrics, drop_test_scenario, simulate
from lcsdrone.cli import write_trajectory


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", action="store_true", help="write trajectory CSVs to demos/out")
    args = parser.parse_args()

    out = Path(__file__).with_name("out")
    print(f"{'height':>7} {'mode':>9} {'contact ms':>11} {'rebound m/s':>12} {'peak N':>8}")
    for height in (0.05, 0.2):
        for mode in Mode:
            traj = simulate(drop_test_scenario(height, mode))
            m = contact_metrics(traj)
            print(f"{height:7.2f} {mode.name.lower():>9} {1000 * m.contact_time:11.1f} "
                  f"{m.rebound_velocity:12.3f} {m.peak_normal_force:8.1f}")
            if args.csv:
                out.mkdir(exist_ok=True)
                write_trajectory(traj, out / f"drop_{height:g}_{mode.name.lower()}.csv")


if __name__ == "__main__":
    main()
