#!/usr/bin/env python3
"""Energy efficiency and active unicast streams versus user antennas.

K=8, L=4, 115.42 Mbit/s target, M in {1, 2, 3}, both modes, for N=8 and
N=12.  The per-seed rows carry the EE and the transmitted-stream counts, so
one sweep covers both the EE figure and the stream-count figure.
"""

import argparse
import pathlib
import sys

from beamform_ee.cli import main
from beamform_ee.scenario import ScenarioConfig

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results"

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--bs-antennas", type=int, nargs="+", default=[8, 12])
    args = parser.parse_args()
    RESULTS.mkdir(exist_ok=True)
    rc = 0
    for n in args.bs_antennas:
        scenario = RESULTS / f"fig34_scenario_n{n}.json"
        ScenarioConfig(N=n, M=2, K=8, L=4, rate_target_mbps=115.42).to_file(scenario)
        rc |= main([
            "sweep-antennas",
            "--scenario", str(scenario),
            "--seeds", str(args.seeds),
            "--workers", str(args.workers),
            "--grid", "1", "2", "3",
            "--mode", "both",
            "--out", str(RESULTS / f"fig34_antenna_sweep_n{n}.csv"),
        ])
    sys.exit(rc)
