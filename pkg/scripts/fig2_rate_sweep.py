#!/usr/bin/env python3
"""Energy efficiency versus the common-stream rate target.

N=8, M=2, K=8, L=4; joint and multicast-only modes over an ascending target
grid, averaged over seeds.  Writes results/fig2_rate_sweep.csv plus a
.summary.csv with per-point means.
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
    args = parser.parse_args()
    RESULTS.mkdir(exist_ok=True)
    scenario = RESULTS / "fig2_scenario.json"
    ScenarioConfig(N=8, M=2, K=8, L=4).to_file(scenario)
    sys.exit(main([
        "sweep-rate",
        "--scenario", str(scenario),
        "--seeds", str(args.seeds),
        "--workers", str(args.workers),
        "--grid", "36", "72.14", "115.42", "160",
        "--mode", "both",
        "--out", str(RESULTS / "fig2_rate_sweep.csv"),
    ]))
