#!/usr/bin/env python3
"""Convergence traces for three channel realizations.

N=4 BS antennas, M=2 user antennas, K=8 users, L=4 groups, 72.14 Mbit/s
common-rate target.  Writes results/fig1_convergence.csv with one row per
(seed, iteration).
"""

import pathlib
import sys

from beamform_ee.cli import main
from beamform_ee.scenario import ScenarioConfig

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results"

if __name__ == "__main__":
    RESULTS.mkdir(exist_ok=True)
    scenario = RESULTS / "fig1_scenario.json"
    ScenarioConfig(N=4, M=2, K=8, L=4, rate_target_mbps=72.14).to_file(scenario)
    sys.exit(main([
        "convergence",
        "--scenario", str(scenario),
        "--seeds", "3",
        "--out", str(RESULTS / "fig1_convergence.csv"),
    ]))
