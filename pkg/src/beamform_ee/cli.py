"""Experiment harness: Monte Carlo sweeps with machine-readable CSV output.

Four experiment kinds:

- `convergence`: per-iteration EE traces for a few seeds
- `sweep-rate`:  final EE versus the common-rate target grid
- `sweep-antennas`: final EE and active unicast streams versus M
- `single`: one run, one row

Every reported EE value is recomputed from the stored beamformers through
`metrics`; solver-internal objectives never reach the CSV.  Output is a pure
function of (scenario file, experiment options) including all seeds: rows are
gathered from the worker pool and written in sorted order with fixed float
formatting.

Sweep points over the rate grid use a best-of-two protocol per seed: an
independent (cold) run and a continuation run warm-started from the
next-higher target's solution, keeping whichever ends higher.  Feasible sets
shrink as the target grows, so the continuation run is always admissible and
per-seed EE is non-increasing along the grid by construction.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .errors import ConfigurationError, InfeasibleError, NumericalError
from .sca import SolverOptions, run
from .scenario import ScenarioConfig

CSV_COLUMNS = [
    "experiment",
    "seed",
    "iter",
    "mode",
    "M",
    "N",
    "rate_target_mbps",
    "ee_mbit_per_joule",
    "sum_rate_mbps",
    "total_power_w",
    "active_unicast_streams",
    "status",
]

SUMMARY_COLUMNS = [
    "experiment",
    "mode",
    "M",
    "N",
    "rate_target_mbps",
    "realizations",
    "ee_mean_mbit_per_joule",
    "ee_std_mbit_per_joule",
    "active_streams_mean",
]


@dataclass
class ExperimentSpec:
    kind: str
    scenario: ScenarioConfig
    grid: list
    realizations: int
    seed_base: int
    modes: list
    tol: float
    max_iters: int
    out_path: str
    summary_path: str | None = None
    workers: int = 1
    dump_beams_path: str | None = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigurationError("need at least one realization")
        if not self.grid:
            raise ConfigurationError("sweep grid must be nonempty")

    def seeds(self):
        return [self.seed_base + i for i in range(self.realizations)]

    def options(self, mode):
        return SolverOptions(
            max_iters=self.max_iters, rel_objective_tol=self.tol, mode=mode
        )


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _row(experiment, cfg, seed, mode, **kwargs):
    base = {
        "experiment": experiment,
        "seed": seed,
        "iter": "",
        "mode": mode,
        "M": cfg.M,
        "N": cfg.N,
        "rate_target_mbps": cfg.rate_target_mbps,
        "ee_mbit_per_joule": None,
        "sum_rate_mbps": None,
        "total_power_w": None,
        "active_unicast_streams": None,
        "status": "",
    }
    base.update(kwargs)
    return base


def _final_row(experiment, cfg, seed, mode, state):
    last = state.trace[-1]
    return _row(
        experiment,
        cfg,
        seed,
        mode,
        iter=state.iteration,
        ee_mbit_per_joule=last.ee_bits_per_joule / 1e6,
        sum_rate_mbps=last.sum_rate_bps / 1e6,
        total_power_w=last.total_power_w,
        active_unicast_streams=last.active_unicast_streams,
        status="converged" if state.converged else "iteration-limit",
    )


def _run_convergence_seed(args):
    spec, seed = args
    cfg = spec.scenario
    scn, channels = cfg.build(seed=seed)
    mode = spec.modes[0]
    state = run(scn, channels, spec.options(mode))
    rows = []
    for rec in state.trace:
        rows.append(
            _row(
                "convergence",
                cfg,
                seed,
                mode,
                iter=rec.iteration,
                ee_mbit_per_joule=rec.ee_bits_per_joule / 1e6,
                sum_rate_mbps=rec.sum_rate_bps / 1e6,
                total_power_w=rec.total_power_w,
                active_unicast_streams=rec.active_unicast_streams,
                status=rec.solver_status,
            )
        )
    return rows


def run_convergence(spec):
    """One row per (seed, iteration); errors abort with seed context."""
    tasks = [(spec, seed) for seed in spec.seeds()]
    results = []
    for (_, seed), rows in zip(tasks, _map_tasks(_run_convergence_seed, tasks, spec.workers)):
        if isinstance(rows, Exception):
            raise RuntimeError(f"seed {seed}: {rows}") from rows
        results.extend(rows)
    results.sort(key=lambda r: (r["seed"], r["iter"]))
    _write_csv(spec.out_path, results)
    return results


def _run_rate_chain(args):
    """All grid points of one (seed, mode), highest target first so each
    point can be warm-started from the previous solution."""
    spec, seed, mode = args
    rows = {}
    best_beams = None
    for rate in sorted(spec.grid, reverse=True):
        cfg = spec.scenario.with_overrides(rate_target_mbps=float(rate))
        scn, channels = cfg.build(seed=seed)
        candidates = []
        try:
            candidates.append(run(scn, channels, spec.options(mode)))
        except InfeasibleError:
            pass
        if best_beams is not None:
            candidates.append(
                run(scn, channels, spec.options(mode), initial_beams=best_beams)
            )
        if not candidates:
            rows[rate] = _row("sweep-rate", cfg, seed, mode, status="infeasible")
            continue
        state = max(candidates, key=lambda s: s.trace[-1].ee_bits_per_joule)
        best_beams = state.beams
        rows[rate] = _final_row("sweep-rate", cfg, seed, mode, state)
    return [rows[rate] for rate in spec.grid]


def run_sweep_rate(spec):
    """Final EE per (rate target, seed, mode); infeasible points are flagged
    rows, not failures."""
    tasks = [(spec, seed, mode) for mode in spec.modes for seed in spec.seeds()]
    results = []
    for rows in _map_tasks(_run_rate_chain, tasks, spec.workers):
        if isinstance(rows, Exception):
            raise rows
        results.extend(rows)
    results.sort(key=lambda r: (r["rate_target_mbps"], r["mode"], r["seed"]))
    _write_csv(spec.out_path, results)
    _write_summary(spec, results, key="rate_target_mbps")
    return results


def _run_antenna_point(args):
    spec, m, seed, mode = args
    cfg = spec.scenario.with_overrides(M=int(m))
    scn, channels = cfg.build(seed=seed)
    try:
        state = run(scn, channels, spec.options(mode))
    except InfeasibleError:
        return _row("sweep-antennas", cfg, seed, mode, status="infeasible")
    return _final_row("sweep-antennas", cfg, seed, mode, state)


def run_sweep_antennas(spec):
    """Final EE and unicast stream counts per (M, seed, mode)."""
    tasks = [
        (spec, m, seed, mode)
        for m in spec.grid
        for mode in spec.modes
        for seed in spec.seeds()
    ]
    results = []
    for row in _map_tasks(_run_antenna_point, tasks, spec.workers):
        if isinstance(row, Exception):
            raise row
        results.append(row)
    results.sort(key=lambda r: (r["M"], r["mode"], r["seed"]))
    _write_csv(spec.out_path, results)
    _write_summary(spec, results, key="M")
    return results


def run_single(spec):
    cfg = spec.scenario
    seed = spec.seed_base
    scn, channels = cfg.build(seed=seed)
    mode = spec.modes[0]
    state = run(scn, channels, spec.options(mode))
    rows = [_final_row("single", cfg, seed, mode, state)]
    _write_csv(spec.out_path, rows)
    if spec.dump_beams_path:
        with open(spec.dump_beams_path, "w") as fh:
            json.dump(state.beams.to_jsonable(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows


def _map_tasks(fn, tasks, workers):
    """Run tasks, each returning a value or (captured) exception, preserving
    task order regardless of worker scheduling."""
    if workers <= 1:
        return [_guard(fn, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_guarded_call, [(fn, t) for t in tasks]))


def _guard(fn, task):
    try:
        return fn(task)
    except Exception as exc:  # re-raised by the caller with context
        return exc


def _guarded_call(packed):
    fn, task = packed
    return _guard(fn, task)


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def _write_summary(spec, rows, key):
    """Per-(grid point, mode) mean/std over the successful realizations."""
    path = spec.summary_path
    if path is None:
        return
    groups = {}
    for row in rows:
        groups.setdefault((row[key], row["mode"]), []).append(row)
    out = []
    for (value, mode), members in sorted(groups.items()):
        ees = [r["ee_mbit_per_joule"] for r in members if r["ee_mbit_per_joule"] is not None]
        acts = [
            r["active_unicast_streams"]
            for r in members
            if r["active_unicast_streams"] is not None
        ]
        n = len(ees)
        mean = sum(ees) / n if n else None
        std = (sum((e - mean) ** 2 for e in ees) / n) ** 0.5 if n else None
        out.append(
            {
                "experiment": members[0]["experiment"],
                "mode": mode,
                "M": members[0]["M"],
                "N": members[0]["N"],
                "rate_target_mbps": members[0]["rate_target_mbps"],
                "realizations": n,
                "ee_mean_mbit_per_joule": mean,
                "ee_std_mbit_per_joule": std,
                "active_streams_mean": sum(acts) / len(acts) if acts else None,
            }
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in out:
            writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


EXPERIMENTS = {
    "convergence": run_convergence,
    "sweep-rate": run_sweep_rate,
    "sweep-antennas": run_sweep_antennas,
    "single": run_single,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="beamform-ee",
        description="Energy-efficient joint unicast/multicast beamforming experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seeds", type=int, default=3 if kind == "convergence" else 20)
        p.add_argument("--seed-base", type=int, default=0)
        p.add_argument("--grid", type=float, nargs="+", default=None,
                       help="rate targets in Mbit/s (sweep-rate) or M values (sweep-antennas)")
        p.add_argument("--mode", choices=["joint", "multicast-only", "both"],
                       default="both" if kind.startswith("sweep") else "joint")
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-iters", type=int, default=200)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--summary-out", default=None,
                       help="per-grid-point mean/std CSV (sweeps only)")
        if kind == "single":
            p.add_argument("--dump-beams", default=None,
                           help="write the final beamformers as JSON")
    return parser


def _spec_from_args(args):
    scenario = ScenarioConfig.from_file(args.scenario)
    grid = args.grid
    if grid is None:
        grid = {"sweep-rate": [36.0, 72.14, 115.42, 160.0],
                "sweep-antennas": [1.0, 2.0, 3.0]}.get(args.experiment, [0.0])
    if args.experiment == "sweep-antennas":
        bad = [m for m in grid if m != int(m) or m < 1]
        if bad:
            raise ConfigurationError(f"antenna grid must be positive integers, got {bad}")
    modes = ["joint", "multicast-only"] if args.mode == "both" else [args.mode]
    summary = args.summary_out
    if summary is None and args.experiment.startswith("sweep"):
        summary = args.out + ".summary.csv"
    return ExperimentSpec(
        kind=args.experiment,
        scenario=scenario,
        grid=list(grid),
        realizations=args.seeds if args.experiment != "single" else 1,
        seed_base=args.seed_base,
        modes=modes,
        tol=args.tol,
        max_iters=args.max_iters,
        out_path=args.out,
        summary_path=summary,
        workers=args.workers,
        dump_beams_path=getattr(args, "dump_beams", None),
    )


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
        EXPERIMENTS[spec.kind](spec)
    except (ConfigurationError, InfeasibleError, NumericalError, OSError, RuntimeError) as exc:
        print(f"beamform-ee: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
