"""Successive convex approximation loop for network energy efficiency.

Each outer iteration fixes the receive beamformers, solves one convex conic
subproblem in Charnes-Cooper-scaled variables (transmit beams w_bar,
inverse-MSE surrogates nu_bar, common rates r_bar and the scaling phi),
recovers the unscaled point, then refreshes the linearization points and the
MMSE receivers.  The subproblem is an inner approximation of the true
feasible set, so every recovered iterate satisfies the original power and
common-rate constraints.

Rates are handled internally in nats/s/Hz; watts, bits/s and bits/joule
appear only at the module boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .conic import (
    OPTIMAL,
    ConicProgram,
    complex_rows,
    extract_complex,
    lin,
)
from .errors import InfeasibleError, NumericalError, SolverError
from .metrics import BeamformerSet
from .mmse import mmse_receivers

# Tangent points this close to the zero-rate fixed point nu = 1 are nudged
# off it so the tangent stays non-degenerate.
NU_POINT_FLOOR = 1.0 + 1e-12

LN2 = math.log(2.0)


@dataclass
class SolverOptions:
    max_iters: int = 200
    rel_objective_tol: float = 1e-5
    conic_tol: float = 1e-8
    stream_active_threshold: float = 1e-6
    mode: str = "joint"  # "joint" | "multicast-only"
    phi_min: float = 1e-8
    feasibility_max_iters: int = 50
    init_private_power_frac: float = 0.25

    def __post_init__(self):
        if self.mode not in ("joint", "multicast-only"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if min(self.rel_objective_tol, self.conic_tol, self.phi_min) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class TangentLine:
    """Tangent to 1/nu at `point`: a global affine under-estimator of 1/nu
    over nu > 0, exact at the point."""

    point: float

    def __post_init__(self):
        if self.point <= 0:
            raise ValueError("tangent point must be positive")

    def __call__(self, nu):
        return 1.0 / self.point - (nu - self.point) / self.point**2


def linearize_inverse(nu_point):
    return TangentLine(point=nu_point)


@dataclass
class IterateRecord:
    iteration: int
    ee_bits_per_joule: float
    sum_rate_bps: float
    total_power_w: float
    solver_status: str
    scaled_objective: float
    fractional_objective: float
    active_unicast_streams: int


@dataclass
class IterateState:
    beams: BeamformerSet
    receivers: object
    nu_private: dict
    nu_common: dict
    r_common_bps: tuple
    phi: float
    trace: list = field(default_factory=list)
    iteration: int = 0
    converged: bool = False

    @property
    def ee_trace(self):
        return [rec.ee_bits_per_joule for rec in self.trace]


@dataclass
class SubproblemLayout:
    """Index map from model quantities into the flat real variable vector."""

    topology: object
    bandwidth_hz: float
    eta: float
    circuit_power_w: float
    objective_kind: str
    include_private: bool
    w_priv: dict
    w_comm: dict
    phi: int
    nu_priv: dict
    nu_comm: dict
    r_comm: dict
    t_priv: dict
    tau: int | None


@dataclass
class RecoveredPoint:
    beams: BeamformerSet
    nu_private: dict
    nu_common: dict
    r_common_bps: tuple
    phi: float
    scaled_objective: float
    fractional_objective: float | None
    tau: float | None = None


def _target_nats(scenario):
    w = scenario.radio.bandwidth_hz
    return tuple(r * LN2 / w for r in scenario.rate_targets.common_rate_bps)


def build_subproblem(state, scenario, channels, options, objective="ee"):
    """Assemble the scaled convex subproblem around the current iterate.

    objective "ee" maximizes sum(t_kl) + sum(r_bar_g) with t_kl held under
    phi*log(nu_bar/phi) by exponential cones; objective "feasibility"
    maximizes the worst scaled common-rate slack min_g (r_bar_g - phi*target)
    and drops the private streams entirely.
    """
    topo = scenario.topology
    power = scenario.power
    radio = scenario.radio
    n0 = radio.noise_power_w
    p_cir = metrics.circuit_power(topo, power)
    targets = _target_nats(scenario)

    streams = topo.private_streams()
    include_private = bool(streams) and options.mode == "joint" and objective == "ee"
    prog = ConicProgram()

    w_priv = {}
    if include_private:
        for key in streams:
            n = topo.bs_antennas[topo.user_bs[key[0]]]
            w_priv[key] = np.array(prog.add_variables(2 * n))
    w_comm = {}
    for g in range(topo.num_groups):
        n = topo.bs_antennas[topo.group_bs[g]]
        w_comm[g] = np.array(prog.add_variables(2 * n))
    phi = prog.add_variable(lb=options.phi_min)
    nu_priv = {key: prog.add_variable(lb=0.0) for key in (streams if include_private else [])}
    nu_comm = {k: prog.add_variable(lb=0.0) for k in range(topo.num_users)}
    r_comm = {g: prog.add_variable() for g in range(topo.num_groups)}
    t_priv = {}
    tau = None
    if objective == "ee":
        t_priv = {key: prog.add_variable() for key in nu_priv}
        prog.set_objective(
            {**{t_priv[key]: 1.0 for key in t_priv}, **{r_comm[g]: 1.0 for g in r_comm}}
        )
        for g in range(topo.num_groups):
            prog.add_linear(lin({phi: targets[g], r_comm[g]: -1.0}))
    else:
        tau = prog.add_variable()
        prog.set_objective({tau: 1.0})
        for g in range(topo.num_groups):
            prog.add_linear(lin({tau: 1.0, r_comm[g]: -1.0, phi: targets[g]}))

    # per-BS transmit power: || stacked w_bar of BS b || <= phi * sqrt(P_b)
    for b in range(topo.num_bs):
        rows = []
        for key in w_priv:
            if topo.user_bs[key[0]] == b:
                rows.extend(lin({int(i): 1.0}) for i in w_priv[key])
        for g in topo.bs_groups(b):
            rows.extend(lin({int(i): 1.0}) for i in w_comm[g])
        prog.add_soc(rows, lin({phi: math.sqrt(power.p_max_w[b])}))

    # Charnes-Cooper denominator: (1/eta) sum ||w_bar||^2 + phi^2 P_cir <= phi
    denom_rows = [
        lin({int(i): 1.0 / math.sqrt(power.eta)})
        for idx in list(w_priv.values()) + list(w_comm.values())
        for i in idx
    ]
    denom_rows.append(lin({phi: math.sqrt(p_cir)}))
    prog.add_quad_le_affine(denom_rows, lin({phi: 1.0}))

    def mse_cone(u, k, desired_indices, nu_var, nu_point, skip_stream, skip_group):
        """phi * eps(w_bar/phi, u) <= phi * tangent(nu_bar/phi), written as
        ||v||^2 <= phi * s with the noise term folded into s."""
        point = max(nu_point, NU_POINT_FLOOR)
        rows = []
        a_des = channels.h(topo.user_bs[k], k).conj().T @ u
        re, im = complex_rows(a_des, desired_indices)
        rows.append(lin({phi: 1.0}).minus(re))
        rows.append(im.scaled(-1.0))
        for (i, j), idx in w_priv.items():
            if (i, j) == skip_stream:
                continue
            a = channels.h(topo.user_bs[i], k).conj().T @ u
            re, im = complex_rows(a, idx)
            rows.extend((re, im))
        for g, idx in w_comm.items():
            if g == skip_group:
                continue
            a = channels.h(topo.group_bs[g], k).conj().T @ u
            re, im = complex_rows(a, idx)
            rows.extend((re, im))
        unorm2 = float(np.vdot(u, u).real)
        s = lin({phi: 2.0 / point - n0 * unorm2, nu_var: -1.0 / point**2})
        prog.add_quad_le_product(rows, lin({phi: 1.0}), s)

    for key in w_priv:
        mse_cone(
            state.receivers.private[key],
            key[0],
            w_priv[key],
            nu_priv[key],
            state.nu_private[key],
            skip_stream=key,
            skip_group=None,
        )
    for k in range(topo.num_users):
        g = topo.user_group[k]
        mse_cone(
            state.receivers.common[k],
            k,
            w_comm[g],
            nu_comm[k],
            state.nu_common[k],
            skip_stream=None,
            skip_group=g,
        )

    for key, t in t_priv.items():
        prog.add_exp(lin({t: 1.0}), lin({phi: 1.0}), lin({nu_priv[key]: 1.0}))
    for k in range(topo.num_users):
        g = topo.user_group[k]
        prog.add_exp(lin({r_comm[g]: 1.0}), lin({phi: 1.0}), lin({nu_comm[k]: 1.0}))

    layout = SubproblemLayout(
        topology=topo,
        bandwidth_hz=radio.bandwidth_hz,
        eta=power.eta,
        circuit_power_w=p_cir,
        objective_kind=objective,
        include_private=include_private,
        w_priv=w_priv,
        w_comm=w_comm,
        phi=phi,
        nu_priv=nu_priv,
        nu_comm=nu_comm,
        r_comm=r_comm,
        t_priv=t_priv,
        tau=tau,
    )
    return prog, layout


def recover(solution, layout):
    """Undo the Charnes-Cooper scaling: divide every scaled variable by phi
    and evaluate the unscaled fractional objective at the recovered point."""
    if solution.status != OPTIMAL or solution.x is None:
        raise ValueError("can only recover from an optimal solution")
    x = solution.x
    phi = float(x[layout.phi])
    if phi <= 0:
        raise NumericalError("nonpositive scale factor in solution")
    topo = layout.topology
    beams = BeamformerSet.zeros(topo)
    for key, idx in layout.w_priv.items():
        beams.private[key] = extract_complex(x, idx) / phi
    for g, idx in layout.w_comm.items():
        beams.common[g] = extract_complex(x, idx) / phi
    nu_private = {key: float(x[i]) / phi for key, i in layout.nu_priv.items()}
    nu_common = {k: float(x[i]) / phi for k, i in layout.nu_comm.items()}
    r_nats = {g: float(x[i]) / phi for g, i in layout.r_comm.items()}
    r_bps = tuple(
        r_nats[g] * layout.bandwidth_hz / LN2 for g in range(topo.num_groups)
    )
    fractional = None
    if layout.objective_kind == "ee":
        numer = sum(math.log(v) for v in nu_private.values()) + sum(r_nats.values())
        denom = beams.total_transmit_power() / layout.eta + layout.circuit_power_w
        fractional = numer / denom
    return RecoveredPoint(
        beams=beams,
        nu_private=nu_private,
        nu_common=nu_common,
        r_common_bps=r_bps,
        phi=phi,
        scaled_objective=solution.objective,
        fractional_objective=fractional,
        tau=float(x[layout.tau]) if layout.tau is not None else None,
    )


def count_active_unicast_streams(beams, topology, power, threshold=1e-6):
    """Streams whose transmit power exceeds threshold * P_b of their BS."""
    count = 0
    for (k, l), w in beams.private.items():
        budget = power.p_max_w[topology.user_bs[k]]
        if float(np.vdot(w, w).real) > threshold * budget:
            count += 1
    return count


def _state_from_beams(beams, scenario, channels):
    """Exact iterate around given beams: MMSE receivers, nu = 1/mse, common
    rates from the nu values, phi = 1/P_tot."""
    topo = scenario.topology
    radio = scenario.radio
    n0 = radio.noise_power_w
    receivers = mmse_receivers(beams, channels, topo, n0)
    nu_private = {
        key: 1.0 / metrics.mse_private(key[0], key[1], receivers, beams, channels, topo, n0)
        for key in beams.private
    }
    nu_common = {
        k: 1.0 / metrics.mse_common(k, receivers, beams, channels, topo, n0)
        for k in range(topo.num_users)
    }
    r_bps = tuple(
        radio.bandwidth_hz / LN2 * min(math.log(nu_common[k]) for k in members)
        for members in topo.group_members
    )
    phi = 1.0 / metrics.total_power(beams, topo, scenario.power)
    state = IterateState(
        beams=beams,
        receivers=receivers,
        nu_private=nu_private,
        nu_common=nu_common,
        r_common_bps=r_bps,
        phi=phi,
    )
    report = metrics.rates(receivers, beams, channels, topo, radio, scenario.power)
    return state, report


def _targets_met(report, targets_bps, slack=1e-9):
    return all(
        report.common_rates_bps[g] >= t * (1.0 - slack)
        for g, t in enumerate(targets_bps)
    )


def _svd_common_beams(scenario, channels):
    """Each group's beam points along the dominant right singular vector of
    its stacked member channels; half the BS budget is split over its groups."""
    topo = scenario.topology
    common = {}
    for g, members in enumerate(topo.group_members):
        b = topo.group_bs[g]
        stacked = np.vstack([channels.h(b, k) for k in members])
        _, _, vh = np.linalg.svd(stacked)
        direction = vh[0].conj()
        power = 0.5 * scenario.power.p_max_w[b] / len(topo.bs_groups(b))
        common[g] = math.sqrt(power) * direction
    return common


def _private_injection(scenario, channels, frac):
    """Seed beams for every private stream: top right singular vectors of the
    own-link channel, sharing frac * P_b across the BS's streams."""
    topo = scenario.topology
    private = {}
    per_bs_streams = {
        b: sum(topo.num_private_streams(k) for k in topo.bs_users(b))
        for b in range(topo.num_bs)
    }
    for k in range(topo.num_users):
        b = topo.user_bs[k]
        if topo.num_private_streams(k) == 0:
            continue
        _, _, vh = np.linalg.svd(channels.h(b, k))
        stream_power = frac * scenario.power.p_max_w[b] / per_bs_streams[b]
        for l in range(topo.num_private_streams(k)):
            private[(k, l)] = math.sqrt(stream_power) * vh[l].conj()
    return private


def _solve_subproblem(prog, options, iteration):
    sol = prog.solve(options.conic_tol)
    if sol.status != OPTIMAL:
        # one retry at relaxed accuracy before giving up
        sol = prog.solve(min(options.conic_tol * 100.0, 1e-6), max_iter=400)
    if sol.status != OPTIMAL:
        raise SolverError("conic subproblem failed", status=sol.status, iteration=iteration)
    return sol


def _capacity_precheck(scenario, channels):
    """Reject targets above an interference-free full-power link bound."""
    topo = scenario.topology
    radio = scenario.radio
    for g, members in enumerate(topo.group_members):
        b = topo.group_bs[g]
        p_b = scenario.power.p_max_w[b]
        target = scenario.rate_targets.common_rate_bps[g]
        for k in members:
            smax = np.linalg.norm(channels.h(b, k), 2)
            cap = radio.bandwidth_hz * math.log2(
                1.0 + smax**2 * p_b / radio.noise_power_w
            )
            if cap < target:
                raise InfeasibleError(
                    f"group {g}: target {target:.4g} bit/s exceeds the "
                    f"single-user capacity bound {cap:.4g} bit/s of user {k}"
                )


def _feasibility_phase(state, scenario, channels, options):
    """Drive the common beams toward the rate targets by maximizing the worst
    scaled rate slack with the same SCA machinery."""
    targets_bps = scenario.rate_targets.common_rate_bps
    report = metrics.rates(
        state.receivers, state.beams, channels, scenario.topology,
        scenario.radio, scenario.power,
    )
    for it in range(1, options.feasibility_max_iters + 1):
        prog, layout = build_subproblem(
            state, scenario, channels, options, objective="feasibility"
        )
        sol = _solve_subproblem(prog, options, iteration=it)
        rec = recover(sol, layout)
        state, report = _state_from_beams(rec.beams, scenario, channels)
        if _targets_met(report, targets_bps):
            return state
    shortfall = min(
        report.common_rates_bps[g] - t for g, t in enumerate(targets_bps)
    )
    raise InfeasibleError(
        f"rate targets unreachable: worst shortfall {shortfall:.4g} bit/s after "
        f"{options.feasibility_max_iters} feasibility iterations"
    )


def initialize(scenario, channels, options=None):
    """Feasible starting iterate per the scheme above: SVD common beams at
    half power, a small private-beam seed (joint mode) backed off until the
    common-rate targets still hold, MMSE receivers and exact nu = 1/mse."""
    options = options or SolverOptions()
    topo = scenario.topology
    _capacity_precheck(scenario, channels)
    targets_bps = scenario.rate_targets.common_rate_bps

    base = BeamformerSet.zeros(topo)
    base.common = _svd_common_beams(scenario, channels)
    state, report = _state_from_beams(base, scenario, channels)
    if not _targets_met(report, targets_bps):
        state = _feasibility_phase(state, scenario, channels, options)

    if options.mode == "joint" and topo.private_streams():
        frac = options.init_private_power_frac
        while frac >= 1e-4:
            candidate = state.beams.copy()
            candidate.private = _private_injection(scenario, channels, frac)
            cand_state, cand_report = _state_from_beams(candidate, scenario, channels)
            if _targets_met(cand_report, targets_bps):
                return cand_state
            frac /= 2.0
    return state


def run(scenario, channels, options=None, initial_beams=None):
    """Full optimization: alternate conic subproblem solves with receiver and
    linearization updates until the metrics-evaluated EE stalls.

    Joint mode is a two-start search: the unicast-enabled chain and a
    multicast-restricted chain (the restriction of the feasible set to zero
    private beams), keeping whichever converges higher.  The restricted
    chain is exactly what multicast-only mode runs, so the joint result
    never falls below it on the same channels.

    The returned state's trace is recomputed through `metrics` at every
    iteration; solver-internal objectives are kept alongside for the
    scaled/unscaled agreement check but are never reported as EE.

    `initial_beams` warm-starts a single chain from a known feasible beam
    set (for continuation across a sweep); it must already satisfy the rate
    targets, which is checked.
    """
    options = options or SolverOptions()
    if initial_beams is not None:
        _capacity_precheck(scenario, channels)
        beams = initial_beams.copy()
        if options.mode == "multicast-only":
            for key in beams.private:
                beams.private[key] = np.zeros_like(beams.private[key])
        state, report = _state_from_beams(beams, scenario, channels)
        if not _targets_met(report, scenario.rate_targets.common_rate_bps):
            raise InfeasibleError("warm-start beams violate the common-rate targets")
        return _iterate(state, scenario, channels, options)

    result = _iterate(initialize(scenario, channels, options), scenario, channels, options)
    if options.mode == "joint" and scenario.topology.private_streams():
        restricted = replace(options, mode="multicast-only")
        try:
            alt = _iterate(
                initialize(scenario, channels, restricted), scenario, channels, restricted
            )
        except SolverError:
            alt = None  # secondary start only; the primary result stands
        if alt is not None and alt.trace[-1].ee_bits_per_joule > result.trace[-1].ee_bits_per_joule:
            result = alt
    return result


def _iterate(state, scenario, channels, options):
    """One SCA chain from a feasible starting state."""
    topo = scenario.topology
    radio = scenario.radio
    power = scenario.power
    prev_ee = None
    for n in range(1, options.max_iters + 1):
        prog, layout = build_subproblem(state, scenario, channels, options, "ee")
        sol = _solve_subproblem(prog, options, iteration=n)
        rec = recover(sol, layout)
        if rec.phi <= options.phi_min * (1.0 + 1e-6):
            raise NumericalError(f"degenerate scale factor {rec.phi:.3e} at iteration {n}")

        ee_fixed_rx = metrics.energy_efficiency(
            state.receivers, rec.beams, channels, topo, radio, power
        )
        receivers = mmse_receivers(rec.beams, channels, topo, radio.noise_power_w)
        report = metrics.rates(receivers, rec.beams, channels, topo, radio, power)
        if report.ee_bits_per_joule < ee_fixed_rx * (1.0 - 1e-9):
            raise NumericalError(
                f"MMSE receiver update decreased EE at iteration {n}: "
                f"{ee_fixed_rx:.9e} -> {report.ee_bits_per_joule:.9e}"
            )

        state = IterateState(
            beams=rec.beams,
            receivers=receivers,
            nu_private=rec.nu_private,
            nu_common=rec.nu_common,
            r_common_bps=rec.r_common_bps,
            phi=rec.phi,
            trace=state.trace,
            iteration=n,
        )
        state.trace.append(
            IterateRecord(
                iteration=n,
                ee_bits_per_joule=report.ee_bits_per_joule,
                sum_rate_bps=report.sum_rate_bps,
                total_power_w=report.total_power_w,
                solver_status=sol.status,
                scaled_objective=rec.scaled_objective,
                fractional_objective=rec.fractional_objective,
                active_unicast_streams=count_active_unicast_streams(
                    rec.beams, topo, power, options.stream_active_threshold
                ),
            )
        )
        ee = report.ee_bits_per_joule
        if prev_ee is not None and abs(ee - prev_ee) <= options.rel_objective_tol * max(
            prev_ee, 1e-300
        ):
            state.converged = True
            break
        prev_ee = ee
    return state
