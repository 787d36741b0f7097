"""Ground-truth link metrics: interference, SINR, MSE, rates, power, EE.

Everything here is an exact evaluation for a given (beamformers, receivers)
pair; the optimizer is validated against these functions, never the other
way around.  All powers are in watts, rates in bits/s, EE in bits/joule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class BeamformerSet:
    """Transmit vectors: private[(k, l)] of length N_{b_k}, common[g] of
    length N_{b_g}."""

    private: dict
    common: dict

    @classmethod
    def zeros(cls, topology):
        private = {
            (k, l): np.zeros(topology.bs_antennas[topology.user_bs[k]], dtype=complex)
            for (k, l) in topology.private_streams()
        }
        common = {
            g: np.zeros(topology.bs_antennas[topology.group_bs[g]], dtype=complex)
            for g in range(topology.num_groups)
        }
        return cls(private=private, common=common)

    def copy(self):
        return BeamformerSet(
            private={key: w.copy() for key, w in self.private.items()},
            common={g: w.copy() for g, w in self.common.items()},
        )

    def bs_transmit_power(self, topology, b):
        total = 0.0
        for (k, l), w in self.private.items():
            if topology.user_bs[k] == b:
                total += float(np.vdot(w, w).real)
        for g, w in self.common.items():
            if topology.group_bs[g] == b:
                total += float(np.vdot(w, w).real)
        return total

    def total_transmit_power(self):
        return sum(float(np.vdot(w, w).real) for w in self.private.values()) + sum(
            float(np.vdot(w, w).real) for w in self.common.values()
        )

    def to_jsonable(self):
        """Complex vectors as [re, im] pair lists, keyed by stream."""
        return {
            "private": {
                f"{k},{l}": [[float(z.real), float(z.imag)] for z in w]
                for (k, l), w in sorted(self.private.items())
            },
            "common": {
                str(g): [[float(z.real), float(z.imag)] for z in w]
                for g, w in sorted(self.common.items())
            },
        }

    @classmethod
    def from_jsonable(cls, data):
        private = {}
        for key, pairs in data["private"].items():
            k, l = (int(s) for s in key.split(","))
            private[(k, l)] = np.array([re + 1j * im for re, im in pairs])
        common = {
            int(g): np.array([re + 1j * im for re, im in pairs])
            for g, pairs in data["common"].items()
        }
        return cls(private=private, common=common)


@dataclass
class ReceiverSet:
    """Receive vectors: private[(k, l)] and common[k], each of length M_k."""

    private: dict
    common: dict


@dataclass
class RateReport:
    """Rates and power for one (beams, receivers) operating point."""

    private_rates_bps: dict
    common_sinrs: dict
    common_rates_bps: tuple
    sum_rate_bps: float
    total_power_w: float
    ee_bits_per_joule: float


def _check_vec(v, length, what):
    if v.shape != (length,):
        raise ConfigurationError(f"{what}: expected shape ({length},), got {v.shape}")


def _gain(u, h, w):
    """|u^H H w|^2."""
    return float(abs(np.vdot(u, h @ w)) ** 2)


def interference_private(k, l, receivers, beams, channels, topology):
    """Power leaking into private stream (k, l): every other private stream
    plus every common stream (including the own group's)."""
    u = receivers.private[(k, l)]
    _check_vec(u, topology.user_rx_antennas[k], f"receiver ({k},{l})")
    total = 0.0
    for (i, j), w in beams.private.items():
        if (i, j) == (k, l):
            continue
        total += _gain(u, channels.h(topology.user_bs[i], k), w)
    for g, w in beams.common.items():
        total += _gain(u, channels.h(topology.group_bs[g], k), w)
    return total


def interference_common(k, receivers, beams, channels, topology):
    """Power leaking into user k's common stream: all private streams plus
    the common streams of every other group."""
    u = receivers.common[k]
    _check_vec(u, topology.user_rx_antennas[k], f"common receiver {k}")
    own_group = topology.user_group[k]
    total = 0.0
    for (i, j), w in beams.private.items():
        total += _gain(u, channels.h(topology.user_bs[i], k), w)
    for g, w in beams.common.items():
        if g == own_group:
            continue
        total += _gain(u, channels.h(topology.group_bs[g], k), w)
    return total


def sinr_private(k, l, receivers, beams, channels, topology, n0):
    u = receivers.private[(k, l)]
    norm2 = float(np.vdot(u, u).real)
    if norm2 == 0.0:
        return 0.0  # convention: a zeroed receiver carries nothing
    signal = _gain(u, channels.h(topology.user_bs[k], k), beams.private[(k, l)])
    interf = interference_private(k, l, receivers, beams, channels, topology)
    den = norm2 * n0 + interf
    if den == 0.0:  # receiver so small the noise term underflows
        return 0.0
    return signal / den


def sinr_common(k, receivers, beams, channels, topology, n0):
    u = receivers.common[k]
    norm2 = float(np.vdot(u, u).real)
    if norm2 == 0.0:
        return 0.0
    g = topology.user_group[k]
    signal = _gain(u, channels.h(topology.user_bs[k], k), beams.common[g])
    interf = interference_common(k, receivers, beams, channels, topology)
    den = norm2 * n0 + interf
    if den == 0.0:
        return 0.0
    return signal / den


def mse_private(k, l, receivers, beams, channels, topology, n0):
    r"""eps_{k,l} = |1 - u^H H w|^2 + I_{k,l} + N0 ||u||^2."""
    u = receivers.private[(k, l)]
    h = channels.h(topology.user_bs[k], k)
    direct = abs(1.0 - np.vdot(u, h @ beams.private[(k, l)])) ** 2
    interf = interference_private(k, l, receivers, beams, channels, topology)
    return float(direct + interf + n0 * np.vdot(u, u).real)


def mse_common(k, receivers, beams, channels, topology, n0):
    u = receivers.common[k]
    g = topology.user_group[k]
    h = channels.h(topology.user_bs[k], k)
    direct = abs(1.0 - np.vdot(u, h @ beams.common[g])) ** 2
    interf = interference_common(k, receivers, beams, channels, topology)
    return float(direct + interf + n0 * np.vdot(u, u).real)


def circuit_power(topology, power):
    """Static plus per-RF-chain power of all BSs and user terminals."""
    total = sum(
        power.p0_bs_w + topology.bs_antennas[b] * power.prf_bs_w
        for b in range(topology.num_bs)
    )
    total += sum(
        power.p0_ue_w + topology.user_rx_antennas[k] * power.prf_ue_w
        for k in range(topology.num_users)
    )
    return total


def total_power(beams, topology, power):
    """Amplifier draw of all transmit beams plus the circuit power."""
    return beams.total_transmit_power() / power.eta + circuit_power(topology, power)


def rates(receivers, beams, channels, topology, radio, power):
    """Evaluate every stream rate, the group common rates (worst member),
    total consumed power and the network energy efficiency."""
    w_hz = radio.bandwidth_hz
    n0 = radio.noise_power_w
    private_rates = {}
    for (k, l) in beams.private:
        gamma = sinr_private(k, l, receivers, beams, channels, topology, n0)
        private_rates[(k, l)] = w_hz * np.log2(1.0 + gamma)
    common_sinrs = {
        k: sinr_common(k, receivers, beams, channels, topology, n0)
        for k in range(topology.num_users)
    }
    common_rates = tuple(
        w_hz * min(np.log2(1.0 + common_sinrs[k]) for k in members)
        for members in topology.group_members
    )
    sum_rate = sum(private_rates.values()) + sum(common_rates)
    p_tot = total_power(beams, topology, power)
    return RateReport(
        private_rates_bps=private_rates,
        common_sinrs=common_sinrs,
        common_rates_bps=common_rates,
        sum_rate_bps=float(sum_rate),
        total_power_w=p_tot,
        ee_bits_per_joule=float(sum_rate) / p_tot,
    )


def energy_efficiency(receivers, beams, channels, topology, radio, power):
    return rates(receivers, beams, channels, topology, radio, power).ee_bits_per_joule
