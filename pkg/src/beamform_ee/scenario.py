"""Network scenario definition and random channel generation.

A scenario bundles the cell topology (BSs, users, multicast groups), the
transmitter power model, radio parameters and per-group rate targets.
Together with an integer seed it fully determines one simulated drop:
the random user-to-group assignment and the Rayleigh channel realization
are both derived deterministically from the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigurationError, InfeasibleError


@dataclass(frozen=True)
class Topology:
    """Cells, users and multicast groups with their serving relations.

    Each user belongs to exactly one group and each group is served by
    exactly one BS.  User k carries M_k - 1 private streams on top of the
    group common stream, so single-antenna users are multicast-only.
    """

    bs_antennas: tuple        # N_b per BS
    user_rx_antennas: tuple   # M_k per user
    group_members: tuple      # tuple of user-index tuples, one per group
    group_bs: tuple           # serving BS per group
    user_group: tuple = field(init=False)
    user_bs: tuple = field(init=False)

    def __post_init__(self):
        K = len(self.user_rx_antennas)
        user_group = [None] * K
        for g, members in enumerate(self.group_members):
            for k in members:
                if user_group[k] is not None:
                    raise ConfigurationError(f"user {k} assigned to several groups")
                user_group[k] = g
        if any(g is None for g in user_group):
            raise ConfigurationError("every user must belong to a group")
        user_bs = tuple(self.group_bs[g] for g in user_group)
        object.__setattr__(self, "user_group", tuple(user_group))
        object.__setattr__(self, "user_bs", user_bs)
        for b in range(self.num_bs):
            if self.bs_antennas[b] < len(self.bs_groups(b)):
                raise InfeasibleError(
                    f"BS {b} has {self.bs_antennas[b]} antennas but serves "
                    f"{len(self.bs_groups(b))} groups"
                )

    @property
    def num_bs(self):
        return len(self.bs_antennas)

    @property
    def num_users(self):
        return len(self.user_rx_antennas)

    @property
    def num_groups(self):
        return len(self.group_members)

    def bs_users(self, b):
        return tuple(k for k in range(self.num_users) if self.user_bs[k] == b)

    def bs_groups(self, b):
        return tuple(g for g in range(self.num_groups) if self.group_bs[g] == b)

    def num_private_streams(self, k):
        return self.user_rx_antennas[k] - 1

    def private_streams(self):
        """All (user, stream) index pairs, in deterministic order."""
        return [
            (k, l)
            for k in range(self.num_users)
            for l in range(self.num_private_streams(k))
        ]


@dataclass(frozen=True)
class PowerModel:
    """Transmit-amplifier efficiency and circuit power parameters (watts)."""

    eta: float
    p_max_w: tuple      # per-BS transmit power budget
    p0_bs_w: float
    p0_ue_w: float
    prf_bs_w: float
    prf_ue_w: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigurationError("eta must lie in (0, 1]")
        if min(self.p_max_w) < 0 or min(
            self.p0_bs_w, self.p0_ue_w, self.prf_bs_w, self.prf_ue_w
        ) < 0:
            raise ConfigurationError("power parameters must be nonnegative")


@dataclass(frozen=True)
class RadioConfig:
    """Bandwidth, noise power per receive antenna, and path-loss geometry."""

    bandwidth_hz: float
    noise_power_w: float
    cell_separation_db: float
    bs_user_distance_m: float

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.noise_power_w <= 0:
            raise ConfigurationError("bandwidth and noise power must be positive")
        if self.bs_user_distance_m <= 0:
            raise ConfigurationError("BS-user distance must be positive")


@dataclass(frozen=True)
class RateTargets:
    """Minimum common-stream rate per group, in bits/s."""

    common_rate_bps: tuple

    def __post_init__(self):
        if min(self.common_rate_bps, default=0.0) < 0:
            raise ConfigurationError("rate targets must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    power: PowerModel
    radio: RadioConfig
    rate_targets: RateTargets


class ChannelSet:
    """Complex channel matrices H[b, k] of shape (M_k, N_b) for every pair."""

    def __init__(self, matrices):
        self._h = dict(matrices)
        for (b, k), h in self._h.items():
            if not np.all(np.isfinite(h)):
                raise ConfigurationError(f"channel ({b}, {k}) has non-finite entries")
            h.setflags(write=False)

    def h(self, b, k):
        return self._h[(b, k)]

    def pairs(self):
        return sorted(self._h.keys())

    def __eq__(self, other):
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return self.pairs() == other.pairs() and all(
            np.array_equal(self._h[p], other._h[p]) for p in self.pairs()
        )


def build_paper_topology(B, N, K, L, M, rng=None):
    """Symmetric multi-cell layout: K/B users per BS, split into L/B equal groups.

    When `rng` is given the users of each cell are randomly permuted before
    the split, otherwise the assignment is contiguous.  Every user gets
    M - 1 private streams.
    """
    if K % B != 0 or L % B != 0:
        raise ConfigurationError("K and L must both be divisible by B")
    users_per_bs = K // B
    groups_per_bs = L // B
    if users_per_bs % groups_per_bs != 0:
        raise ConfigurationError("users per BS must divide evenly into groups")
    if N < groups_per_bs:
        raise InfeasibleError(
            f"{N} antennas per BS cannot serve {groups_per_bs} groups"
        )
    group_size = users_per_bs // groups_per_bs
    members = []
    group_bs = []
    for b in range(B):
        cell_users = np.arange(b * users_per_bs, (b + 1) * users_per_bs)
        if rng is not None:
            cell_users = rng.permutation(cell_users)
        for j in range(groups_per_bs):
            members.append(tuple(int(u) for u in cell_users[j * group_size:(j + 1) * group_size]))
            group_bs.append(b)
    return Topology(
        bs_antennas=(N,) * B,
        user_rx_antennas=(M,) * K,
        group_members=tuple(members),
        group_bs=tuple(group_bs),
    )


def pathloss_db(topology, radio, bs, user):
    """Distance path loss 35 + 30 log10(d), plus the cell-separation margin
    for cross-cell links."""
    loss = 35.0 + 30.0 * math.log10(radio.bs_user_distance_m)
    if topology.user_bs[user] != bs:
        loss += radio.cell_separation_db
    return loss


def generate_channels(topology, radio, seed):
    r"""Draw one quasistatic flat Rayleigh realization, H[b, k] ~ CN(0, v I)
    entrywise with v = 10^{-gamma(b, k) / 10}.

    Pure function of (topology, radio, seed): the same seed reproduces the
    set bit for bit.  Matrices are drawn in fixed (b, k) order.
    """
    rng = np.random.default_rng(seed)
    matrices = {}
    for b in range(topology.num_bs):
        n = topology.bs_antennas[b]
        for k in range(topology.num_users):
            m = topology.user_rx_antennas[k]
            var = 10.0 ** (-pathloss_db(topology, radio, b, k) / 10.0)
            scale = math.sqrt(var / 2.0)
            matrices[(b, k)] = scale * (
                rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
            )
    return ChannelSet(matrices)


# Scenario-file schema: one flat JSON object, §-style defaults below.
@dataclass(frozen=True)
class ScenarioConfig:
    """Flat, serializable scenario description (dB/MHz at this boundary only)."""

    B: int = 2
    N: int = 4
    K: int = 8
    L: int = 4
    M: int = 2
    eta: float = 0.35
    P_max_dbw: float = 3.0
    P0_bs_w: float = 1.0
    P0_ue_w: float = 0.2
    Prf_bs_w: float = 0.4
    Prf_ue_w: float = 0.2
    W_hz: float = 20e6
    N0_dbw: float = -125.0
    mu_db: float = 3.0
    distance_m: float = 250.0
    rate_target_mbps: float = 72.14
    seed: int = 0

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)

    def build(self, seed=None):
        """Realize one drop: (Scenario, ChannelSet) for the given seed.

        Grouping and fading use independent child streams of the seed, so a
        stored scenario file plus a seed replays the exact drop.
        """
        if seed is None:
            seed = self.seed
        group_ss, channel_ss = np.random.SeedSequence(seed).spawn(2)
        topo = build_paper_topology(
            self.B, self.N, self.K, self.L, self.M,
            rng=np.random.default_rng(group_ss),
        )
        power = PowerModel(
            eta=self.eta,
            p_max_w=(10.0 ** (self.P_max_dbw / 10.0),) * self.B,
            p0_bs_w=self.P0_bs_w,
            p0_ue_w=self.P0_ue_w,
            prf_bs_w=self.Prf_bs_w,
            prf_ue_w=self.Prf_ue_w,
        )
        radio = RadioConfig(
            bandwidth_hz=self.W_hz,
            noise_power_w=10.0 ** (self.N0_dbw / 10.0),
            cell_separation_db=self.mu_db,
            bs_user_distance_m=self.distance_m,
        )
        targets = RateTargets(
            common_rate_bps=(self.rate_target_mbps * 1e6,) * self.L,
        )
        scn = Scenario(topology=topo, power=power, radio=radio, rate_targets=targets)
        return scn, generate_channels(topo, radio, channel_ss)
