import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamform_ee import metrics
from beamform_ee.metrics import BeamformerSet, ReceiverSet
from beamform_ee.mmse import mmse_receivers
from beamform_ee.scenario import (
    ChannelSet,
    PowerModel,
    RadioConfig,
    build_paper_topology,
    generate_channels,
)

E1 = np.array([1.0 + 0j, 0.0])
E2 = np.array([0.0 + 0j, 1.0])

PAPER_POWER = PowerModel(
    eta=0.35, p_max_w=(10 ** 0.3,) * 2, p0_bs_w=1.0, p0_ue_w=0.2,
    prf_bs_w=0.4, prf_ue_w=0.2,
)


def two_user_identity():
    """Two 2-antenna users in one group of one BS, identity channels."""
    topo = build_paper_topology(B=1, N=2, K=2, L=1, M=2)
    ch = ChannelSet({(0, 0): np.eye(2, dtype=complex), (0, 1): np.eye(2, dtype=complex)})
    return topo, ch


def scalar_link():
    """One single-antenna BS, one 2-antenna user, channel [[1], [0]]."""
    topo = build_paper_topology(B=1, N=1, K=1, L=1, M=2)
    ch = ChannelSet({(0, 0): np.array([[1.0 + 0j], [0.0]])})
    return topo, ch


def test_interference_private_zero_cases():
    topo, ch = two_user_identity()
    beams = BeamformerSet.zeros(topo)
    rx = ReceiverSet(private={(0, 0): E1.copy(), (1, 0): E2.copy()},
                     common={0: E1.copy(), 1: E2.copy()})
    assert metrics.interference_private(0, 0, rx, beams, ch, topo) == 0.0
    beams.private[(1, 0)] = E2.copy()
    rx.private[(0, 0)] = np.zeros(2, dtype=complex)
    assert metrics.interference_private(0, 0, rx, beams, ch, topo) == 0.0


def test_interference_private_orthogonal_beams():
    topo, ch = two_user_identity()
    beams = BeamformerSet.zeros(topo)
    beams.private[(0, 0)] = E1.copy()
    beams.private[(1, 0)] = E2.copy()
    rx = ReceiverSet(private={(0, 0): E1.copy(), (1, 0): E2.copy()},
                     common={0: E1.copy(), 1: E2.copy()})
    # u = e1 hears only the e2 beam of the other stream: |e1^H e2|^2 = 0
    assert metrics.interference_private(0, 0, rx, beams, ch, topo) == pytest.approx(0.0, abs=1e-15)


def test_interference_common_cases():
    topo, ch = two_user_identity()
    beams = BeamformerSet.zeros(topo)
    rx = ReceiverSet(private={(0, 0): E1.copy(), (1, 0): E2.copy()},
                     common={0: E1.copy(), 1: E2.copy()})
    # single group, no private power: nothing to hear
    beams.common[0] = E1.copy()
    assert metrics.interference_common(0, rx, beams, ch, topo) == 0.0
    # one private stream through an identity channel at the same receiver
    beams.private[(0, 0)] = E1.copy()
    assert metrics.interference_common(0, rx, beams, ch, topo) == pytest.approx(1.0, abs=1e-15)


def test_sinr_scalar_case():
    topo, ch = scalar_link()
    beams = BeamformerSet.zeros(topo)
    beams.private[(0, 0)] = np.array([1.0 + 0j])
    rx = ReceiverSet(private={(0, 0): np.array([0.5 + 0j, 0.0])},
                     common={0: np.zeros(2, dtype=complex)})
    assert metrics.sinr_private(0, 0, rx, beams, ch, topo, n0=1.0) == pytest.approx(1.0)
    beams.private[(0, 0)] = np.array([0.0 + 0j])
    assert metrics.sinr_private(0, 0, rx, beams, ch, topo, n0=1.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(re=st.floats(-3, 3), im=st.floats(-3, 3))
def test_sinr_scale_invariance(re, im):
    c = complex(re, im)
    if abs(c) < 1e-3:
        return
    topo = build_paper_topology(B=2, N=4, K=4, L=2, M=2)
    radio = RadioConfig(20e6, 10 ** -12.5, 3.0, 250.0)
    ch = generate_channels(topo, radio, seed=11)
    rng = np.random.default_rng(5)
    beams = _random_beams(topo, rng)
    rx = mmse_receivers(beams, ch, topo, radio.noise_power_w)
    base = metrics.sinr_private(0, 0, rx, beams, ch, topo, radio.noise_power_w)
    rx.private[(0, 0)] = c * rx.private[(0, 0)]
    scaled = metrics.sinr_private(0, 0, rx, beams, ch, topo, radio.noise_power_w)
    assert scaled == pytest.approx(base, rel=1e-9)


def test_mse_cases():
    topo, ch = scalar_link()
    beams = BeamformerSet.zeros(topo)
    beams.private[(0, 0)] = np.array([1.0 + 0j])
    rx = ReceiverSet(private={(0, 0): np.zeros(2, dtype=complex)},
                     common={0: np.zeros(2, dtype=complex)})
    # u = 0 always gives mse exactly 1
    assert metrics.mse_private(0, 0, rx, beams, ch, topo, n0=1.0) == 1.0
    rx.private[(0, 0)] = np.array([0.5 + 0j, 0.0])
    assert metrics.mse_private(0, 0, rx, beams, ch, topo, n0=1.0) == pytest.approx(0.5)
    # perfect inversion at zero noise
    rx.private[(0, 0)] = np.array([1.0 + 0j, 0.0])
    assert metrics.mse_private(0, 0, rx, beams, ch, topo, n0=0.0) == pytest.approx(0.0, abs=1e-15)


def test_rates_unit_bandwidth_and_group_min():
    topo = build_paper_topology(B=1, N=2, K=2, L=1, M=1)
    ch = ChannelSet({(0, 0): np.array([[1.0 + 0j, 0.0]]),
                     (0, 1): np.array([[math.sqrt(3.0) + 0j, 0.0]])})
    radio = RadioConfig(bandwidth_hz=1.0, noise_power_w=1.0,
                        cell_separation_db=0.0, bs_user_distance_m=1.0)
    power = PowerModel(eta=1.0, p_max_w=(10.0,), p0_bs_w=1.0, p0_ue_w=0.0,
                       prf_bs_w=0.0, prf_ue_w=0.0)
    beams = BeamformerSet.zeros(topo)
    beams.common[0] = np.array([1.0 + 0j, 0.0])
    rx = ReceiverSet(private={}, common={0: np.array([1.0 + 0j]), 1: np.array([1.0 + 0j])})
    report = metrics.rates(rx, beams, ch, topo, radio, power)
    # SINRs 1 and 3; the group rate is the worst user's log2(1 + 1) = 1 bit/s
    assert report.common_sinrs[0] == pytest.approx(1.0)
    assert report.common_sinrs[1] == pytest.approx(3.0)
    assert report.common_rates_bps[0] == pytest.approx(1.0)
    assert report.sum_rate_bps == pytest.approx(1.0)


def test_rates_all_zero_beams():
    topo = build_paper_topology(B=2, N=4, K=8, L=4, M=2)
    radio = RadioConfig(20e6, 10 ** -12.5, 3.0, 250.0)
    ch = generate_channels(topo, radio, seed=0)
    beams = BeamformerSet.zeros(topo)
    rx = mmse_receivers(beams, ch, topo, radio.noise_power_w)
    report = metrics.rates(rx, beams, ch, topo, radio, PAPER_POWER)
    assert report.sum_rate_bps == 0.0
    assert report.ee_bits_per_joule == 0.0
    assert report.total_power_w == pytest.approx(metrics.circuit_power(topo, PAPER_POWER))


def test_circuit_power_paper_values():
    # 2 BSs with 8 antennas, 8 users with 2 antennas:
    # 2*(1 + 8*0.4) + 8*(0.2 + 2*0.2) = 13.2 W
    topo = build_paper_topology(B=2, N=8, K=8, L=4, M=2)
    assert metrics.circuit_power(topo, PAPER_POWER) == pytest.approx(13.2)
    # one single-antenna BS serving nobody: 1 + 1 * 0.4
    from beamform_ee.scenario import Topology
    solo = Topology(bs_antennas=(1,), user_rx_antennas=(), group_members=(), group_bs=())
    lonely = PowerModel(eta=0.35, p_max_w=(2.0,), p0_bs_w=1.0, p0_ue_w=0.2,
                        prf_bs_w=0.4, prf_ue_w=0.2)
    assert metrics.circuit_power(solo, lonely) == pytest.approx(1.4)


@settings(max_examples=20, deadline=None)
@given(mult=st.integers(2, 4))
def test_circuit_power_linear_in_users(mult):
    base = build_paper_topology(B=1, N=4, K=2, L=1, M=2)
    bigger = build_paper_topology(B=1, N=4, K=2 * mult, L=1, M=2)
    per_user = PAPER_POWER.p0_ue_w + 2 * PAPER_POWER.prf_ue_w
    grown = metrics.circuit_power(bigger, PAPER_POWER) - metrics.circuit_power(base, PAPER_POWER)
    assert grown == pytest.approx((2 * mult - 2) * per_user)


def test_total_power_amplifier_scaling():
    topo = build_paper_topology(B=1, N=2, K=1, L=1, M=1)
    power = PowerModel(eta=0.35, p_max_w=(2.0,), p0_bs_w=0.0, p0_ue_w=0.0,
                       prf_bs_w=0.0, prf_ue_w=0.0)
    beams = BeamformerSet.zeros(topo)
    beams.common[0] = math.sqrt(0.35) * np.array([1.0 + 0j, 0.0])
    # a 0.35 W beam through a 35% efficient amplifier draws exactly 1 W
    assert metrics.total_power(beams, topo, power) == pytest.approx(1.0)


def test_ee_depends_only_on_aggregates():
    # same sum rate at the same total power must give the same EE, however
    # the rate splits across streams
    topo = build_paper_topology(B=2, N=4, K=4, L=2, M=2)
    radio = RadioConfig(20e6, 10 ** -12.5, 3.0, 250.0)
    ch = generate_channels(topo, radio, seed=2)
    rng = np.random.default_rng(0)
    beams = _random_beams(topo, rng)
    rx = mmse_receivers(beams, ch, topo, radio.noise_power_w)
    report = metrics.rates(rx, beams, ch, topo, radio, PAPER_POWER)
    assert report.ee_bits_per_joule == pytest.approx(
        report.sum_rate_bps / report.total_power_w, rel=1e-12
    )


def _random_beams(topo, rng, scale=1.0):
    beams = BeamformerSet.zeros(topo)
    for (k, l) in topo.private_streams():
        n = topo.bs_antennas[topo.user_bs[k]]
        beams.private[(k, l)] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    for g in range(topo.num_groups):
        n = topo.bs_antennas[topo.group_bs[g]]
        beams.common[g] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return beams


def test_mse_sinr_duality_at_mmse_receivers():
    # with MMSE receivers, mse = 1 / (1 + sinr) for every stream
    topo = build_paper_topology(B=2, N=4, K=4, L=2, M=2)
    radio = RadioConfig(20e6, 10 ** -12.5, 3.0, 250.0)
    n0 = radio.noise_power_w
    for seed in range(20):
        ch = generate_channels(topo, radio, seed=seed)
        beams = _random_beams(topo, np.random.default_rng(seed), scale=0.3)
        rx = mmse_receivers(beams, ch, topo, n0)
        for (k, l) in topo.private_streams():
            eps = metrics.mse_private(k, l, rx, beams, ch, topo, n0)
            gamma = metrics.sinr_private(k, l, rx, beams, ch, topo, n0)
            assert abs(eps - 1.0 / (1.0 + gamma)) <= 1e-9
        for k in range(topo.num_users):
            eps = metrics.mse_common(k, rx, beams, ch, topo, n0)
            gamma = metrics.sinr_common(k, rx, beams, ch, topo, n0)
            assert abs(eps - 1.0 / (1.0 + gamma)) <= 1e-9


def test_group_rate_bounded_by_every_member():
    topo = build_paper_topology(B=2, N=4, K=8, L=4, M=2)
    radio = RadioConfig(20e6, 10 ** -12.5, 3.0, 250.0)
    ch = generate_channels(topo, radio, seed=4)
    beams = _random_beams(topo, np.random.default_rng(4), scale=0.3)
    rx = mmse_receivers(beams, ch, topo, radio.noise_power_w)
    report = metrics.rates(rx, beams, ch, topo, radio, PAPER_POWER)
    w = radio.bandwidth_hz
    for g, members in enumerate(topo.group_members):
        per_user = [w * math.log2(1 + report.common_sinrs[k]) for k in members]
        assert report.common_rates_bps[g] <= min(per_user) + 1e-9
        assert report.common_rates_bps[g] == pytest.approx(min(per_user))


def test_beamformer_json_roundtrip():
    topo = build_paper_topology(B=2, N=4, K=4, L=2, M=2)
    beams = _random_beams(topo, np.random.default_rng(9))
    data = beams.to_jsonable()
    back = BeamformerSet.from_jsonable(data)
    for key in beams.private:
        assert np.allclose(back.private[key], beams.private[key])
    for g in beams.common:
        assert np.allclose(back.common[g], beams.common[g])
