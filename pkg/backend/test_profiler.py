"""
测试地址画像、近/远划分与玩具受害者攻击
"""

import pytest

from core.exceptions import ConfigurationError, ProfilingError
from core.machine import MachineConfig, SimMachine, TileId
from core.profiler import (
    AddressStats, LatencyProfile, candidate_lines, classify_addresses, ground_truth_agreement,
    learn_attack_pair, pick_attack_pair, profile_addresses, run_toy_attack,
)
from core.victims import ToyVictim

CANDIDATES = candidate_lines(0x400000, 128)


@pytest.fixture(scope='module')
def learned():
    machine = SimMachine(MachineConfig(rng_seed=7))
    pair, class_map = learn_attack_pair(machine, victim_tile=0, helper_tile=1, candidates=128,
                                        samples_per_addr=50)
    return machine, pair, class_map


def test_profile_collects_llc_hits_only():
    machine = SimMachine(MachineConfig())
    profile = profile_addresses(machine, 0, CANDIDATES[:16], samples_per_addr=20, helper=1, min_samples=20)
    assert not profile.excluded
    assert set(profile.stats) == set(CANDIDATES[:16])
    assert all(s.count == 20 for s in profile.stats.values())
    frame = profile.to_frame(machine)
    assert list(frame.columns) == ['addr', 'mean_cycles', 'stddev', 'count', 'true_cha_tile']
    histogram = profile.latency_histogram()
    assert int(histogram['count'].sum()) == 16 * 20


def test_profile_spread_and_ground_truth_agreement():
    machine = SimMachine(MachineConfig())
    profile = profile_addresses(machine, 0, CANDIDATES, samples_per_addr=30, helper=1, min_samples=30)
    assert not profile.excluded
    assert len(profile.stats) == len(CANDIDATES)
    means = [s.mean for s in profile.stats.values()]
    assert min(means) < 50
    assert max(means) > 95

    class_map = classify_addresses(profile)
    assert len(class_map.va_near) == 32
    assert len(class_map.va_far) == 32
    assert not class_map.va_near & class_map.va_far
    assert ground_truth_agreement(profile, class_map, machine) >= 0.9


def test_profile_rejects_too_few_samples_and_same_helper():
    machine = SimMachine(MachineConfig())
    with pytest.raises(ConfigurationError) as exc:
        profile_addresses(machine, 0, CANDIDATES[:4], samples_per_addr=10)
    assert exc.value.field == 'samples_per_addr'
    with pytest.raises(ConfigurationError):
        profile_addresses(machine, 0, CANDIDATES[:4], samples_per_addr=10, helper=0, min_samples=10)


def test_equidistant_addresses_cannot_be_classified():
    origin = TileId.from_linear(0, 8)
    profile = LatencyProfile(origin_tile=origin, helper_tile=TileId.from_linear(1, 8))
    for k, addr in enumerate(CANDIDATES[:8]):
        profile.stats[addr] = AddressStats(mean=60.0 + 0.1 * k, stddev=1.0, count=100)
    with pytest.raises(ProfilingError):
        classify_addresses(profile)


def test_attack_pair_is_extreme_of_class_map(learned):
    _, pair, class_map = learned
    near, far = pick_attack_pair(class_map)
    assert (pair.addr_near, pair.addr_far) == (near, far)
    assert pair.near_mean < pair.threshold < pair.far_mean
    assert pair.far_mean - pair.near_mean >= 40


def test_toy_victim_validates_address_pair(learned):
    machine, pair, _ = learned
    victim = ToyVictim.create(machine, 0, 123, pair.addr_near, pair.addr_far)
    assert victim.target(1) == pair.addr_near
    assert victim.target(4) == pair.addr_far
    with pytest.raises(ConfigurationError):
        ToyVictim.create(machine, 0, 123, pair.addr_near, pair.addr_near)
    with pytest.raises(ConfigurationError):
        ToyVictim.create(machine, 0, 256, pair.addr_near, pair.addr_far)


@pytest.mark.parametrize('reset', ['flush', 'sweep'])
def test_toy_attack_recovers_secret_bits(learned, reset):
    machine, pair, _ = learned
    result = run_toy_attack(machine, n_bits=400, seed=1, pair=pair, reset=reset)
    assert result.bits.size == 400
    assert result.accuracy >= 0.95
    assert result.mean_gap >= 40
    summary = result.summary()
    assert summary['reset'] == reset
    assert list(result.to_frame().columns) == ['bit', 'latency', 'decoded']


def test_toy_attack_rejects_bad_arguments(learned):
    machine, pair, _ = learned
    with pytest.raises(ConfigurationError):
        run_toy_attack(machine, n_bits=0, pair=pair)
    with pytest.raises(ConfigurationError):
        run_toy_attack(machine, n_bits=8, pair=pair, reset='rowhammer')
