"""
测试均匀延迟防御、背景流量下的攻击与片上网络饱和模型
"""

import numpy as np
import pytest

from core.defense import (
    DefenseConfig, DefenseMode, HopDelaySampler, NocSimulator, NocTrafficConfig, apply_defense,
    attack_under_load, ks_statistic, noc_saturation_sweep, pair_latency_distributions, parse_rates,
    performance_cost, uniform_vote_pvalue,
)
from core.exceptions import ConfigurationError
from core.machine import MachineConfig, SimMachine
from core.profiler import learn_attack_pair, run_toy_attack

SMALL_NOC = NocTrafficConfig(mesh_width=4, mesh_height=4, sim_cycles=4000, warmup_cycles=400)


@pytest.fixture(scope='module')
def pair():
    machine = SimMachine(MachineConfig(rng_seed=9))
    learned, _ = learn_attack_pair(machine, victim_tile=0, helper_tile=1, samples_per_addr=50)
    return learned


def _split(frame):
    return (frame[frame['kind'] == 'near']['latency'].to_numpy(),
            frame[frame['kind'] == 'far']['latency'].to_numpy())


def test_defense_config_requires_target_for_delay_to_target():
    with pytest.raises(ConfigurationError) as exc:
        DefenseConfig(mode='delay_to_target')
    assert exc.value.field == 'target_latency'
    assert DefenseConfig(mode='off').mode is DefenseMode.OFF


def test_apply_defense_sets_worst_case_target():
    machine = SimMachine(MachineConfig())
    target = apply_defense(machine, DefenseConfig(mode=DefenseMode.DELAY_TO_WORST))
    assert target == machine.worst_case_llc_latency()
    assert machine.defense_target == target
    assert apply_defense(machine, DefenseConfig(mode=DefenseMode.OFF)) is None
    assert machine.defense_target is None


def test_delay_to_worst_removes_distance_signal(pair):
    before = pair_latency_distributions(SimMachine(MachineConfig(rng_seed=1)), pair, samples=300)
    near, far = _split(before)
    assert ks_statistic(near, far)['statistic'] > 0.9

    defended = SimMachine(MachineConfig(rng_seed=1))
    apply_defense(defended, DefenseConfig())
    after = pair_latency_distributions(defended, pair, samples=300)
    near, far = _split(after)
    assert ks_statistic(near, far)['statistic'] < 0.2
    assert abs(near.mean() - far.mean()) < 2.0


def test_toy_attack_fails_under_defense(pair):
    machine = SimMachine(MachineConfig(rng_seed=2))
    apply_defense(machine, DefenseConfig())
    result = run_toy_attack(machine, n_bits=800, seed=2, pair=pair)
    assert result.accuracy < 0.6


def test_delay_to_target_below_worst_leaves_residual_leak(pair):
    machine = SimMachine(MachineConfig(rng_seed=3))
    apply_defense(machine, DefenseConfig(mode='delay_to_target', target_latency=int(pair.near_mean) + 10))
    near, far = _split(pair_latency_distributions(machine, pair, samples=200))
    assert far.mean() - near.mean() > 20


def test_performance_cost_is_positive():
    undefended = SimMachine(MachineConfig(rng_seed=4))
    defended = SimMachine(MachineConfig(rng_seed=4))
    apply_defense(defended, DefenseConfig())
    cost = performance_cost(undefended, defended, lines=16, samples=20)
    assert cost['defended_mean'] > cost['undefended_mean']
    assert cost['delta'] == pytest.approx(cost['defended_mean'] - cost['undefended_mean'])


def test_uniform_vote_pvalue():
    assert uniform_vote_pvalue(np.zeros((4, 256), dtype=np.int64)) == 1.0
    rng = np.random.default_rng(0)
    flat = rng.multinomial(25600, [1 / 256] * 256, size=4)
    assert uniform_vote_pvalue(flat) > 1e-4
    spiked = flat.copy()
    spiked[2, 17] += 2000
    assert uniform_vote_pvalue(spiked) < 1e-6


def test_attack_without_background_load_matches_plain_attack(pair):
    machine = SimMachine(MachineConfig(rng_seed=6))
    accuracy = attack_under_load(machine, 0.0, pair, n_bits=300, seed=6)
    assert accuracy >= 0.95
    assert machine._congestion is None
    with pytest.raises(ConfigurationError):
        attack_under_load(machine, 1.5, pair, n_bits=8)


def test_attack_under_background_load_runs_and_restores_machine(pair):
    machine = SimMachine(MachineConfig(rng_seed=6))
    noc = NocTrafficConfig.from_machine(machine.config, sim_cycles=3000, warmup_cycles=300)
    accuracy = attack_under_load(machine, 0.3, pair, n_bits=200, seed=6, noc_cfg=noc)
    assert 0.0 <= accuracy <= 1.0
    assert machine._congestion is None


def test_parse_rates():
    assert parse_rates('0.01:0.05:0.01') == [0.01, 0.02, 0.03, 0.04, 0.05]
    assert parse_rates('0.1,0.2') == [0.1, 0.2]
    with pytest.raises(ConfigurationError):
        parse_rates('0.1:0.2:0')
    with pytest.raises(ConfigurationError):
        parse_rates('fast')


def test_noc_zero_load_latency_and_routes():
    sim = NocSimulator(SMALL_NOC)
    assert sim.hop_count(0, 15) == 6
    assert sim.hop_count(5, 6) == 1
    assert sim.zero_load_latency == pytest.approx(sim.mean_hops * 4)
    result, _ = sim.run(0.005)
    assert not result.saturated
    assert result.mean_latency < 2 * result.zero_load_latency


def test_noc_sweep_is_monotone_and_saturates():
    frame = noc_saturation_sweep(SMALL_NOC, [0.02, 0.1, 0.3, 0.5])
    latencies = frame['mean_latency'].tolist()
    assert all(b >= a for a, b in zip(latencies, latencies[1:]))
    assert not frame['saturated'].iloc[0]
    assert frame['saturated'].iloc[-1]


def test_noc_sweep_rejects_bad_rates():
    with pytest.raises(ConfigurationError):
        noc_saturation_sweep(SMALL_NOC, [0.2, 0.1])
    with pytest.raises(ConfigurationError):
        noc_saturation_sweep(SMALL_NOC, [])
    with pytest.raises(ConfigurationError):
        NocTrafficConfig(injection_rate=0.0)


def test_hop_delay_sampler_is_seeded():
    sampler_a = HopDelaySampler.from_noc(SMALL_NOC, 0.2, seed=1)
    sampler_b = HopDelaySampler.from_noc(SMALL_NOC, 0.2, seed=1)
    draws_a = [sampler_a.sample_sum(4) for _ in range(100)]
    draws_b = [sampler_b.sample_sum(4) for _ in range(100)]
    assert draws_a == draws_b
    assert all(d >= 0 for d in draws_a)
    assert HopDelaySampler([], seed=0).sample_sum(3) == 0
