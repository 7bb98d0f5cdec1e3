"""
场景服务
职责: 每个场景在一台新机器上运行一次 (场景, 种子)，写出产物并返回指标与验收检查结果

场景函数只依赖 ScenarioContext；产物内容只由配置与种子决定。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from config.sim_config import SimConfig
from core.agents import CLEAN_THRESHOLD, DIRTY_THRESHOLD, Agent, hold_llc
from core.classifier import Label, accuracy_vs_votes, train_adaboost
from core.covert import (
    ChannelConfig, payload_bits, payload_sweep, predicted_cycles_per_bit, prepare_channel_machine, run_channel,
)
from core.defense import (
    DefenseConfig, apply_defense, ks_statistic, load_sweep, noc_saturation_sweep, NocTrafficConfig,
    pair_latency_distributions, parse_rates, performance_cost, uniform_vote_pvalue,
)
from core.exceptions import ClassifierError
from core.keyrec import AttackLayout, AttackSession, accuracy_curve, run_trial
from core.machine import SimMachine
from core.profiler import (
    candidate_lines, classify_addresses, ground_truth_agreement, learn_attack_pair, profile_addresses,
    run_toy_attack,
)
from core.utils.artifacts import ArtifactStore
from core.victims import AesKeySchedule

from ..constants import Scenario
from ..exceptions import UnknownScenarioError
from ..spec import ExperimentSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    """一项验收检查: 实测值与目标"""

    name: str
    passed: bool
    measured: Any
    target: str

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'passed': bool(self.passed), 'measured': self.measured, 'target': self.target}


@dataclass
class ScenarioOutcome:
    metrics: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class ScenarioContext:
    """
    一次 (场景, 种子) 运行的上下文

    Attributes:
        spec: 实验规格
        seed: 当前种子
        store: 当前种子的产物目录
    """

    spec: ExperimentSpec
    seed: int
    store: ArtifactStore

    @property
    def params(self) -> Dict[str, Any]:
        return self.spec.scenario_params

    def machine(self, seed: Optional[int] = None) -> SimMachine:
        """按当前种子新建一台机器"""
        cfg = self.spec.machine_for(self.seed if seed is None else seed)
        return SimMachine(cfg, debug_checks=True if SimConfig.DEBUG_CHECKS else None)


ScenarioFunc = Callable[[ScenarioContext], ScenarioOutcome]

SCENARIOS: Dict[str, ScenarioFunc] = {}


def scenario(name: str):
    """注册场景函数"""
    def decorator(func: ScenarioFunc) -> ScenarioFunc:
        SCENARIOS[name] = func
        return func
    return decorator


def get_scenario(name: str) -> ScenarioFunc:
    if name not in SCENARIOS:
        raise UnknownScenarioError(name, sorted(SCENARIOS))
    return SCENARIOS[name]


def _hex_list(addrs) -> List[str]:
    return [f'{a:#x}' for a in sorted(addrs)]


def _attack_pair_dict(pair) -> Dict[str, Any]:
    return {
        'addr_near': f'{pair.addr_near:#x}',
        'addr_far': f'{pair.addr_far:#x}',
        'threshold': round(pair.threshold, 4),
        'near_mean': round(pair.near_mean, 4),
        'far_mean': round(pair.far_mean, 4),
    }


def _trained_session(ctx: ScenarioContext, machine: SimMachine, layout: AttackLayout):
    """画像、放置 Td4 并用攻击者自己的密钥训练分类器"""
    p = ctx.params
    session = AttackSession(machine, layout, seed=ctx.seed).setup()
    training = session.training_set(p['training_samples'])
    model = train_adaboost(training, rounds=p['rounds'])
    ctx.store.write_json('classifier_model', model.to_dict())
    return session, model


# ==================== 画像 ====================

@scenario(Scenario.PROFILE)
def profile_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    machine = ctx.machine()
    addrs = candidate_lines(p['base'], p['candidates'], machine.config.line_size)
    profile = profile_addresses(
        machine, p['origin_tile'], addrs, samples_per_addr=p['samples'], helper=p['helper_tile'],
        min_samples=p['min_samples'],
    )
    class_map = classify_addresses(profile, p['quantile_low'], p['quantile_high'])
    agreement = ground_truth_agreement(profile, class_map, machine)

    origin = profile.origin_tile
    near_hops = [machine.hops(origin, machine.cha_tile(a)) for a in class_map.va_near]
    far_hops = [machine.hops(origin, machine.cha_tile(a)) for a in class_map.va_far]

    ctx.store.write_csv('latency_profile', profile.to_frame(machine))
    histogram = pd.concat([
        profile.latency_histogram(class_map.va_near).assign(kind='near'),
        profile.latency_histogram(class_map.va_far).assign(kind='far'),
    ], ignore_index=True)
    ctx.store.write_csv('latency_histogram', histogram)
    ctx.store.write_json('address_classes', {
        'origin_tile': origin.linear,
        'threshold': round(class_map.threshold, 4),
        'va_near': _hex_list(class_map.va_near),
        'va_far': _hex_list(class_map.va_far),
        'excluded': {f'{a:#x}': reason for a, reason in sorted(profile.excluded.items())},
    })

    metrics = {
        'addresses': len(profile.stats),
        'excluded': len(profile.excluded),
        'near': len(class_map.va_near),
        'far': len(class_map.va_far),
        'threshold': round(class_map.threshold, 4),
        'ground_truth_agreement': round(agreement, 6),
        'hop_separated': bool(max(near_hops) < min(far_hops)),
        'min_mean_latency': round(min(s.mean for s in profile.stats.values()), 4),
        'max_mean_latency': round(max(s.mean for s in profile.stats.values()), 4),
    }
    checks = [
        CheckResult('ground_truth_agreement', agreement >= p['min_agreement'],
                    round(agreement, 6), f'>= {p["min_agreement"]}'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== 玩具攻击 ====================

@scenario(Scenario.TOY_ATTACK)
def toy_attack_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    machine = ctx.machine()
    pair, _ = learn_attack_pair(machine, p['victim_tile'], p['helper_tile'], samples_per_addr=p['pair_samples'])
    result = run_toy_attack(
        machine, n_bits=p['n_bits'], seed=ctx.seed, victim_tile=p['victim_tile'],
        helper_tile=p['helper_tile'], pair=pair, reset=p['reset'],
    )
    ctx.store.write_csv('toy_attack_bits', result.to_frame())
    ctx.store.write_json('attack_pair', _attack_pair_dict(pair))

    metrics = result.summary()
    checks = [
        CheckResult('bit_accuracy', result.accuracy >= p['min_accuracy'],
                    round(result.accuracy, 6), f'>= {p["min_accuracy"]}'),
        CheckResult('mean_gap', result.mean_gap >= p['min_gap'],
                    round(result.mean_gap, 4), f'>= {p["min_gap"]} cycles'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== 分类器表决 ====================

@scenario(Scenario.CLASSIFIER)
def classifier_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    grid = sorted(set(int(k) for k in p['vote_grid']))
    layout = AttackLayout(near_lines=p['near_lines'], timer_method=p['timer_method'], votes=grid[-1])
    session, model = _trained_session(ctx, ctx.machine(), layout)

    ctx.store.write_csv('training_errors', pd.DataFrame({
        'round': np.arange(1, len(model.training_errors) + 1),
        'training_error': model.training_errors,
        'error_bound': model.error_bounds,
    }))

    trials = []
    for _ in range(p['heldout_trials']):
        schedule = AesKeySchedule.expand(session.random_block())
        record = run_trial(session, schedule, model)
        if record.verdict is not None:
            trials.append((record.readings, record.truth))

    curve = pd.DataFrame(accuracy_vs_votes(model, trials, grid), columns=['votes', 'accuracy'])
    curve['trials'] = len(trials)
    ctx.store.write_csv('accuracy_vs_votes', curve)

    by_votes = dict(zip(curve['votes'], curve['accuracy']))
    single, full = float(by_votes[grid[0]]), float(by_votes[grid[-1]])
    metrics = {
        'heldout_trials': len(trials),
        'discarded_trials': p['heldout_trials'] - len(trials),
        'low_fraction': round(sum(1 for _, t in trials if t is Label.LOW) / max(1, len(trials)), 6),
        'stumps': model.rounds,
        'training_error': model.training_errors[-1],
        f'accuracy_at_{grid[0]}': round(single, 6),
        f'accuracy_at_{grid[-1]}': round(full, 6),
        'timeouts': session.timeouts,
        'timed_decryptions': session.decryptions,
    }
    checks = [
        CheckResult('voted_accuracy', full >= 1.0, round(full, 6), f'= 1.0 at {grid[-1]} votes'),
        CheckResult('single_sample_lower', single < full, round(single, 6), f'< accuracy at {grid[-1]} votes'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== AES 密钥恢复 ====================

def _key_rows(details: List[dict]) -> pd.DataFrame:
    rows = []
    for k, item in enumerate(details):
        recovered = item['result'].as_bytes()
        rows.append({
            'key_index': k,
            'key': item['key'].hex(),
            'true_word': item['truth'].hex(),
            'recovered_word': recovered.hex() if recovered else '',
            'confidence': round(item['result'].confidence, 6),
            'trials_low': item['state'].trials_low,
            'correct': recovered == item['truth'],
        })
    return pd.DataFrame(rows)


@scenario(Scenario.AES_ATTACK)
def aes_attack_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    layout = AttackLayout(
        near_lines=p['near_lines'], timer_method=p['timer_method'], votes=p['votes'], word_index=p['word_index'],
    )
    session, model = _trained_session(ctx, ctx.machine(), layout)

    keys = [session.random_block() for _ in range(p['keys'])]
    grid = sorted(set(int(t) for t in p['trial_grid'] if int(t) <= p['trials']) | {int(p['trials'])})
    details: List[dict] = []
    curve = accuracy_curve(session, keys, model, grid, details=details)
    ctx.store.write_csv('key_accuracy', curve)
    ctx.store.write_csv('keys', _key_rows(details))

    by_trials = dict(zip(curve['trials'], curve['accuracy']))
    final, first = float(by_trials[grid[-1]]), float(by_trials[grid[0]])
    recovered = sum(1 for d in details if d['result'].as_bytes() == d['truth'])
    metrics = {
        'keys': len(keys),
        'trials': grid[-1],
        'recovered': recovered,
        'final_accuracy': round(final, 6),
        f'accuracy_at_{grid[0]}': round(first, 6),
        'td4_base': f'{session.tables.td4_base:#x}',
        'low_indices': len(session.low_set),
        'timeouts': session.timeouts,
        'timed_decryptions': session.decryptions,
    }
    checks = [CheckResult('key_recovery', final >= 1.0, f'{recovered}/{len(keys)}',
                          f'{len(keys)}/{len(keys)} within {grid[-1]} trials')]
    if len(grid) > 1:
        checks.append(CheckResult('few_trials_insufficient', first < 1.0, round(first, 6),
                                  f'< 1.0 at {grid[0]} trials'))
    return ScenarioOutcome(metrics, checks)


# ==================== 隐蔽信道 ====================

@scenario(Scenario.COVERT)
def covert_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    machine = ctx.machine()
    pair, _ = learn_attack_pair(machine, p['sender_tile'], p['helper_tile'], samples_per_addr=p['pair_samples'])
    cfg = ChannelConfig.from_pair(
        pair, samples_per_bit=p['samples_per_bit'], clock_hz=machine.config.clock_hz,
        sender_tile=p['sender_tile'], receiver_tile=p['receiver_tile'],
    )
    prepare_channel_machine(machine, cfg, p['helper_tile'])

    rng = np.random.default_rng(ctx.seed)
    payload = bytes(rng.integers(0, 256, (p['bits'] + 7) // 8, dtype=np.uint8).tolist())
    stats = run_channel(machine, payload, cfg)

    bits = payload_bits(payload)
    ones = sum(bits) / len(bits)
    predicted = predicted_cycles_per_bit(cfg, pair.near_mean, pair.far_mean, machine.config.lat_l1_hit, ones)
    predicted_bps = cfg.clock_hz / predicted
    deviation = abs(stats.bandwidth_bps - predicted_bps) / predicted_bps
    identity = abs(stats.bandwidth_bps - cfg.clock_hz / stats.cycles_per_bit) / stats.bandwidth_bps

    ctx.store.write_json('channel', {**stats.to_dict(), 'attack_pair': _attack_pair_dict(pair)})

    if p['sweep_sizes']:
        def factory(seed):
            return prepare_channel_machine(ctx.machine(seed), cfg, p['helper_tile'])
        seeds = list(range(ctx.seed, ctx.seed + p['sweep_seeds']))
        ctx.store.write_csv('payload_sweep', payload_sweep(factory, cfg, p['sweep_sizes'], seeds))

    metrics = {
        **stats.to_dict(),
        'predicted_cycles_per_bit': round(predicted, 6),
        'predicted_bandwidth_bps': round(predicted_bps, 6),
        'bandwidth_deviation': round(deviation, 6),
        'bandwidth_identity_error': round(identity, 8),
    }
    tol = p['bandwidth_tolerance']
    floor = p['min_bandwidth_bps']
    checks = [
        CheckResult('error_rate', stats.error_rate <= p['max_error_rate'],
                    stats.error_rate, f'<= {p["max_error_rate"]}'),
        CheckResult('bandwidth_floor', stats.bandwidth_bps >= floor, round(stats.bandwidth_bps, 6),
                    f'>= {floor:.0f} bps'),
        CheckResult('bandwidth_prediction', deviation <= tol, round(deviation, 6),
                    f'within {tol:.0%} of latency-constant prediction'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== 防御 ====================

def _ks_between(frame: pd.DataFrame) -> Dict[str, float]:
    near = frame.loc[frame['kind'] == 'near', 'latency']
    far = frame.loc[frame['kind'] == 'far', 'latency']
    return ks_statistic(near, far)


@scenario(Scenario.DEFENSE)
def defense_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    """
    用无防御机器上学到的地址对与阈值分别攻击无防御与有防御的机器；
    密钥恢复在防御后的机器上重新训练分类器，背景流量扫描在无防御机器上进行
    """
    p = ctx.params
    defense_cfg = DefenseConfig(mode=p['mode'], target_latency=p['target_latency'])

    def defended_machine():
        machine = ctx.machine()
        apply_defense(machine, defense_cfg)
        return machine

    undefended = ctx.machine()
    pair, _ = learn_attack_pair(undefended, samples_per_addr=p['pair_samples'])

    before = pair_latency_distributions(undefended, pair, samples=p['samples'])
    defended = defended_machine()
    after = pair_latency_distributions(defended, pair, samples=p['samples'])
    ctx.store.write_csv('latency_before', before)
    ctx.store.write_csv('latency_after', after)
    ks_before, ks_after = _ks_between(before), _ks_between(after)

    toy_before = run_toy_attack(ctx.machine(), n_bits=p['n_bits'], seed=ctx.seed, pair=pair).accuracy
    toy_after = run_toy_attack(defended_machine(), n_bits=p['n_bits'], seed=ctx.seed, pair=pair).accuracy
    cost = performance_cost(ctx.machine(), defended_machine())

    metrics: Dict[str, Any] = {
        'mode': defense_cfg.mode.value,
        'target_latency': defended.defense_target,
        'worst_case_llc_latency': defended.worst_case_llc_latency(),
        'ks_before': round(ks_before['statistic'], 6),
        'ks_after': round(ks_after['statistic'], 6),
        'toy_accuracy_before': round(toy_before, 6),
        'toy_accuracy_after': round(toy_after, 6),
        'performance_cost': {k: round(v, 4) for k, v in cost.items()},
    }
    checks = [
        CheckResult('ks_after', ks_after['statistic'] <= p['max_ks'],
                    round(ks_after['statistic'], 6), f'<= {p["max_ks"]}'),
        CheckResult('toy_accuracy_after', toy_after <= p['max_toy_accuracy'],
                    round(toy_after, 6), f'<= {p["max_toy_accuracy"]}'),
    ]

    if p['keys'] > 0:
        metrics.update(_defended_key_recovery(ctx, defended_machine))
        checks.extend([
            CheckResult('key_recovery_after', metrics['keys_recovered_after'] == 0,
                        f'{metrics["keys_recovered_after"]}/{p["keys"]}', f'0/{p["keys"]} at {p["trials"]} trials'),
            CheckResult('vote_uniformity', metrics['vote_uniformity_pvalue'] > p['min_vote_pvalue'],
                        metrics['vote_uniformity_pvalue'], f'> {p["min_vote_pvalue"]}'),
            CheckResult('key_byte_accuracy_after', metrics['key_byte_accuracy_after'] <= p['max_key_byte_accuracy'],
                        metrics['key_byte_accuracy_after'], f'<= {p["max_key_byte_accuracy"]} (chance 1/256)'),
        ])

    if p['load_rates']:
        rates = sorted(float(r) for r in p['load_rates'])
        sweep = load_sweep(lambda seed: ctx.machine(seed), pair, rates, [ctx.seed], n_bits=p['load_bits'])
        ctx.store.write_csv('attack_under_load', sweep)
        loaded = float(sweep['accuracy'].iloc[-1])
        metrics.update({
            'load_accuracy': {f'{r:g}': round(a, 6) for r, a in zip(sweep['rate'], sweep['accuracy'])},
            'load_accuracy_at_max_rate': round(loaded, 6),
        })
        checks.append(CheckResult('accuracy_under_saturation', loaded <= p['max_load_accuracy'],
                                  round(loaded, 6), f'<= {p["max_load_accuracy"]} at rate {rates[-1]:g}'))

    ctx.store.write_json('defense', metrics)
    return ScenarioOutcome(metrics, checks)


def _defended_key_recovery(ctx: ScenarioContext, defended_machine) -> Dict[str, Any]:
    """
    攻击者沿用防御前画像得到的 Td4 放置，但在防御后的机器上重新训练分类器再攻击

    防御后计时完全不携带标签信息时训练会被拒绝，此时没有任何试验判 LOW，票数全为 0。
    """
    p = ctx.params
    layout = AttackLayout(near_lines=p['near_lines'], votes=p['votes'])
    placement = AttackSession(ctx.machine(), layout, seed=ctx.seed).setup()
    attack = AttackSession(defended_machine(), layout, seed=ctx.seed).setup(class_map=placement.class_map)
    training = attack.training_set(p['training_samples'])
    try:
        model = train_adaboost(training, rounds=p['rounds'])
    except ClassifierError as e:
        logger.info(f'防御后的计时无法训练分类器: {e.message}')
        model = None
    if model is not None:
        ctx.store.write_json('classifier_model_after', model.to_dict())

    keys = [attack.random_block() for _ in range(p['keys'])]
    details: List[dict] = []
    if model is not None:
        accuracy_curve(attack, keys, model, [p['trials']], details=details)
        ctx.store.write_csv('keys_after', _key_rows(details))
    recovered = sum(1 for d in details if d['result'].as_bytes() == d['truth'])
    correct_bytes = sum(
        1 for d in details for guess, true in zip(d['result'].key_bytes, d['truth']) if guess == true
    )
    pvalue = min((uniform_vote_pvalue(d['state'].counters) for d in details), default=1.0)
    return {
        'classifier_after': 'trained' if model is not None else 'rejected',
        'training_error_after': model.training_errors[-1] if model is not None else 0.5,
        'keys_recovered_after': recovered,
        'key_byte_accuracy_after': round(correct_bytes / (4 * len(keys)), 6),
        'vote_uniformity_pvalue': round(pvalue, 6),
        'timed_decryptions': attack.decryptions,
    }


# ==================== NoC 饱和 ====================

@scenario(Scenario.NOC_SWEEP)
def noc_sweep_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    p = ctx.params
    rates = parse_rates(p['rates']) if isinstance(p['rates'], str) else [float(r) for r in p['rates']]
    cfg = NocTrafficConfig.from_machine(
        ctx.spec.machine_for(ctx.seed), injection_rate=rates[0], sim_cycles=p['sim_cycles'],
        warmup_cycles=p['warmup_cycles'], packet_flits=p['packet_flits'],
    )
    frame = noc_saturation_sweep(cfg, rates)
    ctx.store.write_csv('noc_sweep', frame)

    latencies = frame['mean_latency'].tolist()
    monotone = all(b >= a for a, b in zip(latencies, latencies[1:]))
    upto_knee = frame[frame['rate'] <= p['knee_rate'] + 1e-9]
    knee_hit = bool(((upto_knee['mean_latency'] > p['knee_latency']) | upto_knee['saturated']).any())
    saturated = frame[frame['saturated']]['rate']

    metrics = {
        'rates': len(rates),
        'zero_load_latency': float(frame['zero_load_latency'].iloc[0]),
        'first_saturated_rate': float(saturated.iloc[0]) if len(saturated) else None,
        'max_mean_latency': float(frame['mean_latency'].max()),
        'config': cfg.to_dict(),
    }
    checks = [
        CheckResult('monotone', monotone, monotone, 'non-decreasing mean latency'),
        CheckResult('knee', knee_hit, metrics['first_saturated_rate'],
                    f'latency > {p["knee_latency"]} or saturated by rate {p["knee_rate"]}'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== PREFETCHW 计时探针 ====================

@scenario(Scenario.PREFETCHW_TIMER)
def prefetchw_timer_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    """计时 tile 持有行的所有权；远端写之后的探针与无写入的重复探针各采样 samples 次"""
    p = ctx.params
    machine = ctx.machine()
    timer, writer, addr = p['timer_tile'], p['writer_tile'], p['addr']
    dirty, clean = [], []
    machine.prefetchw_probe(timer, addr)
    for _ in range(p['samples']):
        machine.store(writer, addr)
        dirty.append(machine.prefetchw_probe(timer, addr).latency)
        clean.append(machine.prefetchw_probe(timer, addr).latency)

    ctx.store.write_csv('probe_latency', pd.DataFrame({
        'kind': ['after_write'] * len(dirty) + ['repeat'] * len(clean),
        'latency': dirty + clean,
    }))
    dirty_arr, clean_arr = np.asarray(dirty), np.asarray(clean)
    metrics = {
        'samples': p['samples'],
        'after_write_mean': round(float(dirty_arr.mean()), 4),
        'after_write_min': int(dirty_arr.min()),
        'after_write_above_threshold': round(float(np.mean(dirty_arr > DIRTY_THRESHOLD)), 6),
        'repeat_mean': round(float(clean_arr.mean()), 4),
        'repeat_max': int(clean_arr.max()),
        'cha_tile': machine.cha_tile(addr).linear,
    }
    checks = [
        CheckResult('after_write', metrics['after_write_mean'] > DIRTY_THRESHOLD,
                    metrics['after_write_mean'], f'> {DIRTY_THRESHOLD} cycles'),
        CheckResult('repeat', metrics['repeat_max'] < CLEAN_THRESHOLD,
                    metrics['repeat_max'], f'< {CLEAN_THRESHOLD} cycles'),
    ]
    return ScenarioOutcome(metrics, checks)


# ==================== 单行延迟地图 ====================

@scenario(Scenario.LATENCY_MAP)
def latency_map_scenario(ctx: ScenarioContext) -> ScenarioOutcome:
    """
    把一条行放进 home_tile 的 LLC bank，每个 tile 依次读它 samples 次（每次读后清掉自己的 L1 副本）

    往返跳数 = 2 * (请求者到 CHA) + 2 * (转发者到请求者)；按往返跳数分组的平均延迟应随跳数递增。
    """
    p = ctx.params
    machine = ctx.machine()
    addr = p['addr']
    hold_llc(machine, Agent('holder', machine.tile(p['home_tile'])), [addr])
    home, cha = machine.llc_home(addr), machine.cha_tile(addr)

    rows = []
    for tile in machine.tiles:
        latencies = []
        for _ in range(p['samples']):
            latencies.append(machine.load(tile, addr).latency)
            machine.flush_l1(tile, addr)
        rows.append({
            'tile': tile.linear,
            'x': tile.x,
            'y': tile.y,
            'hops_to_cha': machine.hops(tile, cha),
            'hops_from_home': machine.hops(home, tile),
            'path_hops': 2 * machine.hops(tile, cha) + 2 * machine.hops(home, tile),
            'mean_latency': round(float(np.mean(latencies)), 4),
            'std_latency': round(float(np.std(latencies)), 4),
            'samples': len(latencies),
        })
    frame = pd.DataFrame(rows)
    ctx.store.write_csv('latency_map', frame, extra_meta={'addr': f'{addr:#x}', 'home': home.linear, 'cha': cha.linear})

    by_hops = frame.groupby('path_hops')['mean_latency'].mean()
    means = by_hops.tolist()
    monotone = all(b > a for a, b in zip(means, means[1:]))
    metrics = {
        'addr': f'{addr:#x}',
        'home_tile': home.linear,
        'cha_tile': cha.linear,
        'min_latency': float(frame['mean_latency'].min()),
        'max_latency': float(frame['mean_latency'].max()),
        'latency_by_path_hops': {int(h): round(float(m), 4) for h, m in by_hops.items()},
    }
    checks = [CheckResult('monotone_in_hops', monotone, monotone, 'mean latency increases with round-trip hops')]
    return ScenarioOutcome(metrics, checks)
