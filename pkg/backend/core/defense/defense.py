"""
均匀延迟防御及其评估
职责: 把所有 LLC 命中响应延迟到最坏情况（或指定目标），并从延迟分布、玩具攻击、密钥恢复三个角度评估；
     另提供背景流量拥塞下的玩具攻击
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from core.exceptions import ConfigurationError
from core.machine import SimMachine
from core.profiler import AttackPair, candidate_lines, profile_addresses, run_toy_attack

from .noc import HopDelaySampler, NocSimulator, NocTrafficConfig

logger = logging.getLogger(__name__)


class DefenseMode(str, Enum):
    OFF = 'off'
    DELAY_TO_WORST = 'delay_to_worst'
    DELAY_TO_TARGET = 'delay_to_target'


@dataclass(frozen=True)
class DefenseConfig:
    mode: DefenseMode = DefenseMode.DELAY_TO_WORST
    target_latency: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'mode', DefenseMode(self.mode))
        if self.mode is DefenseMode.DELAY_TO_TARGET and (self.target_latency is None or self.target_latency < 1):
            raise ConfigurationError('target_latency', 'delay_to_target 模式需要正的目标延迟')


def apply_defense(machine: SimMachine, cfg: DefenseConfig) -> Optional[int]:
    """
    设置机器的 LLC 命中延迟下限，返回生效的目标延迟（off 为 None）

    delay_to_target 的目标低于最坏情况时只告警，残余泄露仍存在。
    """
    worst = machine.worst_case_llc_latency()
    if cfg.mode is DefenseMode.OFF:
        target = None
    elif cfg.mode is DefenseMode.DELAY_TO_WORST:
        target = worst
    else:
        target = int(cfg.target_latency)
        if target < worst:
            logger.warning(f'防御目标 {target} 低于最坏 LLC 命中延迟 {worst}，高于目标的访问仍会泄露距离')
    machine.set_defense_target(target)
    logger.info(f'防御模式 {cfg.mode.value}: 目标延迟 {target}')
    return target


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> Dict[str, float]:
    """两样本 Kolmogorov-Smirnov 统计量"""
    result = stats.ks_2samp(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return {'statistic': float(result.statistic), 'pvalue': float(result.pvalue)}


def uniform_vote_pvalue(counters: np.ndarray) -> float:
    """
    各字节候选票数相对均匀分布的卡方检验 p 值，取 4 个字节中的最小值；
    没有任何票数时返回 1.0
    """
    pvalues = []
    for row in np.asarray(counters):
        if row.sum() == 0:
            pvalues.append(1.0)
            continue
        pvalues.append(float(stats.chisquare(row).pvalue))
    return min(pvalues) if pvalues else 1.0


def pair_latency_distributions(machine: SimMachine, pair: AttackPair, origin=0, helper=1,
                               samples: int = 10000) -> pd.DataFrame:
    """近/远地址各 samples 次 LLC 命中延迟，长表 (kind, latency)"""
    profile = profile_addresses(machine, origin, [pair.addr_near, pair.addr_far],
                                samples_per_addr=samples, helper=helper, min_samples=samples)
    near = profile.samples.get(pair.addr_near, [])
    far = profile.samples.get(pair.addr_far, [])
    return pd.DataFrame({
        'kind': ['near'] * len(near) + ['far'] * len(far),
        'latency': list(near) + list(far),
    })


def performance_cost(undefended: SimMachine, defended: SimMachine, origin=0, helper=1,
                     lines: int = 64, base: int = 0x600000, samples: int = 100) -> Dict[str, float]:
    """同一组随机地址在防御前后的平均 LLC 命中延迟及其差值"""
    addrs = candidate_lines(base, lines, undefended.config.line_size)
    means = []
    for machine in (undefended, defended):
        profile = profile_addresses(machine, origin, addrs, samples_per_addr=samples, helper=helper,
                                    min_samples=samples)
        means.append(float(np.mean([s.mean for s in profile.stats.values()])))
    return {'undefended_mean': means[0], 'defended_mean': means[1], 'delta': means[1] - means[0]}


def attack_under_load(machine: SimMachine, background_rate: float, pair: AttackPair,
                      n_bits: int = 10000, seed: int = 0,
                      noc_cfg: Optional[NocTrafficConfig] = None) -> float:
    """
    背景流量下重跑玩具攻击: 机器每经过一跳加上从 NoC 稳态分布抽样的排队延迟

    Args:
        background_rate: 背景注入率，0 表示无背景流量
        pair: 无负载时学到的地址对与阈值

    Returns:
        秘密位准确率
    """
    if background_rate < 0 or background_rate >= 1:
        raise ConfigurationError('background_rate', '背景注入率必须在 [0, 1) 之间')
    sampler = None
    if background_rate > 0:
        noc_cfg = noc_cfg or NocTrafficConfig.from_machine(machine.config, seed=seed)
        _, delays = NocSimulator(noc_cfg).run(background_rate, collect_hop_delays=True)
        sampler = HopDelaySampler(delays, seed=seed)
    machine.set_congestion(sampler)
    try:
        result = run_toy_attack(machine, n_bits=n_bits, seed=seed, pair=pair)
    finally:
        machine.set_congestion(None)
    logger.info(
        f'背景注入率 {background_rate:.3f}: 每跳平均排队 {sampler.mean if sampler else 0.0:.1f} 周期, '
        f'玩具攻击准确率 {result.accuracy:.4f}'
    )
    return result.accuracy


def load_sweep(machine_factory, pair: AttackPair, rates: Sequence[float], seeds: Sequence[int],
               n_bits: int = 2000) -> pd.DataFrame:
    """
    背景注入率扫描，准确率在多个种子上平均

    Args:
        machine_factory: seed -> SimMachine
    """
    rows = []
    for rate in rates:
        accs = [attack_under_load(machine_factory(seed), rate, pair, n_bits=n_bits, seed=seed) for seed in seeds]
        rows.append({'rate': float(rate), 'accuracy': float(np.mean(accs)), 'seeds': len(seeds)})
    return pd.DataFrame(rows)
