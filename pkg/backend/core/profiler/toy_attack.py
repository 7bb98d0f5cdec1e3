"""
玩具受害者攻击
职责: 画像得到近/远地址对后，让受害者按秘密位访问其中之一，攻击者用单一阈值从访问延迟恢复秘密位
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from core.agents.ops import FlushL1, Load
from core.agents.scheduler import Agent, run_scenario
from core.exceptions import ConfigurationError
from core.machine import SimMachine
from core.victims.toy import ToyVictim, toy_victim_program

from .profiler import (
    AddressClassMap, candidate_lines, classify_addresses, pick_attack_pair, profile_addresses,
)

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_BASE = 0x400000
DEFAULT_CANDIDATES = 128
RESET_FLUSH = 'flush'
RESET_SWEEP = 'sweep'


@dataclass(frozen=True)
class AttackPair:
    """攻击者离线学到的地址对与判定阈值"""

    addr_near: int
    addr_far: int
    threshold: float
    near_mean: float
    far_mean: float


@dataclass
class ToyAttackResult:
    pair: AttackPair
    bits: np.ndarray
    latencies: np.ndarray
    decoded: np.ndarray
    reset: str = RESET_FLUSH
    extra: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.bits == self.decoded)) if self.bits.size else 0.0

    @property
    def near_latencies(self) -> np.ndarray:
        return self.latencies[self.bits == 1]

    @property
    def far_latencies(self) -> np.ndarray:
        return self.latencies[self.bits == 0]

    @property
    def mean_gap(self) -> float:
        if not self.near_latencies.size or not self.far_latencies.size:
            return 0.0
        return float(self.far_latencies.mean() - self.near_latencies.mean())

    def to_frame(self) -> pd.DataFrame:
        """每个秘密位一行: bit, latency, decoded"""
        return pd.DataFrame({'bit': self.bits, 'latency': self.latencies, 'decoded': self.decoded})

    def summary(self) -> dict:
        return {
            'bits': int(self.bits.size),
            'accuracy': round(self.accuracy, 6),
            'threshold': self.pair.threshold,
            'addr_near': f'{self.pair.addr_near:#x}',
            'addr_far': f'{self.pair.addr_far:#x}',
            'mean_near': round(float(self.near_latencies.mean()), 4) if self.near_latencies.size else None,
            'mean_far': round(float(self.far_latencies.mean()), 4) if self.far_latencies.size else None,
            'mean_gap': round(self.mean_gap, 4),
            'reset': self.reset,
            **self.extra,
        }


def learn_attack_pair(machine: SimMachine, victim_tile=0, helper_tile=1,
                      candidates: int = DEFAULT_CANDIDATES, base: int = DEFAULT_CANDIDATE_BASE,
                      samples_per_addr: int = 1000) -> Tuple[AttackPair, AddressClassMap]:
    """在受害者 tile 上画像候选行，取最近/最远的一对地址，阈值取两者均值的中点"""
    addrs = candidate_lines(base, candidates, machine.config.line_size)
    profile = profile_addresses(machine, victim_tile, addrs, samples_per_addr=samples_per_addr,
                                helper=helper_tile, min_samples=samples_per_addr)
    class_map = classify_addresses(profile)
    near, far = pick_attack_pair(class_map)
    near_mean, far_mean = class_map.means[near], class_map.means[far]
    pair = AttackPair(
        addr_near=near, addr_far=far, threshold=(near_mean + far_mean) / 2.0,
        near_mean=near_mean, far_mean=far_mean,
    )
    logger.info(
        f'攻击地址对: near={near:#x} ({near_mean:.1f}), far={far:#x} ({far_mean:.1f}), '
        f'阈值 {pair.threshold:.1f}'
    )
    return pair, class_map


def _sweep_lines(machine: SimMachine, target: int, base: int) -> List[int]:
    """与 target 同一 L1 组的 ways 条行，全部读一遍即可把 target 挤出 L1"""
    cfg = machine.config
    stride = cfg.l1_sets * cfg.line_size
    offset = (target // cfg.line_size % cfg.l1_sets) * cfg.line_size
    return [base + offset + k * stride for k in range(cfg.l1_ways)]


def run_toy_attack(machine: SimMachine, n_bits: int = 10000, seed: int = 0, victim_tile=0,
                   helper_tile=1, pair: Optional[AttackPair] = None, reset: str = RESET_FLUSH,
                   sweep_base: int = 0x8000000, min_gap_hops: int = 8) -> ToyAttackResult:
    """
    玩具受害者攻击

    Args:
        machine: 模拟机器（可以已施加防御或拥塞）
        n_bits: 秘密位数，按字节 MSB 优先生成
        seed: 秘密的随机种子
        pair: 离线学到的地址对；为空时现场画像
        reset: 每个位之前的 L1 复位方式: flush（攻击者清除受害者 L1 中的目标行）或 sweep（遍历同组行）
    """
    if n_bits < 1:
        raise ConfigurationError('n_bits', '至少需要 1 个秘密位')
    if reset not in (RESET_FLUSH, RESET_SWEEP):
        raise ConfigurationError('reset', f'未知的 L1 复位方式: {reset}')
    if pair is None:
        pair, _ = learn_attack_pair(machine, victim_tile, helper_tile)

    rng = np.random.default_rng(seed)
    secrets = rng.integers(0, 256, (n_bits + 7) // 8).tolist()
    masks = [0x80 >> k for k in range(8)]
    bits = np.zeros(n_bits, dtype=np.int64)
    latencies = np.zeros(n_bits, dtype=np.int64)
    victim_tile = machine.tile(victim_tile)
    sweep = list(dict.fromkeys(
        _sweep_lines(machine, pair.addr_near, sweep_base) + _sweep_lines(machine, pair.addr_far, sweep_base)
    ))

    def program():
        k = 0
        for secret in secrets:
            victim = ToyVictim.create(machine, victim_tile, secret, pair.addr_near, pair.addr_far,
                                      min_gap_hops=min_gap_hops)
            for mask in masks:
                if k == n_bits:
                    return
                target = victim.target(mask)
                if reset == RESET_SWEEP:
                    for addr in sweep:
                        yield Load(addr)
                else:
                    yield FlushL1(target)
                result = yield from toy_victim_program(victim, mask)
                bits[k] = 1 if secret & mask else 0
                latencies[k] = result.latency
                k += 1

    run_scenario(machine, [Agent('toy-victim', victim_tile, program())], record_trace=False)
    decoded = (latencies < pair.threshold).astype(np.int64)
    result = ToyAttackResult(pair=pair, bits=bits, latencies=latencies, decoded=decoded, reset=reset)
    logger.info(f'玩具攻击完成: {n_bits} 位, 准确率 {result.accuracy:.4f}, 近远均值差 {result.mean_gap:.1f}')
    return result
