"""
执行与画像
职责: 从固定 tile 测量候选地址的 LLC 命中延迟，划分近/远 CHA 地址集合，挑选攻击地址对
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from core.agents.ops import FlushL1, Load
from core.agents.roles import hold_llc
from core.agents.scheduler import Agent, run_scenario
from core.exceptions import ConfigurationError, ProfilingError
from core.machine import LLC_LEVELS, SimMachine, TileId

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 1000
DEFAULT_QUANTILE_LOW = 0.25
DEFAULT_QUANTILE_HIGH = 0.75
DEFAULT_MIN_GAP = 20.0


@dataclass(frozen=True)
class AddressStats:
    mean: float
    stddev: float
    count: int


@dataclass
class LatencyProfile:
    """
    每个地址的 LLC 命中延迟样本

    所有样本都经过 L1 缺失 + LLC 命中校验；无法强制到该状态的地址放入 excluded 并注明原因。
    """

    origin_tile: TileId
    helper_tile: TileId
    samples: Dict[int, List[int]] = field(default_factory=dict)
    stats: Dict[int, AddressStats] = field(default_factory=dict)
    excluded: Dict[int, str] = field(default_factory=dict)

    def to_frame(self, machine: Optional[SimMachine] = None) -> pd.DataFrame:
        """导出画像表；给出 machine 时附加真值 CHA 列（仅用于验证）"""
        rows = []
        for addr in sorted(self.stats):
            st = self.stats[addr]
            row = {
                'addr': f'{addr:#x}',
                'mean_cycles': round(st.mean, 4),
                'stddev': round(st.stddev, 4),
                'count': st.count,
            }
            if machine is not None:
                row['true_cha_tile'] = machine.cha_tile(addr).linear
            rows.append(row)
        return pd.DataFrame(rows)

    def latency_histogram(self, addrs: Optional[Iterable[int]] = None) -> pd.DataFrame:
        """延迟直方图 (latency, count)"""
        chosen = self.samples.keys() if addrs is None else addrs
        values = [v for a in chosen for v in self.samples.get(a, ())]
        if not values:
            return pd.DataFrame({'latency': [], 'count': []})
        latency, count = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
        return pd.DataFrame({'latency': latency, 'count': count})


@dataclass(frozen=True)
class AddressClassMap:
    """近/远地址集合与判定阈值"""

    origin_tile: TileId
    va_near: FrozenSet[int]
    va_far: FrozenSet[int]
    threshold: float
    means: Dict[int, float] = field(default_factory=dict, compare=False)

    def classify(self, addr: int) -> Optional[str]:
        if addr in self.va_near:
            return 'near'
        if addr in self.va_far:
            return 'far'
        return None


def _default_helper(machine: SimMachine, origin: TileId) -> TileId:
    width = machine.config.mesh_width
    x = origin.x + 1 if origin.x + 1 < width else origin.x - 1
    return TileId.from_xy(x, origin.y, width)


def profile_addresses(machine: SimMachine, origin, addrs: Iterable[int],
                      samples_per_addr: int = DEFAULT_SAMPLES, helper=None,
                      min_samples: int = DEFAULT_SAMPLES) -> LatencyProfile:
    """
    从 origin 测量每个地址的 LLC 命中延迟

    Args:
        machine: 模拟机器
        origin: 画像所在 tile（与受害者同 tile）
        addrs: 候选地址
        samples_per_addr: 每个地址的样本数
        helper: 先访问这些地址、让其驻留在自己 LLC bank 的辅助 tile；默认取 origin 的相邻 tile
        min_samples: 每个地址要求的最少样本数

    Returns:
        LatencyProfile
    """
    if samples_per_addr < min_samples:
        raise ConfigurationError(
            'samples_per_addr', f'每个地址至少需要 {min_samples} 个样本，实际 {samples_per_addr}',
        )
    origin = machine.tile(origin)
    helper = _default_helper(machine, origin) if helper is None else machine.tile(helper)
    if helper == origin:
        raise ConfigurationError('helper', '辅助线程必须在不同的 tile 上')
    addrs = list(dict.fromkeys(addrs))

    hold_llc(machine, Agent('profile-helper', helper), addrs)

    profile = LatencyProfile(origin_tile=origin, helper_tile=helper)

    def program():
        for addr in addrs:
            yield FlushL1(addr)
            values = []
            for _ in range(samples_per_addr):
                result = yield Load(addr)
                if result.hit_level not in LLC_LEVELS:
                    profile.excluded[addr] = f'无法强制 L1 缺失 + LLC 命中 (得到 {result.hit_level.value})'
                    break
                values.append(result.latency)
                yield FlushL1(addr)
            else:
                profile.samples[addr] = values

    run_scenario(machine, [Agent('profiler', origin, program())], record_trace=False)

    for addr, values in profile.samples.items():
        arr = np.asarray(values, dtype=np.float64)
        profile.stats[addr] = AddressStats(
            mean=float(arr.mean()), stddev=float(arr.std()), count=int(arr.size),
        )
    if profile.excluded:
        logger.warning(f'画像排除了 {len(profile.excluded)} 个地址')
    logger.info(
        f'画像完成: origin={origin}, helper={helper}, 地址数={len(profile.stats)}, '
        f'每地址样本={samples_per_addr}'
    )
    return profile


def classify_addresses(profile: LatencyProfile, quantile_low: float = DEFAULT_QUANTILE_LOW,
                       quantile_high: float = DEFAULT_QUANTILE_HIGH,
                       min_gap: float = DEFAULT_MIN_GAP) -> AddressClassMap:
    """
    按平均延迟分位划分近/远集合

    Raises:
        ProfilingError: 画像为空、某一类为空或两类均值差小于 min_gap
    """
    if not 0 < quantile_low <= quantile_high < 1:
        raise ConfigurationError('quantile_low', '要求 0 < quantile_low <= quantile_high < 1')
    n = len(profile.stats)
    if n < 2:
        raise ProfilingError(f'画像地址数 {n} 不足以划分近/远集合')

    ranked = sorted(profile.stats, key=lambda a: (profile.stats[a].mean, a))
    n_low = int(math.floor(quantile_low * n))
    high_start = int(math.ceil(quantile_high * n))
    near = ranked[:n_low]
    far = ranked[high_start:]
    if not near or not far:
        raise ProfilingError('近或远集合为空', n=n)

    near_means = [profile.stats[a].mean for a in near]
    far_means = [profile.stats[a].mean for a in far]
    gap = float(np.mean(far_means) - np.mean(near_means))
    if gap < min_gap or max(near_means) >= min(far_means):
        raise ProfilingError(f'所有地址近似等距: 近/远均值差 {gap:.1f} < {min_gap}', gap=gap)

    return AddressClassMap(
        origin_tile=profile.origin_tile,
        va_near=frozenset(near),
        va_far=frozenset(far),
        threshold=(max(near_means) + min(far_means)) / 2.0,
        means={a: profile.stats[a].mean for a in near + far},
    )


def pick_attack_pair(class_map: AddressClassMap) -> Tuple[int, int]:
    """返回 (延迟最小的近地址, 延迟最大的远地址)，并列时取最低地址"""
    if not class_map.va_near or not class_map.va_far:
        raise ProfilingError('近或远集合为空')
    means = class_map.means
    near = min(class_map.va_near, key=lambda a: (means[a], a))
    far = min(class_map.va_far, key=lambda a: (-means[a], a))
    return near, far


def ground_truth_agreement(profile: LatencyProfile, class_map: AddressClassMap,
                           machine: SimMachine) -> float:
    """
    与机器真值比较: 以画像地址到 origin 的 CHA 跳数中位数切分，
    近集合应 <= 中位数，远集合应 > 中位数，返回一致比例
    """
    origin = profile.origin_tile
    hops = {a: machine.hops(origin, machine.cha_tile(a)) for a in profile.stats}
    if not hops:
        return 0.0
    median = float(np.median(list(hops.values())))
    agree = sum(1 for a in class_map.va_near if hops[a] <= median)
    agree += sum(1 for a in class_map.va_far if hops[a] > median)
    total = len(class_map.va_near) + len(class_map.va_far)
    return agree / total if total else 0.0


def candidate_lines(base: int, count: int, line_size: int = 64) -> List[int]:
    return [base + k * line_size for k in range(count)]
