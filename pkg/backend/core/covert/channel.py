"""
距离隐蔽信道
职责: 发送方按位访问近/远地址编码，接收方读取每个位的访问延迟并按阈值解码；
     统计带宽、误码率与混淆矩阵，并支持负载大小扫描

帧格式: 负载按字节 MSB 优先展开为位；每个位之前发送方复位 L1 驻留，
       发送 samples_per_bit 次访问后发出 bit-ready 事件，接收方逐位锁步解码。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from core.agents.ops import Compute, FlushL1, Load, Signal, WaitFor
from core.agents.roles import hold_llc
from core.agents.scheduler import Agent, run_scenario
from core.exceptions import ConfigurationError
from core.machine import SimMachine
from core.profiler import AttackPair

logger = logging.getLogger(__name__)

BIT_READY = 'bit-ready'
DEFAULT_SAMPLES_PER_BIT = 3
DEFAULT_DECODE_CYCLES = 10


@dataclass(frozen=True)
class ChannelConfig:
    """
    Args:
        addr_near / addr_far: 由画像挑出的地址对
        threshold: 严格位于两个延迟带之间的判定阈值
        samples_per_bit: 每个位的访问次数，解码取中位数
        clock_hz: 换算带宽用的时钟频率
    """

    addr_near: int
    addr_far: int
    threshold: float
    samples_per_bit: int = DEFAULT_SAMPLES_PER_BIT
    clock_hz: float = 1.5e9
    sender_tile: int = 0
    receiver_tile: int = 2
    decode_cycles: int = DEFAULT_DECODE_CYCLES

    def __post_init__(self):
        if self.addr_near == self.addr_far:
            raise ConfigurationError('addr_far', '近/远地址不能相同')
        if self.samples_per_bit < 1:
            raise ConfigurationError('samples_per_bit', '每个位至少 1 次访问')
        if self.clock_hz <= 0:
            raise ConfigurationError('clock_hz', '时钟频率必须为正')
        if self.sender_tile == self.receiver_tile:
            raise ConfigurationError('receiver_tile', '发送方与接收方必须位于不同 tile')

    @classmethod
    def from_pair(cls, pair: AttackPair, **overrides) -> 'ChannelConfig':
        return cls(addr_near=pair.addr_near, addr_far=pair.addr_far, threshold=pair.threshold, **overrides)


@dataclass
class ChannelStats:
    bits_sent: int
    bit_errors: int
    sim_cycles: int
    clock_hz: float
    # confusion[sent][received]
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))
    received: bytes = b''

    @property
    def bandwidth_bps(self) -> float:
        return self.bits_sent * self.clock_hz / self.sim_cycles if self.sim_cycles else 0.0

    @property
    def error_rate(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0

    @property
    def cycles_per_bit(self) -> float:
        return self.sim_cycles / self.bits_sent if self.bits_sent else 0.0

    def to_dict(self) -> Dict:
        return {
            'bits_sent': self.bits_sent,
            'bit_errors': self.bit_errors,
            'sim_cycles': self.sim_cycles,
            'clock_hz': self.clock_hz,
            'bandwidth_bps': round(self.bandwidth_bps, 6),
            'error_rate': self.error_rate,
            'cycles_per_bit': round(self.cycles_per_bit, 6),
            'confusion': {
                'sent0_recv0': int(self.confusion[0, 0]), 'sent0_recv1': int(self.confusion[0, 1]),
                'sent1_recv0': int(self.confusion[1, 0]), 'sent1_recv1': int(self.confusion[1, 1]),
            },
        }


def payload_bits(payload: bytes) -> List[int]:
    """MSB 优先"""
    return [(byte >> (7 - k)) & 1 for byte in payload for k in range(8)]


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits) - len(bits) % 8, 8):
        value = 0
        for bit in bits[i:i + 8]:
            value = (value << 1) | bit
        out.append(value)
    return bytes(out)


def send_bit(bit: int, cfg: ChannelConfig, view: List[int]):
    """发送方程序片段: 复位两条地址的 L1 驻留后访问 samples_per_bit 次，延迟写入 view"""
    target = cfg.addr_near if bit else cfg.addr_far
    yield FlushL1(cfg.addr_near)
    yield FlushL1(cfg.addr_far)
    for _ in range(cfg.samples_per_bit):
        result = yield Load(target)
        view.append(result.latency)
        yield FlushL1(target)


def recv_bit(samples: Sequence[int], cfg: ChannelConfig) -> int:
    """中位数低于阈值判 1，否则判 0"""
    return 1 if float(np.median(samples)) < cfg.threshold else 0


def run_channel(machine: SimMachine, payload: bytes, cfg: ChannelConfig) -> ChannelStats:
    """
    在一个调度器中运行发送方与接收方

    接收方通过共享的延迟视图读取发送方每次访问的时间（同一进程内的协作双方）。
    """
    bits = payload_bits(payload)
    if not bits:
        raise ConfigurationError('payload', '负载不能为空')
    views: List[List[int]] = [[] for _ in bits]
    received: List[int] = []

    def sender():
        for k, bit in enumerate(bits):
            yield from send_bit(bit, cfg, views[k])
            yield Signal(BIT_READY)

    def receiver():
        for k in range(len(bits)):
            yield WaitFor(BIT_READY)
            received.append(recv_bit(views[k], cfg))
            yield Compute(cfg.decode_cycles)

    agents = [
        Agent('covert-sender', machine.tile(cfg.sender_tile), sender()),
        Agent('covert-receiver', machine.tile(cfg.receiver_tile), receiver()),
    ]
    trace = run_scenario(machine, agents, record_trace=False)
    sim_cycles = max(trace.global_clock, max(a.clock for a in agents))

    confusion = np.zeros((2, 2), dtype=np.int64)
    np.add.at(confusion, (np.asarray(bits), np.asarray(received)), 1)
    errors = int(confusion[0, 1] + confusion[1, 0])
    channel = ChannelStats(
        bits_sent=len(bits), bit_errors=errors, sim_cycles=int(sim_cycles), clock_hz=cfg.clock_hz,
        confusion=confusion, received=bits_to_bytes(received),
    )
    logger.info(
        f'隐蔽信道: {channel.bits_sent} 位, 误码 {errors}, '
        f'{channel.cycles_per_bit:.1f} 周期/位, 带宽 {channel.bandwidth_bps / 1e3:.1f} kbps'
    )
    return channel


def predicted_cycles_per_bit(cfg: ChannelConfig, near_latency: float, far_latency: float,
                             lat_local: int, ones_fraction: float = 0.5) -> float:
    """
    由延迟常数预测每位周期数: 两次复位 + samples_per_bit 次 (访问 + 清除)

    接收方解码与发送方下一个位并行，不计入。
    """
    access = ones_fraction * near_latency + (1.0 - ones_fraction) * far_latency
    return 2 * lat_local + cfg.samples_per_bit * (access + lat_local)


def payload_sweep(machine_factory, cfg: ChannelConfig, sizes: Iterable[int],
                  seeds: Sequence[int] = (0,)) -> pd.DataFrame:
    """
    负载大小扫描，每个大小在多个种子上取均值与 95% 置信区间

    Args:
        machine_factory: seed -> 已完成地址驻留准备的 SimMachine
        sizes: 负载字节数
        seeds: 种子列表（同时决定负载内容与机器噪声）

    Returns:
        DataFrame(columns=[payload_bytes, bandwidth_bps, error_rate, bandwidth_ci95, error_rate_ci95, seeds])
    """
    rows = []
    for size in sizes:
        bandwidths, error_rates = [], []
        for seed in seeds:
            rng = np.random.default_rng(seed)
            payload = bytes(rng.integers(0, 256, int(size), dtype=np.uint8).tolist())
            result = run_channel(machine_factory(seed), payload, cfg)
            bandwidths.append(result.bandwidth_bps)
            error_rates.append(result.error_rate)
        rows.append({
            'payload_bytes': int(size),
            'bandwidth_bps': float(np.mean(bandwidths)),
            'error_rate': float(np.mean(error_rates)),
            'bandwidth_ci95': _ci95(bandwidths),
            'error_rate_ci95': _ci95(error_rates),
            'seeds': len(seeds),
        })
    return pd.DataFrame(rows)


def _ci95(values: Sequence[float]) -> float:
    """均值 95% 置信区间的半宽（t 分布）；单个样本为 0"""
    if len(values) < 2:
        return 0.0
    sem = stats.sem(values)
    if not np.isfinite(sem) or sem == 0:
        return 0.0
    return float(sem * stats.t.ppf(0.975, len(values) - 1))


def prepare_channel_machine(machine: SimMachine, cfg: ChannelConfig, helper_tile: Optional[int] = 1) -> SimMachine:
    """让近/远地址驻留在 helper 的 LLC bank（与画像时的转发者一致）"""
    if helper_tile is not None:
        hold_llc(machine, Agent('covert-helper', machine.tile(helper_tile)), [cfg.addr_near, cfg.addr_far])
    return machine
