"""
AES 攻击会话
职责: 按攻击布局摆放代理、扫描 Td4 放置、强制缓存状态（预热/保持/驱逐/固定 L1 缺失），
     提供一次计时解密与训练集生成
"""

import logging
from dataclasses import asdict, dataclass
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from core.agents import (
    Agent, START_EVENT, TimerMethod, evict_victim_l1, hold_llc, pin_l1_misses, prime_l1_tables,
    timer_watch,
)
from core.classifier import Label, LabeledSample
from core.exceptions import ConfigurationError, NoLeakageError
from core.machine import SimMachine
from core.profiler import (
    AddressClassMap, candidate_lines, classify_addresses, profile_addresses,
)
from core.victims import AesKeySchedule, AesTables, DecryptIo, decrypt_program, last_round_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackLayout:
    """
    攻击布局

    受害者位于网格角上，holder 紧邻受害者，使所有 Td4 行的转发者固定且很近，
    延迟差完全来自各行 CHA 的距离。
    """

    victim_tile: int = 0
    holder_tile: int = 1
    timer_tile: int = 8
    attacker_tile: int = 9
    td_base: int = 0x100000
    td4_region: int = 0x200000
    td4_candidates: int = 1024
    out_addr: int = 0x300000
    near_lines: int = 2
    votes: int = 40
    word_index: int = 1
    timer_method: str = TimerMethod.SHARED_POLL.value
    timeout_cycles: int = 20000
    profile_samples: int = 100
    quantile_low: float = 0.25
    quantile_high: float = 0.75

    def __post_init__(self):
        tiles = {self.victim_tile, self.holder_tile, self.timer_tile, self.attacker_tile}
        if len(tiles) != 4:
            raise ConfigurationError('victim_tile', '受害者、holder、计时线程、攻击者必须位于不同 tile')
        if not 1 <= self.near_lines <= 3:
            raise ConfigurationError('near_lines', 'Td4 的近行数必须在 1..3 之间才有泄露')
        if not 1 <= self.word_index <= 3:
            raise ConfigurationError('word_index', '监视字必须是 1..3（字 0 之前没有可计时的改写）')
        if self.votes < 1:
            raise ConfigurationError('votes', '表决样本数必须 >= 1')
        TimerMethod(self.timer_method)

    def to_dict(self):
        return asdict(self)


def select_td4_placement(class_map: AddressClassMap, candidates: List[int], near_lines: int,
                         line_size: int = 64) -> int:
    """
    在候选行中找 4 条连续行，使其中恰有 near_lines 条属于近集合、其余属于远集合

    Raises:
        NoLeakageError: 没有满足条件的放置
    """
    for k in range(len(candidates) - 3):
        window = candidates[k:k + 4]
        if any(b - a != line_size for a, b in zip(window, window[1:])):
            continue
        kinds = [class_map.classify(a) for a in window]
        if None in kinds:
            continue
        if kinds.count('near') == near_lines:
            return window[0]
    raise NoLeakageError(f'候选区域中没有恰含 {near_lines} 条近行的 Td4 放置')


def build_low_index_set(class_map: AddressClassMap, tables: AesTables) -> FrozenSet[int]:
    """
    Td4 中缓存行属于近集合的下标

    Raises:
        NoLeakageError: 4 条行全近或全远
    """
    lines = tables.td4_lines()
    near = [a for a in lines if a in class_map.va_near]
    if not near or len(near) == len(lines):
        raise NoLeakageError(f'Td4 的 {len(lines)} 条行中近行数为 {len(near)}，计时不携带信息')
    near_set = set(near)
    return frozenset(i for i in range(256) if tables.td4_line_of(i) in near_set)


class AttackSession:
    """
    一台机器上的完整攻击环境

    Args:
        machine: 模拟机器（可以已经施加防御）
        layout: 攻击布局
        seed: 会话随机数种子（密文与训练密钥）
    """

    def __init__(self, machine: SimMachine, layout: Optional[AttackLayout] = None, seed: int = 0):
        self.machine = machine
        self.layout = layout or AttackLayout()
        self.rng = np.random.default_rng(seed)
        lay = self.layout
        self.victim = Agent('victim', machine.tile(lay.victim_tile))
        self.primer = Agent('primer', machine.tile(lay.victim_tile))
        self.holder = Agent('holder', machine.tile(lay.holder_tile))
        self.timer = Agent('timer', machine.tile(lay.timer_tile))
        self.attacker = Agent('attacker', machine.tile(lay.attacker_tile))
        self.tables: Optional[AesTables] = None
        self.class_map: Optional[AddressClassMap] = None
        self.low_set: FrozenSet[int] = frozenset()
        self.timeouts = 0
        self.decryptions = 0

    # ==================== 准备 ====================

    def setup(self, class_map: Optional[AddressClassMap] = None) -> 'AttackSession':
        """
        画像 Td4 候选区域并选定放置，然后强制缓存状态

        Args:
            class_map: 复用已有的近/远划分（例如防御前的画像）；为空时现场画像
        """
        lay = self.layout
        line = self.machine.config.line_size
        candidates = candidate_lines(lay.td4_region, lay.td4_candidates, line)
        if class_map is None:
            profile = profile_addresses(
                self.machine, self.victim.tile, candidates, samples_per_addr=lay.profile_samples,
                helper=self.holder.tile, min_samples=lay.profile_samples,
            )
            class_map = classify_addresses(profile, lay.quantile_low, lay.quantile_high)
        self.class_map = class_map
        td4_base = select_td4_placement(class_map, candidates, lay.near_lines, line)
        self.tables = AesTables(td_base=lay.td_base, td4_base=td4_base, line_size=line)
        self.low_set = build_low_index_set(class_map, self.tables)

        prime_l1_tables(self.machine, self.primer, self.tables)
        self.refresh()
        pin_l1_misses(self.machine, self.victim.tile, self.tables.td4_lines())
        evict_victim_l1(self.machine, self.attacker, self.tables.td4_lines())
        logger.info(
            f'攻击会话就绪: Td4@{td4_base:#x}, 近行 {lay.near_lines}/4, '
            f'LOW 下标数 {len(self.low_set)}, 计时方式 {lay.timer_method}'
        )
        return self

    def refresh(self):
        """每次试验前重新触碰 Td4 行，保持其驻留在 holder 的 LLC bank"""
        hold_llc(self.machine, self.holder, self.tables.td4_lines())

    # ==================== 计时 ====================

    def random_block(self) -> bytes:
        return bytes(self.rng.integers(0, 256, 16, dtype=np.uint8).tolist())

    def timed_decryption(self, schedule: AesKeySchedule, ciphertext: bytes) -> Tuple[Optional[int], bytes]:
        """
        一次被计时线程监视的解密

        Returns:
            (监视字之前的改写间隔，超时为 None; 明文)
        """
        lay = self.layout
        io = DecryptIo(data_in=ciphertext, out_addr=lay.out_addr, key_schedule=schedule,
                       line_size=self.machine.config.line_size)
        self.victim.start(decrypt_program(io, self.tables, last_round_only=True, start_event=START_EVENT))
        self.decryptions += 1
        reading = timer_watch(
            self.machine, self.timer, self.victim, lay.out_addr, method=lay.timer_method,
            last_word=lay.word_index, timeout_cycles=lay.timeout_cycles,
        )
        if reading.timed_out:
            self.timeouts += 1
        return reading.interval_before(lay.word_index), self.victim.result

    def true_label(self, schedule: AesKeySchedule, ciphertext: bytes) -> Label:
        indices = last_round_indices(ciphertext, schedule, self.layout.word_index)
        return Label.LOW if all(i in self.low_set for i in indices) else Label.HIGH

    def training_set(self, n_samples: int) -> List[LabeledSample]:
        """
        攻击者用自己控制的随机密钥与密文生成带真值标签的计时样本

        每个样本使用新的随机密钥；超时的样本丢弃。
        """
        samples: List[LabeledSample] = []
        for k in range(n_samples):
            if k % 64 == 0:
                self.refresh()
            schedule = AesKeySchedule.expand(self.random_block())
            ciphertext = self.random_block()
            latency, _ = self.timed_decryption(schedule, ciphertext)
            if latency is None:
                continue
            samples.append(LabeledSample(latency=latency, label=self.true_label(schedule, ciphertext)))
        lows = sum(1 for s in samples if s.label is Label.LOW)
        logger.info(f'训练集生成完成: {len(samples)} 个样本, LOW 比例 {lows / max(1, len(samples)):.4f}')
        return samples
