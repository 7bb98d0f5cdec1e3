"""
缓存状态与访存结果类型
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .address import TileId


class Coherence(str, Enum):
    """MESIF-lite 一致性状态"""
    MODIFIED = 'M'
    EXCLUSIVE = 'E'
    SHARED = 'S'
    INVALID = 'I'
    FORWARD = 'F'


OWNER_STATES = frozenset({Coherence.MODIFIED, Coherence.EXCLUSIVE})


class HitLevel(str, Enum):
    """访存命中层级"""
    L1 = 'L1'
    LLC_LOCAL = 'LLC_LOCAL'
    LLC_REMOTE = 'LLC_REMOTE'
    DRAM = 'DRAM'


LLC_LEVELS = frozenset({HitLevel.LLC_LOCAL, HitLevel.LLC_REMOTE})


@dataclass(frozen=True)
class CacheLineState:
    """某 tile 的 L1 中一条缓存行的快照"""

    tag: int
    coherence: Coherence
    owner_tile: Optional[TileId]
    lru_rank: int


@dataclass(frozen=True)
class MemResult:
    """
    一次访存的结果

    latency 为往返周期数；data_version 是访存时观察到的字版本号，
    计时线程通过它判断 out 缓冲区是否被改写。
    """

    latency: int
    hit_level: HitLevel
    serving_tile: TileId
    cha_tile: TileId
    data_version: int = 0
