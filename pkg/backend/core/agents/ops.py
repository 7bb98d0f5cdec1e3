"""
代理程序可发出的操作
代理程序是生成器: yield 一个操作，调度器执行后把结果 send 回去
（访存操作得到 MemResult，ReadCounter 得到计数值，其余得到 None）。
"""

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Load:
    """
    读访问

    overlap=True 时不推进代理时钟，完成时间记入待合并列表，由 Join 取最大值；
    post_cycles 是访存后紧跟的固定计算周期（轮询循环体）。
    """
    addr: int
    overlap: bool = False
    post_cycles: int = 0


@dataclass(frozen=True)
class Poll:
    """
    轮询读: 重复 Load(addr, post_cycles=spin)，直到读到的数据版本不等于 version 或满 limit 次

    连续的 L1 命中由调度器成批推进，其他代理可能先执行时提前交回；
    程序得到 (最后一次读的 MemResult, 本次执行的读次数)。
    """
    addr: int
    version: int
    spin: int = 0
    limit: int = 1


@dataclass(frozen=True)
class Store:
    addr: int


@dataclass(frozen=True)
class PrefetchW:
    addr: int


@dataclass(frozen=True)
class FlushL1:
    """从 L1 移除一行；tile 为空时作用于代理自己的 tile"""
    addr: int
    tile: Optional[int] = None


@dataclass(frozen=True)
class ClFlush:
    addr: int


@dataclass(frozen=True)
class Compute:
    cycles: int


@dataclass(frozen=True)
class Join:
    """等待所有重叠访存完成，再加 extra 周期"""
    extra: int = 0


@dataclass(frozen=True)
class Signal:
    event: str


@dataclass(frozen=True)
class WaitFor:
    event: str


@dataclass(frozen=True)
class ReadCounter:
    """读取计数线程的计数值: 当前时钟 // period"""
    period: int


MEMORY_OPS = (Load, Poll, Store, PrefetchW, ClFlush)
