"""
计时线程
职责: 监视受害者 out 缓冲区各字的改写时刻，返回相邻两次改写的间隔

两种方式:
    shared-poll: 只读映射轮询 out 各字的数据，配合计数线程取时间戳
    prefetchw:   反复 PREFETCHW out 所在行，>150 周期视为被远端改写，<100 视为未改写
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Generator, Optional, Tuple

from core.machine import MachineConfig, SimMachine

from .ops import Compute, Load, Poll, PrefetchW, ReadCounter, Signal
from .scheduler import Agent, run_scenario

logger = logging.getLogger(__name__)

DIRTY_THRESHOLD = 150
CLEAN_THRESHOLD = 100
DEFAULT_TIMEOUT_CYCLES = 20000
START_EVENT = 'timer-armed'


class TimerMethod(str, Enum):
    SHARED_POLL = 'shared-poll'
    PREFETCHW = 'prefetchw'


@dataclass(frozen=True)
class TimerReading:
    """
    Attributes:
        t26_31: out 与 out+4 两次改写之间的周期数（按轮询粒度量化）；超时为 None
        poll_count: 该间隔内的计数线程计数
        intervals: 第 k 个元素是字 k 与字 k+1 改写之间的周期数
    """

    t26_31: Optional[int]
    poll_count: Optional[int]
    method: TimerMethod
    intervals: Tuple[int, ...] = ()
    timed_out: bool = False
    probes: int = 0
    ambiguous_probes: int = 0

    def interval_before(self, word: int) -> Optional[int]:
        """字 word-1 到字 word 的改写间隔"""
        if self.timed_out or not 1 <= word <= len(self.intervals):
            return None
        return self.intervals[word - 1]


def _reading(stamps, poll: int, method: TimerMethod, probes: int = 0, ambiguous: int = 0) -> TimerReading:
    counts = [b - a for a, b in zip(stamps, stamps[1:])]
    return TimerReading(
        t26_31=counts[0] * poll,
        poll_count=counts[0],
        method=method,
        intervals=tuple(c * poll for c in counts),
        probes=probes,
        ambiguous_probes=ambiguous,
    )


def _timed_out(method: TimerMethod, probes: int = 0) -> TimerReading:
    return TimerReading(t26_31=None, poll_count=None, method=method, timed_out=True, probes=probes)


def shared_poll_program(out_addr: int, cfg: MachineConfig, last_word: int = 1,
                        timeout_cycles: int = DEFAULT_TIMEOUT_CYCLES,
                        start_event: Optional[str] = START_EVENT) -> Generator:
    poll = cfg.lat_poll_iter
    spin = max(0, poll - cfg.lat_l1_hit)
    max_polls = max(1, timeout_cycles // poll)
    words = [out_addr + 4 * k for k in range(last_word + 1)]

    baseline = []
    for addr in words:
        result = yield Load(addr)
        baseline.append(result.data_version)
    if start_event is not None:
        yield Signal(start_event)

    stamps = []
    polls = 0
    for k, addr in enumerate(words):
        while True:
            result, done = yield Poll(addr, baseline[k], spin, max_polls - polls)
            polls += done
            if result.data_version != baseline[k]:
                stamps.append((yield ReadCounter(poll)))
                break
            if polls >= max_polls:
                return _timed_out(TimerMethod.SHARED_POLL, polls)
    return _reading(stamps, poll, TimerMethod.SHARED_POLL, probes=polls)


def prefetchw_program(out_addr: int, cfg: MachineConfig, last_word: int = 1,
                      timeout_cycles: int = DEFAULT_TIMEOUT_CYCLES,
                      start_event: Optional[str] = START_EVENT) -> Generator:
    poll = cfg.lat_poll_iter
    spin = max(0, poll - cfg.lat_l1_hit)
    max_probes = max(1, timeout_cycles // poll)

    # 先取得所有权，之后受害者每次写都必须从计时线程手里拿走该行
    yield PrefetchW(out_addr)
    if start_event is not None:
        yield Signal(start_event)

    stamps = []
    probes = 0
    ambiguous = 0
    for _ in range(last_word + 1):
        while True:
            result = yield PrefetchW(out_addr)
            probes += 1
            if result.latency > DIRTY_THRESHOLD:
                stamps.append((yield ReadCounter(poll)))
                break
            if result.latency >= CLEAN_THRESHOLD:
                ambiguous += 1
            if probes >= max_probes:
                return _timed_out(TimerMethod.PREFETCHW, probes)
            if spin:
                yield Compute(spin)
    return _reading(stamps, poll, TimerMethod.PREFETCHW, probes=probes, ambiguous=ambiguous)


def timer_program(out_addr: int, cfg: MachineConfig, method: TimerMethod = TimerMethod.SHARED_POLL,
                  **kwargs) -> Generator:
    if TimerMethod(method) is TimerMethod.PREFETCHW:
        return prefetchw_program(out_addr, cfg, **kwargs)
    return shared_poll_program(out_addr, cfg, **kwargs)


def timer_watch(machine: SimMachine, timer: Agent, victim: Agent, out_addr: int,
                method: TimerMethod = TimerMethod.SHARED_POLL, last_word: int = 1,
                timeout_cycles: int = DEFAULT_TIMEOUT_CYCLES, record_trace: bool = False):
    """
    与受害者同时运行计时线程，返回 TimerReading

    受害者程序必须以 WaitFor(START_EVENT) 开头，由计时线程在记录基线后触发。
    record_trace=True 时返回 (reading, trace)。
    """
    timer.start(timer_program(
        out_addr, machine.config, method, last_word=last_word, timeout_cycles=timeout_cycles,
    ))
    trace = run_scenario(machine, [victim, timer], record_trace=record_trace)
    reading: TimerReading = timer.result
    if reading.timed_out:
        logger.debug(f'计时线程超时: {reading.probes} 次探测未观察到改写')
    return (reading, trace) if record_trace else reading
