"""
确定性代理调度器
职责: 按各代理本地时钟交错执行代理程序；每个调度回合一个代理只发出一个操作

调度策略: 本地时钟最早的可运行代理先执行，时钟相同按注册顺序。
全局时钟是最近一次发出操作的时间，单调不减。
"""

import heapq
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Deque, Dict, Generator, Iterator, List, Optional

from core.exceptions import DeadlockError
from core.machine import MemResult, SimMachine, TileId

from .ops import (
    ClFlush, Compute, FlushL1, Join, Load, Poll, PrefetchW, ReadCounter, Signal, Store, WaitFor,
)

logger = logging.getLogger(__name__)

Program = Generator[Any, Any, Any]


class AgentState(str, Enum):
    RUNNABLE = 'runnable'
    BLOCKED = 'blocked'
    DONE = 'done'


@dataclass(eq=False)
class Agent:
    """
    逻辑线程

    Args:
        name: 代理标识
        tile: 绑定的 tile
        program: 操作生成器；可在运行前通过 start() 替换
    """

    name: str
    tile: TileId
    program: Optional[Program] = None
    state: AgentState = AgentState.RUNNABLE
    clock: int = 0
    result: Any = None
    pending: List[int] = field(default_factory=list)
    _inbox: Any = None

    def start(self, program: Program, clock: int = 0) -> 'Agent':
        self.program = program
        self.state = AgentState.RUNNABLE
        self.clock = clock
        self.result = None
        self.pending = []
        self._inbox = None
        return self


@dataclass(frozen=True)
class TraceEntry:
    agent: str
    op: Any
    result: Optional[MemResult]
    issued_at: int
    completed_at: int


@dataclass
class ScenarioTrace:
    """一次场景运行的操作轨迹"""

    entries: List[TraceEntry]
    global_clock: int
    turns: int

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    def for_agent(self, name: str) -> List[TraceEntry]:
        return [e for e in self.entries if e.agent == name]


class Scheduler:
    """
    场景调度器

    Args:
        machine: 共享的模拟机器
        agents: 代理列表，列表顺序即注册顺序
        record_trace: 是否记录完整轨迹（大规模运行时关闭以节省内存）
        max_turns: 回合上限，超出视为程序失控
    """

    def __init__(self, machine: SimMachine, agents: List[Agent], record_trace: bool = True,
                 max_turns: Optional[int] = None):
        self.machine = machine
        self.agents = list(agents)
        self.record_trace = record_trace
        self.max_turns = max_turns
        self.global_clock = 0
        self.turns = 0
        self.trace: List[TraceEntry] = []
        self._events: Dict[str, int] = defaultdict(int)
        self._waiters: Dict[str, Deque[Agent]] = defaultdict(deque)
        self._heap: list = []
        self._order = {id(a): i for i, a in enumerate(self.agents)}
        self._lat_local = machine.config.lat_l1_hit

    def run(self, until: Optional[Callable[['Scheduler'], bool]] = None) -> ScenarioTrace:
        for agent in self.agents:
            if agent.program is None:
                raise DeadlockError(f'代理 {agent.name} 没有程序')
            agent.tile = self.machine.tile(agent.tile)
            agent.state = AgentState.RUNNABLE
            self._push(agent)

        while self._heap:
            _, _, agent = heapq.heappop(self._heap)
            self._turn(agent)
            self.turns += 1
            if until is not None and until(self):
                break
            if self.max_turns is not None and self.turns >= self.max_turns:
                raise DeadlockError(f'超过最大回合数 {self.max_turns}', turns=self.turns)
        else:
            blocked = [a.name for a in self.agents if a.state is AgentState.BLOCKED]
            if blocked:
                raise DeadlockError(
                    f'所有未完成代理都在等待事件: {", ".join(blocked)}', blocked=blocked,
                )

        return ScenarioTrace(entries=self.trace, global_clock=self.global_clock, turns=self.turns)

    def _push(self, agent: Agent):
        heapq.heappush(self._heap, (agent.clock, self._order[id(agent)], agent))

    def _turn(self, agent: Agent):
        try:
            op = agent.program.send(agent._inbox)
        except StopIteration as stop:
            agent.state = AgentState.DONE
            agent.result = stop.value
            return
        agent._inbox = None

        issued = agent.clock
        if issued > self.global_clock:
            self.global_clock = issued
        result = None
        reply = None
        machine = self.machine
        tile = agent.tile.linear
        kind = type(op)

        if kind is Load:
            result = machine.load(tile, op.addr)
            if op.overlap:
                agent.pending.append(issued + result.latency)
            else:
                agent.clock += result.latency
            agent.clock += op.post_cycles
        elif kind is Poll:
            result = machine.load(tile, op.addr)
            agent.clock += result.latency + op.spin
            polls = 1
            if result.data_version == op.version and polls < op.limit:
                extra, agent.clock = machine.spin_l1(
                    tile, op.addr, op.spin, agent.clock, self._yield_clock(agent), op.limit - polls,
                )
                polls += extra
            reply = (result, polls)
        elif kind is Store:
            result = machine.store(tile, op.addr)
            agent.clock += result.latency
        elif kind is PrefetchW:
            result = machine.prefetchw_probe(tile, op.addr)
            agent.clock += result.latency
        elif kind is FlushL1:
            machine.flush_l1(tile if op.tile is None else op.tile, op.addr)
            agent.clock += self._lat_local
        elif kind is ClFlush:
            result = machine.clflush(tile, op.addr)
            agent.clock += result.latency
        elif kind is Compute:
            agent.clock += op.cycles
        elif kind is Join:
            if agent.pending:
                agent.clock = max(agent.clock, max(agent.pending))
                agent.pending.clear()
            agent.clock += op.extra
        elif kind is ReadCounter:
            agent._inbox = agent.clock // op.period
        elif kind is Signal:
            self._signal(agent, op.event)
        elif kind is WaitFor:
            if self._events[op.event] > 0:
                self._events[op.event] -= 1
            else:
                agent.state = AgentState.BLOCKED
                self._waiters[op.event].append(agent)
        else:
            raise TypeError(f'未知操作: {op!r}')

        if reply is not None:
            agent._inbox = reply
        elif result is not None:
            agent._inbox = result
        if self.record_trace:
            self.trace.append(TraceEntry(agent.name, op, result, issued, agent.clock))
        if agent.state is AgentState.RUNNABLE:
            self._push(agent)

    def _yield_clock(self, agent: Agent) -> Optional[int]:
        """agent 的时钟到达该值后不再是最早的可运行代理；没有其他可运行代理时为 None"""
        if not self._heap:
            return None
        clock, order, _ = self._heap[0]
        return clock + 1 if self._order[id(agent)] < order else clock

    def _signal(self, agent: Agent, event: str):
        waiters = self._waiters[event]
        if waiters:
            woken = waiters.popleft()
            woken.clock = max(woken.clock, agent.clock)
            woken.state = AgentState.RUNNABLE
            self._push(woken)
        else:
            self._events[event] += 1


def run_scenario(machine: SimMachine, agents: List[Agent],
                 until: Optional[Callable[[Scheduler], bool]] = None,
                 record_trace: bool = True, max_turns: Optional[int] = None) -> ScenarioTrace:
    """
    运行一个场景直到所有代理结束或 until 条件成立

    Raises:
        DeadlockError: 所有未完成代理都处于阻塞
    """
    return Scheduler(machine, agents, record_trace=record_trace, max_turns=max_turns).run(until)
