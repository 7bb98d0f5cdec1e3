"""逻辑线程调度器与攻击辅助代理"""

from .ops import (
    ClFlush, Compute, FlushL1, Join, Load, Poll, PrefetchW, ReadCounter, Signal, Store, WaitFor,
)
from .roles import evict_victim_l1, hold_llc, pin_l1_misses, prime_l1_tables
from .scheduler import Agent, AgentState, ScenarioTrace, Scheduler, TraceEntry, run_scenario
from .timer import (
    CLEAN_THRESHOLD, DIRTY_THRESHOLD, START_EVENT, TimerMethod, TimerReading, timer_program, timer_watch,
)

__all__ = [
    'ClFlush', 'Compute', 'FlushL1', 'Join', 'Load', 'Poll', 'PrefetchW', 'ReadCounter', 'Signal', 'Store',
    'WaitFor', 'evict_victim_l1', 'hold_llc', 'pin_l1_misses', 'prime_l1_tables', 'Agent',
    'AgentState', 'ScenarioTrace', 'Scheduler', 'TraceEntry', 'run_scenario', 'CLEAN_THRESHOLD',
    'DIRTY_THRESHOLD', 'START_EVENT', 'TimerMethod', 'TimerReading', 'timer_program', 'timer_watch',
]
