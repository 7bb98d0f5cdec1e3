"""
测试代理调度器与计时线程
"""

import pytest

from core.agents import (
    Agent, Compute, Load, Poll, ReadCounter, Signal, Store, TimerMethod, WaitFor, hold_llc, prime_l1_tables,
    run_scenario, timer_watch,
)
from core.agents.timer import START_EVENT
from core.exceptions import ConfigurationError, DeadlockError
from core.machine import MachineConfig, SimMachine
from core.victims import AesTables

QUIET = MachineConfig(noise_stddev=0.0)
OUT = 0x300000


def test_earliest_clock_runs_first_and_ties_follow_registration_order():
    machine = SimMachine(QUIET)

    def slow():
        yield Compute(100)
        yield Compute(1)

    def fast():
        yield Compute(10)
        yield Compute(10)

    a = Agent('a', machine.tile(0), slow())
    b = Agent('b', machine.tile(1), fast())
    trace = run_scenario(machine, [a, b])
    order = [e.agent for e in trace]
    assert order == ['a', 'b', 'b', 'a']
    assert a.clock == 101 and b.clock == 20
    clocks = [e.issued_at for e in trace]
    assert trace.global_clock == max(clocks)


def test_memory_results_are_sent_back_to_program():
    machine = SimMachine(QUIET)

    def program():
        first = yield Load(0x500000)
        second = yield Load(0x500000)
        return first.latency, second.latency

    agent = Agent('reader', machine.tile(0), program())
    run_scenario(machine, [agent])
    miss, hit = agent.result
    assert miss > QUIET.lat_dram
    assert hit == QUIET.lat_l1_hit
    assert agent.clock == miss + hit


def test_signal_wakes_waiter_at_signaller_clock():
    machine = SimMachine(QUIET)

    def waiter():
        yield WaitFor('go')
        value = yield ReadCounter(1)
        return value

    def signaller():
        yield Compute(500)
        yield Signal('go')

    w = Agent('waiter', machine.tile(0), waiter())
    s = Agent('signaller', machine.tile(1), signaller())
    run_scenario(machine, [w, s])
    assert w.result == 500


def test_all_blocked_raises_deadlock():
    machine = SimMachine(QUIET)

    def stuck():
        yield WaitFor('never')

    with pytest.raises(DeadlockError) as exc:
        run_scenario(machine, [Agent('stuck', machine.tile(0), stuck())])
    assert exc.value.details['blocked'] == ['stuck']


def test_hold_llc_moves_line_to_holder_bank():
    machine = SimMachine(QUIET)
    addr = 0x410000
    machine.load(5, addr)
    assert machine.llc_home(addr).linear == 5
    moved = hold_llc(machine, Agent('holder', machine.tile(1)), [addr])
    assert moved == 1
    assert machine.llc_home(addr).linear == 1
    assert not machine.is_l1_resident(1, addr)


def test_prime_leaves_td_tables_in_victim_l1_and_llc():
    """预热后 Td0..Td3 的 64 行全部驻留受害者 L1 与 LLC，Td4 不在受害者 L1 中"""
    machine = SimMachine(QUIET, debug_checks=True)
    tables = AesTables(td_base=0x100000, td4_base=0x200000)
    for addr in tables.td4_lines():
        machine.load(0, addr)

    prime_l1_tables(machine, Agent('primer', machine.tile(0)), tables)
    lines = tables.td_lines()
    assert len(lines) == 64
    assert all(machine.is_l1_resident(0, a) for a in lines)
    assert all(machine.is_llc_resident(a) for a in lines)
    assert not any(machine.is_l1_resident(0, a) for a in tables.td4_lines())
    assert all(machine.is_llc_resident(a) for a in tables.td4_lines())


def test_prime_rejects_too_small_l1():
    machine = SimMachine(MachineConfig(l1_sets=8, noise_stddev=0.0))
    tables = AesTables(td_base=0x100000, td4_base=0x200000)
    with pytest.raises(ConfigurationError) as exc:
        prime_l1_tables(machine, Agent('primer', machine.tile(0)), tables)
    assert exc.value.field == 'l1_sets'


def _writer(gap: int):
    """等待计时线程就绪后写 out[0]，隔 gap 周期写 out[1]"""
    def program():
        yield WaitFor(START_EVENT)
        yield Store(OUT)
        yield Compute(gap)
        yield Store(OUT + 4)
    return program()


@pytest.mark.parametrize('method', [TimerMethod.SHARED_POLL, TimerMethod.PREFETCHW])
def test_timer_interval_tracks_write_gap(method):
    readings = {}
    for gap in (200, 2000):
        machine = SimMachine(QUIET)
        victim = Agent('victim', machine.tile(0), _writer(gap))
        timer = Agent('timer', machine.tile(8))
        reading = timer_watch(machine, timer, victim, OUT, method=method, last_word=1)
        assert not reading.timed_out
        assert reading.interval_before(1) == reading.t26_31
        readings[gap] = reading.t26_31
    assert readings[2000] - readings[200] >= 1500


def _per_load_poll(out_addr: int, cfg: MachineConfig):
    """逐次 Load 的轮询计时程序，返回两次改写之间的计数"""
    poll = cfg.lat_poll_iter
    spin = max(0, poll - cfg.lat_l1_hit)
    words = [out_addr, out_addr + 4]
    baseline = []
    for addr in words:
        result = yield Load(addr)
        baseline.append(result.data_version)
    yield Signal(START_EVENT)
    stamps = []
    for k, addr in enumerate(words):
        while True:
            result = yield Load(addr, post_cycles=spin)
            if result.data_version != baseline[k]:
                stamps.append((yield ReadCounter(poll)))
                break
    return stamps[1] - stamps[0]


@pytest.mark.parametrize('gap', [5, 37, 500])
def test_batched_polling_matches_per_load_polling(gap):
    """成批推进的 L1 命中轮询与逐次读得到同样的计数、时钟、访问统计与噪声序列"""
    def run(batched: bool):
        machine = SimMachine(MachineConfig(rng_seed=4))
        victim = Agent('victim', machine.tile(0), _writer(gap))
        timer = Agent('timer', machine.tile(8))
        if batched:
            count = timer_watch(machine, timer, victim, OUT).poll_count
        else:
            timer.start(_per_load_poll(OUT, machine.config))
            run_scenario(machine, [victim, timer], record_trace=False)
            count = timer.result
        return count, victim.clock, dict(machine.access_counts), machine.load(3, 0x700000).latency

    assert run(True) == run(False)


def test_poll_yields_when_another_agent_becomes_earliest():
    machine = SimMachine(QUIET)
    machine.load(8, OUT)

    def writer():
        yield Compute(100)
        yield Store(OUT)

    def poller():
        result, polls = yield Poll(OUT, 0, spin=2, limit=1000)
        return result.data_version, polls

    timer = Agent('timer', machine.tile(8), poller())
    run_scenario(machine, [Agent('writer', machine.tile(0), writer()), timer])
    version, polls = timer.result
    # 每次读 4 + 2 周期，时钟越过写者的 100 周期后交回
    assert version == 0
    assert polls == 17
    assert timer.clock == 102


def test_timer_times_out_without_writes():
    machine = SimMachine(QUIET)

    def idle():
        yield WaitFor(START_EVENT)
        yield Compute(1)

    reading = timer_watch(machine, Agent('timer', machine.tile(8)), Agent('victim', machine.tile(0), idle()),
                          OUT, timeout_cycles=600)
    assert reading.timed_out
    assert reading.t26_31 is None
    assert reading.interval_before(1) is None
