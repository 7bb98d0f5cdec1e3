"""
测试网格 NUCA 机器模型: 地址映射、延迟模型、一致性与不变量
"""

from collections import Counter

import numpy as np
import pytest

from core.agents import CLEAN_THRESHOLD, DIRTY_THRESHOLD
from core.exceptions import ConfigurationError, InvariantViolation
from core.machine import (
    Coherence, HitLevel, LlcPlacement, MachineConfig, PhysAddr, SimMachine, TileId, bank_of, cha_of,
    hop_distance, llc_set_index,
)
from core.machine.address import cha_index_of_line

QUIET = MachineConfig(noise_stddev=0.0)


def _line_with_cha(cfg: MachineConfig, cha_tile: int, base: int = 0x1000000) -> int:
    """找一条 CHA 落在指定 tile 的缓存行"""
    for k in range(100000):
        addr = base + k * cfg.line_size
        if cha_of(addr, cfg).linear == cha_tile:
            return addr
    raise AssertionError(f'找不到 CHA 为 {cha_tile} 的行')


def test_bank_mapping_known_addresses():
    """静态 bank 选择: 行号对 tile 数取模"""
    cfg = MachineConfig()
    assert bank_of(0xc6fc0, cfg).linear == 63
    assert bank_of(0xc7000, cfg).linear == 0
    assert bank_of(PhysAddr(0xc7000), cfg) == TileId.from_linear(0, 8)


def test_address_decomposition():
    addr = PhysAddr(0x12345)
    assert addr.line_offset(64) == 0x05
    assert addr.line_addr(64) == 0x12340
    assert addr.line_number(64) == 0x12345 // 64
    with pytest.raises(ConfigurationError):
        PhysAddr(-1)


def test_hop_distance_is_manhattan():
    a = TileId.from_xy(0, 0, 8)
    b = TileId.from_xy(7, 7, 8)
    assert hop_distance(a, b) == 14
    assert hop_distance(a, a) == 0


def test_cha_hash_is_uniform_over_consecutive_lines():
    """2^20 条连续行在 64 个 CHA 上各占 1/64 (±10%)，任意 64K 连续行同样均匀"""
    counts = Counter(cha_index_of_line(line, 64) for line in range(1 << 20))
    expected = (1 << 20) / 64
    assert len(counts) == 64
    assert all(abs(c - expected) <= 0.1 * expected for c in counts.values())

    window = Counter(cha_index_of_line(line, 64) for line in range(1 << 16, 2 << 16))
    assert all(abs(c - 1024) <= 102.4 for c in window.values())


def test_four_line_tables_span_four_chas():
    """相邻行的哈希位置相差约 6.3 个 CHA，任意 4 条连续行落在 4 个不同的 CHA 上"""
    cfg = MachineConfig()
    rng = np.random.default_rng(0)
    bases = rng.integers(0, (1 << 30) // cfg.line_size, 20000) * cfg.line_size
    spread = [len({cha_of(int(b) + k * cfg.line_size, cfg).linear for k in range(4)}) for b in bases]
    assert set(spread) == {4}


def test_bank_and_cha_mapping_are_pure():
    """映射只依赖地址: 与机器状态、其余配置字段、行内偏移和地址类型无关"""
    cfg = MachineConfig()
    other = MachineConfig(rng_seed=9, lat_per_hop=5, noise_stddev=0.0)
    addrs = [0x400000 + 64 * k for k in range(256)]
    banks = [bank_of(a, cfg) for a in addrs]
    chas = [cha_of(a, cfg) for a in addrs]

    machine = SimMachine(QUIET)
    for k, addr in enumerate(addrs):
        machine.store(k % 64, addr)
        if k % 3 == 0:
            machine.clflush(5, addr)

    assert [bank_of(a, cfg) for a in addrs] == banks
    assert [cha_of(a, cfg) for a in addrs] == chas
    assert [cha_of(a + 17, other) for a in addrs] == chas
    assert [bank_of(PhysAddr(a + 63), other) for a in addrs] == banks
    assert [machine.cha_tile(a) for a in addrs] == chas


def test_llc_set_index_depends_on_placement():
    """first_touch 下连续行进入不同组；static 下 bank 选择位之上的位才选组"""
    first_touch = MachineConfig()
    static = MachineConfig(llc_placement=LlcPlacement.STATIC)
    lines = [0x400000 + 64 * k for k in range(64)]
    assert len({llc_set_index(a, first_touch) for a in lines}) == 64
    assert len({llc_set_index(a, static) for a in lines}) == 1
    assert llc_set_index(0x400000 + 64 * 64, static) == llc_set_index(0x400000, static) + 1


def test_first_touch_keeps_consecutive_lines_resident():
    """同一 tile 首次触碰的连续行全部落在它的 bank 且互不驱逐"""
    machine = SimMachine(QUIET, debug_checks=True)
    lines = [0x400000 + 64 * k for k in range(128)]
    for addr in lines:
        machine.load(0, addr)
    assert all(machine.is_llc_resident(a) for a in lines)
    assert all(machine.llc_home(a).linear == 0 for a in lines)
    assert all(machine.is_l1_resident(0, a) for a in lines)


def test_config_validation_names_field():
    with pytest.raises(ConfigurationError) as exc:
        MachineConfig(mesh_width=1)
    assert exc.value.field == 'mesh_width'

    with pytest.raises(ConfigurationError) as exc:
        MachineConfig(l1_sets=48)
    assert exc.value.field == 'l1_sets'

    with pytest.raises(ConfigurationError) as exc:
        MachineConfig.from_dict({'lat_per_hopp': 3})
    assert exc.value.field == 'lat_per_hopp'


def test_near_cha_llc_hit_is_about_40_cycles():
    """CHA 与转发者都在相邻 tile: 4 + 6 + 14 + 3*4 + 1*4 = 40"""
    machine = SimMachine(QUIET)
    addr = _line_with_cha(QUIET, cha_tile=1)
    first = machine.load(1, addr)
    assert first.hit_level is HitLevel.DRAM
    machine.flush_l1(1, addr)

    result = machine.load(0, addr)
    assert result.hit_level is HitLevel.LLC_REMOTE
    assert result.serving_tile.linear == 1
    assert result.cha_tile.linear == 1
    assert result.latency == 40


def test_far_cha_llc_hit_is_much_slower():
    """CHA 在对角 tile，转发者仍是相邻 tile"""
    machine = SimMachine(QUIET)
    addr = _line_with_cha(QUIET, cha_tile=63)
    machine.load(1, addr)
    machine.flush_l1(1, addr)

    result = machine.load(0, addr)
    assert result.hit_level is HitLevel.LLC_REMOTE
    assert result.latency == 118
    assert result.latency >= 95


def test_llc_latency_is_monotone_in_hop_distance():
    """行驻留在自己的 CHA tile，所有 tile 依次读取: 延迟只由跳数决定且随跳数不减"""
    machine = SimMachine(QUIET)
    addr = _line_with_cha(QUIET, cha_tile=0)
    machine.load(0, addr)
    machine.flush_l1(0, addr)

    by_hops = {}
    for tile in range(QUIET.tiles):
        result = machine.load(tile, addr)
        assert result.hit_level in (HitLevel.LLC_LOCAL, HitLevel.LLC_REMOTE)
        by_hops.setdefault(machine.hops(tile, 0), set()).add(result.latency)
        machine.flush_l1(tile, addr)

    assert sorted(by_hops) == list(range(15))
    assert all(len(v) == 1 for v in by_hops.values())
    latencies = [by_hops[h].pop() for h in sorted(by_hops)]
    assert all(b >= a for a, b in zip(latencies, latencies[1:]))
    assert latencies[-1] > latencies[0]


def test_l1_hit_and_dram_miss():
    machine = SimMachine(QUIET)
    addr = 0x500000
    miss = machine.load(0, addr)
    assert miss.hit_level is HitLevel.DRAM
    assert miss.latency > QUIET.lat_dram
    hit = machine.load(0, addr)
    assert hit.hit_level is HitLevel.L1
    assert hit.latency == QUIET.lat_l1_hit


def test_flush_l1_keeps_llc_and_clflush_removes_everything():
    machine = SimMachine(QUIET)
    addr = 0x500040
    machine.load(3, addr)
    machine.flush_l1(3, addr)
    assert not machine.is_l1_resident(3, addr)
    assert machine.is_llc_resident(addr)
    assert machine.llc_home(addr).linear == 3

    machine.load(3, addr)
    machine.clflush(3, addr)
    assert not machine.is_l1_resident(3, addr)
    assert not machine.is_llc_resident(addr)


def test_prefetchw_after_remote_write_exceeds_150_cycles():
    """远端写之后取回所有权要付所有权转移代价；重复探针在 L1 命中"""
    machine = SimMachine(QUIET)
    timer, writer, addr = 8, 0, 0x300000
    machine.prefetchw_probe(timer, addr)
    for _ in range(20):
        write = machine.store(writer, addr)
        assert write.latency > 150
        dirty = machine.prefetchw_probe(timer, addr)
        assert dirty.latency > 150
        clean = machine.prefetchw_probe(timer, addr)
        assert clean.hit_level is HitLevel.L1
        assert clean.latency < 100
    state = machine.line_state(timer, addr)
    assert state.coherence is Coherence.EXCLUSIVE


def test_prefetchw_on_line_invalid_in_every_l1_sits_between_thresholds():
    """行只在 LLC 中: 没有所有权转移，延迟落在两个阈值之间，计时线程判为未改写"""
    machine = SimMachine(QUIET)
    timer, writer = 8, 0
    addr = _line_with_cha(QUIET, cha_tile=63)
    machine.store(writer, addr)
    machine.flush_l1(writer, addr)
    assert machine.sharers(addr) == frozenset()
    assert machine.is_llc_resident(addr)

    result = machine.prefetchw_probe(timer, addr)
    assert result.hit_level is HitLevel.LLC_REMOTE
    assert CLEAN_THRESHOLD < result.latency < DIRTY_THRESHOLD
    assert machine.prefetchw_probe(timer, addr).latency < CLEAN_THRESHOLD

    for k in range(32):
        line = 0x600000 + 64 * k
        machine.load(writer, line)
        machine.flush_l1(writer, line)
        assert machine.prefetchw_probe(timer, line).latency < DIRTY_THRESHOLD


def test_flush_l1_before_prefetchw_avoids_ownership_penalty():
    """写者先把脏行写回 LLC，另一核的 PREFETCHW 不再付所有权转移代价"""
    def prefetchw_after_write(flush: bool) -> int:
        machine = SimMachine(QUIET)
        machine.store(0, 0x300000)
        if flush:
            machine.flush_l1(0, 0x300000)
        return machine.prefetchw_probe(9, 0x300000).latency

    clean, dirty = prefetchw_after_write(True), prefetchw_after_write(False)
    assert clean < DIRTY_THRESHOLD < dirty
    assert dirty - clean == QUIET.lat_ownership_transfer


def test_store_bumps_data_version_and_invalidates_sharers():
    machine = SimMachine(QUIET, debug_checks=True)
    addr = 0x300000
    machine.load(5, addr)
    machine.load(6, addr)
    assert {t.linear for t in machine.sharers(addr)} == {5, 6}
    assert machine.data_version(addr) == 0

    machine.store(0, addr)
    assert machine.data_version(addr) == 1
    assert {t.linear for t in machine.sharers(addr)} == {0}
    assert machine.line_state(0, addr).coherence is Coherence.MODIFIED
    # 相邻字不受影响
    assert machine.data_version(addr + 4) == 0


def test_invariants_hold_under_mixed_traffic():
    cfg = MachineConfig(l1_sets=2, l1_ways=2, llc_sets_per_bank=2, llc_ways=2, noise_stddev=0.0)
    machine = SimMachine(cfg, debug_checks=True)
    for k in range(400):
        addr = 0x1000 + (k * 7 % 97) * cfg.line_size
        tile = k % cfg.tiles
        if k % 5 == 0:
            machine.store(tile, addr)
        elif k % 7 == 0:
            machine.prefetchw_probe(tile, addr)
        elif k % 11 == 0:
            machine.clflush(tile, addr)
        else:
            machine.load(tile, addr)
    machine.check_invariants()


def test_invariant_violation_is_detected():
    machine = SimMachine(QUIET)
    machine.load(0, 0x2000)
    # 手工破坏目录
    machine._sharers.clear()
    with pytest.raises(InvariantViolation):
        machine.check_invariants()


def test_defense_target_clamps_llc_hits():
    machine = SimMachine(QUIET)
    near = _line_with_cha(QUIET, cha_tile=1)
    machine.load(1, near)
    machine.flush_l1(1, near)
    worst = machine.worst_case_llc_latency()
    machine.set_defense_target(worst)
    assert machine.load(0, near).latency == worst
    # L1 命中不受影响
    assert machine.load(0, near).latency == QUIET.lat_l1_hit


def test_noise_is_deterministic_per_seed():
    def latencies(seed):
        machine = SimMachine(MachineConfig(rng_seed=seed))
        addr = 0x700000
        machine.load(1, addr)
        out = []
        for _ in range(50):
            machine.flush_l1(0, addr)
            out.append(machine.load(0, addr).latency)
        return out

    assert latencies(3) == latencies(3)
    assert latencies(3) != latencies(4)
