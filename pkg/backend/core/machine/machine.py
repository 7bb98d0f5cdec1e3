"""
网格 NUCA 多核模拟机器
职责: 维护每个 tile 的私有 L1D、分布式 LLC bank 与 CHA 目录，
     对每次访存返回往返延迟（周期）

延迟模型（不含噪声），h_rc = hop(请求者, CHA)，h_fr = hop(转发者, 请求者):
    L1 命中   : lat_l1_hit
    LLC 命中  : lat_l1_hit + lat_cha_lookup + lat_llc_bank
                + lat_per_hop * (2*h_rc + 2*h_fr) + lat_router * (2*[h_rc>0] + 2*[h_fr>0])
    LLC 缺失  : lat_l1_hit + lat_cha_lookup + lat_per_hop * 2*h_rc + lat_router * 2*[h_rc>0] + lat_dram
所有权请求（store / prefetchw）若需要从其他 tile 的 M/E 副本取得所有权，
额外加 lat_ownership_transfer；升级共享行额外加失效往返。

机器是被动状态对象，只由调度器显式调用推进；不同实例之间不共享可变状态。
"""

import logging
from collections import Counter, OrderedDict
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np

from core.exceptions import InvariantViolation

from .address import (
    AddrLike, TileId, TileLike, cha_index_of_line, hop_distance, llc_set_of_line, raw_addr, tile_of,
)
from .config import LlcPlacement, MachineConfig
from .state import (
    CacheLineState, Coherence, HitLevel, LLC_LEVELS, MemResult, OWNER_STATES,
)

logger = logging.getLogger(__name__)

_NOISE_BLOCK = 8192

M = Coherence.MODIFIED
E = Coherence.EXCLUSIVE
S = Coherence.SHARED
F = Coherence.FORWARD


class SimMachine:
    """
    模拟机器

    Args:
        config: 机器配置，默认 8x8 KNL 风格参数
        debug_checks: 覆盖配置中的 debug_checks；开启后每次操作后检查目录守恒与包含性
    """

    def __init__(self, config: Optional[MachineConfig] = None, debug_checks: Optional[bool] = None):
        self.config = config or MachineConfig()
        cfg = self.config
        self.debug_checks = cfg.debug_checks if debug_checks is None else debug_checks

        self._tiles: List[TileId] = [TileId.from_linear(i, cfg.mesh_width) for i in range(cfg.tiles)]
        self._hops: List[List[int]] = [
            [hop_distance(a, b) for b in self._tiles] for a in self._tiles
        ]
        self._line_bits = cfg.line_bits
        self._first_touch = cfg.llc_placement == LlcPlacement.FIRST_TOUCH

        # tile -> {行号: 一致性状态}
        self._l1: List[Dict[int, Coherence]] = [dict() for _ in self._tiles]
        # (tile * l1_sets + set) -> LRU 顺序的行号（最旧在前）
        self._l1_sets: Dict[int, 'OrderedDict[int, None]'] = {}
        # 目录: 行号 -> 持有该行的 tile 集合
        self._sharers: Dict[int, Set[int]] = {}
        # 行号 -> 所在 LLC bank
        self._home: Dict[int, int] = {}
        # (bank * llc_sets + set) -> LRU 顺序的行号
        self._llc_sets: Dict[int, 'OrderedDict[int, None]'] = {}
        # 4 字节字地址 -> 数据版本号
        self._versions: Dict[int, int] = {}
        # tile -> 不在该 tile L1 中分配的行号
        self._bypass: Dict[int, Set[int]] = {}
        self._cha_cache: Dict[int, int] = {}

        self._rng = np.random.default_rng(cfg.rng_seed)
        self._noise_on = cfg.noise_stddev > 0
        self._noise_buf: List[int] = []
        self._noise_pos = 0

        self._defense_target: Optional[int] = None
        self._congestion = None

        self.access_counts: Counter = Counter()

    # ==================== 拓扑 ====================

    @property
    def tiles(self) -> List[TileId]:
        return list(self._tiles)

    def tile(self, tile: TileLike) -> TileId:
        return tile_of(tile, self.config)

    def hops(self, a: TileLike, b: TileLike) -> int:
        return self._hops[self._index(a)][self._index(b)]

    def cha_tile(self, addr: AddrLike) -> TileId:
        return self._tiles[self._cha(raw_addr(addr) >> self._line_bits)]

    def _index(self, tile: TileLike) -> int:
        if isinstance(tile, int) and 0 <= tile < len(self._tiles):
            return tile
        return tile_of(tile, self.config).linear

    def _cha(self, line: int) -> int:
        cha = self._cha_cache.get(line)
        if cha is None:
            cha = cha_index_of_line(line, len(self._tiles))
            self._cha_cache[line] = cha
        return cha

    # ==================== 防御与拥塞钩子 ====================

    @property
    def defense_target(self) -> Optional[int]:
        return self._defense_target

    def set_defense_target(self, target: Optional[int]):
        """所有 LLC 命中的延迟（加噪声前）被抬高到 target；None 表示关闭"""
        self._defense_target = None if target is None else int(target)

    def worst_case_llc_latency(self) -> int:
        """无防御时 LLC 命中的最坏往返延迟: CHA 与转发者都在网格直径之外"""
        cfg = self.config
        d = cfg.mesh_diameter
        return (cfg.lat_l1_hit + cfg.lat_cha_lookup + cfg.lat_llc_bank
                + cfg.lat_per_hop * 4 * d + cfg.lat_router * 4)

    def set_congestion(self, sampler):
        """
        设置每跳排队延迟采样器

        Args:
            sampler: 提供 sample_sum(hops) -> int 的对象；None 关闭拥塞
        """
        self._congestion = sampler

    # ==================== L1 旁路 ====================

    def set_l1_bypass(self, tile: TileLike, addrs: Iterable[AddrLike]):
        """指定行在该 tile 的 L1 中永不分配（加载总是走 LLC）"""
        t = self._index(tile)
        lines = {raw_addr(a) >> self._line_bits for a in addrs}
        self._bypass.setdefault(t, set()).update(lines)
        for line in lines:
            self._l1_remove(t, line)
        self._check()

    def clear_l1_bypass(self, tile: Optional[TileLike] = None):
        if tile is None:
            self._bypass.clear()
        else:
            self._bypass.pop(self._index(tile), None)

    # ==================== 访存操作 ====================

    def load(self, core: TileLike, addr: AddrLike) -> MemResult:
        """读访问: L1 -> CHA -> 转发者/DRAM"""
        t = self._index(core)
        raw = raw_addr(addr)
        line = raw >> self._line_bits
        cha = self._cha(line)
        version = self._versions.get(raw >> 2, 0)

        if line in self._l1[t]:
            self._l1_touch(t, line)
            result = self._result(self.config.lat_l1_hit, HitLevel.L1, t, cha, version, 0)
        else:
            base, level, serving, hops, owner = self._fetch(t, line, cha)
            if owner is not None:
                self._l1[owner][line] = S
            if line not in self._bypass.get(t, ()):
                others = self._sharers.get(line, ())
                if others:
                    for o in others:
                        if self._l1[o][line] is F:
                            self._l1[o][line] = S
                    self._l1_fill(t, line, F)
                else:
                    self._l1_fill(t, line, E)
            result = self._result(base, level, serving, cha, version, hops)
        self._check()
        return result

    def spin_l1(self, core: TileLike, addr: AddrLike, spin: int, clock: int, until: Optional[int],
                limit: int) -> Tuple[int, int]:
        """
        连续的 L1 命中读（轮询循环体）: 从 clock 起每次读后再加 spin 周期，直到时钟到达 until 或满 limit 次

        行不在 core 的 L1 中时不执行。效果与逐次 load 相同: 每次读抽取一份噪声，只更新 LRU 与计数。

        Returns:
            (执行次数, 结束时钟)
        """
        t = self._index(core)
        line = raw_addr(addr) >> self._line_bits
        if limit <= 0 or line not in self._l1[t]:
            return 0, clock
        hit = self.config.lat_l1_hit
        polls = 0
        while polls < limit and (until is None or clock < until):
            latency = hit + self._next_noise() if self._noise_on else hit
            clock += max(latency, hit) + spin
            polls += 1
        if polls:
            self._l1_touch(t, line)
            self.access_counts[HitLevel.L1] += polls
        return polls, clock

    def store(self, core: TileLike, addr: AddrLike) -> MemResult:
        """写访问: 取得所有权后把行置为 Modified，并递增该字的数据版本"""
        return self._acquire(core, addr, write=True)

    def prefetchw_probe(self, core: TileLike, addr: AddrLike) -> MemResult:
        """PREFETCHW: 取得所有权但不写数据，行以 Exclusive 留在 core 的 L1"""
        return self._acquire(core, addr, write=False)

    def flush_l1(self, core: TileLike, addr: AddrLike) -> None:
        """把行从 core 的 L1 移除（脏行写回），LLC 驻留不变；不存在时为空操作"""
        t = self._index(core)
        self._l1_remove(t, raw_addr(addr) >> self._line_bits)
        self._check()

    def clflush(self, core: TileLike, addr: AddrLike) -> MemResult:
        """CLFLUSH: 从所有 L1 与 LLC 中清除该行"""
        t = self._index(core)
        raw = raw_addr(addr)
        line = raw >> self._line_bits
        cha = self._cha(line)
        for o in list(self._sharers.get(line, ())):
            self._l1_remove(o, line)
        self._llc_remove(line)
        cfg = self.config
        h_rc = self._hops[t][cha]
        base = (cfg.lat_l1_hit + cfg.lat_cha_lookup + cfg.lat_per_hop * 2 * h_rc
                + cfg.lat_router * 2 * (h_rc > 0))
        level = HitLevel.LLC_LOCAL if cha == t else HitLevel.LLC_REMOTE
        # 刷新不是 LLC 命中，不受防御钩子影响
        result = self._result(base, level, cha, cha, self._versions.get(raw >> 2, 0), 0, defended=False)
        self._check()
        return result

    def _acquire(self, core: TileLike, addr: AddrLike, write: bool) -> MemResult:
        cfg = self.config
        t = self._index(core)
        raw = raw_addr(addr)
        line = raw >> self._line_bits
        cha = self._cha(line)
        state = self._l1[t].get(line)

        if state in OWNER_STATES:
            self._l1_touch(t, line)
            base, level, serving, hops = cfg.lat_l1_hit, HitLevel.L1, t, 0
            defended = True
        elif state is not None:
            # S/F -> 升级: 只需失效其他共享者
            others = self._sharers[line] - {t}
            h_rc = self._hops[t][cha]
            inv = max((self._hops[cha][o] for o in others), default=0)
            base = (cfg.lat_l1_hit + cfg.lat_cha_lookup
                    + cfg.lat_per_hop * (2 * h_rc + 2 * inv)
                    + cfg.lat_router * (2 * (h_rc > 0) + 2 * (inv > 0)))
            for o in others:
                self._l1_remove(o, line)
            self._l1_touch(t, line)
            level = HitLevel.LLC_LOCAL if cha == t else HitLevel.LLC_REMOTE
            serving, hops = cha, 2 * h_rc + 2 * inv
            defended = False
        else:
            base, level, serving, hops, owner = self._fetch(t, line, cha)
            others = set(self._sharers.get(line, ()))
            if owner is not None:
                base += cfg.lat_ownership_transfer
                others.discard(owner)
                self._l1_remove(owner, line)
            if others:
                inv = max(self._hops[cha][o] for o in others)
                base += cfg.lat_per_hop * 2 * inv + cfg.lat_router * 2 * (inv > 0)
                hops += 2 * inv
                for o in others:
                    self._l1_remove(o, line)
            self._l1_fill(t, line, E)
            defended = owner is None

        self._l1[t][line] = M if write else (state if state in OWNER_STATES else E)
        word = raw >> 2
        if write:
            self._versions[word] = self._versions.get(word, 0) + 1
        result = self._result(base, level, serving, cha, self._versions.get(word, 0), hops, defended)
        self._check()
        return result

    def _fetch(self, t: int, line: int, cha: int) -> Tuple[int, HitLevel, int, int, Optional[int]]:
        """L1 缺失路径，返回 (基础延迟, 层级, 服务 tile, 经过跳数, M/E 持有者)"""
        cfg = self.config
        h_rc = self._hops[t][cha]
        home = self._home.get(line)
        if home is None:
            bank = t if self._first_touch else line % len(self._tiles)
            self._llc_insert(line, bank)
            base = (cfg.lat_l1_hit + cfg.lat_cha_lookup + cfg.lat_per_hop * 2 * h_rc
                    + cfg.lat_router * 2 * (h_rc > 0) + cfg.lat_dram)
            return base, HitLevel.DRAM, cha, 2 * h_rc, None

        owner = None
        for o in self._sharers.get(line, ()):
            if o != t and self._l1[o][line] in OWNER_STATES:
                owner = o
                break
        fwd = owner if owner is not None else home
        h_fr = self._hops[fwd][t]
        base = (cfg.lat_l1_hit + cfg.lat_cha_lookup + cfg.lat_llc_bank
                + cfg.lat_per_hop * (2 * h_rc + 2 * h_fr)
                + cfg.lat_router * (2 * (h_rc > 0) + 2 * (h_fr > 0)))
        self._llc_touch(line, home)
        level = HitLevel.LLC_LOCAL if fwd == t else HitLevel.LLC_REMOTE
        return base, level, fwd, 2 * h_rc + 2 * h_fr, owner

    def _result(self, base: int, level: HitLevel, serving: int, cha: int, version: int,
                hops: int, defended: bool = True) -> MemResult:
        latency = base
        if self._congestion is not None and hops:
            latency += self._congestion.sample_sum(hops)
        if defended and self._defense_target is not None and level in LLC_LEVELS:
            latency = max(latency, self._defense_target)
        if self._noise_on:
            latency += self._next_noise()
        if latency < self.config.lat_l1_hit:
            latency = self.config.lat_l1_hit
        self.access_counts[level] += 1
        return MemResult(
            latency=int(latency),
            hit_level=level,
            serving_tile=self._tiles[serving],
            cha_tile=self._tiles[cha],
            data_version=version,
        )

    def _next_noise(self) -> int:
        if self._noise_pos >= len(self._noise_buf):
            block = self._rng.normal(0.0, self.config.noise_stddev, _NOISE_BLOCK)
            self._noise_buf = np.rint(block).astype(np.int64).tolist()
            self._noise_pos = 0
        value = self._noise_buf[self._noise_pos]
        self._noise_pos += 1
        return value

    # ==================== L1 / LLC 内部维护 ====================

    def _l1_key(self, t: int, line: int) -> int:
        return t * self.config.l1_sets + line % self.config.l1_sets

    def _l1_touch(self, t: int, line: int):
        self._l1_sets[self._l1_key(t, line)].move_to_end(line)

    def _l1_fill(self, t: int, line: int, state: Coherence):
        key = self._l1_key(t, line)
        lru = self._l1_sets.get(key)
        if lru is None:
            lru = self._l1_sets[key] = OrderedDict()
        if line in lru:
            lru.move_to_end(line)
        else:
            if len(lru) >= self.config.l1_ways:
                victim, _ = lru.popitem(last=False)
                self._l1_drop(t, victim)
            lru[line] = None
        self._l1[t][line] = state
        self._sharers.setdefault(line, set()).add(t)

    def _l1_drop(self, t: int, line: int) -> Optional[Coherence]:
        state = self._l1[t].pop(line, None)
        holders = self._sharers.get(line)
        if holders is not None:
            holders.discard(t)
            if not holders:
                del self._sharers[line]
        return state

    def _l1_remove(self, t: int, line: int) -> Optional[Coherence]:
        if line not in self._l1[t]:
            return None
        self._l1_sets[self._l1_key(t, line)].pop(line, None)
        return self._l1_drop(t, line)

    def _llc_key(self, bank: int, line: int) -> int:
        return bank * self.config.llc_sets_per_bank + llc_set_of_line(line, self.config)

    def _llc_insert(self, line: int, bank: int):
        key = self._llc_key(bank, line)
        lru = self._llc_sets.get(key)
        if lru is None:
            lru = self._llc_sets[key] = OrderedDict()
        if len(lru) >= self.config.llc_ways:
            victim, _ = lru.popitem(last=False)
            # 包含式 LLC: 驱逐时回收所有 L1 副本
            for o in list(self._sharers.get(victim, ())):
                self._l1_remove(o, victim)
            del self._home[victim]
        lru[line] = None
        self._home[line] = bank

    def _llc_touch(self, line: int, bank: int):
        self._llc_sets[self._llc_key(bank, line)].move_to_end(line)

    def _llc_remove(self, line: int):
        bank = self._home.pop(line, None)
        if bank is not None:
            self._llc_sets[self._llc_key(bank, line)].pop(line, None)

    # ==================== 检查与查询 ====================

    def line_state(self, tile: TileLike, addr: AddrLike) -> Optional[CacheLineState]:
        t = self._index(tile)
        line = raw_addr(addr) >> self._line_bits
        state = self._l1[t].get(line)
        if state is None:
            return None
        lru = list(self._l1_sets[self._l1_key(t, line)])
        owner = next(
            (self._tiles[o] for o in self._sharers.get(line, ()) if self._l1[o][line] in OWNER_STATES),
            None,
        )
        return CacheLineState(
            tag=line << self._line_bits,
            coherence=state,
            owner_tile=owner,
            lru_rank=len(lru) - 1 - lru.index(line),
        )

    def sharers(self, addr: AddrLike) -> FrozenSet[TileId]:
        line = raw_addr(addr) >> self._line_bits
        return frozenset(self._tiles[t] for t in self._sharers.get(line, ()))

    def llc_home(self, addr: AddrLike) -> Optional[TileId]:
        bank = self._home.get(raw_addr(addr) >> self._line_bits)
        return None if bank is None else self._tiles[bank]

    def is_l1_resident(self, tile: TileLike, addr: AddrLike) -> bool:
        return (raw_addr(addr) >> self._line_bits) in self._l1[self._index(tile)]

    def is_llc_resident(self, addr: AddrLike) -> bool:
        return (raw_addr(addr) >> self._line_bits) in self._home

    def data_version(self, addr: AddrLike) -> int:
        return self._versions.get(raw_addr(addr) >> 2, 0)

    def _check(self):
        if self.debug_checks:
            self.check_invariants()

    def check_invariants(self):
        """目录守恒、单一所有者、包含性与组容量检查"""
        holders: Dict[int, Set[int]] = {}
        for t, lines in enumerate(self._l1):
            for line in lines:
                holders.setdefault(line, set()).add(t)
        if holders != self._sharers:
            raise InvariantViolation('目录共享者列表与 L1 实际持有不一致')
        for line, tiles in holders.items():
            owners = [t for t in tiles if self._l1[t][line] in OWNER_STATES]
            if len(owners) > 1 or (owners and len(tiles) > 1):
                raise InvariantViolation(f'行 {line:#x} 同时存在多个 M/E 或 M/E 与共享副本', line=line)
            if line not in self._home:
                raise InvariantViolation(f'行 {line:#x} 在 L1 中但不在 LLC 中', line=line)
        for lru in self._l1_sets.values():
            if len(lru) > self.config.l1_ways:
                raise InvariantViolation('L1 组超出相联度')
        for lru in self._llc_sets.values():
            if len(lru) > self.config.llc_ways:
                raise InvariantViolation('LLC 组超出相联度')
