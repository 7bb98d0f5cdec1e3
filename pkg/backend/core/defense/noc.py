"""
片上网络饱和模型
职责: 2D mesh、X-Y 路由、每个输出端口 FIFO 串行化、均匀随机流量与逐节点 Bernoulli 注入；
     测量预热后的平均包延迟，扫描注入率直到饱和，并为机器模型提供每跳排队延迟采样

链路模型: 每个包占用链路 packet_flits 个周期；经过一个路由器的零负载延迟为 lat_per_hop + lat_router，
注入与弹出端口只串行化、不增加延迟，因此零负载延迟 = 跳数 × (lat_per_hop + lat_router)。
"""

import heapq
import logging
from dataclasses import asdict, dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# 路由器端口
EAST, WEST, NORTH, SOUTH, EJECT, INJECT = range(6)
_PORTS = 6

SATURATION_GROWTH = 1.5
SATURATION_ZERO_LOAD_FACTOR = 10.0


@dataclass(frozen=True)
class NocTrafficConfig:
    mesh_width: int = 8
    mesh_height: int = 8
    injection_rate: float = 0.05
    sim_cycles: int = 20000
    warmup_cycles: int = 2000
    packet_flits: int = 5
    lat_per_hop: int = 3
    lat_router: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mesh_width < 1 or self.mesh_height < 1 or self.mesh_width * self.mesh_height < 2:
            raise ConfigurationError('mesh_width', '网格至少需要 2 个节点')
        if not 0.0 < self.injection_rate < 1.0:
            raise ConfigurationError('injection_rate', '注入率必须在 (0, 1) 之间')
        if not 0 <= self.warmup_cycles < self.sim_cycles:
            raise ConfigurationError('warmup_cycles', '预热周期必须小于仿真周期')
        if self.packet_flits < 1:
            raise ConfigurationError('packet_flits', '每包至少 1 个 flit')

    @property
    def nodes(self) -> int:
        return self.mesh_width * self.mesh_height

    @property
    def hop_latency(self) -> int:
        return self.lat_per_hop + self.lat_router

    def replace(self, **overrides) -> 'NocTrafficConfig':
        return replace(self, **overrides)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_machine(cls, machine_config, **overrides) -> 'NocTrafficConfig':
        """网格尺寸与每跳延迟取自机器配置"""
        base = dict(
            mesh_width=machine_config.mesh_width, mesh_height=machine_config.mesh_height,
            lat_per_hop=machine_config.lat_per_hop, lat_router=machine_config.lat_router,
            seed=machine_config.rng_seed,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class NocResult:
    rate: float
    mean_latency: float
    zero_load_latency: float
    packets: int
    completed: int
    first_half_latency: float
    second_half_latency: float
    saturated: bool
    mean_hop_delay: float

    def to_dict(self) -> Dict:
        return {k: (round(v, 6) if isinstance(v, float) else v) for k, v in asdict(self).items()}


@dataclass
class TrafficDraws:
    """
    公共随机数: 每个 (节点, 周期) 一个注入均匀数与一个目的偏移

    不同注入率复用同一组抽样，低注入率的包集合是高注入率包集合的子集。
    """

    uniform: np.ndarray
    dest_offset: np.ndarray

    @classmethod
    def generate(cls, cfg: NocTrafficConfig) -> 'TrafficDraws':
        rng = np.random.default_rng(cfg.seed)
        shape = (cfg.sim_cycles, cfg.nodes)
        return cls(
            uniform=rng.random(shape),
            dest_offset=rng.integers(1, cfg.nodes, shape),
        )


class NocSimulator:
    """
    事件驱动的 mesh 包级仿真

    Args:
        cfg: 流量与网络配置
    """

    def __init__(self, cfg: NocTrafficConfig):
        self.cfg = cfg
        n = cfg.nodes
        self._routes: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        hops = []
        for src in range(n):
            for dst in range(n):
                if src != dst:
                    route = self._xy_route(src, dst)
                    self._routes[(src, dst)] = route
                    hops.append(len(route) - 2)
        self.mean_hops = float(np.mean(hops))

    def _xy_route(self, src: int, dst: int) -> Tuple[int, ...]:
        """链路编号序列: 注入端口, 途经各路由器的输出端口, 目的节点弹出端口"""
        w = self.cfg.mesh_width
        x, y = src % w, src // w
        dx, dy = dst % w, dst // w
        links = [src * _PORTS + INJECT]
        while x != dx:
            port = EAST if dx > x else WEST
            links.append((y * w + x) * _PORTS + port)
            x += 1 if dx > x else -1
        while y != dy:
            port = SOUTH if dy > y else NORTH
            links.append((y * w + x) * _PORTS + port)
            y += 1 if dy > y else -1
        links.append(dst * _PORTS + EJECT)
        return tuple(links)

    def hop_count(self, src: int, dst: int) -> int:
        return len(self._routes[(src, dst)]) - 2

    @property
    def zero_load_latency(self) -> float:
        return self.mean_hops * self.cfg.hop_latency

    def run(self, rate: Optional[float] = None, draws: Optional[TrafficDraws] = None,
            collect_hop_delays: bool = False) -> Tuple[NocResult, np.ndarray]:
        """
        运行一个注入率

        Returns:
            (NocResult, 预热后每个路由器跳的排队延迟样本；collect_hop_delays=False 时为空数组)
        """
        cfg = self.cfg if rate is None else self.cfg.replace(injection_rate=rate)
        draws = draws or TrafficDraws.generate(cfg)
        flits, hop_lat = cfg.packet_flits, cfg.hop_latency
        end, warmup = cfg.sim_cycles, cfg.warmup_cycles

        cycles, srcs = np.nonzero(draws.uniform < cfg.injection_rate)
        dsts = (srcs + draws.dest_offset[cycles, srcs]) % cfg.nodes
        inject = cycles.tolist()
        routes = [self._routes[(s, d)] for s, d in zip(srcs.tolist(), dsts.tolist())]
        done = [-1] * len(routes)

        busy = [0] * (cfg.nodes * _PORTS)
        heap = [(t, pid, pid, 0) for pid, t in enumerate(inject)]
        heapq.heapify(heap)
        seq = len(routes)
        waits: List[int] = []

        while heap:
            t, _, pid, k = heapq.heappop(heap)
            if t >= end:
                break
            route = routes[pid]
            link = route[k]
            depart = busy[link] if busy[link] > t else t
            busy[link] = depart + flits
            last = len(route) - 1
            if k == last:
                done[pid] = depart
                continue
            if collect_hop_delays and 0 < k and inject[pid] >= warmup:
                waits.append(depart - t)
            nt = depart if k == 0 else depart + hop_lat
            heapq.heappush(heap, (nt, seq, pid, k + 1))
            seq += 1

        inj = np.asarray(inject, dtype=np.int64)
        fin = np.asarray(done, dtype=np.int64)
        measured = inj >= warmup
        # 仿真结束时仍在途的包按 (end - 注入时刻) 计入，作为延迟下界
        latency = np.where(fin >= 0, fin - inj, end - inj)[measured]
        mid = (warmup + end) / 2.0
        first = latency[inj[measured] < mid]
        second = latency[inj[measured] >= mid]
        mean = float(latency.mean()) if latency.size else 0.0
        first_mean = float(first.mean()) if first.size else 0.0
        second_mean = float(second.mean()) if second.size else 0.0
        zero = self.zero_load_latency
        saturated = bool(
            mean > SATURATION_ZERO_LOAD_FACTOR * zero
            or (first_mean > 0 and second_mean > SATURATION_GROWTH * first_mean)
        )
        hop_delays = np.asarray(waits, dtype=np.int64)
        result = NocResult(
            rate=float(cfg.injection_rate),
            mean_latency=mean,
            zero_load_latency=zero,
            packets=int(measured.sum()),
            completed=int(((fin >= 0) & measured).sum()),
            first_half_latency=first_mean,
            second_half_latency=second_mean,
            saturated=saturated,
            mean_hop_delay=float(hop_delays.mean()) if hop_delays.size else 0.0,
        )
        logger.debug(
            f'NoC 注入率 {result.rate:.3f}: 平均延迟 {mean:.1f} 周期, '
            f'{result.completed}/{result.packets} 完成, 饱和={saturated}'
        )
        return result, hop_delays


def parse_rates(text: str) -> List[float]:
    """解析 'start:stop:step'（含 stop）或逗号分隔列表"""
    try:
        if ':' in text:
            start, stop, step = (float(p) for p in text.split(':'))
            if step <= 0:
                raise ValueError('step 必须为正')
            count = int(round((stop - start) / step)) + 1
            return [round(start + k * step, 10) for k in range(count)]
        return [float(p) for p in text.split(',') if p.strip()]
    except ValueError as e:
        raise ConfigurationError('rates', f'无法解析注入率 {text!r}: {e}')


def noc_saturation_sweep(cfg: NocTrafficConfig, rates: Sequence[float]) -> pd.DataFrame:
    """
    注入率扫描，所有注入率共用同一组随机抽样

    Raises:
        ConfigurationError: 注入率未严格递增或不在 (0, 1)
    """
    rates = [float(r) for r in rates]
    if not rates:
        raise ConfigurationError('rates', '注入率列表为空')
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ConfigurationError('rates', '注入率必须严格递增')
    if not all(0.0 < r < 1.0 for r in rates):
        raise ConfigurationError('rates', '注入率必须在 (0, 1) 之间')

    sim = NocSimulator(cfg)
    draws = TrafficDraws.generate(cfg)
    rows = []
    for rate in rates:
        result, _ = sim.run(rate, draws)
        rows.append({
            'rate': rate,
            'mean_latency': round(result.mean_latency, 4),
            'saturated': result.saturated,
            'zero_load_latency': round(result.zero_load_latency, 4),
            'packets': result.packets,
            'completed': result.completed,
        })
    frame = pd.DataFrame(rows)
    knee = frame[frame['saturated']]['rate']
    logger.info(
        f'NoC 扫描完成: {len(rates)} 个注入率, '
        f'饱和点 {knee.iloc[0] if len(knee) else "未饱和"}'
    )
    return frame


class HopDelaySampler:
    """
    从 NoC 稳态每跳排队延迟分布中抽样，供机器模型的拥塞钩子使用

    Args:
        delays: 每跳排队延迟样本
        seed: 抽样种子
    """

    BLOCK = 8192

    def __init__(self, delays: Iterable[int], seed: int = 0):
        arr = np.asarray(list(delays), dtype=np.int64)
        self._delays = arr if arr.size else np.zeros(1, dtype=np.int64)
        self._rng = np.random.default_rng(seed)
        self._buf: List[int] = []
        self._pos = 0

    @property
    def mean(self) -> float:
        return float(self._delays.mean())

    @classmethod
    def from_noc(cls, cfg: NocTrafficConfig, rate: float, seed: int = 0) -> 'HopDelaySampler':
        _, delays = NocSimulator(cfg).run(rate, collect_hop_delays=True)
        return cls(delays, seed=seed)

    def sample_sum(self, hops: int) -> int:
        if self._pos + hops > len(self._buf):
            size = max(self.BLOCK, hops)
            self._buf = self._delays[self._rng.integers(0, self._delays.size, size)].tolist()
            self._pos = 0
        total = sum(self._buf[self._pos:self._pos + hops])
        self._pos += hops
        return total
