"""
机器配置
职责: 描述网格几何、缓存几何与延迟常量，并负责从 JSON 加载与校验
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Union

from core.exceptions import ConfigurationError


class LlcPlacement:
    """LLC 行放置策略"""
    FIRST_TOUCH = 'first_touch'
    STATIC = 'static'

    CHOICES = (FIRST_TOUCH, STATIC)


def _is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


@dataclass(frozen=True)
class MachineConfig:
    """
    模拟机器配置

    默认值为 8x8 网格、64B 缓存行、32KiB 8 路 L1D、每 bank 2MiB 8 路 LLC，
    延迟常量使邻居 CHA 的 LLC 命中约 40 周期、对角 CHA 约 110 周期。
    """

    mesh_width: int = 8
    mesh_height: int = 8
    line_size: int = 64
    l1_sets: int = 64
    l1_ways: int = 8
    llc_sets_per_bank: int = 4096
    llc_ways: int = 8
    lat_l1_hit: int = 4
    lat_llc_bank: int = 14
    lat_cha_lookup: int = 6
    lat_per_hop: int = 3
    lat_router: int = 1
    lat_dram: int = 200
    lat_poll_iter: int = 6
    lat_ownership_transfer: int = 120
    clock_hz: float = 1.5e9
    rng_seed: int = 0
    noise_stddev: float = 3.0
    llc_placement: str = LlcPlacement.FIRST_TOUCH
    debug_checks: bool = False

    _LATENCY_FIELDS = (
        'lat_l1_hit', 'lat_llc_bank', 'lat_cha_lookup', 'lat_per_hop',
        'lat_router', 'lat_dram', 'lat_poll_iter', 'lat_ownership_transfer',
    )

    def __post_init__(self):
        for name in ('mesh_width', 'mesh_height'):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 2:
                raise ConfigurationError(name, '网格边长必须是 >=2 的整数')
        for name in ('line_size', 'l1_sets', 'llc_sets_per_bank'):
            if not isinstance(getattr(self, name), int) or not _is_power_of_two(getattr(self, name)):
                raise ConfigurationError(name, '必须是 2 的幂')
        for name in ('l1_ways', 'llc_ways'):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigurationError(name, '相联度必须 >=1')
        for name in self._LATENCY_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigurationError(name, '延迟常量必须是正整数周期')
        if not self.lat_dram > self.lat_llc_bank > self.lat_l1_hit:
            raise ConfigurationError('lat_dram', '要求 lat_dram > lat_llc_bank > lat_l1_hit')
        if self.clock_hz <= 0:
            raise ConfigurationError('clock_hz', '时钟频率必须为正')
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigurationError('rng_seed', '种子必须是 64 位无符号整数')
        if self.noise_stddev < 0:
            raise ConfigurationError('noise_stddev', '噪声标准差必须 >=0')
        if self.llc_placement not in LlcPlacement.CHOICES:
            raise ConfigurationError('llc_placement', f'可选值: {", ".join(LlcPlacement.CHOICES)}')

    @property
    def tiles(self) -> int:
        return self.mesh_width * self.mesh_height

    @property
    def line_bits(self) -> int:
        return self.line_size.bit_length() - 1

    @property
    def l1_capacity(self) -> int:
        return self.l1_sets * self.l1_ways * self.line_size

    @property
    def mesh_diameter(self) -> int:
        return (self.mesh_width - 1) + (self.mesh_height - 1)

    def replace(self, **overrides: Any) -> 'MachineConfig':
        """返回覆盖部分字段后的新配置（未知字段报错）"""
        self._reject_unknown(overrides)
        return dataclasses.replace(self, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def _reject_unknown(cls, data: Dict[str, Any]):
        known = set(cls.field_names())
        for key in data:
            if key not in known:
                raise ConfigurationError(key, '未知配置字段')

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MachineConfig':
        cls._reject_unknown(data)
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigurationError('machine', str(e))

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> 'MachineConfig':
        """从 JSON 文件加载；文件可以是扁平字段表，也可以包含 machine 子对象"""
        try:
            data = json.loads(Path(path).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError('config', f'无法读取 {path}: {e}')
        if isinstance(data, dict) and isinstance(data.get('machine'), dict):
            data = data['machine']
        if not isinstance(data, dict):
            raise ConfigurationError('machine', '配置必须是 JSON 对象')
        return cls.from_dict(data)
