"""
物理地址与 tile 坐标
职责: 地址分解（行偏移/行地址/行号）、bank 与 CHA 映射、曼哈顿跳数

所有函数都是纯函数: 相同 raw 地址得到相同的 bank/set/CHA。
"""

from dataclasses import dataclass
from typing import Union

from core.exceptions import ConfigurationError

from .config import LlcPlacement, MachineConfig

# 64 位黄金分割乘法哈希常数
CHA_HASH_MULTIPLIER = 0x9E3779B97F4A7C15
CHA_HASH_SHIFT = 40
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PhysAddr:
    """64 位物理地址（虚拟地址与物理地址恒等映射）"""

    raw: int

    def __post_init__(self):
        if not isinstance(self.raw, int) or not 0 <= self.raw <= _MASK64:
            raise ConfigurationError('addr', f'地址必须是 64 位无符号整数: {self.raw!r}')

    def line_offset(self, line_size: int) -> int:
        return self.raw % line_size

    def line_addr(self, line_size: int) -> int:
        return self.raw - self.raw % line_size

    def line_number(self, line_size: int) -> int:
        return self.raw // line_size

    def __int__(self) -> int:
        return self.raw

    def __index__(self) -> int:
        return self.raw

    def __str__(self) -> str:
        return f'{self.raw:#x}'


AddrLike = Union[PhysAddr, int]


def raw_addr(addr: AddrLike) -> int:
    return addr.raw if isinstance(addr, PhysAddr) else int(addr)


@dataclass(frozen=True)
class TileId:
    """网格 tile 坐标，linear = y * mesh_width + x"""

    x: int
    y: int
    linear: int

    @classmethod
    def from_linear(cls, linear: int, mesh_width: int) -> 'TileId':
        return cls(x=linear % mesh_width, y=linear // mesh_width, linear=linear)

    @classmethod
    def from_xy(cls, x: int, y: int, mesh_width: int) -> 'TileId':
        return cls(x=x, y=y, linear=y * mesh_width + x)

    def __str__(self) -> str:
        return f'({self.x},{self.y})#{self.linear}'


TileLike = Union[TileId, int]


def tile_of(tile: TileLike, cfg: MachineConfig) -> TileId:
    """把 linear 下标或 TileId 统一为校验过的 TileId"""
    if isinstance(tile, TileId):
        linear = tile.linear
        if tile.linear != tile.y * cfg.mesh_width + tile.x:
            raise ConfigurationError('tile', f'tile 坐标与 linear 不一致: {tile}')
    else:
        linear = int(tile)
    if not 0 <= linear < cfg.tiles:
        raise ConfigurationError('tile', f'tile {linear} 不在 {cfg.mesh_width}x{cfg.mesh_height} 网格内')
    return TileId.from_linear(linear, cfg.mesh_width)


def cha_index_of_line(line: int, tiles: int) -> int:
    """行号 -> CHA 的 linear 下标"""
    return (((line * CHA_HASH_MULTIPLIER) & _MASK64) >> CHA_HASH_SHIFT) % tiles


def cha_of(addr: AddrLike, cfg: MachineConfig) -> TileId:
    line = raw_addr(addr) >> cfg.line_bits
    return TileId.from_linear(cha_index_of_line(line, cfg.tiles), cfg.mesh_width)


def bank_of(addr: AddrLike, cfg: MachineConfig) -> TileId:
    """静态 bank 选择: 行号对 tile 数取模（64 tile、64B 行即 bit[11:6]）"""
    line = raw_addr(addr) >> cfg.line_bits
    return TileId.from_linear(line % cfg.tiles, cfg.mesh_width)


def l1_set_index(addr: AddrLike, cfg: MachineConfig) -> int:
    return (raw_addr(addr) >> cfg.line_bits) % cfg.l1_sets


def llc_set_of_line(line: int, cfg: MachineConfig) -> int:
    """
    行号 -> LLC 组索引

    first_touch 下行可以落在任意 bank，取行号低位使连续行分散到不同组；
    static 下 bank 已由行号低位选定，取 bank 选择位之上的位
    """
    if cfg.llc_placement == LlcPlacement.FIRST_TOUCH:
        return line % cfg.llc_sets_per_bank
    return (line // cfg.tiles) % cfg.llc_sets_per_bank


def llc_set_index(addr: AddrLike, cfg: MachineConfig) -> int:
    return llc_set_of_line(raw_addr(addr) >> cfg.line_bits, cfg)


def hop_distance(a: TileId, b: TileId) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)
