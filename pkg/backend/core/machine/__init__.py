"""网格 NUCA 机器模型"""

from .address import (
    PhysAddr, TileId, bank_of, cha_of, hop_distance, l1_set_index, llc_set_index, raw_addr, tile_of,
)
from .config import LlcPlacement, MachineConfig
from .machine import SimMachine
from .state import CacheLineState, Coherence, HitLevel, LLC_LEVELS, MemResult

__all__ = [
    'PhysAddr', 'TileId', 'bank_of', 'cha_of', 'hop_distance', 'l1_set_index', 'llc_set_index',
    'raw_addr', 'tile_of', 'LlcPlacement', 'MachineConfig', 'SimMachine', 'CacheLineState',
    'Coherence', 'HitLevel', 'LLC_LEVELS', 'MemResult',
]
