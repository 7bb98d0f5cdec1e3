"""
玩具受害者: 按秘密位访问近/远地址
职责: 秘密位为 1 时读近 CHA 地址，为 0 时读远 CHA 地址；
     另提供扫描式预热（遍历大数组把目标挤出 L1 但保留在 LLC）
"""

import logging
from dataclasses import dataclass
from typing import Generator, List

from core.agents.ops import Load
from core.agents.scheduler import Agent, run_scenario
from core.exceptions import ConfigurationError, InvariantViolation
from core.machine import MemResult, SimMachine, TileId

logger = logging.getLogger(__name__)

DEFAULT_MIN_GAP_HOPS = 8


@dataclass(frozen=True)
class ToyVictim:
    """
    Args:
        secret: 8 位秘密
        addr_near: CHA 靠近受害者 tile 的地址
        addr_far: CHA 远离受害者 tile 的地址
        bit_mask: 当前要泄露的位掩码
    """

    secret: int
    addr_near: int
    addr_far: int
    bit_mask: int = 1

    @classmethod
    def create(cls, machine: SimMachine, tile, secret: int, addr_near: int, addr_far: int,
               bit_mask: int = 1, min_gap_hops: int = DEFAULT_MIN_GAP_HOPS) -> 'ToyVictim':
        """校验近/远地址的 CHA 不同且跳数差不小于 min_gap_hops"""
        if not 0 <= secret <= 0xFF:
            raise ConfigurationError('secret', '秘密必须是 8 位值')
        cha_near = machine.cha_tile(addr_near)
        cha_far = machine.cha_tile(addr_far)
        if cha_near == cha_far:
            raise ConfigurationError('addr_far', '近/远地址映射到同一个 CHA')
        gap = machine.hops(tile, cha_far) - machine.hops(tile, cha_near)
        if gap < min_gap_hops:
            raise ConfigurationError(
                'addr_far', f'近/远 CHA 跳数差 {gap} 小于要求的 {min_gap_hops}', gap=gap,
            )
        return cls(secret=secret, addr_near=addr_near, addr_far=addr_far, bit_mask=bit_mask)

    def target(self, mask: int) -> int:
        return self.addr_near if self.secret & mask else self.addr_far


def toy_victim_program(victim: ToyVictim, mask: int) -> Generator:
    result = yield Load(victim.target(mask))
    return result


def toy_victim_run(machine: SimMachine, tile, victim: ToyVictim, mask: int) -> MemResult:
    """受害者在 tile 上执行一次秘密相关的读访问"""
    tile = machine.tile(tile)
    target = victim.target(mask)
    if machine.debug_checks and machine.is_l1_resident(tile, target):
        raise InvariantViolation('玩具受害者的目标行仍在受害者 L1 中', addr=hex(target))
    agent = Agent('toy-victim', tile).start(toy_victim_program(victim, mask))
    run_scenario(machine, [agent], record_trace=False)
    return agent.result


def sweep_prime(machine: SimMachine, tile, base: int, n_lines: int) -> List[MemResult]:
    """遍历 n_lines 条连续缓存行，用于把目标行挤出受害者 L1"""
    tile: TileId = machine.tile(tile)
    line = machine.config.line_size
    return [machine.load(tile, base + k * line) for k in range(n_lines)]
