"""
攻击辅助代理
职责: L1 预热（与受害者同 tile）、LLC 驻留保持（远端 tile）、
     受害者 L1 驱逐（PREFETCHW 拉走所有权后干净写回）
"""

import logging
from collections import Counter
from typing import TYPE_CHECKING, Generator, Iterable, List

from core.exceptions import ConfigurationError
from core.machine import SimMachine

from .ops import ClFlush, FlushL1, Load, PrefetchW
from .scheduler import Agent, run_scenario

if TYPE_CHECKING:
    from core.victims.aes_tables import AesTables

logger = logging.getLogger(__name__)

# 受害者除 Td0..Td3 之外常驻 L1 的工作集（out 缓冲区与栈）
WORKING_SET_LINES = 2


def prime_program(tables: 'AesTables') -> Generator:
    for addr in tables.td_lines():
        yield Load(addr)
    for addr in tables.td4_lines():
        yield FlushL1(addr)


def prime_l1_tables(machine: SimMachine, primer: Agent, tables: 'AesTables'):
    """
    把 Td0..Td3 的 64 条缓存行装入受害者 tile 的 L1，并确保 Td4 不在其中

    Raises:
        ConfigurationError: L1 容量或组相联度放不下 Td0..Td3 与工作集
    """
    cfg = machine.config
    needed = 4 * 1024 + WORKING_SET_LINES * cfg.line_size
    if cfg.l1_capacity < needed:
        raise ConfigurationError(
            'l1_sets', f'L1 容量 {cfg.l1_capacity}B 小于 Td0..Td3 与工作集所需的 {needed}B',
        )
    per_set = Counter((addr // cfg.line_size) % cfg.l1_sets for addr in tables.td_lines())
    if max(per_set.values()) > cfg.l1_ways:
        raise ConfigurationError('l1_ways', 'Td0..Td3 在 L1 的同一组中冲突超过相联度')

    run_scenario(machine, [primer.start(prime_program(tables))], record_trace=False)
    logger.debug(f'L1 预热完成: tile {primer.tile}, {len(tables.td_lines())} 行')


def hold_llc(machine: SimMachine, holder: Agent, lines: Iterable[int]) -> int:
    """
    让每条行驻留在 holder 所在 tile 的 LLC bank 中（该 tile 成为转发者）

    驻留在其他 bank 的行先 CLFLUSH 再由 holder 首次触碰；随后清掉 holder 自己的 L1 副本。

    Returns:
        重新放置的行数
    """
    lines = list(lines)
    if not lines:
        return 0
    tile = machine.tile(holder.tile)
    misplaced = [a for a in lines if machine.llc_home(a) not in (None, tile)]

    def program():
        for addr in lines:
            if addr in misplaced:
                yield ClFlush(addr)
            yield Load(addr)
            yield FlushL1(addr)

    run_scenario(machine, [holder.start(program())], record_trace=False)
    if misplaced:
        logger.debug(f'{len(misplaced)} 行从其他 LLC bank 迁移到 holder tile {tile}')
    return len(misplaced)


def evict_victim_l1(machine: SimMachine, attacker: Agent, lines: Iterable[int]) -> List[int]:
    """
    把行从受害者 L1 中驱逐，同时保留 LLC 驻留

    未驻留 LLC 的行不触碰（之后受害者访问仍会 DRAM 填充）并记录警告。

    Returns:
        实际驱逐的行
    """
    held = []
    for addr in lines:
        if machine.is_llc_resident(addr):
            held.append(addr)
        else:
            logger.warning(f'行 {addr:#x} 未驻留 LLC，跳过驱逐')

    def program():
        for addr in held:
            yield PrefetchW(addr)
            yield FlushL1(addr)

    if held:
        run_scenario(machine, [attacker.start(program())], record_trace=False)
    return held


def pin_l1_misses(machine: SimMachine, victim_tile, lines: Iterable[int]):
    """让受害者 tile 对这些行的读永远 L1 缺失（模拟攻击者持续把它们挤出 L1）"""
    machine.set_l1_bypass(victim_tile, lines)
