"""
T 表形式的 AES-128
职责: 密钥扩展、功能加解密，以及把每次查表/写 out 都作为模拟访存发出的解密程序

解密使用等价逆密码（OpenSSL AES_decrypt 的完全展开形式）。
最后一轮每个输出字: 4 次 Td4 读（重叠发出）-> 合并 -> ALU -> 写 out+4k。
"""

import logging
from dataclasses import dataclass, field
from typing import Generator, List, Optional, Sequence, Tuple

from core.agents.ops import Compute, Join, Load, Store, WaitFor
from core.agents.scheduler import Agent, run_scenario
from core.exceptions import ConfigurationError

from .aes_tables import SBOX, TD0, TD1, TD2, TD3, TD4, TE0, TE1, TE2, TE3, AesTables

logger = logging.getLogger(__name__)

ROUNDS = 10
RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)

# 最后一轮每个输出字的固定 ALU 周期与 4 次 Td4 读的合并周期
DEFAULT_ALU_CYCLES = 6
DEFAULT_COMBINE_CYCLES = 8


def _get_u32(data: bytes, offset: int) -> int:
    return int.from_bytes(data[offset:offset + 4], 'big')


def _words_to_bytes(words: Sequence[int]) -> bytes:
    return b''.join(w.to_bytes(4, 'big') for w in words)


def _sub_word(w: int) -> int:
    return (
        (SBOX[w >> 24] << 24) | (SBOX[(w >> 16) & 0xFF] << 16)
        | (SBOX[(w >> 8) & 0xFF] << 8) | SBOX[w & 0xFF]
    )


def _inv_mix_column(w: int) -> int:
    return (
        TD0[SBOX[w >> 24]] ^ TD1[SBOX[(w >> 16) & 0xFF]]
        ^ TD2[SBOX[(w >> 8) & 0xFF]] ^ TD3[SBOX[w & 0xFF]]
    )


@dataclass(frozen=True)
class AesKeySchedule:
    """
    AES-128 密钥编排

    round_keys 是 FIPS-197 的 44 个加密轮密钥字；dec_round_keys 按轮倒序，
    中间 9 轮施加 InvMixColumns。解密最后一轮使用 dec_round_keys[40..43]，
    即 round_keys[0..3]（原始密钥）。
    """

    key: bytes
    round_keys: Tuple[int, ...]
    dec_round_keys: Tuple[int, ...]

    @classmethod
    def expand(cls, key: bytes) -> 'AesKeySchedule':
        if isinstance(key, str):
            key = bytes.fromhex(key)
        if len(key) != 16:
            raise ConfigurationError('key', 'AES-128 密钥必须是 16 字节')
        w = [_get_u32(key, 4 * i) for i in range(4)]
        for i in range(4, 4 * (ROUNDS + 1)):
            temp = w[i - 1]
            if i % 4 == 0:
                temp = _sub_word(((temp << 8) | (temp >> 24)) & 0xFFFFFFFF) ^ (RCON[i // 4 - 1] << 24)
            w.append(w[i - 4] ^ temp)

        dk: List[int] = []
        for r in range(ROUNDS + 1):
            dk.extend(w[4 * (ROUNDS - r):4 * (ROUNDS - r) + 4])
        for i in range(4, 4 * ROUNDS):
            dk[i] = _inv_mix_column(dk[i])
        return cls(key=bytes(key), round_keys=tuple(w), dec_round_keys=tuple(dk))

    def final_round_key_word(self, word: int) -> bytes:
        """解密最后一次轮密钥加所用的第 word 个字（4 字节）"""
        return self.dec_round_keys[4 * ROUNDS + word].to_bytes(4, 'big')


@dataclass(frozen=True)
class DecryptIo:
    """
    解密输入输出

    Args:
        data_in: 16 字节输入（密文）
        out_addr: out 缓冲区的模拟地址，按缓存行对齐
        key_schedule: 受害者密钥编排
    """

    data_in: bytes
    out_addr: int
    key_schedule: AesKeySchedule
    line_size: int = field(default=64)

    def __post_init__(self):
        if len(self.data_in) != 16:
            raise ConfigurationError('data_in', 'AES 分组必须是 16 字节')
        if self.out_addr % self.line_size:
            raise ConfigurationError('out_addr', 'out 缓冲区必须按缓存行对齐')


# ==================== 功能实现 ====================

def encrypt_block(schedule: AesKeySchedule, plaintext: bytes) -> bytes:
    rk = schedule.round_keys
    s = [_get_u32(plaintext, 4 * i) ^ rk[i] for i in range(4)]
    for r in range(1, ROUNDS):
        s = [
            TE0[s[i] >> 24] ^ TE1[(s[(i + 1) % 4] >> 16) & 0xFF]
            ^ TE2[(s[(i + 2) % 4] >> 8) & 0xFF] ^ TE3[s[(i + 3) % 4] & 0xFF] ^ rk[4 * r + i]
            for i in range(4)
        ]
    out = [
        (SBOX[s[i] >> 24] << 24) ^ (SBOX[(s[(i + 1) % 4] >> 16) & 0xFF] << 16)
        ^ (SBOX[(s[(i + 2) % 4] >> 8) & 0xFF] << 8) ^ SBOX[s[(i + 3) % 4] & 0xFF] ^ rk[4 * ROUNDS + i]
        for i in range(4)
    ]
    return _words_to_bytes(out)


def _inverse_rounds(schedule: AesKeySchedule, ciphertext: bytes) -> List[int]:
    """执行初始轮密钥加与 9 个完整逆轮，返回最后一轮之前的 t0..t3"""
    dk = schedule.dec_round_keys
    s = [_get_u32(ciphertext, 4 * i) ^ dk[i] for i in range(4)]
    for r in range(1, ROUNDS):
        s = [
            TD0[s[i] >> 24] ^ TD1[(s[(i - 1) % 4] >> 16) & 0xFF]
            ^ TD2[(s[(i - 2) % 4] >> 8) & 0xFF] ^ TD3[s[(i - 3) % 4] & 0xFF] ^ dk[4 * r + i]
            for i in range(4)
        ]
    return s


def _td4_indices(t: Sequence[int], word: int) -> Tuple[int, int, int, int]:
    return (
        t[word] >> 24,
        (t[(word - 1) % 4] >> 16) & 0xFF,
        (t[(word - 2) % 4] >> 8) & 0xFF,
        t[(word - 3) % 4] & 0xFF,
    )


def _last_round_word(t: Sequence[int], word: int, dk: Sequence[int]) -> int:
    i0, i1, i2, i3 = _td4_indices(t, word)
    return ((TD4[i0] << 24) ^ (TD4[i1] << 16) ^ (TD4[i2] << 8) ^ TD4[i3]) ^ dk[4 * ROUNDS + word]


def decrypt_block(schedule: AesKeySchedule, ciphertext: bytes) -> bytes:
    t = _inverse_rounds(schedule, ciphertext)
    return _words_to_bytes([_last_round_word(t, w, schedule.dec_round_keys) for w in range(4)])


def last_round_indices(ciphertext: bytes, schedule: AesKeySchedule, word: int = 1) -> Tuple[int, int, int, int]:
    """
    真值预言: 最后一轮计算第 word 个输出字时访问的 4 个 Td4 下标

    返回顺序与输出字的字节顺序一致（高字节在前），即 plaintext[4*word + b]
    = Td4[indices[b]] ^ 轮密钥字节 b。
    """
    return _td4_indices(_inverse_rounds(schedule, ciphertext), word)


def aes_encrypt(io: DecryptIo) -> bytes:
    """加密 io.data_in（用于生成试验密文，不被计时）"""
    return encrypt_block(io.key_schedule, io.data_in)


# ==================== 模拟执行 ====================

def decrypt_program(io: DecryptIo, tables: AesTables, last_round_only: bool = False,
                    start_event: Optional[str] = None, alu_cycles: int = DEFAULT_ALU_CYCLES,
                    combine_cycles: int = DEFAULT_COMBINE_CYCLES) -> Generator:
    """
    解密的代理程序

    Args:
        io: 输入输出
        tables: 查找表放置
        last_round_only: 只为最后一轮发出访存（前 9 轮功能计算，其查表在已预热的 L1 中命中）
        start_event: 非空时先等待该事件再开始（由计时线程触发）
        alu_cycles: 每个输出字的 ALU 周期
        combine_cycles: 4 次重叠 Td4 读之后的合并周期

    Returns:
        16 字节明文（生成器返回值）
    """
    if start_event is not None:
        yield WaitFor(start_event)

    dk = io.key_schedule.dec_round_keys
    s = [_get_u32(io.data_in, 4 * i) ^ dk[i] for i in range(4)]
    for r in range(1, ROUNDS):
        if not last_round_only:
            for i in range(4):
                yield Load(tables.td_addr(0, s[i] >> 24), overlap=True)
                yield Load(tables.td_addr(1, (s[(i - 1) % 4] >> 16) & 0xFF), overlap=True)
                yield Load(tables.td_addr(2, (s[(i - 2) % 4] >> 8) & 0xFF), overlap=True)
                yield Load(tables.td_addr(3, s[(i - 3) % 4] & 0xFF), overlap=True)
            yield Join(alu_cycles)
        s = [
            TD0[s[i] >> 24] ^ TD1[(s[(i - 1) % 4] >> 16) & 0xFF]
            ^ TD2[(s[(i - 2) % 4] >> 8) & 0xFF] ^ TD3[s[(i - 3) % 4] & 0xFF] ^ dk[4 * r + i]
            for i in range(4)
        ]

    out: List[int] = []
    for w in range(4):
        for index in _td4_indices(s, w):
            yield Load(tables.td4_addr(index), overlap=True)
        yield Join(combine_cycles)
        yield Compute(alu_cycles)
        out.append(_last_round_word(s, w, dk))
        yield Store(io.out_addr + 4 * w)
    return _words_to_bytes(out)


def aes_decrypt(io: DecryptIo, tables: AesTables, machine, tile=0, **program_kwargs) -> bytes:
    """在指定 tile 上单独运行一次模拟解密，返回明文"""
    agent = Agent('victim', machine.tile(tile))
    agent.start(decrypt_program(io, tables, **program_kwargs))
    run_scenario(machine, [agent], record_trace=False)
    return agent.result
