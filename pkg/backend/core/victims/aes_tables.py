"""
AES 查找表
职责: 由 GF(2^8) 运算生成 S 盒、逆 S 盒、Te0..Te3、Td0..Td3、Td4，
     并描述这些表在模拟内存中的放置

表内容与 OpenSSL aes_core.c 中的常量逐字节一致。
"""

from dataclasses import dataclass
from typing import List, Tuple

from core.exceptions import ConfigurationError


def _xtime(a: int) -> int:
    a <<= 1
    if a & 0x100:
        a ^= 0x11B
    return a


def gf_mul(a: int, b: int) -> int:
    """GF(2^8) 乘法，模多项式 x^8 + x^4 + x^3 + x + 1"""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a = _xtime(a)
        b >>= 1
    return result


def _rotl8(x: int, n: int) -> int:
    return ((x << n) | (x >> (8 - n))) & 0xFF


def _build_sbox() -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    # 以 3 为生成元的指数/对数表求乘法逆元
    exp = [0] * 255
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = gf_mul(x, 3)
    sbox = [0] * 256
    for a in range(256):
        inv = 0 if a == 0 else exp[(255 - log[a]) % 255]
        sbox[a] = inv ^ _rotl8(inv, 1) ^ _rotl8(inv, 2) ^ _rotl8(inv, 3) ^ _rotl8(inv, 4) ^ 0x63
    inv_sbox = [0] * 256
    for a, s in enumerate(sbox):
        inv_sbox[s] = a
    return tuple(sbox), tuple(inv_sbox)


def _ror32(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & 0xFFFFFFFF


def _column_table(box, coeffs) -> Tuple[int, ...]:
    c0, c1, c2, c3 = coeffs
    return tuple(
        (gf_mul(c0, s) << 24) | (gf_mul(c1, s) << 16) | (gf_mul(c2, s) << 8) | gf_mul(c3, s)
        for s in box
    )


SBOX, INV_SBOX = _build_sbox()

TE0 = _column_table(SBOX, (0x02, 0x01, 0x01, 0x03))
TE1 = tuple(_ror32(v, 8) for v in TE0)
TE2 = tuple(_ror32(v, 16) for v in TE0)
TE3 = tuple(_ror32(v, 24) for v in TE0)

TD0 = _column_table(INV_SBOX, (0x0E, 0x09, 0x0D, 0x0B))
TD1 = tuple(_ror32(v, 8) for v in TD0)
TD2 = tuple(_ror32(v, 16) for v in TD0)
TD3 = tuple(_ror32(v, 24) for v in TD0)
TD4 = bytes(INV_SBOX)

TD_TABLE_BYTES = 256 * 4
TD4_BYTES = 256


@dataclass(frozen=True)
class AesTables:
    """
    解密查找表及其在模拟内存中的位置

    Td0..Td3 从 td_base 起连续放置（共 4KiB），Td4 单独放在 td4_base，
    占 4 条连续缓存行。
    """

    td_base: int
    td4_base: int
    line_size: int = 64

    td0 = TD0
    td1 = TD1
    td2 = TD2
    td3 = TD3
    td4 = TD4

    def __post_init__(self):
        if self.td_base % self.line_size:
            raise ConfigurationError('td_base', 'Td0..Td3 必须按缓存行对齐')
        if self.td4_base % self.line_size:
            raise ConfigurationError('td4_base', 'Td4 必须按缓存行对齐')
        if TD4_BYTES % self.line_size:
            raise ConfigurationError('line_size', 'Td4 必须正好占整数条缓存行')
        td_end = self.td_base + 4 * TD_TABLE_BYTES
        if self.td_base < self.td4_base + TD4_BYTES and self.td4_base < td_end:
            raise ConfigurationError('td4_base', 'Td4 与 Td0..Td3 重叠')

    def td_addr(self, table: int, index: int) -> int:
        """Tdk[index] 的地址，k 取 0..3"""
        return self.td_base + table * TD_TABLE_BYTES + 4 * index

    def td4_addr(self, index: int) -> int:
        return self.td4_base + index

    @property
    def entries_per_line(self) -> int:
        return self.line_size

    def td4_lines(self) -> List[int]:
        return [self.td4_base + k * self.line_size for k in range(TD4_BYTES // self.line_size)]

    def td_lines(self) -> List[int]:
        return [self.td_base + k * self.line_size for k in range(4 * TD_TABLE_BYTES // self.line_size)]

    def td4_line_of(self, index: int) -> int:
        return self.td4_base + (index // self.line_size) * self.line_size

    def with_td4_base(self, td4_base: int) -> 'AesTables':
        return AesTables(td_base=self.td_base, td4_base=td4_base, line_size=self.line_size)
