"""
测试 T 表 AES 受害者: 已知答案、与 pycryptodome 对照、模拟执行与末轮下标预言
"""

import numpy as np
import pytest
from Crypto.Cipher import AES

from core.exceptions import ConfigurationError
from core.machine import MachineConfig, SimMachine
from core.victims import (
    INV_SBOX, SBOX, TD4, AesKeySchedule, AesTables, DecryptIo, aes_decrypt, decrypt_block, encrypt_block,
    last_round_indices,
)

FIPS_KEY = bytes.fromhex('000102030405060708090a0b0c0d0e0f')
FIPS_PLAINTEXT = bytes.fromhex('00112233445566778899aabbccddeeff')
FIPS_CIPHERTEXT = bytes.fromhex('69c4e0d86a7b0430d8cdb78070b4c55a')


def _random_blocks(seed: int, n: int):
    rng = np.random.default_rng(seed)
    return [bytes(rng.integers(0, 256, 16, dtype=np.uint8).tolist()) for _ in range(n)]


def test_fips_known_answer():
    schedule = AesKeySchedule.expand(FIPS_KEY)
    assert encrypt_block(schedule, FIPS_PLAINTEXT) == FIPS_CIPHERTEXT
    assert decrypt_block(schedule, FIPS_CIPHERTEXT) == FIPS_PLAINTEXT


def test_matches_reference_implementation():
    keys = _random_blocks(1, 50)
    blocks = _random_blocks(2, 50)
    for key, block in zip(keys, blocks):
        reference = AES.new(key, AES.MODE_ECB)
        schedule = AesKeySchedule.expand(key)
        assert encrypt_block(schedule, block) == reference.encrypt(block)
        assert decrypt_block(schedule, block) == reference.decrypt(block)


def test_thousand_random_round_trips():
    for key, block in zip(_random_blocks(7, 1000), _random_blocks(8, 1000)):
        schedule = AesKeySchedule.expand(key)
        ciphertext = encrypt_block(schedule, block)
        assert ciphertext == AES.new(key, AES.MODE_ECB).encrypt(block)
        assert decrypt_block(schedule, ciphertext) == block


def test_sbox_tables_are_inverse():
    assert all(INV_SBOX[SBOX[x]] == x for x in range(256))
    assert bytes(TD4) == bytes(INV_SBOX)


def test_key_length_is_validated():
    with pytest.raises(ConfigurationError) as exc:
        AesKeySchedule.expand(b'short')
    assert exc.value.field == 'key'


def test_last_round_indices_reconstruct_plaintext_word():
    """plaintext[4w + b] = Td4[indices[b]] ^ 末轮轮密钥字节 b"""
    for key, ciphertext in zip(_random_blocks(3, 20), _random_blocks(4, 20)):
        schedule = AesKeySchedule.expand(key)
        plaintext = decrypt_block(schedule, ciphertext)
        for word in range(4):
            indices = last_round_indices(ciphertext, schedule, word)
            round_key = schedule.final_round_key_word(word)
            rebuilt = bytes(TD4[i] ^ k for i, k in zip(indices, round_key))
            assert rebuilt == plaintext[4 * word:4 * word + 4]


def test_final_round_key_is_original_key():
    schedule = AesKeySchedule.expand(FIPS_KEY)
    for word in range(4):
        assert schedule.final_round_key_word(word) == FIPS_KEY[4 * word:4 * word + 4]


def test_simulated_decryption_matches_functional_and_writes_out():
    machine = SimMachine(MachineConfig(noise_stddev=0.0))
    tables = AesTables(td_base=0x100000, td4_base=0x200000)
    schedule = AesKeySchedule.expand(FIPS_KEY)
    io = DecryptIo(data_in=FIPS_CIPHERTEXT, out_addr=0x300000, key_schedule=schedule)

    assert aes_decrypt(io, tables, machine, tile=0) == FIPS_PLAINTEXT
    for word in range(4):
        assert machine.data_version(0x300000 + 4 * word) == 1
    # 只执行末轮访存也得到同样的明文
    assert aes_decrypt(io, tables, machine, tile=0, last_round_only=True) == FIPS_PLAINTEXT


def test_tables_layout_validation():
    tables = AesTables(td_base=0x100000, td4_base=0x200040)
    assert tables.td4_lines() == [0x200040, 0x200080, 0x2000c0, 0x200100]
    assert tables.td4_line_of(0) == 0x200040
    assert tables.td4_line_of(255) == 0x200100
    with pytest.raises(ConfigurationError):
        AesTables(td_base=0x100000, td4_base=0x100400)
    with pytest.raises(ConfigurationError):
        DecryptIo(data_in=FIPS_CIPHERTEXT, out_addr=0x300004, key_schedule=AesKeySchedule.expand(FIPS_KEY))
