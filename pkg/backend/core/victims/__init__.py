"""受害者程序: 玩具秘密访问与 T 表 AES"""

from .aes import (
    AesKeySchedule, DecryptIo, aes_decrypt, aes_encrypt, decrypt_block, decrypt_program,
    encrypt_block, last_round_indices,
)
from .aes_tables import INV_SBOX, SBOX, TD0, TD1, TD2, TD3, TD4, AesTables
from .toy import ToyVictim, sweep_prime, toy_victim_program, toy_victim_run

__all__ = [
    'AesKeySchedule', 'DecryptIo', 'aes_decrypt', 'aes_encrypt', 'decrypt_block', 'decrypt_program',
    'encrypt_block', 'last_round_indices', 'INV_SBOX', 'SBOX', 'TD0', 'TD1', 'TD2', 'TD3', 'TD4',
    'AesTables', 'ToyVictim', 'sweep_prime', 'toy_victim_program', 'toy_victim_run',
]
