"""执行与画像: 近/远 CHA 地址集合与玩具受害者攻击"""

from .profiler import (
    AddressClassMap, AddressStats, LatencyProfile, candidate_lines, classify_addresses,
    ground_truth_agreement, pick_attack_pair, profile_addresses,
)
from .toy_attack import AttackPair, ToyAttackResult, learn_attack_pair, run_toy_attack

__all__ = [
    'AddressClassMap', 'AddressStats', 'LatencyProfile', 'candidate_lines', 'classify_addresses',
    'ground_truth_agreement', 'pick_attack_pair', 'profile_addresses', 'AttackPair',
    'ToyAttackResult', 'learn_attack_pair', 'run_toy_attack',
]
