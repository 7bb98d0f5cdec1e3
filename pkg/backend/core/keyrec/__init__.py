"""AES 末轮密钥恢复: 攻击会话、试验表决与候选计票"""

from .recovery import (
    KeyRecoveryState, KeyWordResult, TrialRecord, accumulate, accuracy_curve, extract_key_word,
    recover_key_word, run_trial, votes_to_uniqueness,
)
from .session import AttackLayout, AttackSession, build_low_index_set, select_td4_placement

__all__ = [
    'KeyRecoveryState', 'KeyWordResult', 'TrialRecord', 'accumulate', 'accuracy_curve',
    'extract_key_word', 'recover_key_word', 'run_trial', 'votes_to_uniqueness', 'AttackLayout',
    'AttackSession', 'build_low_index_set', 'select_td4_placement',
]
