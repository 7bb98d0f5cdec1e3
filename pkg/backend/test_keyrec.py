"""
测试 AES 末轮密钥恢复: Td4 放置、LOW 下标集合、计票与端到端攻击会话
"""

import numpy as np
import pytest

from core.classifier import Label, train_adaboost
from core.exceptions import ConfigurationError, NoLeakageError
from core.keyrec import (
    AttackLayout, AttackSession, KeyRecoveryState, TrialRecord, accumulate, build_low_index_set,
    extract_key_word, run_trial, select_td4_placement, votes_to_uniqueness,
)
from core.machine import MachineConfig, SimMachine, TileId
from core.profiler import AddressClassMap, candidate_lines
from core.victims import TD4, AesKeySchedule, AesTables, decrypt_block

LINES = candidate_lines(0x200000, 8)
KEY = bytes.fromhex('2b7e151628aed2a6abf7158809cf4f3c')


def _class_map(near, far):
    return AddressClassMap(
        origin_tile=TileId.from_linear(0, 8), va_near=frozenset(near), va_far=frozenset(far), threshold=70.0,
        means={**{a: 40.0 for a in near}, **{a: 100.0 for a in far}},
    )


def _random_blocks(seed: int, n: int):
    rng = np.random.default_rng(seed)
    return [bytes(rng.integers(0, 256, 16, dtype=np.uint8).tolist()) for _ in range(n)]


def test_placement_finds_window_with_requested_near_lines():
    # 近: 0, 2, 3；远: 1, 4, 5, 6, 7
    class_map = _class_map([LINES[0], LINES[2], LINES[3]], [LINES[1]] + LINES[4:])
    assert select_td4_placement(class_map, LINES, near_lines=3) == LINES[0]
    assert select_td4_placement(class_map, LINES, near_lines=2) == LINES[1]
    assert select_td4_placement(class_map, LINES, near_lines=1) == LINES[3]


def test_placement_without_leakage_raises():
    class_map = _class_map(LINES, [])
    with pytest.raises(NoLeakageError):
        select_td4_placement(class_map, LINES, near_lines=2)


def test_low_index_set_follows_near_lines():
    class_map = _class_map([LINES[0], LINES[1]], LINES[2:])
    tables = AesTables(td_base=0x100000, td4_base=LINES[0])
    low = build_low_index_set(class_map, tables)
    assert low == frozenset(range(128))

    all_near = _class_map(LINES, [])
    with pytest.raises(NoLeakageError):
        build_low_index_set(all_near, tables)


def test_layout_validation():
    with pytest.raises(ConfigurationError) as exc:
        AttackLayout(near_lines=4)
    assert exc.value.field == 'near_lines'
    with pytest.raises(ConfigurationError) as exc:
        AttackLayout(word_index=0)
    assert exc.value.field == 'word_index'
    with pytest.raises(ConfigurationError):
        AttackLayout(timer_tile=0)


def test_accumulate_counts_low_trials_only():
    schedule = AesKeySchedule.expand(KEY)
    low_set = frozenset(range(64))
    ciphertext = bytes(16)
    plaintext = decrypt_block(schedule, ciphertext)
    state = KeyRecoveryState(word_index=1)

    accumulate(state, TrialRecord(ciphertext, plaintext, (90,), Label.LOW), low_set)
    accumulate(state, TrialRecord(ciphertext, plaintext, (140,), Label.HIGH), low_set)
    accumulate(state, TrialRecord(ciphertext, plaintext, (), None, timeouts=1), low_set)

    assert (state.trials_total, state.trials_low, state.trials_discarded) == (3, 1, 1)
    assert state.counters.sum() == 4 * len(low_set)
    for b in range(4):
        expected = {plaintext[4 + b] ^ TD4[x] for x in low_set}
        assert set(np.nonzero(state.counters[b])[0].tolist()) == expected


def test_extract_key_word_reports_ties_as_undetermined():
    state = KeyRecoveryState()
    state.counters[0, 7] = 5
    state.counters[1, 9] = 5
    state.counters[2, 1] = 5
    state.counters[2, 2] = 5
    state.counters[3, 200] = 4
    state.counters[3, 100] = 1
    state.trials_low = 5
    result = extract_key_word(state)
    assert result.key_bytes == (7, 9, None, 200)
    assert not result.determined
    assert result.as_bytes() is None
    assert result.margins == (5, 5, 0, 3)
    assert result.confidence == 0.0


def test_noiseless_votes_determine_key_word():
    schedule = AesKeySchedule.expand(KEY)
    low_set = frozenset(range(128))
    needed = votes_to_uniqueness(schedule, low_set, _random_blocks(0, 5000), word_index=1)
    assert needed is not None
    assert needed > 1


@pytest.fixture(scope='module')
def trained_session():
    machine = SimMachine(MachineConfig(rng_seed=11))
    layout = AttackLayout(profile_samples=20, votes=9)
    session = AttackSession(machine, layout, seed=11).setup()
    training = session.training_set(600)
    model = train_adaboost(training, rounds=20)
    return session, training, model


def test_session_setup_places_td4_with_leakage(trained_session):
    session, training, _ = trained_session
    assert session.tables is not None
    assert len(session.low_set) == 128
    near = [a for a in session.tables.td4_lines() if a in session.class_map.va_near]
    assert len(near) == 2
    labels = {s.label for s in training}
    assert labels == {Label.LOW, Label.HIGH}


def test_td4_lines_split_across_cha_tiles_and_stay_in_holder_bank(trained_session):
    session, _, _ = trained_session
    session.refresh()
    machine, lay = session.machine, session.layout
    lines = session.tables.td4_lines()
    chas = [machine.cha_tile(a) for a in lines]
    assert len(set(chas)) == 4

    near = [machine.hops(lay.victim_tile, c) for a, c in zip(lines, chas) if a in session.class_map.va_near]
    far = [machine.hops(lay.victim_tile, c) for a, c in zip(lines, chas) if a in session.class_map.va_far]
    assert max(near) < min(far)
    assert all(machine.llc_home(a).linear == lay.holder_tile for a in lines)
    assert not any(machine.is_l1_resident(lay.victim_tile, a) for a in lines)


def test_voted_trials_match_oracle(trained_session):
    session, _, model = trained_session
    schedule = AesKeySchedule.expand(KEY)
    trials = [run_trial(session, schedule, model) for _ in range(30)]
    assert all(t.verdict is not None for t in trials)
    assert all(len(t.readings) == session.layout.votes for t in trials)
    assert all(t.plaintext == decrypt_block(schedule, t.ciphertext) for t in trials)
    agreement = np.mean([t.verdict is t.truth for t in trials])
    assert agreement >= 0.8
