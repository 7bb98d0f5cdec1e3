"""
测试决策树桩 AdaBoost 与多数表决
"""

import numpy as np
import pytest

from core.classifier import (
    Label, LabeledSample, StumpEnsemble, accuracy, accuracy_vs_votes, best_stump, predict, predict_many,
    threshold_model, train_adaboost, vote,
)
from core.exceptions import ClassifierError


def _samples(seed: int, n: int, low_mean: float = 100.0, high_mean: float = 112.0, sigma: float = 6.0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        label = Label.LOW if k % 2 == 0 else Label.HIGH
        mean = low_mean if label is Label.LOW else high_mean
        out.append(LabeledSample(latency=float(rng.normal(mean, sigma)), label=label))
    return out


def test_best_stump_separable_data():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    w = np.full(4, 0.25)
    threshold, polarity, error = best_stump(x, y, w)
    assert threshold == 2.5
    assert polarity == 1
    assert error == 0.0


def test_adaboost_training_error_respects_bound():
    model = train_adaboost(_samples(0, 2000), rounds=20)
    assert 1 <= model.rounds <= 20
    assert len(model.training_errors) == len(model.stumps)
    for err, bound in zip(model.training_errors, model.error_bounds):
        assert err <= bound + 1e-12


def test_adaboost_separates_overlapping_classes():
    model = train_adaboost(_samples(1, 2000), rounds=20)
    assert accuracy(model, _samples(2, 2000)) > 0.75


def test_training_requires_both_labels_and_positive_rounds():
    only_low = [LabeledSample(latency=100.0, label=Label.LOW)] * 10
    with pytest.raises(ClassifierError):
        train_adaboost(only_low)
    with pytest.raises(ClassifierError):
        train_adaboost(_samples(0, 10), rounds=0)


def test_training_on_uninformative_latencies_is_rejected():
    """相同延迟、标签各半: 第一轮最优树桩错误率为 0.5，不产出空的或反向的分类器"""
    flat = [LabeledSample(latency=120.0, label=Label.LOW if k % 2 else Label.HIGH) for k in range(100)]
    _, _, eps = best_stump(np.full(100, 120.0), np.array([1.0, -1.0] * 50), np.full(100, 0.01))
    assert eps == pytest.approx(0.5)
    with pytest.raises(ClassifierError) as exc:
        train_adaboost(flat, rounds=10)
    assert exc.value.details['error'] == pytest.approx(0.5)

    # 标签不均衡时常数树桩仍优于随机，照常训练
    skewed = flat + [LabeledSample(latency=120.0, label=Label.HIGH)] * 20
    model = train_adaboost(skewed, rounds=10)
    assert model.rounds >= 1
    assert model.stumps[0].weight > 0


def test_predict_and_vote_tie_rules():
    model = threshold_model(100.0)
    assert predict(model, 99.0) is Label.LOW
    assert predict(model, 100.0) is Label.HIGH
    assert predict_many(model, [50.0, 150.0]) == [Label.LOW, Label.HIGH]
    # 平票判 HIGH
    assert vote(model, [90.0, 110.0]) is Label.HIGH
    assert vote(model, [90.0, 95.0, 110.0]) is Label.LOW
    with pytest.raises(ClassifierError):
        vote(model, [])


def test_majority_vote_beats_single_sample():
    model = train_adaboost(_samples(3, 4000), rounds=30)
    rng = np.random.default_rng(4)
    trials = []
    for k in range(300):
        label = Label.LOW if k % 2 == 0 else Label.HIGH
        mean = 100.0 if label is Label.LOW else 112.0
        trials.append((rng.normal(mean, 6.0, 41).tolist(), label))
    curve = dict(accuracy_vs_votes(model, trials, [1, 41]))
    assert curve[1] < curve[41]
    assert curve[41] >= 0.99


def test_model_json_round_trip(tmp_path):
    model = train_adaboost(_samples(5, 500), rounds=5)
    path = tmp_path / 'model.json'
    model.save(path)
    loaded = StumpEnsemble.load(path)
    assert loaded.stumps == model.stumps
    latencies = [90.0, 105.0, 106.0, 120.0]
    assert predict_many(loaded, latencies) == predict_many(model, latencies)


def test_malformed_model_is_rejected():
    with pytest.raises(ClassifierError):
        StumpEnsemble.from_dict({'stumps': [{'threshold': 1.0}]})
    with pytest.raises(ClassifierError):
        StumpEnsemble(stumps=[], rounds=0)
