"""
LOW/HIGH 延迟分类器
职责: 决策树桩 AdaBoost 训练、单样本预测、多样本多数表决，模型 JSON 序列化

标签编码: HIGH = +1，LOW = -1。树桩规则: latency >= threshold 时输出 polarity，否则输出 -polarity。
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from core.exceptions import ClassifierError

logger = logging.getLogger(__name__)

DEFAULT_ROUNDS = 50
_EPS = 1e-10


class Label(str, Enum):
    LOW = 'LOW'
    HIGH = 'HIGH'

    @property
    def sign(self) -> int:
        return 1 if self is Label.HIGH else -1


@dataclass(frozen=True)
class LabeledSample:
    """带标签的延迟样本；provenance 记录标签来源（训练阶段为 oracle）"""

    latency: float
    label: Label
    provenance: str = 'oracle'


@dataclass(frozen=True)
class Stump:
    threshold: float
    polarity: int
    weight: float

    def vote(self, latency: float) -> int:
        return self.polarity if latency >= self.threshold else -self.polarity


@dataclass
class StumpEnsemble:
    """决策树桩集成，training_errors[k] 是前 k+1 个树桩组成的集成在训练集上的错误率"""

    stumps: List[Stump]
    rounds: int
    training_errors: List[float] = field(default_factory=list)
    error_bounds: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.stumps:
            raise ClassifierError('集成至少需要 1 个树桩')
        for stump in self.stumps:
            if not math.isfinite(stump.weight) or stump.polarity not in (1, -1):
                raise ClassifierError('树桩权重必须有限且极性为 ±1')

    def score(self, latency: float) -> float:
        return sum(s.weight * s.vote(latency) for s in self.stumps)

    def scores(self, latencies: Sequence[float]) -> np.ndarray:
        x = np.asarray(latencies, dtype=np.float64)
        total = np.zeros_like(x)
        for s in self.stumps:
            total += s.weight * np.where(x >= s.threshold, s.polarity, -s.polarity)
        return total

    def to_dict(self) -> Dict:
        return {
            'rounds': self.rounds,
            'stumps': [
                {'threshold': s.threshold, 'polarity': s.polarity, 'weight': s.weight}
                for s in self.stumps
            ],
            'training_errors': self.training_errors,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'StumpEnsemble':
        try:
            stumps = [
                Stump(float(s['threshold']), int(s['polarity']), float(s['weight']))
                for s in data['stumps']
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise ClassifierError(f'模型 JSON 格式错误: {e}')
        return cls(
            stumps=stumps,
            rounds=int(data.get('rounds', len(stumps))),
            training_errors=list(data.get('training_errors', [])),
        )

    def save(self, path: Union[str, Path]):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding='utf-8')

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'StumpEnsemble':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def _as_arrays(samples: Iterable[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    x = np.fromiter((s.latency for s in samples), dtype=np.float64, count=len(samples))
    y = np.fromiter((Label(s.label).sign for s in samples), dtype=np.float64, count=len(samples))
    return x, y


def _candidate_thresholds(x: np.ndarray) -> np.ndarray:
    uniq = np.unique(x)
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    return np.concatenate(([uniq[0] - 1.0], mids, [uniq[-1] + 1.0]))


def best_stump(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> Tuple[float, int, float]:
    """
    加权错误率最小的树桩

    Returns:
        (threshold, polarity, weighted_error)，并列时取阈值最小、极性 +1 优先
    """
    order = np.argsort(x, kind='stable')
    xs, ys, ws = x[order], y[order], w[order]
    thresholds = _candidate_thresholds(xs)
    below = np.searchsorted(xs, thresholds, side='left')
    pos_cum = np.concatenate(([0.0], np.cumsum(ws * (ys > 0))))
    neg_cum = np.concatenate(([0.0], np.cumsum(ws * (ys < 0))))
    total = ws.sum()
    # polarity=+1: 阈值以下判 LOW，误判以下的 HIGH 与以上的 LOW
    err_pos = pos_cum[below] + (neg_cum[-1] - neg_cum[below])
    err_neg = total - err_pos
    both = np.concatenate((err_pos, err_neg))
    j = int(np.argmin(both))
    n = len(thresholds)
    if j < n:
        return float(thresholds[j]), 1, float(err_pos[j] / total)
    return float(thresholds[j - n]), -1, float(err_neg[j - n] / total)


def _predict_signs(model_scores: np.ndarray) -> np.ndarray:
    return np.where(model_scores >= 0, 1.0, -1.0)


def train_adaboost(samples: Iterable[LabeledSample], rounds: int = DEFAULT_ROUNDS) -> StumpEnsemble:
    """
    标准 AdaBoost（决策树桩）

    Raises:
        ClassifierError: rounds < 1、样本只含一种标签，或第一轮最优树桩的加权错误率已 >= 0.5
    """
    if rounds < 1:
        raise ClassifierError('rounds 必须 >= 1')
    x, y = _as_arrays(samples)
    if x.size == 0 or np.all(y > 0) or np.all(y < 0):
        raise ClassifierError('训练样本必须同时包含 LOW 与 HIGH')

    w = np.full(x.size, 1.0 / x.size)
    stumps: List[Stump] = []
    errors: List[float] = []
    bounds: List[float] = []
    scores = np.zeros_like(x)
    bound = 1.0

    for r in range(rounds):
        threshold, polarity, eps = best_stump(x, y, w)
        if eps >= 0.5 - _EPS:
            if not stumps:
                raise ClassifierError(f'最优树桩的加权错误率 {eps:.4f} >= 0.5，计时不携带标签信息', error=eps)
            logger.debug(f'第 {r + 1} 轮弱分类器错误率 {eps:.4f} >= 0.5，提前停止')
            break
        eps_c = min(max(eps, _EPS), 1.0 - _EPS)
        alpha = 0.5 * math.log((1.0 - eps_c) / eps_c)
        h = np.where(x >= threshold, polarity, -polarity).astype(np.float64)
        stumps.append(Stump(threshold=threshold, polarity=polarity, weight=alpha))

        scores += alpha * h
        errors.append(float(np.mean(_predict_signs(scores) != y)))
        bound *= 2.0 * math.sqrt(eps_c * (1.0 - eps_c))
        bounds.append(bound)

        w = w * np.exp(-alpha * y * h)
        w /= w.sum()
        if eps <= 0.0:
            break

    logger.info(f'AdaBoost 训练完成: {len(stumps)} 个树桩, 训练错误率 {errors[-1]:.4f}')
    return StumpEnsemble(stumps=stumps, rounds=len(stumps), training_errors=errors, error_bounds=bounds)


def predict(model: StumpEnsemble, latency: float) -> Label:
    """得分恰为 0 时判 HIGH"""
    return Label.HIGH if model.score(latency) >= 0 else Label.LOW


def predict_many(model: StumpEnsemble, latencies: Sequence[float]) -> List[Label]:
    signs = _predict_signs(model.scores(latencies))
    return [Label.HIGH if s > 0 else Label.LOW for s in signs]


def vote(model: StumpEnsemble, samples: Sequence[float]) -> Label:
    """逐样本预测后多数表决；平票判 HIGH"""
    if len(samples) == 0:
        raise ClassifierError('表决至少需要 1 个样本')
    signs = _predict_signs(model.scores(samples))
    lows = int(np.sum(signs < 0))
    return Label.LOW if lows > len(signs) - lows else Label.HIGH


def threshold_model(threshold: float) -> StumpEnsemble:
    """单树桩阈值规则: latency >= threshold 判 HIGH"""
    return StumpEnsemble(stumps=[Stump(threshold=threshold, polarity=1, weight=1.0)], rounds=1)


def accuracy(model: StumpEnsemble, samples: Iterable[LabeledSample]) -> float:
    x, y = _as_arrays(samples)
    if x.size == 0:
        return 0.0
    return float(np.mean(_predict_signs(model.scores(x)) == y))


def accuracy_vs_votes(model: StumpEnsemble, trials: Sequence[Tuple[Sequence[float], Label]],
                      vote_counts: Sequence[int]) -> List[Tuple[int, float]]:
    """
    每条试验取前 k 个读数表决，返回 [(k, 判定准确率)]

    Args:
        trials: (读数列表, 真值标签)
        vote_counts: 表决样本数网格
    """
    rows = []
    for k in vote_counts:
        correct = sum(1 for readings, label in trials if vote(model, list(readings)[:k]) is Label(label))
        rows.append((int(k), correct / len(trials) if trials else 0.0))
    return rows
