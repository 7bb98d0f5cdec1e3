"""LOW/HIGH 延迟分类: 决策树桩 AdaBoost 与多数表决"""

from .adaboost import (
    Label, LabeledSample, Stump, StumpEnsemble, accuracy, accuracy_vs_votes, best_stump, predict,
    predict_many, threshold_model, train_adaboost, vote,
)

__all__ = [
    'Label', 'LabeledSample', 'Stump', 'StumpEnsemble', 'accuracy', 'accuracy_vs_votes', 'best_stump',
    'predict', 'predict_many', 'threshold_model', 'train_adaboost', 'vote',
]
