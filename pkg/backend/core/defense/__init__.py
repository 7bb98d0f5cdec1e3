"""均匀延迟防御与片上网络饱和研究"""

from .defense import (
    DefenseConfig, DefenseMode, apply_defense, attack_under_load, ks_statistic, load_sweep,
    pair_latency_distributions, performance_cost, uniform_vote_pvalue,
)
from .noc import (
    HopDelaySampler, NocResult, NocSimulator, NocTrafficConfig, TrafficDraws, noc_saturation_sweep,
    parse_rates,
)

__all__ = [
    'DefenseConfig', 'DefenseMode', 'apply_defense', 'attack_under_load', 'ks_statistic', 'load_sweep',
    'pair_latency_distributions', 'performance_cost', 'uniform_vote_pvalue', 'HopDelaySampler',
    'NocResult', 'NocSimulator', 'NocTrafficConfig', 'TrafficDraws', 'noc_saturation_sweep',
    'parse_rates',
]
