"""实验场景服务"""

from .scenarios import (
    SCENARIOS,
    CheckResult,
    ScenarioContext,
    ScenarioOutcome,
    get_scenario,
)

__all__ = [
    'SCENARIOS',
    'CheckResult',
    'ScenarioContext',
    'ScenarioOutcome',
    'get_scenario',
]
