"""
实验运行自定义异常
职责: 命令行用法错误，携带专门的退出码
"""

from core.constants import ErrorCode, ExitCode
from core.exceptions import SimulationError


class ExperimentUsageError(SimulationError):
    """命令行用法错误（未知场景、参数格式错误）"""
    default_code = ErrorCode.INVALID_PARAMS
    exit_code = ExitCode.USAGE_ERROR


class UnknownScenarioError(ExperimentUsageError):

    def __init__(self, scenario: str, choices):
        super().__init__(f'未知场景: {scenario}，可选: {", ".join(choices)}', scenario=scenario)
