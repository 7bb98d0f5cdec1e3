"""
统一错误处理工具
提供实验运行中的异常捕获、记录与错误响应格式化
"""

import logging
import traceback
from typing import Optional

from core.constants import ErrorCode, ErrorMessage, ExitCode
from core.exceptions import (
    ConfigurationError, DeadlockError, InvariantViolation, KeyUndeterminedError, NoLeakageError,
    SimulationError,
)

logger = logging.getLogger(__name__)

# 异常 -> 命令行退出码（按 MRO 顺序匹配，子类在前）
EXIT_CODES = (
    (ConfigurationError, ExitCode.CONFIG_ERROR),
    (KeyUndeterminedError, ExitCode.UNDETERMINED),
    (NoLeakageError, ExitCode.UNDETERMINED),
    (DeadlockError, ExitCode.SIMULATION_ERROR),
    (InvariantViolation, ExitCode.SIMULATION_ERROR),
    (SimulationError, ExitCode.SIMULATION_ERROR),
)


class ErrorContext:
    """
    错误上下文管理器
    用于捕获和记录一个场景或流水线步骤的错误

    Example:
        with ErrorContext("aes-attack 种子 0", raise_on_error=False) as ctx:
            run_scenario(...)
        if ctx.error: ...
    """

    def __init__(
        self,
        operation_name: str,
        raise_on_error: bool = True,
        log_level: str = "error",
        logger_name: Optional[str] = None,
    ):
        self.operation_name = operation_name
        self.raise_on_error = raise_on_error
        self.log_level = log_level
        self.logger = logging.getLogger(logger_name or 'nuca.error')
        self.error = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None:
            return False
        self.error = exc_val
        # 配置错误是用户输入问题，不打印堆栈
        exc_info = None if isinstance(exc_val, ConfigurationError) else (exc_type, exc_val, exc_tb)
        log_func = getattr(self.logger, self.log_level)
        log_func(f"{self.operation_name} 失败: {exc_val}", exc_info=exc_info)
        return not self.raise_on_error


def exit_code_for(error: Exception) -> int:
    """异常类自带 exit_code 时优先使用"""
    explicit = getattr(type(error), 'exit_code', None)
    if explicit is not None:
        return explicit
    for exc_type, code in EXIT_CODES:
        if isinstance(error, exc_type):
            return code
    return ExitCode.SIMULATION_ERROR


def format_error_response(error: Exception, include_traceback: bool = False) -> dict:
    """
    格式化错误响应

    Args:
        error: 异常对象
        include_traceback: 是否包含堆栈跟踪

    Returns:
        可写入 JSON 的错误字典
    """
    response = {
        'success': False,
        'error': str(error),
        'error_type': type(error).__name__,
        'exit_code': exit_code_for(error),
    }

    if isinstance(error, SimulationError):
        response['code'] = error.code
        response['code_message'] = ErrorMessage.get(error.code)
        if error.details:
            response['details'] = error.details
    else:
        response['code'] = ErrorCode.UNKNOWN_ERROR

    if isinstance(error, ConfigurationError):
        response['field'] = error.field

    if include_traceback:
        response['traceback'] = ''.join(
            traceback.format_exception(type(error), error, error.__traceback__)
        )

    return response
