"""
模拟器自定义异常
职责: 定义结构化异常，所有异常携带错误码便于命令行映射退出码
"""

from typing import Any, Dict, Optional

from .constants import ErrorCode, ErrorMessage


class SimulationError(Exception):
    """模拟器基础异常"""
    default_code = ErrorCode.UNKNOWN_ERROR

    def __init__(self, message: Optional[str] = None, code: Optional[int] = None, **details: Any):
        self.code = code if code is not None else self.default_code
        self.message = message or ErrorMessage.get(self.code)
        self.details: Dict[str, Any] = details
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        return {'error': self.message, 'code': self.code, **self.details}


class ConfigurationError(SimulationError):
    """配置无效，必须指明出错字段"""
    default_code = ErrorCode.INVALID_CONFIG

    def __init__(self, field: str, message: Optional[str] = None, **details: Any):
        self.field = field
        super().__init__(
            f'配置字段 {field} 无效: {message}' if message else f'配置字段 {field} 无效',
            field=field,
            **details,
        )


class DeadlockError(SimulationError):
    """所有未完成代理都处于阻塞状态"""
    default_code = ErrorCode.DEADLOCK


class TimerTimeoutError(SimulationError):
    """计时线程在超时时间内没有观察到写入"""
    default_code = ErrorCode.TIMER_TIMEOUT


class ProfilingError(SimulationError):
    """画像或近/远分类失败"""
    default_code = ErrorCode.PROFILING_FAILED


class ClassifierError(SimulationError):
    """分类器训练或预测参数错误"""
    default_code = ErrorCode.CLASSIFIER_ERROR


class NoLeakageError(SimulationError):
    """Td4 的 4 条缓存行全近或全远，计时不携带信息"""
    default_code = ErrorCode.NO_LEAKAGE


class InvariantViolation(SimulationError):
    """调试模式下检测到的缓存/目录不变量破坏"""
    default_code = ErrorCode.INVARIANT_VIOLATION


class KeyUndeterminedError(SimulationError):
    """票数并列或没有 LOW 试验，密钥字节无法唯一确定"""
    default_code = ErrorCode.KEY_UNDETERMINED
