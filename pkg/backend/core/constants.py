"""
模拟器通用常量
职责: 集中管理错误码、错误消息与命中层级等常量
"""


class ErrorCode:
    """统一错误码定义"""

    # 通用错误 (1000-1999)
    SUCCESS = 0
    UNKNOWN_ERROR = 1000
    INVALID_CONFIG = 1001
    INVALID_PARAMS = 1002

    # 调度错误 (2000-2999)
    DEADLOCK = 2000
    TIMER_TIMEOUT = 2001

    # 攻击流程错误 (3000-3999)
    PROFILING_FAILED = 3000
    CLASSIFIER_ERROR = 3001
    NO_LEAKAGE = 3002
    KEY_UNDETERMINED = 3003

    # 内部不变量错误 (9000-9999)
    INVARIANT_VIOLATION = 9000


class ErrorMessage:
    """错误消息映射"""

    MESSAGES = {
        ErrorCode.SUCCESS: '成功',
        ErrorCode.UNKNOWN_ERROR: '未知错误',
        ErrorCode.INVALID_CONFIG: '配置无效',
        ErrorCode.INVALID_PARAMS: '参数无效',
        ErrorCode.DEADLOCK: '调度死锁: 没有可运行的代理',
        ErrorCode.TIMER_TIMEOUT: '计时线程超时',
        ErrorCode.PROFILING_FAILED: '地址画像失败',
        ErrorCode.CLASSIFIER_ERROR: '分类器错误',
        ErrorCode.NO_LEAKAGE: '当前放置下信道不泄露信息',
        ErrorCode.KEY_UNDETERMINED: '密钥字节无法确定',
        ErrorCode.INVARIANT_VIOLATION: '模拟器内部状态不一致',
    }

    @classmethod
    def get(cls, code: int) -> str:
        return cls.MESSAGES.get(code, cls.MESSAGES[ErrorCode.UNKNOWN_ERROR])


class ExitCode:
    """命令行退出码"""
    OK = 0
    CHECK_FAILED = 1
    USAGE_ERROR = 2
    CONFIG_ERROR = 3
    PARTIAL = 4
    UNDETERMINED = 5
    SIMULATION_ERROR = 6
