"""
模拟器运行配置
集中管理可由环境变量覆盖的默认值，避免在命令与任务中硬编码
"""

import os
from pathlib import Path
from typing import Any, Dict

BASE_DIR = Path(__file__).resolve().parent.parent


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


class SimConfig:
    """模拟器运行配置类"""

    # ==================== 输出 ====================

    # 产物根目录（命令行唯一读取的实验相关环境变量）
    OUTPUT_DIR = Path(os.getenv('NUCA_OUTPUT_DIR', str(BASE_DIR.parent / 'artifacts')))

    LOG_DIR = Path(os.getenv('NUCA_LOG_DIR', str(BASE_DIR / 'logs')))
    LOG_LEVEL = os.getenv('NUCA_LOG_LEVEL', 'INFO')

    # ==================== 模拟 ====================

    DEFAULT_SEED = int(os.getenv('NUCA_DEFAULT_SEED', 0))

    # 每次操作后检查缓存/目录不变量（很慢，仅调试）
    DEBUG_CHECKS = _env_bool('NUCA_DEBUG_CHECKS', False)

    # 机器配置预设目录
    PRESET_DIR = BASE_DIR / 'configs'

    PRESETS = {
        'default': 'default.json',
        'gem5': 'gem5.json',
    }

    # ==================== 并行 ====================

    # --parallel 时每个 Celery 任务的超时（秒）
    TASK_SOFT_TIME_LIMIT = int(os.getenv('NUCA_TASK_SOFT_TIME_LIMIT', 3600))
    TASK_TIME_LIMIT = int(os.getenv('NUCA_TASK_TIME_LIMIT', 4200))

    @classmethod
    def preset_path(cls, name: str) -> Path:
        """预设名或文件路径 -> 配置文件路径"""
        if name in cls.PRESETS:
            return cls.PRESET_DIR / cls.PRESETS[name]
        return Path(name)

    @classmethod
    def output_dir(cls, override: Any = None) -> Path:
        return Path(override) if override else cls.OUTPUT_DIR

    @classmethod
    def get_all_config(cls) -> Dict[str, Any]:
        """获取所有配置（用于调试与报告）"""
        return {
            'output_dir': str(cls.OUTPUT_DIR),
            'log_dir': str(cls.LOG_DIR),
            'log_level': cls.LOG_LEVEL,
            'default_seed': cls.DEFAULT_SEED,
            'debug_checks': cls.DEBUG_CHECKS,
            'presets': sorted(cls.PRESETS),
        }
