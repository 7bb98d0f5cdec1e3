"""
验收流水线基础抽象
遵循责任链模式: 每个阶段检查一项验收标准，结果汇总到同一个上下文
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class PipelineContext:
    """
    流水线上下文
    携带所有阶段的结果与公共元数据（种子、输出目录、已解析配置）
    """

    run_id: str
    results: Dict[str, 'StageResult'] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add_result(self, stage: str, result: 'StageResult'):
        """添加阶段结果"""
        self.results[stage] = result

    def get_result(self, stage: str) -> Optional['StageResult']:
        """获取阶段结果"""
        return self.results.get(stage)

    def add_metadata(self, key: str, value: Any):
        self.metadata[key] = value

    def get_metadata(self, key: str, default: Any = None) -> Any:
        return self.metadata.get(key, default)

    @property
    def all_passed(self) -> bool:
        return bool(self.results) and all(r.success for r in self.results.values())

    def failed_stages(self) -> List[str]:
        return [name for name, r in self.results.items() if not r.success]


@dataclass
class StageResult:
    """
    阶段执行结果

    Attributes:
        success: 验收检查是否通过
        measured: 实测值（写入报告）
        target: 目标描述（写入报告）
        data: 阶段附带的指标与产物路径
        error: 异常信息（阶段本身出错时）
        duration: 阶段耗时（秒），由编排器填写
    """

    success: bool
    measured: Any = None
    target: str = ''
    data: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    duration: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': self.success,
            'measured': self.measured,
            'target': self.target,
            'data': self.data,
            'error': self.error,
            'duration': round(self.duration, 3),
        }


class StageProcessor(ABC):
    """
    阶段处理器抽象基类
    每个处理器只负责一项验收标准

    Args:
        stage_name: 阶段名
        title: 报告中的标题
        budget_seconds: 耗时预算，报告中与实测耗时并列；None 表示不设预算
    """

    def __init__(self, stage_name: str, title: str = '', budget_seconds: Optional[float] = None):
        self.stage_name = stage_name
        self.title = title or stage_name
        self.budget_seconds = budget_seconds

    def validate(self, context: PipelineContext) -> bool:
        """
        验证阶段是否可以执行（默认总是可以）

        Args:
            context: 流水线上下文
        """
        return True

    @abstractmethod
    def process(self, context: PipelineContext) -> StageResult:
        """执行阶段并返回结果"""

    def on_failure(self, context: PipelineContext, error: Exception) -> StageResult:
        """
        阶段抛出异常时的处理，默认记为失败并保留错误信息

        Args:
            context: 流水线上下文
            error: 异常
        """
        return StageResult(success=False, error=f'{type(error).__name__}: {error}')

    def on_success(self, context: PipelineContext, result: StageResult):
        """成功处理(可选)"""


class ValidationError(Exception):
    """阶段前置条件不满足"""
