"""
验收流水线编排器
负责按顺序执行各阶段，记录耗时与结果
"""

import logging
import time
from typing import List, Optional

from core.utils.logging_config import StructuredLogger, performance_logger

from .base import PipelineContext, StageProcessor, StageResult, ValidationError

logger = logging.getLogger(__name__)


class AcceptancePipeline:
    """
    验收流水线
    可扩展阶段，无需修改编排逻辑；阶段失败默认继续执行后续阶段，使报告完整
    """

    def __init__(self, stages: List[StageProcessor]):
        names = [s.stage_name for s in stages]
        if len(set(names)) != len(names):
            raise ValueError(f'阶段名重复: {names}')
        self.stages = stages
        self.events = StructuredLogger()

    def execute(self, run_id: str, stop_on_failure: bool = False,
                context: Optional[PipelineContext] = None) -> PipelineContext:
        """
        执行全部阶段

        Args:
            run_id: 本次运行标识
            stop_on_failure: 某阶段失败后是否停止
            context: 预先填好元数据的上下文

        Returns:
            PipelineContext: 包含所有阶段结果的上下文
        """
        context = context or PipelineContext(run_id=run_id)
        logger.info(f'开始执行验收流水线: {run_id}, 共 {len(self.stages)} 个阶段')

        for stage in self.stages:
            result = self._run_stage(stage, context)
            context.add_result(stage.stage_name, result)
            self.events.log_check(stage.stage_name, result.success, result.measured, result.target)
            performance_logger.log_task_execution(
                f'acceptance:{stage.stage_name}', result.duration, result.success, result.error,
            )
            if not result.success and stop_on_failure:
                logger.warning(f'阶段 {stage.stage_name} 未通过，停止流水线')
                break

        passed = sum(1 for r in context.results.values() if r.success)
        logger.info(f'验收流水线完成: {passed}/{len(context.results)} 通过')
        return context

    def _run_stage(self, stage: StageProcessor, context: PipelineContext) -> StageResult:
        logger.info(f'执行阶段: {stage.stage_name} ({stage.title})')
        started = time.perf_counter()
        try:
            if not stage.validate(context):
                raise ValidationError(f'阶段 {stage.stage_name} 验证失败')
            result = stage.process(context)
            if result.success:
                stage.on_success(context, result)
            else:
                logger.warning(f'阶段 {stage.stage_name} 未通过: 实测 {result.measured}, 目标 {result.target}')
        except Exception as e:
            logger.exception(f'阶段 {stage.stage_name} 发生异常')
            result = stage.on_failure(context, e)
        result.duration = time.perf_counter() - started
        return result

    def execute_stage(self, run_id: str, stage_name: str) -> StageResult:
        """
        执行单个阶段

        Args:
            run_id: 运行标识
            stage_name: 阶段名称
        """
        stage = next((s for s in self.stages if s.stage_name == stage_name), None)
        if not stage:
            return StageResult(success=False, error=f'未找到阶段: {stage_name}')
        return self._run_stage(stage, PipelineContext(run_id=run_id))
