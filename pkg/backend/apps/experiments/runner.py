"""
实验运行器
职责: 按种子执行场景、写 result.json、记录 ExperimentRun，并汇总退出码
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from django.db import DatabaseError
from django.utils import timezone

from core.constants import ExitCode
from core.utils.artifacts import ArtifactStore
from core.utils.error_handler import ErrorContext, exit_code_for, format_error_response
from core.utils.logging_config import StructuredLogger, performance_logger

from .constants import RunStatus
from .models import ExperimentRun
from .services import ScenarioContext, get_scenario
from .spec import ExperimentSpec

logger = logging.getLogger(__name__)
events = StructuredLogger()


@dataclass
class SeedResult:
    """一个种子的运行结果"""

    seed: int
    status: str
    metrics: Dict[str, Any] = field(default_factory=dict)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    runtime_seconds: float = 0.0
    error: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.status == RunStatus.PASSED

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'status': self.status,
            'metrics': self.metrics,
            'checks': self.checks,
            'artifacts': self.artifacts,
            'runtime_seconds': round(self.runtime_seconds, 3),
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SeedResult':
        return cls(**{k: data.get(k) for k in (
            'seed', 'status', 'metrics', 'checks', 'artifacts', 'runtime_seconds', 'error',
        )})


@dataclass
class RunReport:
    """一个规格在所有种子上的结果"""

    spec: ExperimentSpec
    results: List[SeedResult] = field(default_factory=list)

    @property
    def errors(self) -> List[SeedResult]:
        return [r for r in self.results if r.status == RunStatus.ERROR]

    @property
    def exit_code(self) -> int:
        """
        全部出错: 第一个错误对应的退出码；部分出错: PARTIAL；
        --check 下任一检查未通过: CHECK_FAILED
        """
        errors = self.errors
        if errors and len(errors) == len(self.results):
            return errors[0].error.get('exit_code', ExitCode.SIMULATION_ERROR)
        if errors:
            return ExitCode.PARTIAL
        if self.spec.check and any(r.status == RunStatus.FAILED for r in self.results):
            return ExitCode.CHECK_FAILED
        return ExitCode.OK

    def summary(self) -> Dict[str, Any]:
        return {
            'scenario': self.spec.scenario,
            'seeds': [r.seed for r in self.results],
            'passed': sum(1 for r in self.results if r.passed),
            'failed': sum(1 for r in self.results if r.status == RunStatus.FAILED),
            'errors': len(self.errors),
            'exit_code': self.exit_code,
        }


def _save_run(run: Optional[ExperimentRun], **fields) -> Optional[ExperimentRun]:
    """写运行记录；数据库不可用时只告警，不影响产物"""
    try:
        if run is None:
            return ExperimentRun.objects.create(**fields)
        for key, value in fields.items():
            setattr(run, key, value)
        run.save()
        return run
    except DatabaseError as e:
        logger.warning(f'运行记录写入失败（是否已执行 migrate?）: {e}')
        return run


def run_seed(spec: ExperimentSpec, seed: int, task_id: str = '') -> SeedResult:
    """
    执行一个 (场景, 种子)

    Returns:
        SeedResult；异常被捕获并转换为 ERROR 状态
    """
    func = get_scenario(spec.scenario)
    resolved = spec.resolved(seed)
    store = ArtifactStore(spec.output_dir, spec.scenario, seed, meta=resolved)
    run = _save_run(None, scenario=spec.scenario, seed=seed, config=resolved,
                    status=RunStatus.RUNNING, task_id=task_id)

    events.log_scenario_start(spec.scenario, seed, output_dir=str(store.run_dir))
    started = time.perf_counter()
    result = SeedResult(seed=seed, status=RunStatus.ERROR)

    with ErrorContext(f'{spec.scenario} 种子 {seed}', raise_on_error=False) as ctx:
        outcome = func(ScenarioContext(spec=spec, seed=seed, store=store))
        result.metrics = outcome.metrics
        result.checks = [c.to_dict() for c in outcome.checks]
        result.status = RunStatus.PASSED if outcome.passed else RunStatus.FAILED
        store.write_json('result', {
            'scenario': spec.scenario,
            'seed': seed,
            'metrics': result.metrics,
            'checks': result.checks,
            'passed': outcome.passed,
        })

    result.runtime_seconds = time.perf_counter() - started
    result.artifacts = store.relative_paths()
    if ctx.error is not None:
        result.error = format_error_response(ctx.error)
        result.error['exit_code'] = exit_code_for(ctx.error)
        events.log_error(type(ctx.error).__name__, str(ctx.error), scenario=spec.scenario, seed=seed)

    _save_run(
        run, status=result.status, metrics=result.metrics, checks=result.checks,
        artifacts=result.artifacts, runtime_seconds=result.runtime_seconds,
        error_message=result.error['error'] if result.error else '', completed_at=timezone.now(),
    )
    for check in result.checks:
        events.log_check(f'{spec.scenario}:{check["name"]}', check['passed'], check['measured'], check['target'])
    events.log_scenario_finish(spec.scenario, seed, result.status, result.runtime_seconds)
    performance_logger.log_task_execution(
        f'{spec.scenario}:seed-{seed}', result.runtime_seconds,
        success=result.status != RunStatus.ERROR, error=result.error['error'] if result.error else None,
    )
    return result


def run(spec: ExperimentSpec) -> RunReport:
    """在所有种子上顺序执行场景"""
    logger.info(f'运行场景 {spec.scenario}: 种子 {spec.seeds}, 输出 {spec.output_dir}')
    report = RunReport(spec=spec)
    for seed in spec.seeds:
        report.results.append(run_seed(spec, seed))
    logger.info(f'场景 {spec.scenario} 完成: {report.summary()}')
    return report
