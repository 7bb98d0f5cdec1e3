"""
实验相关的Celery任务
职责: 每个 (场景, 种子) 一个任务，种子扫描以 group 分发；每个 worker 使用自己的机器实例
"""

import logging
from typing import Any, Dict, List, Optional

from celery import group

from config.celery import app
from config.sim_config import SimConfig

from .runner import RunReport, SeedResult, run_seed
from .spec import ExperimentSpec

logger = logging.getLogger(__name__)


@app.task(
    bind=True,
    max_retries=0,
    acks_late=True,
    reject_on_worker_lost=True,
    soft_time_limit=SimConfig.TASK_SOFT_TIME_LIMIT,
    time_limit=SimConfig.TASK_TIME_LIMIT,
)
def run_seed_task(self, spec_data: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """
    执行一个 (场景, 种子)

    Args:
        self: Celery任务实例
        spec_data: ExperimentSpec.to_dict()
        seed: 种子

    Returns:
        SeedResult.to_dict()
    """
    spec = ExperimentSpec.from_dict(spec_data)
    logger.info(f'开始执行场景任务: {spec.scenario}, 种子 {seed}, 任务ID: {self.request.id}')
    return run_seed(spec, seed, task_id=self.request.id or '').to_dict()


def dispatch_seeds(spec: ExperimentSpec, timeout: Optional[float] = None) -> RunReport:
    """
    以 group 并行执行所有种子并等待结果

    Args:
        spec: 实验规格
        timeout: 等待超时（秒），默认取任务硬超时
    """
    data = spec.to_dict()
    job = group(run_seed_task.s(data, seed) for seed in spec.seeds)
    result = job.apply_async()
    logger.info(f'已分发 {len(spec.seeds)} 个种子任务: {spec.scenario}')
    payloads: List[Dict[str, Any]] = result.get(
        timeout=timeout or SimConfig.TASK_TIME_LIMIT, disable_sync_subtasks=False,
    )
    report = RunReport(spec=spec)
    report.results = [SeedResult.from_dict(p) for p in payloads]
    return report
