"""
实验运行领域模型
"""

from django.db import models

from .constants import RunStatus, Scenario


class ExperimentRun(models.Model):
    """
    一次 (场景, 种子) 运行记录
    职责: 保存已解析配置、指标、检查结果、耗时与产物路径
    """

    scenario = models.CharField('场景', max_length=32, choices=Scenario.CHOICES)
    seed = models.BigIntegerField('种子', default=0)
    config = models.JSONField('已解析配置', default=dict)

    status = models.CharField('状态', max_length=20, choices=RunStatus.CHOICES, default=RunStatus.PENDING)
    metrics = models.JSONField('指标', default=dict, blank=True)
    checks = models.JSONField('检查结果', default=list, blank=True)
    artifacts = models.JSONField('产物路径', default=list, blank=True)
    runtime_seconds = models.FloatField('耗时(秒)', null=True, blank=True)
    error_message = models.TextField('错误信息', blank=True)
    task_id = models.CharField('Celery任务ID', max_length=255, blank=True)

    created_at = models.DateTimeField('创建时间', auto_now_add=True)
    completed_at = models.DateTimeField('完成时间', null=True, blank=True)

    class Meta:
        db_table = 'experiment_runs'
        verbose_name = '实验运行'
        verbose_name_plural = '实验运行'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['scenario', 'seed', '-created_at'], name='experiment_scenario_seed_idx'),
        ]

    def __str__(self):
        return f'{self.scenario} seed={self.seed} ({self.status})'

    @property
    def passed(self) -> bool:
        return self.status == RunStatus.PASSED
