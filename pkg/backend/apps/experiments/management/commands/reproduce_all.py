"""
重跑全部验收标准并生成报告

用法:
    python manage.py reproduce_all
    python manage.py reproduce_all --config gem5 --seed 1 --only c1 c5 c8
"""

import json

from django.core.management.base import BaseCommand, CommandError

from apps.experiments.acceptance import reproduce_all
from config.sim_config import SimConfig
from core.exceptions import SimulationError
from core.utils.error_handler import exit_code_for, format_error_response
from core.utils.logging_config import LoggerConfig


class Command(BaseCommand):
    help = '运行全部验收标准，输出实测值与目标并列的 Markdown 报告'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='配置文件路径或预设名 (default, gem5)')
        parser.add_argument('--seed', type=int, default=SimConfig.DEFAULT_SEED, help='种子')
        parser.add_argument('--out', help='产物根目录（默认 NUCA_OUTPUT_DIR）')
        parser.add_argument('--only', nargs='+', metavar='STAGE', help='只运行这些标准，如 c1 c4')
        parser.add_argument('--stop-on-failure', action='store_true', help='某项标准失败后停止')
        parser.add_argument('--log-level', default=SimConfig.LOG_LEVEL, help='日志级别')

    def handle(self, *args, **options):
        LoggerConfig.setup_app_loggers(str(SimConfig.LOG_DIR), options['log_level'])
        try:
            report = reproduce_all(
                config_path=options.get('config'),
                seed=options['seed'],
                output_dir=options.get('out'),
                only=options.get('only'),
                stop_on_failure=options['stop_on_failure'],
            )
        except SimulationError as e:
            raise CommandError(json.dumps(format_error_response(e), ensure_ascii=False),
                               returncode=exit_code_for(e))

        for name, result in report.context.results.items():
            status = 'PASS' if result.success else 'FAIL'
            line = f'{status} {name}: measured={result.measured} target={result.target} ({result.duration:.1f}s)'
            self.stdout.write(self.style.SUCCESS(line) if result.success else self.style.ERROR(line))
        self.stdout.write(f'报告: {report.report_path}')

        if not report.passed:
            failed = report.context.failed_stages()
            raise CommandError(f'验收未通过: {", ".join(failed)}', returncode=report.exit_code)
