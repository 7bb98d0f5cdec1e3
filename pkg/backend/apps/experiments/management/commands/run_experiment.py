"""
运行一个实验场景

用法:
    python manage.py run_experiment aes-attack --trials 4000 --keys 20 --check
    python manage.py run_experiment noc-sweep --rates 0.01:0.2:0.01
    python manage.py run_experiment toy-attack --config gem5 --seeds 0..4 --parallel
"""

import json

from django.core.management.base import BaseCommand, CommandError

from apps.experiments.constants import SCENARIO_DEFAULTS, Scenario
from apps.experiments.exceptions import ExperimentUsageError
from apps.experiments.runner import run
from apps.experiments.spec import build_spec
from apps.experiments.tasks import dispatch_seeds
from config.sim_config import SimConfig
from core.constants import ExitCode
from core.exceptions import SimulationError
from core.utils.error_handler import exit_code_for, format_error_response
from core.utils.logging_config import LoggerConfig

# 命令行参数 -> 场景参数名（只对拥有该参数的场景有效）
SCENARIO_FLAGS = {
    'trials': ('--trials', int, '每个密钥的试验数 (aes-attack, defense)'),
    'keys': ('--keys', int, '随机受害者密钥数 (aes-attack, defense)'),
    'votes': ('--votes', int, '每次试验的表决样本数 (aes-attack, defense)'),
    'near_lines': ('--near-lines', int, 'Td4 的近行数 1..3'),
    'timer_method': ('--timer-method', str, 'shared-poll 或 prefetchw'),
    'training_samples': ('--training-samples', int, '分类器训练样本数'),
    'heldout_trials': ('--heldout-trials', int, '分类器留出试验数 (classifier)'),
    'rates': ('--rates', str, "注入率 'start:stop:step' 或逗号列表 (noc-sweep)"),
    'bits': ('--bits', int, '隐蔽信道发送位数 (covert)'),
    'samples_per_bit': ('--samples-per-bit', int, '隐蔽信道每位访问次数 (covert)'),
    'n_bits': ('--n-bits', int, '玩具攻击秘密位数 (toy-attack, defense)'),
    'reset': ('--reset', str, '玩具攻击 L1 复位方式 flush 或 sweep (toy-attack)'),
    'samples': ('--samples', int, '每地址/每类样本数 (profile, defense, prefetchw-timer, latency-map)'),
    'home_tile': ('--home-tile', int, '被测行驻留的 LLC bank 所在 tile (latency-map)'),
    'candidates': ('--candidates', int, '画像候选行数 (profile)'),
    'mode': ('--mode', str, '防御模式 off / delay_to_worst / delay_to_target (defense)'),
    'target_latency': ('--target-latency', int, 'delay_to_target 的目标延迟 (defense)'),
}


def _parse_assignments(items, field: str):
    """key=value 列表，value 按 JSON 解析，失败时作为字符串"""
    result = {}
    for item in items or ():
        key, sep, raw = item.partition('=')
        if not sep or not key:
            raise ExperimentUsageError(f'{field} 需要 key=value 形式: {item}', field=field)
        try:
            result[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            result[key.strip()] = raw
    return result


class Command(BaseCommand):
    help = f'运行实验场景并写出 CSV/JSON 产物。场景: {", ".join(Scenario.ALL)}'

    def add_arguments(self, parser):
        parser.add_argument('scenario', help=f'场景名: {", ".join(Scenario.ALL)}')
        parser.add_argument('--config', help='配置文件路径或预设名 (default, gem5)')
        parser.add_argument('--seed', type=int, help='单个种子')
        parser.add_argument('--seeds', help="种子区间 'N..M' 或逗号列表")
        parser.add_argument('--out', help='产物根目录（默认 NUCA_OUTPUT_DIR）')
        parser.add_argument('--check', action='store_true', help='执行验收检查，未通过时非零退出')
        parser.add_argument('--parallel', action='store_true', help='通过 Celery 并行执行各种子')
        parser.add_argument('--set', dest='param_set', action='append', metavar='KEY=VALUE',
                            help='设置任意场景参数（可重复）')
        parser.add_argument('--machine-set', action='append', metavar='KEY=VALUE',
                            help='覆盖机器配置字段（可重复）')
        parser.add_argument('--log-level', default=SimConfig.LOG_LEVEL, help='日志级别')
        for name, (flag, kind, text) in SCENARIO_FLAGS.items():
            parser.add_argument(flag, dest=name, type=kind, help=text)

    def handle(self, *args, **options):
        LoggerConfig.setup_app_loggers(str(SimConfig.LOG_DIR), options['log_level'])
        scenario = options['scenario']
        try:
            params = self._scenario_params(scenario, options)
            spec = build_spec(
                scenario,
                config_path=options.get('config'),
                seed=options.get('seed'),
                seeds=options.get('seeds'),
                output_dir=options.get('out'),
                params=params,
                machine_overrides=_parse_assignments(options.get('machine_set'), 'machine-set'),
                check=options['check'],
            )
            report = dispatch_seeds(spec) if options['parallel'] else run(spec)
        except SimulationError as e:
            error = format_error_response(e)
            raise CommandError(json.dumps(error, ensure_ascii=False), returncode=exit_code_for(e))

        for result in report.results:
            line = json.dumps(
                {'seed': result.seed, 'status': result.status, 'checks': result.checks,
                 'runtime_seconds': round(result.runtime_seconds, 3)},
                ensure_ascii=False, default=str,
            )
            self.stdout.write(self.style.SUCCESS(line) if result.status != 'error' else self.style.ERROR(line))
        summary = report.summary()
        self.stdout.write(json.dumps(summary, ensure_ascii=False))

        code = report.exit_code
        if code != ExitCode.OK:
            messages = [r.error['error'] for r in report.errors]
            raise CommandError(f'{scenario} 退出码 {code}: {messages or "验收检查未通过"}', returncode=code)

    @staticmethod
    def _scenario_params(scenario: str, options):
        if scenario not in Scenario.ALL:
            return {}
        defaults = SCENARIO_DEFAULTS.get(scenario, {})
        params = {}
        for name, (flag, _, _) in SCENARIO_FLAGS.items():
            value = options.get(name)
            if value is None:
                continue
            if name not in defaults:
                raise ExperimentUsageError(f'参数 {flag} 不适用于场景 {scenario}', field=flag)
            params[name] = value
        params.update(_parse_assignments(options.get('param_set'), 'set'))
        return params
