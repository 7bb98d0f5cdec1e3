"""
验收流水线
职责: 把每条验收标准实现为一个流水线阶段，执行后渲染 Markdown 报告（实测值与目标并列、含耗时）

数据产物不含时间戳；时间戳只出现在报告中。
"""

import filecmp
import logging
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from django.utils import timezone
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from config.sim_config import SimConfig
from core.constants import ExitCode
from core.machine import bank_of
from core.pipeline import AcceptancePipeline, PipelineContext, StageProcessor, StageResult
from core.utils.artifacts import dumps, unique_filepath
from core.victims import AesKeySchedule, decrypt_block, encrypt_block

from .constants import Scenario
from .runner import run_seed
from .spec import build_spec

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent / 'templates'
REPORT_TEMPLATE = 'experiments/report.md.j2'

# FIPS-197 附录 C.1
FIPS_KEY = bytes.fromhex('000102030405060708090a0b0c0d0e0f')
FIPS_PLAINTEXT = bytes.fromhex('00112233445566778899aabbccddeeff')
FIPS_CIPHERTEXT = bytes.fromhex('69c4e0d86a7b0430d8cdb78070b4c55a')


def _spec_for(context: PipelineContext, scenario: str):
    return build_spec(
        scenario,
        config_path=context.get_metadata('config_path'),
        seed=context.get_metadata('seed', SimConfig.DEFAULT_SEED),
        output_dir=context.get_metadata('output_dir'),
        check=True,
    )


class BankMappingStage(StageProcessor):
    """静态 bank 选择的已知地址"""

    EXPECTED = ((0xc6fc0, 63), (0xc7000, 0))

    def process(self, context: PipelineContext) -> StageResult:
        cfg = _spec_for(context, Scenario.PROFILE).machine
        measured = {f'{addr:#x}': bank_of(addr, cfg).linear for addr, _ in self.EXPECTED}
        ok = all(measured[f'{addr:#x}'] == bank for addr, bank in self.EXPECTED)
        return StageResult(
            success=ok, measured=measured,
            target=', '.join(f'bank_of({addr:#x}) = {bank}' for addr, bank in self.EXPECTED),
        )


class AesCorrectnessStage(StageProcessor):
    """FIPS-197 已知答案与随机往返，与机器配置无关"""

    def __init__(self, stage_name: str, title: str = '', round_trips: int = 1000, **kwargs):
        super().__init__(stage_name, title, **kwargs)
        self.round_trips = round_trips

    def process(self, context: PipelineContext) -> StageResult:
        schedule = AesKeySchedule.expand(FIPS_KEY)
        kat = (encrypt_block(schedule, FIPS_PLAINTEXT) == FIPS_CIPHERTEXT
               and decrypt_block(schedule, FIPS_CIPHERTEXT) == FIPS_PLAINTEXT)
        rng = np.random.default_rng(context.get_metadata('seed', 0))
        failures = 0
        for _ in range(self.round_trips):
            key = bytes(rng.integers(0, 256, 16, dtype=np.uint8).tolist())
            block = bytes(rng.integers(0, 256, 16, dtype=np.uint8).tolist())
            sched = AesKeySchedule.expand(key)
            if decrypt_block(sched, encrypt_block(sched, block)) != block:
                failures += 1
        return StageResult(
            success=kat and failures == 0,
            measured={'known_answer': kat, 'round_trip_failures': failures},
            target=f'known answer matches, 0/{self.round_trips} round-trip failures',
        )


class ScenarioStage(StageProcessor):
    """
    运行一个场景（单种子、带检查），以场景自己的检查结果作为验收结果
    """

    def __init__(self, stage_name: str, title: str, scenario: str, **kwargs):
        super().__init__(stage_name, title, **kwargs)
        self.scenario = scenario

    def process(self, context: PipelineContext) -> StageResult:
        spec = _spec_for(context, self.scenario)
        seed = spec.seeds[0]
        result = run_seed(spec, seed)
        data = {
            'scenario': self.scenario,
            'seed': seed,
            'run_dir': str(spec.output_dir / self.scenario / f'seed-{seed}'),
            'artifacts': result.artifacts,
            'metrics': result.metrics,
        }
        if result.error:
            return StageResult(success=False, error=result.error['error'], data=data,
                               target=self.title)
        return StageResult(
            success=result.passed,
            measured={c['name']: c['measured'] for c in result.checks},
            target='; '.join(f'{c["name"]} {c["target"]}' for c in result.checks),
            data=data,
        )


class DeterminismStage(StageProcessor):
    """
    把已运行过的场景在临时目录中用同一种子重跑，逐字节比较全部数据产物

    前面阶段没有运行过的场景会先在输出目录运行一次。
    """

    def __init__(self, stage_name: str, title: str, scenarios: Sequence[str], **kwargs):
        super().__init__(stage_name, title, **kwargs)
        self.scenarios = list(scenarios)

    def _first_run(self, context: PipelineContext, scenario: str) -> Path:
        for result in context.results.values():
            if result.data.get('scenario') == scenario and result.error is None:
                return Path(result.data['run_dir'])
        spec = _spec_for(context, scenario)
        run_seed(spec, spec.seeds[0])
        return spec.output_dir / scenario / f'seed-{spec.seeds[0]}'

    def process(self, context: PipelineContext) -> StageResult:
        measured: Dict[str, Any] = {}
        for scenario in self.scenarios:
            first = self._first_run(context, scenario)
            with tempfile.TemporaryDirectory(prefix='nuca-rerun-') as tmp:
                spec = _spec_for(context, scenario)
                spec.output_dir = Path(tmp)
                run_seed(spec, spec.seeds[0])
                second = Path(tmp) / scenario / f'seed-{spec.seeds[0]}'
                names = sorted(p.name for p in first.iterdir() if p.is_file())
                rerun_names = sorted(p.name for p in second.iterdir() if p.is_file())
                if names != rerun_names:
                    measured[scenario] = f'file sets differ: {sorted(set(names) ^ set(rerun_names))}'
                    continue
                _, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
                measured[scenario] = 'identical' if not mismatch and not errors else f'differ: {mismatch + errors}'
        return StageResult(
            success=all(v == 'identical' for v in measured.values()),
            measured=measured,
            target='byte-identical artifacts on rerun',
        )


def default_stages() -> List[StageProcessor]:
    """全部验收标准，按编号顺序；耗时预算以秒计"""
    return [
        BankMappingStage('c1-bank-mapping', 'Bank mapping', budget_seconds=1),
        ScenarioStage('c2-latency-separation', 'Toy attack latency separation', Scenario.TOY_ATTACK,
                      budget_seconds=30),
        ScenarioStage('c3-classifier-voting', 'Classifier majority vote', Scenario.CLASSIFIER,
                      budget_seconds=120),
        ScenarioStage('c4-key-extraction', 'AES last-round key extraction', Scenario.AES_ATTACK,
                      budget_seconds=900),
        AesCorrectnessStage('c5-aes-correctness', 'AES correctness', budget_seconds=5),
        ScenarioStage('c6-covert-channel', 'Covert channel', Scenario.COVERT, budget_seconds=120),
        ScenarioStage('c7-prefetchw-timer', 'PREFETCHW timer', Scenario.PREFETCHW_TIMER, budget_seconds=1),
        ScenarioStage('c8-noc-saturation', 'NoC saturation', Scenario.NOC_SWEEP, budget_seconds=300),
        ScenarioStage('c9-defense', 'Delay-to-worst defense', Scenario.DEFENSE, budget_seconds=1200),
        DeterminismStage('c10-determinism', 'Determinism', [Scenario.TOY_ATTACK, Scenario.NOC_SWEEP]),
        ScenarioStage('c11-latency-map', 'Per-tile latency map', Scenario.LATENCY_MAP, budget_seconds=5),
    ]


@dataclass
class AcceptanceReport:
    context: PipelineContext
    report_path: Path
    json_path: Path
    runtime_seconds: float

    @property
    def passed(self) -> bool:
        return self.context.all_passed

    @property
    def exit_code(self) -> int:
        return ExitCode.OK if self.passed else ExitCode.CHECK_FAILED


def render_report(context: PipelineContext, stages: Sequence[StageProcessor], runtime_seconds: float) -> str:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        undefined=StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    rows = []
    for stage in stages:
        result = context.get_result(stage.stage_name)
        if result is None:
            continue
        row = {'name': stage.stage_name, 'title': stage.title, **result.to_dict()}
        budget = stage.budget_seconds
        decryptions = (result.data.get('metrics') or {}).get('timed_decryptions')
        row.update({
            'budget': budget,
            'within_budget': budget is None or result.duration <= budget,
            'timed_decryptions': decryptions,
            'ms_per_decryption': round(1000.0 * result.duration / decryptions, 4) if decryptions else None,
        })
        rows.append(row)
    return env.get_template(REPORT_TEMPLATE).render(
        run_id=context.run_id,
        generated_at=timezone.now().isoformat(timespec='seconds'),
        seed=context.get_metadata('seed'),
        config_path=context.get_metadata('config_path') or 'built-in defaults',
        output_dir=context.get_metadata('output_dir'),
        rows=rows,
        passed=sum(1 for r in rows if r['success']),
        over_budget=[r['name'] for r in rows if not r['within_budget']],
        total=len(rows),
        runtime_seconds=round(runtime_seconds, 3),
    )


def reproduce_all(config_path: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                  output_dir: Optional[Union[str, Path]] = None, only: Optional[Sequence[str]] = None,
                  stop_on_failure: bool = False) -> AcceptanceReport:
    """
    运行全部验收标准并写出报告

    Args:
        config_path: 配置文件或预设名，作用于每个场景
        seed: 种子
        output_dir: 产物根目录
        only: 只运行这些阶段（按阶段名前缀匹配，如 c1、c4）
        stop_on_failure: 某阶段失败后停止
    """
    stages = default_stages()
    if only:
        stages = [s for s in stages if any(s.stage_name.split('-')[0] == o or s.stage_name == o for o in only)]
    out = SimConfig.output_dir(output_dir)
    seed = SimConfig.DEFAULT_SEED if seed is None else int(seed)
    run_id = f'acceptance-seed-{seed}'
    context = PipelineContext(run_id=run_id, metadata={
        'config_path': str(config_path) if config_path else None,
        'seed': seed,
        'output_dir': str(out),
    })

    started = time.perf_counter()
    AcceptancePipeline(stages).execute(run_id, stop_on_failure=stop_on_failure, context=context)
    runtime = time.perf_counter() - started

    reports_dir = out / 'reports'
    stamp = timezone.now().strftime('%Y%m%d-%H%M%S')
    report_path = unique_filepath(reports_dir, f'acceptance-{stamp}.md')
    report_path.write_text(render_report(context, stages, runtime), encoding='utf-8')
    json_path = report_path.with_suffix('.json')
    json_path.write_text(dumps({
        'run_id': run_id,
        'metadata': context.metadata,
        'runtime_seconds': round(runtime, 3),
        'budgets_seconds': {s.stage_name: s.budget_seconds for s in stages},
        'results': {name: r.to_dict() for name, r in context.results.items()},
    }), encoding='utf-8')
    logger.info(f'验收报告: {report_path}')
    return AcceptanceReport(context=context, report_path=report_path, json_path=json_path, runtime_seconds=runtime)
