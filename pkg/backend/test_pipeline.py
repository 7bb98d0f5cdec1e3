"""
测试验收流水线编排与 reproduce_all 报告
"""

import io
import json

import pytest
from django.core.management import call_command

from apps.experiments.acceptance import default_stages, render_report, reproduce_all
from core.pipeline import AcceptancePipeline, PipelineContext, StageProcessor, StageResult
from core.utils.artifacts import ArtifactStore, read_meta, unique_filepath


class FixedStage(StageProcessor):
    def __init__(self, stage_name: str, success: bool = True):
        super().__init__(stage_name, stage_name.title())
        self.success = success
        self.calls = 0

    def process(self, context: PipelineContext) -> StageResult:
        self.calls += 1
        return StageResult(success=self.success, measured=self.calls, target='fixed')


class CostedStage(StageProcessor):
    def process(self, context: PipelineContext) -> StageResult:
        return StageResult(success=True, measured=1, target='fixed', data={'metrics': {'timed_decryptions': 2000}})


class BrokenStage(StageProcessor):
    def process(self, context: PipelineContext) -> StageResult:
        raise RuntimeError('boom')


def test_duplicate_stage_names_rejected():
    with pytest.raises(ValueError):
        AcceptancePipeline([FixedStage('a'), FixedStage('a')])


def test_stage_exception_becomes_failed_result():
    pipeline = AcceptancePipeline([FixedStage('a'), BrokenStage('b'), FixedStage('c')])
    context = pipeline.execute('run-1')
    assert list(context.results) == ['a', 'b', 'c']
    assert context.failed_stages() == ['b']
    assert 'boom' in context.get_result('b').error
    assert not context.all_passed
    assert all(r.duration >= 0 for r in context.results.values())


def test_stop_on_failure_skips_remaining_stages():
    last = FixedStage('c')
    context = AcceptancePipeline([FixedStage('a'), FixedStage('b', success=False), last]).execute(
        'run-2', stop_on_failure=True,
    )
    assert list(context.results) == ['a', 'b']
    assert last.calls == 0


def test_execute_single_stage():
    pipeline = AcceptancePipeline([FixedStage('a')])
    assert pipeline.execute_stage('run-3', 'a').success
    assert not pipeline.execute_stage('run-3', 'missing').success


def test_default_stages_cover_all_criteria():
    names = [s.stage_name.split('-')[0] for s in default_stages()]
    assert names == [f'c{k}' for k in range(1, 12)]
    assert all(s.budget_seconds for s in default_stages() if not s.stage_name.startswith('c10'))


def test_report_lists_budget_overruns_and_decryption_cost():
    stages = [CostedStage('slow', 'Slow', budget_seconds=1), FixedStage('quick')]
    context = AcceptancePipeline(stages).execute('run-4')
    context.get_result('slow').duration = 4.0
    text = render_report(context, stages, runtime_seconds=4.0)
    assert 'Over runtime budget: slow' in text
    assert '| 1 (over) |' in text
    assert '## Simulation cost' in text
    assert '| slow | 2000 | 4.0 | 2.0 |' in text


def test_artifact_store_writes_sidecars(tmp_path):
    store = ArtifactStore(tmp_path, 'profile', 2, meta={'seed': 2})
    path = store.write_json('result', {'b': 1, 'a': 2})
    assert path.read_text(encoding='utf-8').index('"a"') < path.read_text(encoding='utf-8').index('"b"')
    assert read_meta(path)['config'] == {'seed': 2}
    assert store.relative_paths() == ['profile/seed-2/result.json']

    first = unique_filepath(tmp_path, 'report.md')
    first.write_text('x', encoding='utf-8')
    assert unique_filepath(tmp_path, 'report.md').name == 'report_1.md'


@pytest.mark.django_db
def test_reproduce_all_writes_report(tmp_path):
    report = reproduce_all(seed=0, output_dir=tmp_path, only=['c1', 'c5'])
    assert report.passed
    assert report.exit_code == 0
    assert set(report.context.results) == {'c1-bank-mapping', 'c5-aes-correctness'}
    text = report.report_path.read_text(encoding='utf-8')
    assert 'c1-bank-mapping' in text
    data = json.loads(report.json_path.read_text(encoding='utf-8'))
    assert data['results']['c5-aes-correctness']['success'] is True


@pytest.mark.django_db
def test_reproduce_all_command(tmp_path):
    out = io.StringIO()
    call_command('reproduce_all', '--out', str(tmp_path), '--only', 'c1', stdout=out, no_color=True)
    assert 'c1-bank-mapping' in out.getvalue()
    assert list((tmp_path / 'reports').glob('acceptance-*.md'))
