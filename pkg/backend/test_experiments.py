"""
测试实验规格合并、按种子运行、退出码、产物确定性与管理命令
"""

import filecmp
import io
import json
from pathlib import Path

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.experiments.constants import RunStatus, Scenario
from apps.experiments.exceptions import UnknownScenarioError
from apps.experiments.models import ExperimentRun
from apps.experiments.runner import RunReport, SeedResult, run
from apps.experiments.spec import ExperimentSpec, build_spec, parse_seeds
from apps.experiments.tasks import dispatch_seeds
from core.constants import ExitCode
from core.defense import NocSimulator, NocTrafficConfig
from core.exceptions import ConfigurationError
from core.utils.artifacts import read_meta
from core.utils.error_handler import exit_code_for

SMALL_NOC = {'rates': '0.02,0.3', 'sim_cycles': 2000, 'warmup_cycles': 200, 'knee_rate': 0.3}


def test_parse_seeds_forms():
    assert parse_seeds('0..3') == [0, 1, 2, 3]
    assert parse_seeds('3,1,3') == [3, 1]
    assert parse_seeds(7) == [7]
    for bad in ('5..2', 'abc', '', '-1'):
        with pytest.raises(ConfigurationError) as exc:
            parse_seeds(bad)
        assert exc.value.field == 'seeds'


def test_unknown_scenario_is_usage_error():
    with pytest.raises(UnknownScenarioError) as exc:
        build_spec('rowhammer')
    assert exit_code_for(exc.value) == ExitCode.USAGE_ERROR
    assert exit_code_for(ConfigurationError('x', 'bad')) == ExitCode.CONFIG_ERROR


def test_build_spec_precedence(tmp_path):
    spec = build_spec(Scenario.TOY_ATTACK, config_path='gem5', output_dir=tmp_path)
    assert spec.scenario_params['reset'] == 'sweep'

    spec = build_spec(Scenario.TOY_ATTACK, config_path='gem5', output_dir=tmp_path,
                      params={'reset': 'flush', 'n_bits': None})
    assert spec.scenario_params['reset'] == 'flush'
    assert spec.scenario_params['n_bits'] == 10000

    with pytest.raises(ConfigurationError) as exc:
        build_spec(Scenario.NOC_SWEEP, params={'trials': 5})
    assert exc.value.field == 'scenario_params.trials'


def test_build_spec_config_file_and_overrides(tmp_path):
    config = tmp_path / 'machine.json'
    config.write_text(json.dumps({'machine': {'lat_per_hop': 5}, 'seeds': '2..4'}), encoding='utf-8')
    spec = build_spec(Scenario.PREFETCHW_TIMER, config_path=config, output_dir=tmp_path,
                      machine_overrides={'lat_router': 2})
    assert spec.machine.lat_per_hop == 5
    assert spec.machine.lat_router == 2
    assert spec.seeds == [2, 3, 4]
    assert build_spec(Scenario.PREFETCHW_TIMER, config_path=config, seed=9, output_dir=tmp_path).seeds == [9]

    with pytest.raises(ConfigurationError) as exc:
        build_spec(Scenario.PREFETCHW_TIMER, machine_overrides={'lat_per_hop': 0})
    assert exc.value.field == 'lat_per_hop'

    config.write_text(json.dumps({'machines': {}}), encoding='utf-8')
    with pytest.raises(ConfigurationError) as exc:
        build_spec(Scenario.PREFETCHW_TIMER, config_path=config)
    assert exc.value.field == 'machines'


def test_resolved_config_excludes_output_dir(tmp_path):
    spec = build_spec(Scenario.NOC_SWEEP, seeds='1,2', output_dir=tmp_path, params=SMALL_NOC)
    resolved = spec.resolved(2)
    assert 'output_dir' not in resolved
    assert resolved['machine']['rng_seed'] == 2
    assert spec.machine_for(2).rng_seed == 2

    restored = ExperimentSpec.from_dict(spec.to_dict())
    assert restored.to_dict() == spec.to_dict()


def _seed(status, seed=0, error=None):
    return SeedResult(seed=seed, status=status, error=error)


def test_run_report_exit_codes(tmp_path):
    spec = build_spec(Scenario.NOC_SWEEP, output_dir=tmp_path, check=True)
    config_error = {'error': 'bad', 'exit_code': ExitCode.CONFIG_ERROR}

    assert RunReport(spec, [_seed(RunStatus.PASSED)]).exit_code == ExitCode.OK
    assert RunReport(spec, [_seed(RunStatus.PASSED), _seed(RunStatus.FAILED, 1)]).exit_code == ExitCode.CHECK_FAILED
    assert RunReport(spec, [_seed(RunStatus.ERROR, 0, config_error),
                            _seed(RunStatus.ERROR, 1, {'error': 'x', 'exit_code': 6})]).exit_code == 3
    assert RunReport(spec, [_seed(RunStatus.PASSED),
                            _seed(RunStatus.ERROR, 1, config_error)]).exit_code == ExitCode.PARTIAL

    spec.check = False
    assert RunReport(spec, [_seed(RunStatus.FAILED)]).exit_code == ExitCode.OK


@pytest.mark.django_db
def test_prefetchw_run_writes_artifacts_and_record(tmp_path):
    spec = build_spec(Scenario.PREFETCHW_TIMER, seed=3, output_dir=tmp_path, params={'samples': 50}, check=True)
    report = run(spec)
    assert report.exit_code == ExitCode.OK
    result = report.results[0]
    assert result.status == RunStatus.PASSED
    assert result.metrics['after_write_mean'] > 150
    assert result.metrics['repeat_max'] < 100

    run_dir = tmp_path / Scenario.PREFETCHW_TIMER / 'seed-3'
    assert (run_dir / 'probe_latency.csv').exists()
    assert (run_dir / 'result.json').exists()
    meta = read_meta(run_dir / 'probe_latency.csv')
    assert meta['seed'] == 3
    assert meta['config'] == spec.resolved(3)

    record = ExperimentRun.objects.get(scenario=Scenario.PREFETCHW_TIMER, seed=3)
    assert record.passed
    assert record.completed_at is not None
    assert sorted(record.artifacts) == sorted(result.artifacts)


@pytest.mark.django_db
def test_failed_check_sets_check_failed_exit_code(tmp_path):
    # 所有权转移与跳数都很便宜时，远端写之后的探针低于阈值
    spec = build_spec(
        Scenario.PREFETCHW_TIMER, output_dir=tmp_path, params={'samples': 20}, check=True,
        machine_overrides={'lat_per_hop': 1, 'lat_router': 1, 'lat_ownership_transfer': 1},
    )
    report = run(spec)
    assert report.results[0].status == RunStatus.FAILED
    assert report.exit_code == ExitCode.CHECK_FAILED


@pytest.mark.django_db
def test_scenario_error_is_captured_per_seed(tmp_path):
    spec = build_spec(Scenario.NOC_SWEEP, seeds='0,1', output_dir=tmp_path, params={'rates': 'fast'})
    report = run(spec)
    assert [r.status for r in report.results] == [RunStatus.ERROR, RunStatus.ERROR]
    assert report.results[0].error['exit_code'] == ExitCode.CONFIG_ERROR
    assert report.exit_code == ExitCode.CONFIG_ERROR
    assert ExperimentRun.objects.filter(status=RunStatus.ERROR).count() == 2


@pytest.mark.django_db
def test_rerun_produces_byte_identical_artifacts(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    for out in (first, second):
        run(build_spec(Scenario.NOC_SWEEP, seed=4, output_dir=out, params=SMALL_NOC))
    run_dir = Path(Scenario.NOC_SWEEP) / 'seed-4'
    names = sorted(p.name for p in (first / run_dir).iterdir())
    assert 'noc_sweep.csv' in names
    match, mismatch, errors = filecmp.cmpfiles(first / run_dir, second / run_dir, names, shallow=False)
    assert mismatch == [] and errors == []


@pytest.mark.django_db
def test_run_experiment_command(tmp_path):
    out = io.StringIO()
    call_command('run_experiment', Scenario.PREFETCHW_TIMER, '--out', str(tmp_path), '--samples', '30',
                 '--seed', '1', '--check', stdout=out, no_color=True)
    lines = [json.loads(line) for line in out.getvalue().strip().splitlines()]
    assert lines[0]['seed'] == 1
    assert lines[0]['status'] == RunStatus.PASSED
    assert lines[-1]['exit_code'] == ExitCode.OK


def test_run_experiment_command_usage_errors(tmp_path):
    with pytest.raises(CommandError) as exc:
        call_command('run_experiment', 'rowhammer', '--out', str(tmp_path))
    assert exc.value.returncode == ExitCode.USAGE_ERROR

    with pytest.raises(CommandError) as exc:
        call_command('run_experiment', Scenario.NOC_SWEEP, '--trials', '5', '--out', str(tmp_path))
    assert exc.value.returncode == ExitCode.USAGE_ERROR

    with pytest.raises(CommandError) as exc:
        call_command('run_experiment', Scenario.NOC_SWEEP, '--set', 'nope=1', '--out', str(tmp_path))
    assert exc.value.returncode == ExitCode.CONFIG_ERROR


@pytest.mark.django_db
def test_dispatch_seeds_collects_task_results(tmp_path):
    spec = build_spec(Scenario.PREFETCHW_TIMER, seeds='0,1', output_dir=tmp_path, params={'samples': 20})
    report = dispatch_seeds(spec, timeout=60)
    assert [r.seed for r in report.results] == [0, 1]
    assert all(r.status == RunStatus.PASSED for r in report.results)
    assert report.exit_code == ExitCode.OK


def test_attack_scenarios_train_on_a_hundred_thousand_samples():
    for name in (Scenario.CLASSIFIER, Scenario.AES_ATTACK, Scenario.DEFENSE):
        assert build_spec(name).scenario_params['training_samples'] == 100000


def test_defense_defaults_include_a_saturated_load_rate():
    params = build_spec(Scenario.DEFENSE).scenario_params
    assert params['load_rates'][0] == 0.0
    noc = NocTrafficConfig(injection_rate=max(params['load_rates']), sim_cycles=4000, warmup_cycles=400)
    assert NocSimulator(noc).run()[0].saturated
    assert params['max_load_accuracy'] == 0.65


@pytest.mark.django_db
def test_latency_map_run_writes_per_tile_csv(tmp_path):
    spec = build_spec(Scenario.LATENCY_MAP, seed=2, output_dir=tmp_path, params={'samples': 30, 'home_tile': 9},
                      check=True)
    report = run(spec)
    result = report.results[0]
    assert result.status == RunStatus.PASSED
    assert report.exit_code == ExitCode.OK
    assert result.metrics['home_tile'] == 9

    by_hops = result.metrics['latency_by_path_hops']
    means = [by_hops[h] for h in sorted(by_hops)]
    assert means == sorted(means)

    csv = (tmp_path / Scenario.LATENCY_MAP / 'seed-2' / 'latency_map.csv').read_text().splitlines()
    assert csv[0].startswith('tile,x,y,hops_to_cha,hops_from_home,path_hops,mean_latency')
    assert len(csv) == 1 + 64


@pytest.mark.django_db
def test_covert_bandwidth_is_checked_against_fixed_floor(tmp_path):
    spec = build_spec(Scenario.COVERT, seed=1, output_dir=tmp_path, params={'bits': 800, 'pair_samples': 50})
    result = run(spec).results[0]
    checks = {c['name']: c for c in result.checks}
    assert 'bandwidth_identity' not in checks
    assert checks['bandwidth_floor']['target'] == '>= 205000 bps'
    assert checks['bandwidth_floor']['passed'] == (result.metrics['bandwidth_bps'] >= 205000)
    assert result.metrics['bandwidth_identity_error'] < 1e-6


@pytest.mark.django_db
def test_defense_retrains_on_defended_machine(tmp_path):
    params = {
        'samples': 200, 'pair_samples': 50, 'n_bits': 200, 'keys': 2, 'trials': 20, 'training_samples': 400,
        'rounds': 5, 'votes': 3, 'load_rates': [0.0, 0.3], 'load_bits': 200,
    }
    result = run(build_spec(Scenario.DEFENSE, seed=5, output_dir=tmp_path, params=params)).results[0]
    assert result.status in (RunStatus.PASSED, RunStatus.FAILED)
    metrics = result.metrics
    assert metrics['classifier_after'] in ('trained', 'rejected')
    assert metrics['keys_recovered_after'] == 0
    assert metrics['timed_decryptions'] >= params['training_samples']

    checks = {c['name']: c for c in result.checks}
    assert checks['vote_uniformity']['passed']
    assert checks['vote_uniformity']['target'] == '> 0.05'
    assert 'key_byte_accuracy_after' in checks
    assert checks['accuracy_under_saturation']['passed']
    assert set(metrics['load_accuracy']) == {'0', '0.3'}
    assert metrics['load_accuracy']['0'] > metrics['load_accuracy_at_max_rate']
