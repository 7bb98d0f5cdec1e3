"""
实验规格
职责: 合并内置默认值、配置文件与命令行参数，得到一次运行的完整配置

优先级: 内置默认 < 配置文件 < 命令行参数
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.sim_config import SimConfig
from core.exceptions import ConfigurationError
from core.machine import MachineConfig

from .constants import SCENARIO_DEFAULTS, Scenario
from .exceptions import UnknownScenarioError

logger = logging.getLogger(__name__)

MAX_SEEDS = 10000


def parse_seeds(text: Union[str, int, List[int]]) -> List[int]:
    """
    解析种子列表: "N..M"（含两端）、"a,b,c" 或单个整数

    Raises:
        ConfigurationError: 格式错误、区间为空或种子为负
    """
    if isinstance(text, int):
        seeds = [text]
    elif isinstance(text, (list, tuple)):
        seeds = [int(s) for s in text]
    else:
        text = str(text).strip()
        try:
            if '..' in text:
                start, _, end = text.partition('..')
                lo, hi = int(start), int(end)
                if hi < lo:
                    raise ConfigurationError('seeds', f'区间为空: {text}')
                seeds = list(range(lo, hi + 1))
            else:
                seeds = [int(part) for part in text.split(',') if part.strip()]
        except ValueError:
            raise ConfigurationError('seeds', f'无法解析种子列表: {text}')
    if not seeds:
        raise ConfigurationError('seeds', '种子列表为空')
    if any(s < 0 for s in seeds):
        raise ConfigurationError('seeds', '种子必须非负')
    if len(seeds) > MAX_SEEDS:
        raise ConfigurationError('seeds', f'种子数超过上限 {MAX_SEEDS}')
    return list(dict.fromkeys(seeds))


def _load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = SimConfig.preset_path(str(path))
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as e:
        raise ConfigurationError('config', f'无法读取 {path}: {e}')
    except json.JSONDecodeError as e:
        raise ConfigurationError('config', f'{path} 不是合法 JSON: {e}')
    if not isinstance(data, dict):
        raise ConfigurationError('config', '配置文件必须是 JSON 对象')
    unknown = set(data) - {'machine', 'scenario_params', 'seeds'}
    if unknown:
        raise ConfigurationError(sorted(unknown)[0], '配置文件中的未知顶层字段')
    return data


def _merge_params(scenario: str, *layers: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    defaults = SCENARIO_DEFAULTS.get(scenario, {})
    params = copy.deepcopy(defaults)
    for layer in layers:
        for key, value in (layer or {}).items():
            if key not in defaults:
                raise ConfigurationError(f'scenario_params.{key}', f'场景 {scenario} 没有该参数')
            if value is not None:
                params[key] = value
    return params


@dataclass
class ExperimentSpec:
    """
    一次实验的完整规格

    Attributes:
        scenario: 场景名
        machine: 机器配置（rng_seed 在每个种子上被替换）
        scenario_params: 场景参数
        seeds: 种子列表
        output_dir: 产物根目录
        check: 是否执行验收检查（失败时非零退出）
    """

    scenario: str
    machine: MachineConfig = field(default_factory=MachineConfig)
    scenario_params: Dict[str, Any] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=lambda: [SimConfig.DEFAULT_SEED])
    output_dir: Path = field(default_factory=lambda: SimConfig.output_dir())
    check: bool = False

    def __post_init__(self):
        if self.scenario not in Scenario.ALL:
            raise UnknownScenarioError(self.scenario, Scenario.ALL)
        self.output_dir = Path(self.output_dir)

    def machine_for(self, seed: int) -> MachineConfig:
        return self.machine.replace(rng_seed=int(seed))

    def resolved(self, seed: int) -> Dict[str, Any]:
        """写入每个产物 sidecar 的配置（不含输出目录，使产物与目录无关）"""
        return {
            'scenario': self.scenario,
            'seed': int(seed),
            'machine': self.machine_for(seed).to_dict(),
            'scenario_params': self.scenario_params,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scenario': self.scenario,
            'machine': self.machine.to_dict(),
            'scenario_params': self.scenario_params,
            'seeds': self.seeds,
            'output_dir': str(self.output_dir),
            'check': self.check,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentSpec':
        """Celery 任务参数 -> 规格"""
        return cls(
            scenario=data['scenario'],
            machine=MachineConfig.from_dict(data.get('machine', {})),
            scenario_params=dict(data.get('scenario_params', {})),
            seeds=parse_seeds(data.get('seeds', [SimConfig.DEFAULT_SEED])),
            output_dir=Path(data.get('output_dir') or SimConfig.output_dir()),
            check=bool(data.get('check', False)),
        )


def build_spec(scenario: str, config_path: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
               seeds: Optional[str] = None, output_dir: Optional[Union[str, Path]] = None,
               params: Optional[Dict[str, Any]] = None, machine_overrides: Optional[Dict[str, Any]] = None,
               check: bool = False) -> ExperimentSpec:
    """
    按优先级合并得到实验规格

    Args:
        scenario: 场景名
        config_path: 配置文件路径或预设名（default / gem5）
        seed / seeds: 单个种子或 "N..M"；同时给出时 seeds 优先
        output_dir: 产物根目录，为空时取 NUCA_OUTPUT_DIR
        params: 命令行给出的场景参数（None 值表示未给出）
        machine_overrides: 命令行给出的机器字段

    Raises:
        UnknownScenarioError: 未知场景
        ConfigurationError: 配置无效，指明字段
    """
    if scenario not in Scenario.ALL:
        raise UnknownScenarioError(scenario, Scenario.ALL)

    file_data: Dict[str, Any] = _load_config_file(config_path) if config_path else {}
    machine_data = dict(file_data.get('machine') or {})
    machine_data.update({k: v for k, v in (machine_overrides or {}).items() if v is not None})
    machine = MachineConfig.from_dict(machine_data) if machine_data else MachineConfig()

    file_params = (file_data.get('scenario_params') or {}).get(scenario)
    scenario_params = _merge_params(scenario, file_params, params)

    if seeds is not None:
        seed_list = parse_seeds(seeds)
    elif seed is not None:
        seed_list = parse_seeds(int(seed))
    elif 'seeds' in file_data:
        seed_list = parse_seeds(file_data['seeds'])
    else:
        seed_list = [SimConfig.DEFAULT_SEED]

    spec = ExperimentSpec(
        scenario=scenario,
        machine=machine,
        scenario_params=scenario_params,
        seeds=seed_list,
        output_dir=SimConfig.output_dir(output_dir),
        check=check,
    )
    logger.debug(f'实验规格: {scenario}, 种子 {seed_list}, 配置文件 {config_path or "无"}')
    return spec
