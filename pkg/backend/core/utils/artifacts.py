"""
实验产物存储
职责: 把曲线写成 CSV、标量结果与模型写成 JSON，每个产物旁写 <name>.meta.json 记录完整配置与种子

数据文件内容只由配置与种子决定（不含时间戳），同一配置重跑得到逐字节相同的文件。
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

META_SUFFIX = '.meta.json'


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f'无法序列化为 JSON: {type(value).__name__}')


def dumps(data: Any) -> str:
    """确定性的 JSON 文本: 键排序、固定缩进、结尾换行"""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + '\n'


class ArtifactStore:
    """
    产物目录

    目录结构:
        <base_dir>/<scenario>/seed-<seed>/
            latency_profile.csv
            latency_profile.csv.meta.json
            result.json
            result.json.meta.json

    Args:
        base_dir: 输出根目录
        scenario: 场景名
        seed: 种子
        meta: 写入每个 sidecar 的公共元数据（已解析的配置）
    """

    def __init__(self, base_dir: Union[str, Path], scenario: str, seed: int,
                 meta: Optional[Dict[str, Any]] = None):
        self.base_dir = Path(base_dir)
        self.scenario = scenario
        self.seed = seed
        self.meta = dict(meta or {})
        self.run_dir = self.base_dir / scenario / f'seed-{seed}'
        self.written: List[Path] = []

    def _prepare(self, filename: str) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        return self.run_dir / filename

    def _write_meta(self, path: Path, extra: Optional[Dict[str, Any]]):
        sidecar = {
            'artifact': path.name,
            'scenario': self.scenario,
            'seed': self.seed,
            'config': self.meta,
        }
        if extra:
            sidecar['extra'] = extra
        meta_path = path.with_name(path.name + META_SUFFIX)
        meta_path.write_text(dumps(sidecar), encoding='utf-8')

    def write_csv(self, name: str, frame: pd.DataFrame, extra_meta: Optional[Dict[str, Any]] = None) -> Path:
        """写 CSV（浮点固定 6 位小数、\\n 换行），返回路径"""
        path = self._prepare(name if name.endswith('.csv') else f'{name}.csv')
        frame.to_csv(path, index=False, float_format='%.6f', lineterminator='\n')
        self._write_meta(path, extra_meta)
        self.written.append(path)
        logger.debug(f'写入 CSV 产物: {path} ({len(frame)} 行)')
        return path

    def write_json(self, name: str, data: Any, extra_meta: Optional[Dict[str, Any]] = None) -> Path:
        path = self._prepare(name if name.endswith('.json') else f'{name}.json')
        path.write_text(dumps(data), encoding='utf-8')
        self._write_meta(path, extra_meta)
        self.written.append(path)
        logger.debug(f'写入 JSON 产物: {path}')
        return path

    def relative_paths(self) -> List[str]:
        return [str(p.relative_to(self.base_dir)) for p in self.written]


def read_meta(path: Union[str, Path]) -> Dict[str, Any]:
    """读取产物的 sidecar"""
    path = Path(path)
    return json.loads(path.with_name(path.name + META_SUFFIX).read_text(encoding='utf-8'))


def unique_filepath(directory: Union[str, Path], filename: str) -> Path:
    """
    目录下不重名的文件路径（已存在时添加后缀 _1, _2, ...）

    只用于带时间戳的报告；数据产物总是覆盖写入。
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem, dot, ext = filename.rpartition('.')
    if not dot:
        stem, ext = filename, ''
    suffix = f'.{ext}' if ext else ''
    for counter in range(1001):
        candidate = directory / (f'{stem}{suffix}' if counter == 0 else f'{stem}_{counter}{suffix}')
        if not candidate.exists():
            return candidate
    raise ValueError(f'文件名重复次数过多: {filename}')
