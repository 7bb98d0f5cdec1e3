"""验收流水线模块"""

from .base import (
    PipelineContext,
    StageResult,
    StageProcessor,
    ValidationError,
)
from .orchestrator import AcceptancePipeline

__all__ = [
    'PipelineContext',
    'StageResult',
    'StageProcessor',
    'ValidationError',
    'AcceptancePipeline',
]
