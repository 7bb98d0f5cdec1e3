"""
开发环境配置
"""

from .base import *

DEBUG = True

# 开发环境同步执行 Celery 任务
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True

LOGGING['root']['level'] = 'INFO'
