"""Django配置初始化包"""
from .base import *
