"""
工具函数包

日志配置、产物格式版本与命令行错误处理。
"""

from .error_handler import ErrorHandler, ExitCode
from .logger import configure_logging, get_logger

__all__ = ['ErrorHandler', 'ExitCode', 'configure_logging', 'get_logger']
