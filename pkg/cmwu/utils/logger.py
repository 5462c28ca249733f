"""
日志工具

所有模块通过 get_logger(__name__) 获取记录器；CLI 入口调用一次
configure_logging 安装输出到 stderr 的处理器。格式中不含时间戳，
保证同一配置的日志输出可复现。
"""

import logging
import sys

ROOT_LOGGER_NAME = "cmwu"
LOG_FORMAT = "%(levelname)s [%(name)s] %(message)s"


def get_logger(name: str) -> logging.Logger:
    """返回模块级记录器"""
    return logging.getLogger(name)


def configure_logging(verbosity: int = 0) -> logging.Logger:
    """
    为 cmwu 根记录器安装唯一的 stderr 处理器

    参数：
        verbosity: -1 只输出警告，0 输出 INFO，>=1 输出 DEBUG

    返回：
        配置好的根记录器
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG

    root = logging.getLogger(ROOT_LOGGER_NAME)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    return root
