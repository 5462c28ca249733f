"""
统一错误处理模块

命令行入口的每个子命令都用 ErrorHandler.handle_command_error 包装：库内异常
被转换为一条诊断日志和对应的退出码，不把堆栈抛给用户。

使用示例：
    from cmwu.utils.error_handler import ErrorHandler, ExitCode

    @ErrorHandler.handle_command_error("运行")
    def cmd_run(args) -> int:
        ...
        return ExitCode.OK
"""

from enum import IntEnum
from functools import wraps

from pydantic import ValidationError

from cmwu.errors import (
    CmwuError,
    ConfigError,
    DomainError,
    GameFileError,
    GameValidationError,
    InputError,
    ProtocolError,
    ShapeError,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)


class ExitCode(IntEnum):
    OK = 0
    PROPERTY_FAILURE = 1
    USAGE = 2
    NONCONVERGED = 3
    INPUT = 4
    INTERNAL = 5


class ErrorHandler:
    """命令行异常到退出码的统一映射"""

    # ===========================================
    # 异常分类
    # ===========================================

    @staticmethod
    def exit_code_for(e: BaseException) -> ExitCode:
        """
        返回异常对应的退出码

        参数：
            e: 异常对象

        返回：
            配置与参数错误为 USAGE，文件与博弈数据错误为 INPUT，其余为 INTERNAL
        """
        if isinstance(e, (ConfigError, ShapeError, InputError, ValidationError)):
            return ExitCode.USAGE
        if isinstance(e, (GameFileError, GameValidationError, FileNotFoundError, PermissionError)):
            return ExitCode.INPUT
        return ExitCode.INTERNAL

    # ===========================================
    # 异常处理装饰器
    # ===========================================

    @staticmethod
    def handle_command_error(command_name: str):
        """
        子命令异常处理装饰器

        被包装函数返回退出码；抛出的异常记录为一条错误日志并转换为退出码。
        非本库异常额外记录堆栈（DEBUG 级别可见）。

        参数：
            command_name: 命令名称，用于日志

        返回：
            装饰器函数
        """
        def decorator(func):
            @wraps(func)
            def wrapper(*args, **kwargs) -> int:
                try:
                    return int(func(*args, **kwargs))
                except (CmwuError, ValidationError, OSError) as e:
                    logger.error("[%s] %s", command_name, format_exception_message(e))
                    return int(ErrorHandler.exit_code_for(e))
                except Exception as e:
                    logger.error("[%s] 发生意外错误: %s", command_name, format_exception_message(e))
                    logger.debug("[%s] 堆栈信息", command_name, exc_info=True)
                    return int(ExitCode.INTERNAL)
            return wrapper
        return decorator


# ===========================================
# 辅助函数
# ===========================================

def format_exception_message(e: Exception) -> str:
    """
    格式化异常消息，使其更易读

    示例：
        >>> print(format_exception_message(ConfigError("未知的生成器")))
        配置错误: 未知的生成器
    """
    exception_type = type(e).__name__

    friendly_names = {
        ConfigError.__name__: '配置错误',
        ShapeError.__name__: '维度错误',
        DomainError.__name__: '定义域错误',
        GameValidationError.__name__: '博弈数据错误',
        GameFileError.__name__: '文件错误',
        InputError.__name__: '输入错误',
        ProtocolError.__name__: '协议错误',
        'ValidationError': '参数校验错误',
        'FileNotFoundError': '文件未找到',
        'PermissionError': '权限错误',
        'ValueError': '数值错误',
        'OSError': '系统错误',
    }

    friendly_type = friendly_names.get(exception_type, exception_type)
    return f"{friendly_type}: {str(e)}"


def validate_not_none(value, field_name: str):
    """
    验证值不为None，否则抛出配置错误

    参数：
        value: 要验证的值
        field_name: 字段名称（用于错误消息）
    """
    if value is None:
        raise ConfigError(f"缺少必需参数: {field_name}")


def validate_not_empty(value, field_name: str):
    """验证值不为空（None, '', [], ()等）"""
    if not value:
        raise ConfigError(f"{field_name} 不能为空")
