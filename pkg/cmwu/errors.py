"""
异常定义

库内所有可预期的错误都派生自 CmwuError，CLI 层据此映射退出码
（见 cmwu.utils.error_handler）。值类错误同时继承 ValueError。
"""


class CmwuError(Exception):
    """本库所有异常的基类"""


class ShapeError(CmwuError, ValueError):
    """策略组合与博弈维度不匹配"""


class DomainError(CmwuError, ValueError):
    """数值定义域错误：全零锚点、非有限收益、非法混合策略等"""


class GameValidationError(CmwuError, ValueError):
    """收益张量不满足博弈不变量"""


class ConfigError(CmwuError, ValueError):
    """配置错误：未知生成器、严格模式下违反压缩条件、参数组合非法"""

    def __init__(self, message: str, suggestion: str | None = None):
        self.suggestion = suggestion
        if suggestion:
            message = f"{message}（是否想输入 '{suggestion}'？）"
        super().__init__(message)


class ProtocolError(CmwuError, RuntimeError):
    """在线学习协议被破坏：轮次乱序、缺少缓存收益、重复查询等"""


class InputError(CmwuError, ValueError):
    """度量输入错误：权重不归一、时域列表非法等"""


class GameFileError(CmwuError, OSError):
    """博弈文件或轨迹文件无法读取、格式不兼容"""
