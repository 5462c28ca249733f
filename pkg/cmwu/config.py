"""
实验配置

配置来源按优先级从低到高：内置默认值、--config 指定的 YAML 文件、命令行参数。

博弈来源字符串：
    named:<名称>                    命名博弈
    random:n=<n>,m=<m>              随机博弈（也可写 actions=2x3x4）
    zero-sum:m=<m>                  两人常和博弈
    file:<路径> 或已存在的文件路径   博弈 JSON 文件
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator

from cmwu.dynamics.trajectory import CMWU, DYNAMICS_KINDS
from cmwu.errors import ConfigError
from cmwu.games.game_core import NormalFormGame
from cmwu.games.game_io import read_game
from cmwu.games.generators import GeneratorSpec, generate_game, suggest
from cmwu.learning.learning_rules import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

OUTPUT_FORMATS = ("csv", "json")
DEFAULT_OUT_DIR = Path("data/runs")

SOURCE_PREFIXES = ("named", "random", "random-uniform", "zero-sum", "zero-sum-2p", "file")
GENERATOR_KEYS = ("n", "m", "actions", "seed")


# ===========================================
# 博弈来源
# ===========================================

def _parse_actions(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.lower().split("x"))
    except ValueError as e:
        raise ConfigError(f"无法解析动作数 {text!r}，应形如 2x3x4") from e


def parse_game_source(source: str, seed: Optional[int] = None) -> GeneratorSpec | Path:
    """
    解析博弈来源字符串

    参数：
        source: 来源字符串
        seed: 随机生成器的种子；来源中的 seed= 优先

    返回：
        GeneratorSpec 或博弈文件路径

    抛出：
        ConfigError: 未知前缀或参数，附带拼写建议

    示例：
        >>> parse_game_source("random:n=2,m=10", seed=1).shape
        (10, 10)
    """
    if not source:
        raise ConfigError("缺少博弈来源")
    if ":" not in source:
        if Path(source).exists():
            return Path(source)
        raise ConfigError(f"无法识别的博弈来源: {source}", suggest(source, SOURCE_PREFIXES))

    prefix, _, body = source.partition(":")
    if prefix == "file":
        return Path(body)
    if prefix == "named":
        return GeneratorSpec(kind="named", name=body)
    if prefix not in SOURCE_PREFIXES:
        if Path(source).exists():
            return Path(source)
        raise ConfigError(f"未知的博弈来源前缀: {prefix}", suggest(prefix, SOURCE_PREFIXES))

    params: dict[str, Any] = {"kind": prefix, "seed": seed}
    for item in filter(None, body.split(",")):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in GENERATOR_KEYS:
            raise ConfigError(f"未知的生成器参数: {item}", suggest(key, GENERATOR_KEYS))
        if key == "actions":
            params["actions"] = _parse_actions(value)
        else:
            try:
                params[key] = int(value)
            except ValueError as e:
                raise ConfigError(f"生成器参数 {key} 应为整数: {value!r}") from e

    try:
        return GeneratorSpec(**params)
    except ValidationError as e:
        raise ConfigError(f"生成器参数非法: {e}") from e


def load_game(source: str, seed: Optional[int] = None) -> NormalFormGame:
    """按来源字符串读取或生成博弈"""
    parsed = parse_game_source(source, seed)
    if isinstance(parsed, Path):
        return read_game(parsed)
    return generate_game(parsed)


# ===========================================
# 实验配置
# ===========================================

class ExperimentConfig(BaseModel):
    """
    一次实验的全部参数

    参数：
        game: 博弈来源字符串（唯一来源）
        seed: 随机生成器种子
        dynamics: 动力学类型；run 只接受一个，rates 可给多个
        horizons: 时域 T 列表（YAML 中也可写 T）
        eta / k: 步长与块长度覆盖，默认按 1/(2nV) 与 ⌈log₂ T⌉
        tolerance / max_iterations: exact-cmwu 的不动点求解参数
        out: 输出目录
        formats: csv 和/或 json（YAML 中也可写 format）
    """

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    game: str
    seed: Optional[int] = None
    dynamics: tuple[str, ...] = (CMWU,)
    horizons: tuple[int, ...] = Field(validation_alias=AliasChoices("horizons", "T"))
    eta: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)
    k: Optional[int] = Field(default=None, ge=1)
    tolerance: float = Field(default=DEFAULT_TOLERANCE, gt=0, allow_inf_nan=False)
    max_iterations: int = Field(default=DEFAULT_MAX_ITERATIONS, ge=1)
    out: Path = DEFAULT_OUT_DIR
    formats: tuple[str, ...] = Field(default=("csv",), validation_alias=AliasChoices("formats", "format"))
    allow_nonconverged: bool = False
    lenient_contraction: bool = False
    workers: int = Field(default=1, ge=1)

    @field_validator("horizons", "dynamics", "formats", mode="before")
    @classmethod
    def _as_tuple(cls, value):
        if isinstance(value, (int, str)):
            return (value,)
        return value

    @field_validator("horizons")
    @classmethod
    def _check_horizons(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("至少需要一个时域 T")
        if any(T < 1 for T in value):
            raise ValueError(f"时域 T 必须 >= 1: {list(value)}")
        return value

    @field_validator("dynamics")
    @classmethod
    def _check_dynamics(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        for kind in value:
            if kind not in DYNAMICS_KINDS:
                hint = suggest(kind, DYNAMICS_KINDS)
                raise ValueError(f"未知的动力学类型 {kind}" + (f"（是否想输入 '{hint}'？）" if hint else ""))
        return value

    @field_validator("formats")
    @classmethod
    def _check_formats(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        unknown = [f for f in value if f not in OUTPUT_FORMATS]
        if unknown or not value:
            raise ValueError(f"输出格式必须取自 {OUTPUT_FORMATS}: {list(value)}")
        return tuple(dict.fromkeys(value))

    def game_source(self) -> GeneratorSpec | Path:
        """解析博弈来源；随机生成器缺少种子时报错"""
        parsed = parse_game_source(self.game, self.seed)
        if isinstance(parsed, GeneratorSpec) and parsed.is_random and parsed.seed is None:
            raise ConfigError(f"随机博弈来源 {self.game} 需要 --seed")
        return parsed

    def load_game(self) -> NormalFormGame:
        parsed = self.game_source()
        if isinstance(parsed, Path):
            return read_game(parsed)
        return generate_game(parsed)

    @property
    def default_parameters(self) -> bool:
        return self.eta is None and self.k is None

    def digest(self) -> str:
        """配置内容的短哈希，输出目录之外的字段相同即相同"""
        payload = self.model_dump(mode="json", exclude={"out", "workers"})
        text = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def load_config_file(path: str | Path) -> dict[str, Any]:
    """
    读取 YAML 配置文件

    抛出：
        ConfigError: 文件不可读、不是 YAML 映射
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件 {path} 不是合法的 YAML: {e}") from e
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise ConfigError(f"配置文件 {path} 顶层必须是映射")
    return values


def build_config(file_values: Optional[dict[str, Any]] = None, **overrides: Any) -> ExperimentConfig:
    """
    合并 YAML 配置与命令行覆盖，值为 None 的覆盖项忽略

    抛出：
        ConfigError: 合并后的配置非法
    """
    merged = dict(file_values or {})
    for key, value in overrides.items():
        if value is None:
            continue
        # YAML 中的别名与命令行字段名指向同一项
        for alias in {"horizons": ("T",), "formats": ("format",)}.get(key, ()):
            merged.pop(alias, None)
        merged[key] = value
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"配置非法: {e}") from e
