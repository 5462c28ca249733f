"""
产物格式版本

所有 CSV 以 `# format=<名称> version=<主.次>` 注释行开头，JSON 文档携带
format / format_version 字段。读取时只要求主版本一致。
"""

from pathlib import Path

import pandas as pd
from packaging.version import InvalidVersion, Version

from cmwu.errors import GameFileError

GAME_FORMAT = "cmwu-game"
TRAJECTORY_FORMAT = "cmwu-trajectory"
Z_SNAPSHOT_FORMAT = "cmwu-z-snapshots"
BLOCK_RESIDUAL_FORMAT = "cmwu-block-residuals"
REGRET_FORMAT = "cmwu-regret"
CCE_GAP_FORMAT = "cmwu-cce-gap"
RATES_FORMAT = "cmwu-rates"
VERIFY_FORMAT = "cmwu-verify"
REPORT_FORMAT = "cmwu-report"

FORMAT_VERSION = "1.0"


def csv_header_line(format_name: str, version: str = FORMAT_VERSION) -> str:
    return f"# format={format_name} version={version}\n"


def parse_csv_header_line(line: str) -> tuple[str, str]:
    """解析 CSV 首行的版本注释，返回 (格式名, 版本)"""
    if not line.startswith("#"):
        raise GameFileError(f"缺少版本注释行: {line.strip()!r}")
    fields = dict(
        item.split("=", 1) for item in line.lstrip("#").split() if "=" in item
    )
    if "format" not in fields or "version" not in fields:
        raise GameFileError(f"版本注释行格式错误: {line.strip()!r}")
    return fields["format"], fields["version"]


def check_format_version(format_name: str, found_format: str, found_version: str) -> None:
    """
    检查读取到的格式名与版本是否兼容

    抛出：
        GameFileError: 格式名不符或主版本不同
    """
    if found_format != format_name:
        raise GameFileError(f"期望格式 {format_name}，读取到 {found_format}")
    try:
        found = Version(str(found_version))
    except InvalidVersion as e:
        raise GameFileError(f"无法解析格式版本 {found_version!r}") from e
    expected = Version(FORMAT_VERSION)
    if found.major != expected.major:
        raise GameFileError(
            f"{format_name} 版本 {found} 与支持的版本 {expected} 主版本不一致"
        )


def write_versioned_csv(frame: pd.DataFrame, path: str | Path, format_name: str) -> Path:
    """写出带版本注释行的 CSV；浮点数使用最短往返表示"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(csv_header_line(format_name))
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


def read_versioned_csv(path: str | Path, format_name: str) -> pd.DataFrame:
    """
    读取带版本注释行的 CSV

    抛出：
        GameFileError: 文件不可读、格式名不符或主版本不同
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            found_format, found_version = parse_csv_header_line(f.readline())
            check_format_version(format_name, found_format, found_version)
            return pd.read_csv(f)
    except OSError as e:
        raise GameFileError(f"无法读取 {path}: {e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise GameFileError(f"{path} 不是合法的 CSV: {e}") from e
