"""
轨迹导出与读取

CSV 目录导出（三个文件，各带版本注释行）：
    trajectory.csv        t,block,offset,anchor,agent,action,prob
    z_snapshots.csv       tau,t,agent,action,prob           （仅 cmwu）
    block_residuals.csv   tau,t,residual,bound,status       （仅 cmwu）

JSON 导出为单个 trajectory.json 文档，保留运行元数据（步长、块长度、警告、
求解诊断），读取后可完整还原 Trajectory。
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from cmwu.column_names import Columns
from cmwu.dynamics.trajectory import CMWU, DYNAMICS_KINDS, MWU, Trajectory
from cmwu.errors import GameFileError
from cmwu.utils.formats import (
    BLOCK_RESIDUAL_FORMAT,
    FORMAT_VERSION,
    TRAJECTORY_FORMAT,
    Z_SNAPSHOT_FORMAT,
    check_format_version,
    read_versioned_csv,
    write_versioned_csv,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

TRAJECTORY_CSV = "trajectory.csv"
Z_SNAPSHOT_CSV = "z_snapshots.csv"
BLOCK_RESIDUAL_CSV = "block_residuals.csv"
TRAJECTORY_JSON = "trajectory.json"


# ===========================================
# 表格视图
# ===========================================

def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    """每轮每名玩家每个动作一行"""
    rows = []
    for t, profile in enumerate(trajectory.profiles):
        block, offset = trajectory.block_of(t)
        anchor = int(trajectory.is_anchor(t))
        for agent, strategy in enumerate(profile):
            for action, prob in enumerate(strategy):
                rows.append((t, block, offset, anchor, agent, action, float(prob)))
    return pd.DataFrame(rows, columns=list(Columns.Trajectory.ORDER))


def z_snapshot_frame(trajectory: Trajectory) -> pd.DataFrame:
    rows = []
    for tau, snapshot in enumerate(trajectory.z_snapshots):
        t = tau * trajectory.k
        for agent, strategy in enumerate(snapshot):
            for action, prob in enumerate(strategy):
                rows.append((tau, t, agent, action, float(prob)))
    return pd.DataFrame(rows, columns=list(Columns.ZSnapshot.ORDER))


def block_residual_frame(trajectory: Trajectory, checked: bool = True) -> pd.DataFrame:
    """
    τ = 1..T' 的块残差与上界 8/2^k

    参数：
        trajectory: cmwu 轨迹
        checked: 上界只在默认步长下成立；为 False 时 status 记为 n/a
    """
    bound = trajectory.block_residual_bound()
    rows = []
    for tau, residual in enumerate(trajectory.block_residuals, start=1):
        if not checked:
            status = Columns.Status.NOT_APPLICABLE
        elif residual <= bound:
            status = Columns.Status.PASS
        else:
            status = Columns.Status.FAIL
        rows.append((tau, tau * trajectory.k, float(residual), bound, status))
    return pd.DataFrame(rows, columns=list(Columns.BlockResidual.ORDER))


# ===========================================
# 写出
# ===========================================

def write_trajectory_csv(
    trajectory: Trajectory, out_dir: str | Path, residuals_checked: bool = True
) -> list[Path]:
    """写出 CSV 目录导出，返回写入的文件列表"""
    out_dir = Path(out_dir)
    written = [
        write_versioned_csv(trajectory_frame(trajectory), out_dir / TRAJECTORY_CSV, TRAJECTORY_FORMAT)
    ]
    if trajectory.z_snapshots:
        written.append(
            write_versioned_csv(z_snapshot_frame(trajectory), out_dir / Z_SNAPSHOT_CSV, Z_SNAPSHOT_FORMAT)
        )
        written.append(
            write_versioned_csv(
                block_residual_frame(trajectory, residuals_checked),
                out_dir / BLOCK_RESIDUAL_CSV,
                BLOCK_RESIDUAL_FORMAT,
            )
        )
    for path in written:
        logger.info("[轨迹] 已写出 %s", path)
    return written


class TrajectoryDocument(BaseModel):
    """trajectory.json 的结构校验模型"""

    model_config = ConfigDict(extra="forbid")

    format: str = TRAJECTORY_FORMAT
    format_version: str = FORMAT_VERSION
    kind: str
    game_name: str
    uncoupled: bool
    k: int
    etas: list[float]
    anchors: list[int]
    profiles: list[list[list[float]]]
    z_snapshots: list[list[list[float]]] = []
    block_residuals: list[float] = []
    access_log: list[tuple[int, int]] = []
    warnings: list[str] = []
    solver_iterations: list[int] = []
    solver_residuals: list[float] = []
    nonconverged_steps: int = 0


def _profiles_to_lists(profiles) -> list[list[list[float]]]:
    return [[strategy.tolist() for strategy in profile] for profile in profiles]


def _lists_to_profiles(values) -> tuple:
    profiles = []
    for profile in values:
        strategies = []
        for strategy in profile:
            array = np.asarray(strategy, dtype=float)
            array.setflags(write=False)
            strategies.append(array)
        profiles.append(tuple(strategies))
    return tuple(profiles)


def write_trajectory_json(trajectory: Trajectory, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = TrajectoryDocument(
        kind=trajectory.kind,
        game_name=trajectory.game_name,
        uncoupled=trajectory.uncoupled,
        k=trajectory.k,
        etas=list(trajectory.etas),
        anchors=list(trajectory.anchors),
        profiles=_profiles_to_lists(trajectory.profiles),
        z_snapshots=_profiles_to_lists(trajectory.z_snapshots),
        block_residuals=list(trajectory.block_residuals),
        access_log=list(trajectory.access_log),
        warnings=list(trajectory.warnings),
        solver_iterations=list(trajectory.solver_iterations),
        solver_residuals=list(trajectory.solver_residuals),
        nonconverged_steps=trajectory.nonconverged_steps,
    )
    path.write_text(
        json.dumps(document.model_dump(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    logger.info("[轨迹] 已写出 %s", path)
    return path


# ===========================================
# 读取
# ===========================================

def _read_json(path: Path) -> Trajectory:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        document = TrajectoryDocument.model_validate(raw)
    except (OSError, json.JSONDecodeError) as e:
        raise GameFileError(f"无法读取轨迹文件 {path}: {e}") from e
    except ValidationError as e:
        raise GameFileError(f"轨迹文件 {path} 结构错误: {e}") from e

    check_format_version(TRAJECTORY_FORMAT, document.format, document.format_version)
    if document.kind not in DYNAMICS_KINDS:
        raise GameFileError(f"未知的动力学类型: {document.kind}")

    return Trajectory(
        kind=document.kind,
        game_name=document.game_name,
        k=document.k,
        etas=tuple(document.etas),
        profiles=_lists_to_profiles(document.profiles),
        anchors=tuple(document.anchors),
        z_snapshots=_lists_to_profiles(document.z_snapshots),
        block_residuals=tuple(document.block_residuals),
        access_log=tuple(tuple(entry) for entry in document.access_log),
        warnings=tuple(document.warnings),
        solver_iterations=tuple(document.solver_iterations),
        solver_residuals=tuple(document.solver_residuals),
        nonconverged_steps=document.nonconverged_steps,
        uncoupled=document.uncoupled,
    )


def _frame_to_profiles(frame: pd.DataFrame, time_column: str) -> tuple:
    profiles = []
    for _, round_rows in frame.sort_values([time_column, Columns.Trajectory.AGENT, Columns.Trajectory.ACTION]).groupby(time_column, sort=True):
        strategies = []
        for _, agent_rows in round_rows.groupby(Columns.Trajectory.AGENT, sort=True):
            array = agent_rows[Columns.Trajectory.PROB].to_numpy(dtype=float)
            array.setflags(write=False)
            strategies.append(array)
        profiles.append(tuple(strategies))
    return tuple(profiles)


def _read_csv_dir(directory: Path, kind: Optional[str]) -> Trajectory:
    frame = read_versioned_csv(directory / TRAJECTORY_CSV, TRAJECTORY_FORMAT)
    missing = set(Columns.Trajectory.ORDER) - set(frame.columns)
    if missing:
        raise GameFileError(f"{directory / TRAJECTORY_CSV} 缺少列: {sorted(missing)}")

    profiles = _frame_to_profiles(frame, Columns.Trajectory.T)
    anchor_rounds = sorted(
        frame.loc[frame[Columns.Trajectory.ANCHOR] == 1, Columns.Trajectory.T].unique().tolist()
    )
    # CSV 不携带 k：两个以上锚点时取相邻间隔，否则整段轨迹就是一个块
    k = anchor_rounds[1] - anchor_rounds[0] if len(anchor_rounds) > 1 else max(1, len(profiles))

    z_snapshots: tuple = ()
    block_residuals: tuple = ()
    z_path = directory / Z_SNAPSHOT_CSV
    if z_path.exists():
        z_snapshots = _frame_to_profiles(read_versioned_csv(z_path, Z_SNAPSHOT_FORMAT), Columns.ZSnapshot.TAU)
        residuals = read_versioned_csv(directory / BLOCK_RESIDUAL_CSV, BLOCK_RESIDUAL_FORMAT)
        block_residuals = tuple(residuals[Columns.BlockResidual.RESIDUAL].astype(float).tolist())

    if kind is None:
        kind = CMWU if z_snapshots else MWU
    return Trajectory(
        kind=kind,
        game_name=directory.name,
        k=int(k),
        etas=(),
        profiles=profiles,
        anchors=tuple(int(t) for t in anchor_rounds),
        z_snapshots=z_snapshots,
        block_residuals=block_residuals,
    )


def load_trajectory(path: str | Path, kind: Optional[str] = None) -> Trajectory:
    """
    读取轨迹导出

    参数：
        path: trajectory.json 文件，或包含 trajectory.csv 的目录
        kind: CSV 目录导出不记录动力学类型，可显式给出；默认有 z 快照时为 cmwu，否则为 mwu

    返回：
        Trajectory；CSV 导出还原的轨迹不含步长与访问日志

    抛出：
        GameFileError: 文件缺失、格式或版本不符
    """
    path = Path(path)
    if path.is_dir():
        return _read_csv_dir(path, kind)
    if path.suffix == ".json":
        return _read_json(path)
    if path.name == TRAJECTORY_CSV:
        return _read_csv_dir(path.parent, kind)
    raise GameFileError(f"无法识别的轨迹导出: {path}")
