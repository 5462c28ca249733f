"""
记录构造模块

集中构造写入 index.json 与 report.json 的字典结构。所有记录都是纯 JSON
数据，不含时间戳，同一配置重复运行得到逐字节相同的文件。

使用示例：
    from cmwu.records import RecordFactory

    artifact = RecordFactory.create_artifact_record(path, root=out_dir)
    entry = RecordFactory.create_index_entry("run", config, [artifact], summary)
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Any, Optional

import pandas as pd

from cmwu.analysis.metrics import RunReport
from cmwu.config import ExperimentConfig
from cmwu.dynamics.trajectory import Trajectory
from cmwu.utils.formats import FORMAT_VERSION, REPORT_FORMAT


def _json_float(value: Any) -> Any:
    """NaN 与无穷在 JSON 中记为 null"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RecordFactory:
    """提供创建索引与报告记录的静态方法"""

    # ===========================================
    # 产物记录
    # ===========================================

    @staticmethod
    def create_artifact_record(path: str | Path, root: Optional[str | Path] = None) -> dict[str, Any]:
        """
        创建单个产物文件的记录

        参数：
            path: 产物路径
            root: 记录相对路径时的根目录，默认记录完整路径

        返回：
            {'path': 相对路径, 'sha256': 摘要, 'bytes': 字节数}
        """
        path = Path(path)
        data = path.read_bytes()
        relative = path.relative_to(root) if root is not None else path
        return {
            'path': relative.as_posix(),
            'sha256': hashlib.sha256(data).hexdigest(),
            'bytes': len(data),
        }

    # ===========================================
    # 运行摘要
    # ===========================================

    @staticmethod
    def create_run_summary(trajectory: Trajectory, report: Optional[RunReport] = None) -> dict[str, Any]:
        """单个时域的运行摘要"""
        summary = {
            'T': trajectory.horizon,
            'dynamics': trajectory.kind,
            'uncoupled': trajectory.uncoupled,
            'k': trajectory.k,
            'etas': list(trajectory.etas),
            'warnings': list(trajectory.warnings),
        }
        if trajectory.solver_iterations:
            summary['max_solver_iterations'] = max(trajectory.solver_iterations)
            summary['nonconverged_steps'] = trajectory.nonconverged_steps
        if report is not None:
            summary['bounds_failed'] = report.failed
        return summary

    @staticmethod
    def create_index_entry(
        command: str,
        config: Optional[ExperimentConfig],
        artifacts: list[dict[str, Any]],
        summary: Optional[Any] = None,
    ) -> dict[str, Any]:
        """
        创建 index.json 中的一条记录

        参数：
            command: run | rates | verify
            config: 实验配置；verify 没有实验配置
            artifacts: create_artifact_record 返回的记录列表
            summary: 运行摘要
        """
        return {
            'command': command,
            'config': config.model_dump(mode='json', exclude={'out', 'workers'}) if config else None,
            'artifacts': sorted(artifacts, key=lambda a: a['path']),
            'summary': summary,
        }

    # ===========================================
    # 报告文档
    # ===========================================

    @staticmethod
    def frame_records(frame: pd.DataFrame) -> list[dict[str, Any]]:
        return [
            {key: _json_float(value) for key, value in row.items()}
            for row in frame.to_dict(orient='records')
        ]

    @staticmethod
    def create_report_document(trajectory: Trajectory, report: RunReport) -> dict[str, Any]:
        """report.json：遗憾表、CCE 表与累计序列"""
        return {
            'format': REPORT_FORMAT,
            'format_version': FORMAT_VERSION,
            'T': report.horizon,
            'dynamics': trajectory.kind,
            'uncoupled': trajectory.uncoupled,
            'regret': RecordFactory.frame_records(report.regret),
            'cce_gap': RecordFactory.frame_records(report.cce_gap),
            'cumulative_regret': report.cumulative_regret.tolist(),
            'running_gap': report.running_gap.tolist(),
        }
