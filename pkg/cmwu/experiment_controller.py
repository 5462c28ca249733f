import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pandas as pd

from cmwu.analysis.metrics import RunReport, build_run_report, mwu_baseline_eta, rate_summary
from cmwu.analysis.verify import VerifySettings, run_verification
from cmwu.config import ExperimentConfig, load_game
from cmwu.dynamics.protocol import run_dynamics, run_exact_cmwu, run_mwu_baseline
from cmwu.dynamics.trajectory import CMWU, MWU, Trajectory
from cmwu.dynamics.trajectory_io import TRAJECTORY_JSON, write_trajectory_csv, write_trajectory_json
from cmwu.errors import ConfigError
from cmwu.games.game_core import NormalFormGame
from cmwu.games.game_io import write_game
from cmwu.learning.learning_rules import FixedPointSettings
from cmwu.records import RecordFactory
from cmwu.utils.error_handler import validate_not_none
from cmwu.utils.formats import (
    CCE_GAP_FORMAT,
    RATES_FORMAT,
    REGRET_FORMAT,
    VERIFY_FORMAT,
    write_versioned_csv,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

INDEX_FILE_NAME = 'index.json'
GAME_FILE_NAME = 'game.json'
REPORT_JSON = 'report.json'
MIN_RATE_HORIZONS = 3


@dataclass
class HorizonResult:
    horizon: int
    trajectory: Trajectory
    report: RunReport
    artifacts: list[Path] = field(default_factory=list)


@dataclass
class RunOutcome:
    """一次 run 命令的全部结果，按时域排列"""

    game: NormalFormGame
    results: list[HorizonResult]
    index_key: str

    @property
    def nonconverged_steps(self) -> int:
        return sum(r.trajectory.nonconverged_steps for r in self.results)

    @property
    def bounds_failed(self) -> bool:
        return any(r.report.failed for r in self.results)


class ExperimentController:
    """
    Mediates between the command line and the library.
    Resolves games, runs dynamics, writes artifacts and keeps the output index.
    """
    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.index_file = self.out_dir / INDEX_FILE_NAME

    def load_index(self) -> dict:
        """Loads the artifact index file."""
        if not self.index_file.exists():
            return {}
        try:
            with open(self.index_file, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (json.JSONDecodeError, IOError):
            logger.warning("[控制器] 索引文件 %s 无法解析，将重建", self.index_file)
            return {}

    def save_index(self, index: dict) -> None:
        """Saves the artifact index file."""
        os.makedirs(self.out_dir, exist_ok=True)
        with open(self.index_file, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(index, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write('\n')

    def _record(self, key: str, entry: dict) -> None:
        index = self.load_index()
        index[key] = entry
        self.save_index(index)

    def _artifact_records(self, paths: list[Path]) -> list[dict]:
        return [RecordFactory.create_artifact_record(p, root=self.out_dir) for p in paths]

    # ===========================================
    # run
    # ===========================================

    @staticmethod
    def simulate(
        game: NormalFormGame, kind: str, horizon: int, config: ExperimentConfig
    ) -> Trajectory:
        if kind == CMWU:
            return run_dynamics(game, horizon, eta=config.eta, k=config.k)
        if kind == MWU:
            eta = config.eta if config.eta is not None else mwu_baseline_eta(game, horizon)
            return run_mwu_baseline(game, horizon, eta)
        settings = FixedPointSettings(
            tolerance=config.tolerance,
            max_iterations=config.max_iterations,
            strict=not config.lenient_contraction,
        )
        return run_exact_cmwu(game, horizon, config.eta, settings)

    def _write_run_artifacts(
        self, trajectory: Trajectory, report: RunReport, target: Path, config: ExperimentConfig
    ) -> list[Path]:
        written: list[Path] = []
        if 'csv' in config.formats:
            written += write_trajectory_csv(trajectory, target, residuals_checked=config.eta is None)
            written.append(write_versioned_csv(report.regret, target / 'regret.csv', REGRET_FORMAT))
            written.append(write_versioned_csv(report.cce_gap, target / 'cce_gap.csv', CCE_GAP_FORMAT))
        if 'json' in config.formats:
            written.append(write_trajectory_json(trajectory, target / TRAJECTORY_JSON))
            document = RecordFactory.create_report_document(trajectory, report)
            path = target / REPORT_JSON
            path.write_text(json.dumps(document, ensure_ascii=False, indent=2) + '\n', encoding='utf-8')
            written.append(path)
        return written

    def run(self, config: ExperimentConfig) -> RunOutcome:
        """
        执行 run 命令：每个时域一次运行，多个时域写入 T<T>/ 子目录

        抛出：
            ConfigError: 动力学类型不唯一、对非 cmwu 指定 k、严格模式违反压缩条件
        """
        if len(config.dynamics) != 1:
            raise ConfigError(f"run 只接受一种动力学，得到 {list(config.dynamics)}")
        kind = config.dynamics[0]
        if config.k is not None and kind != CMWU:
            raise ConfigError(f"块长度 k 只适用于 cmwu，当前动力学为 {kind}")

        game = config.load_game()
        logger.info("[控制器] 博弈 %r，动力学 %s，时域 %s", game.name, kind, list(config.horizons))
        game_path = write_game(game, self.out_dir / GAME_FILE_NAME)
        multiple = len(config.horizons) > 1

        def one(horizon: int) -> HorizonResult:
            target = self.out_dir / f'T{horizon}' if multiple else self.out_dir
            trajectory = self.simulate(game, kind, horizon, config)
            report = build_run_report(game, trajectory, config.default_parameters, config.tolerance)
            artifacts = self._write_run_artifacts(trajectory, report, target, config)
            return HorizonResult(horizon, trajectory, report, artifacts)

        if config.workers > 1 and multiple:
            with ThreadPoolExecutor(max_workers=config.workers) as executor:
                results = list(executor.map(one, config.horizons))
        else:
            results = [one(T) for T in config.horizons]

        paths = [game_path] + [p for r in results for p in r.artifacts]
        key = f'run-{config.digest()}'
        summary = [RecordFactory.create_run_summary(r.trajectory, r.report) for r in results]
        self._record(key, RecordFactory.create_index_entry('run', config, self._artifact_records(paths), summary))
        return RunOutcome(game, results, key)

    # ===========================================
    # rates / verify / generate
    # ===========================================

    def rates(self, config: ExperimentConfig) -> pd.DataFrame:
        """
        执行 rates 命令，写出 rates.csv

        抛出：
            ConfigError: 时域少于 3 个
        """
        if len(config.horizons) < MIN_RATE_HORIZONS:
            raise ConfigError(f"rates 至少需要 {MIN_RATE_HORIZONS} 个时域，得到 {list(config.horizons)}")
        game = config.load_game()
        frame = rate_summary(game, config.horizons, config.dynamics, max_workers=config.workers)
        path = write_versioned_csv(frame, self.out_dir / 'rates.csv', RATES_FORMAT)
        logger.info("[控制器] 已写出 %s", path)
        entry = RecordFactory.create_index_entry('rates', config, self._artifact_records([path]))
        self._record(f'rates-{config.digest()}', entry)
        return frame

    def verify(self, settings: Optional[VerifySettings] = None) -> pd.DataFrame:
        """执行 verify 命令，写出 verify.csv"""
        settings = settings or VerifySettings()
        frame = run_verification(settings)
        path = write_versioned_csv(frame, self.out_dir / 'verify.csv', VERIFY_FORMAT)
        logger.info("[控制器] 已写出 %s", path)
        digest = hashlib.sha256(settings.model_dump_json().encode('utf-8')).hexdigest()[:12]
        entry = RecordFactory.create_index_entry('verify', None, self._artifact_records([path]), settings.model_dump())
        self._record(f'verify-{digest}', entry)
        return frame

    @staticmethod
    def generate(source: str, seed: Optional[int], path: str | Path) -> NormalFormGame:
        """生成或读取博弈并写为博弈文件"""
        validate_not_none(path, "输出路径")
        game = load_game(source, seed)
        write_game(game, path)
        logger.info("[控制器] 博弈 %r 已写入 %s", game.name, path)
        return game
