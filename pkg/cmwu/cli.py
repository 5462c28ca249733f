"""
命令行入口

    python main.py run      --game named:matching-pennies --T 1024
    python main.py rates    --game random:n=2,m=10 --seed 1 --T 256 --T 1024 --T 4096
    python main.py verify
    python main.py generate --game random:n=3,m=4 --seed 7 --out data/games/r3x4.json

结果表格打印到标准输出，日志写到标准错误。退出码见 ExitCode。
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import pandas as pd

from cmwu import __version__
from cmwu.analysis.verify import VerifySettings
from cmwu.column_names import Columns
from cmwu.config import DEFAULT_OUT_DIR, OUTPUT_FORMATS, build_config, load_config_file
from cmwu.dynamics.trajectory import CMWU, DYNAMICS_KINDS, MWU
from cmwu.experiment_controller import ExperimentController
from cmwu.utils.error_handler import ErrorHandler, ExitCode, validate_not_empty
from cmwu.utils.logger import configure_logging, get_logger

logger = get_logger(__name__)


# ===========================================
# 参数定义
# ===========================================

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML 配置文件，命令行参数优先")
    parser.add_argument("--out", help=f"输出目录（默认 {DEFAULT_OUT_DIR}）")
    parser.add_argument("--workers", type=int, help="并行线程数")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="输出调试日志")
    parser.add_argument("-q", "--quiet", action="store_true", help="只输出警告与错误")


def _add_game(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--game", help="博弈来源：named:<名称> | random:n=,m= | zero-sum:m= | file:<路径>")
    parser.add_argument("--seed", type=int, help="随机博弈种子")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmwu", description="Clairvoyant MWU 博弈学习实验工具")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="运行一次动力学并写出轨迹与报告")
    _add_game(run)
    run.add_argument("--dynamics", choices=DYNAMICS_KINDS, help="动力学类型（默认 cmwu）")
    run.add_argument("--T", dest="horizons", type=int, action="append", help="时域，可重复")
    run.add_argument("--eta", type=float, help="步长覆盖（默认 1/(2nV)）")
    run.add_argument("--k", type=int, help="块长度覆盖（默认 ⌈log₂ T⌉）")
    run.add_argument("--tolerance", type=float, help="不动点求解容差")
    run.add_argument("--max-iterations", dest="max_iterations", type=int, help="不动点最大迭代次数")
    run.add_argument("--format", dest="formats", choices=OUTPUT_FORMATS, action="append", help="输出格式，可重复")
    run.add_argument("--allow-nonconverged", action="store_true", default=None, help="不动点未收敛时仍返回 0")
    run.add_argument("--lenient-contraction", action="store_true", default=None, help="允许违反压缩条件的步长")
    _add_common(run)

    rates = sub.add_parser("rates", help="多个时域下的 CCE 收敛速度表")
    _add_game(rates)
    rates.add_argument("--T", dest="horizons", type=int, action="append", help="时域，至少 3 个")
    rates.add_argument("--dynamics", choices=DYNAMICS_KINDS + ("mwu-baseline",), action="append",
                       help="参与比较的动力学，可重复（默认 cmwu 与 mwu）")
    _add_common(rates)

    verify = sub.add_parser("verify", help="运行固定种子的性质验证")
    verify.add_argument("--seed", type=int, help="验证批次的基础种子（默认 0）")
    verify.add_argument("--eta", type=float, help="注入的步长")
    verify.add_argument("--tolerance", type=float, help="不动点求解容差")
    verify.add_argument("--lenient-contraction", action="store_true", help="注入步长违反压缩条件时继续")
    _add_common(verify)

    generate = sub.add_parser("generate", help="生成博弈并写为博弈文件")
    _add_game(generate)
    generate.add_argument("--out", required=True, help="博弈文件路径")
    generate.add_argument("-v", "--verbose", action="count", default=0)
    generate.add_argument("-q", "--quiet", action="store_true")
    return parser


def _config_from_args(args: argparse.Namespace, **extra):
    file_values = load_config_file(args.config) if args.config else {}
    # verify 段只供 verify 子命令读取
    file_values.pop("verify", None)
    dynamics = args.dynamics
    if isinstance(dynamics, list):
        dynamics = tuple(MWU if d == "mwu-baseline" else d for d in dynamics)
    return build_config(
        file_values,
        game=args.game,
        seed=args.seed,
        dynamics=dynamics,
        horizons=tuple(args.horizons) if args.horizons else None,
        out=args.out,
        workers=args.workers,
        **extra,
    )


def _print_table(title: str, frame: pd.DataFrame) -> None:
    print(f"\n{title}")
    print(frame.to_string(index=False))


# ===========================================
# 子命令
# ===========================================

@ErrorHandler.handle_command_error("运行")
def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(
        args,
        eta=args.eta,
        k=args.k,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        formats=tuple(args.formats) if args.formats else None,
        allow_nonconverged=args.allow_nonconverged,
        lenient_contraction=args.lenient_contraction,
    )
    outcome = ExperimentController(config.out).run(config)

    for result in outcome.results:
        trajectory = result.trajectory
        label = "非耦合" if trajectory.uncoupled else "中心化（非耦合性不成立）"
        print(f"T={result.horizon} 动力学={trajectory.kind} [{label}] k={trajectory.k}")
        for warning in trajectory.warnings:
            print(f"  警告: {warning}")
        _print_table("遗憾", result.report.regret)
        _print_table("CCE 误差", result.report.cce_gap)

    if outcome.nonconverged_steps:
        message = f"{outcome.nonconverged_steps} 步不动点求解未收敛"
        if not config.allow_nonconverged:
            logger.error("[运行] %s（使用 --allow-nonconverged 忽略）", message)
            return ExitCode.NONCONVERGED
        logger.warning("[运行] %s", message)
    if outcome.bounds_failed:
        logger.error("[运行] 有上界检查未通过")
        return ExitCode.PROPERTY_FAILURE
    return ExitCode.OK


@ErrorHandler.handle_command_error("速度")
def cmd_rates(args: argparse.Namespace) -> int:
    if not args.dynamics:
        args.dynamics = [CMWU, MWU]
    config = _config_from_args(args)
    frame = ExperimentController(config.out).rates(config)
    _print_table("收敛速度", frame)
    if (frame[Columns.Rates.STATUS] == Columns.Status.FAIL).any():
        return ExitCode.PROPERTY_FAILURE
    return ExitCode.OK


@ErrorHandler.handle_command_error("验证")
def cmd_verify(args: argparse.Namespace) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    values = dict(file_values.get("verify", {}))
    values.update({
        key: value
        for key, value in {
            "seed": args.seed,
            "eta": args.eta,
            "tolerance": args.tolerance,
            "lenient": args.lenient_contraction or None,
            "max_workers": args.workers,
        }.items()
        if value is not None
    })
    settings = VerifySettings.model_validate(values)
    out = args.out or file_values.get("out", DEFAULT_OUT_DIR)
    frame = ExperimentController(out).verify(settings)
    _print_table("性质验证", frame)

    failed = frame[frame[Columns.Verify.STATUS] == Columns.Status.FAIL]
    for _, row in failed.iterrows():
        print(f"失败: {row[Columns.Verify.PROPERTY]} ({row[Columns.Verify.FAILING_CASE]})")
    return ExitCode.PROPERTY_FAILURE if not failed.empty else ExitCode.OK


@ErrorHandler.handle_command_error("生成")
def cmd_generate(args: argparse.Namespace) -> int:
    validate_not_empty(args.game, "--game")
    game = ExperimentController.generate(args.game, args.seed, args.out)
    print(f"{game!r} -> {args.out}")
    return ExitCode.OK


COMMANDS = {
    "run": cmd_run,
    "rates": cmd_rates,
    "verify": cmd_verify,
    "generate": cmd_generate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse 对 --help / --version 以 0 退出，参数错误以 2 退出
        return int(e.code or 0)
    configure_logging(-1 if args.quiet else args.verbose)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
