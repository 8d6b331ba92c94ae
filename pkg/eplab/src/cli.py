import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from eplab.src.config import load_scenario
from eplab.src.errors import ConfigError, EPLabError, InvalidBackground, UnsupportedVariant
from eplab.src.job import SweepJob
from eplab.src.log import cli_log
from eplab.src.output import default_output_dir
from eplab.src.output.model import Summary
from eplab.src.output.writer import ResultWriter
from eplab.src.runner import SWEEP_PARAMS, run_to_directory
from eplab.src.suites import SUITES, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BLOWUP = 2
EXIT_SOLVER = 3

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eplab", description="阻尼无压 Euler-Poisson 系统的数值实验")
    parser.add_argument("--jobs", type=int, default=1, help="扫描时的并发运行数")
    parser.add_argument("--seed", type=int, default=None, help="保留参数，当前没有随机成分")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="运行一个场景")
    run.add_argument("config", type=Path, help="场景 YAML 文件")
    run.add_argument("-o", "--output", type=Path, default=None, help="输出目录")

    verify = sub.add_parser("verify", help="运行内置验证套件")
    verify.add_argument("suite", help=f"套件名：{', '.join([*SUITES, 'all'])}")

    sweep = sub.add_parser("sweep", help="参数扫描")
    sweep.add_argument("config", type=Path, help="场景 YAML 文件")
    sweep.add_argument("--param", required=True, help=f"扫描参数：{', '.join(SWEEP_PARAMS)}")
    sweep.add_argument("--values", required=True, help="逗号分隔的取值，例如 0.5,1,2")
    sweep.add_argument("-o", "--output", type=Path, default=None, help="输出目录")
    return parser

def _exit_code_for(error: EPLabError) -> int:
    if isinstance(error, (ConfigError, InvalidBackground, UnsupportedVariant)):
        return EXIT_USAGE
    return EXIT_SOLVER

def cmd_run(config_path: Path, output_dir: Path | None) -> int:
    """
    运行场景并写出 timeseries.csv / trajectory.csv / summary.json。

    Returns:
        int: 0 完成，1 配置错误，2 经典解破裂，3 求解器错误。
    """
    try:
        config = load_scenario(config_path)
    except ConfigError as e:
        cli_log.error(f"配置错误（{e.key}）：{e}")
        return EXIT_USAGE
    output_dir = output_dir or default_output_dir / config.name
    try:
        outcome = run_to_directory(config, output_dir)
    except EPLabError as e:
        code = _exit_code_for(e)
        if code == EXIT_USAGE:
            cli_log.error(f"场景 {config.name} 的配置不合法：{e}")
            return code
        cli_log.exception(f"场景 {config.name} 求解失败")
        summary = Summary(scenario=config.name, kind=config.kind, solver=config.solver if config.kind == "pde" else None,
                          status="error", message=str(e))
        ResultWriter(output_dir).write_summary(summary)
        return code
    if outcome.summary.status == "blowup":
        cli_log.warning(f"场景 {config.name} 在 t* = {outcome.summary.blowup_time:.6g} 处破裂")
        return EXIT_BLOWUP
    return EXIT_OK

def cmd_verify(suite_name: str) -> int:
    """运行验证套件，stdout 先输出表格再输出一行 JSON；全部通过时返回 0"""
    if suite_name != "all" and suite_name not in SUITES:
        cli_log.error(f"未知验证套件：{suite_name}")
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        results = run_suite(suite_name)
    except EPLabError as e:
        cli_log.exception(f"验证套件 {suite_name} 运行失败")
        return _exit_code_for(e)

    passed = True
    width = max((len(c.name) for checks in results.values() for c in checks), default=10)
    for suite, checks in results.items():
        for check in checks:
            passed &= check.passed
            status = "PASS" if check.passed else "FAIL"
            print(f"{suite:<10} {check.name:<{width}} {status}  {check.detail}")
    report = {
        suite: {c.name: {"passed": c.passed, "margin": c.margin, "detail": c.detail} for c in checks}
        for suite, checks in results.items()
    }
    print(json.dumps({"passed": passed, "suites": report}, ensure_ascii=False))
    return EXIT_OK if passed else EXIT_SOLVER

def cmd_sweep(config_path: Path, param: str, values: Sequence[float], output_dir: Path | None, jobs: int = 1) -> int:
    """每个取值独立运行一次，写出 rates.csv；单点失败只记录在对应行"""
    if param not in SWEEP_PARAMS:
        cli_log.error(f"不支持的扫描参数：{param}，可选 {', '.join(SWEEP_PARAMS)}")
        return EXIT_USAGE
    if not values:
        cli_log.error("扫描取值列表为空")
        return EXIT_USAGE
    try:
        config = load_scenario(config_path)
    except ConfigError as e:
        cli_log.error(f"配置错误（{e.key}）：{e}")
        return EXIT_USAGE
    output_dir = output_dir or default_output_dir / f"{config.name}-sweep-{param}"
    SweepJob(config, param, list(values), output_dir, jobs).run()
    return EXIT_OK

def _parse_values(text: str) -> list[float]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    try:
        return [float(part) for part in parts]
    except ValueError as e:
        raise UsageError(f"无法解析取值列表 {text!r}") from e

def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs 必须 >= 1")
        match args.command:
            case "run":
                return cmd_run(args.config, args.output)
            case "verify":
                return cmd_verify(args.suite)
            case "sweep":
                return cmd_sweep(args.config, args.param, _parse_values(args.values), args.output, args.jobs)
    except UsageError as e:
        cli_log.error(f"参数错误：{e}")
        return EXIT_USAGE
    return EXIT_USAGE
