"""
命令行入口：python -m src.cli {lattice,threshold,sweep,fit} ...

退出码：0 成功，1 用法错误，2 校验失败，3 读写失败。日志写到标准错误，
标准输出只输出机器可读的结果。
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

# 必须在导入任何我们自己的模块之前首先加载环境变量
load_dotenv()

from .config import RunConfig, build_config, config_metadata, env_overrides  # noqa: E402
from .errors import ConfigError, CsvFormatError, FitError, LatticeError, StorageError  # noqa: E402
from .graph import run_threshold_pipeline  # noqa: E402
from .lattice import build_lattice, lattice_document, lattice_summary, validate  # noqa: E402
from .montecarlo import sweep_probability  # noqa: E402
from .scaling import fit_rows  # noqa: E402
from .storage import read_trials_csv, render_json, sweep_csv, write_json, write_text  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON 配置文件，覆盖命令行参数")
    parser.add_argument("--log-level", dest="log_level", help="日志级别")
    parser.add_argument("--threads", type=int, help="工作线程数")
    parser.add_argument("--output", help="输出文件，缺省写到标准输出或 output_dir")


def _add_run(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--geometry", choices=["4.8.8", "6.6.6"])
    parser.add_argument("--variant", choices=["square", "triangular"])
    parser.add_argument("--method", choices=["string", "branching", "algebraic"])
    parser.add_argument("--color", dest="colors", action="append", choices=["R", "G", "B"])
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--twin-redraw", dest="twin_redraw", choices=["per-round", "frozen"])
    parser.add_argument("--criterion", choices=["per-color", "all-colors"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twinperc", description="色码晶格的孪生比特丢失恢复与阈值计算")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    lattice = sub.add_parser("lattice", help="构造并导出晶格 JSON")
    _add_common(lattice)
    lattice.add_argument("--geometry", choices=["4.8.8", "6.6.6"])
    lattice.add_argument("--variant", choices=["square", "triangular"])
    lattice.add_argument("--distance", type=int)

    threshold = sub.add_parser("threshold", help="逐码距计算临界丢失率分布")
    _add_common(threshold)
    _add_run(threshold)
    threshold.add_argument("--distances", type=int, nargs="+")
    threshold.add_argument("--output-dir", dest="output_dir")
    threshold.add_argument("--format", dest="output_format", choices=["csv", "json"])
    threshold.add_argument("--inv-nu", dest="inv_nu", type=float)
    threshold.add_argument("--weighted", action="store_true", default=None)

    sweep = sub.add_parser("sweep", help="固定码距扫描丢失率，输出存活概率")
    _add_common(sweep)
    _add_run(sweep)
    sweep.add_argument("--distance", type=int)
    sweep.add_argument("--grid", type=float, nargs="+", help="丢失率网格")

    fit = sub.add_parser("fit", help="对逐试验 CSV 做标度拟合")
    _add_common(fit)
    fit.add_argument("--input", required=True, help="threshold 子命令输出的 CSV")
    fit.add_argument("--inv-nu", dest="inv_nu", type=float)
    fit.add_argument("--weighted", action="store_true", default=None)
    return parser


def _flags(args: argparse.Namespace, names: List[str]) -> dict:
    return {name: getattr(args, name, None) for name in names}


def _configure_logging(level: Optional[str]) -> None:
    level = (level or env_overrides().get("log_level") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - [%(funcName)s:%(lineno)d] - %(message)s",
        stream=sys.stderr,
    )


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        write_text(output, text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def cmd_lattice(args: argparse.Namespace) -> int:
    flags = _flags(args, ["geometry", "variant", "threads", "log_level"])
    flags["distances"] = [args.distance] if args.distance is not None else None
    config = build_config(flags, args.config)
    lattice = build_lattice(config.geometry, config.variant, config.distances[0])
    report = validate(lattice)
    if not report.ok:
        logger.error(f"晶格未通过校验: {report.rules()}")
        return EXIT_VALIDATION
    logger.info(f"晶格: {lattice_summary(lattice)}")
    _emit(render_json(lattice_document(lattice)), args.output)
    return EXIT_OK


def cmd_threshold(args: argparse.Namespace) -> int:
    flags = _flags(args, [
        "geometry", "variant", "distances", "method", "colors", "trials", "seed", "threads",
        "twin_redraw", "criterion", "output", "output_dir", "output_format", "inv_nu", "weighted", "log_level",
    ])
    config = build_config(flags, args.config)
    final = run_threshold_pipeline(config)
    _emit(json.dumps({
        "samples": final.get("samples_path"),
        "summary": final.get("summary_path"),
        "fit": final.get("fit_path") or None,
    }) + "\n", None)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    flags = _flags(args, [
        "geometry", "variant", "method", "colors", "trials", "seed", "threads", "criterion", "grid", "log_level",
    ])
    flags["distances"] = [args.distance] if args.distance is not None else None
    config = build_config(flags, args.config)
    distance = config.distances[0]
    lattice = build_lattice(config.geometry, config.variant, distance)
    color = config.colors[0]
    points = sweep_probability(
        lattice, config.method, color, config.grid, config.trials, config.seed,
        threads=config.threads, criterion=config.criterion,
    )
    metadata = config_metadata(config)
    _emit(sweep_csv(points, metadata), args.output)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    flags = _flags(args, ["inv_nu", "weighted", "threads", "log_level"])
    config: RunConfig = build_config(flags, args.config)
    rows = read_trials_csv(args.input)
    fits = fit_rows(rows, inv_nu=config.inv_nu, weighted=config.weighted)
    document = {"input": args.input, "fits": fits}
    if args.output:
        write_json(args.output, document)
    else:
        _emit(render_json(document), None)
    return EXIT_OK


COMMANDS = {
    "lattice": cmd_lattice,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"用法错误: {e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    _configure_logging(getattr(args, "log_level", None))
    try:
        return COMMANDS[args.command](args)
    except (StorageError, CsvFormatError) as e:
        logger.error(f"读写失败: {e}")
        return EXIT_IO
    except (ConfigError, LatticeError, FitError) as e:
        logger.error(f"校验失败: {e}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
