import argparse
import sys
import time
from pathlib import Path

from loguru import logger
from pydantic import ValidationError

from src.pipeline import LexTrendPipeline
from src.utils.errors import ConfigError, LexTrendError, SchemaMismatch
from src.utils.loguru_utils import setup_loguru_formatting
from src.utils.schemas import SCOPES

EXIT_CODES_HELP = """exit codes:
  0  success
  1  unexpected error (traceback in the log)
  2  configuration error (registry, lexicon, analysis config, charts.yaml, settings)
  3  parse error (HTML document, date, CSV schema)
  4  invariant violation (counts CSV; 'verify' prints every violating row)
  5  insufficient data (e.g. "no eligible outlet-years")
"""


def build_parser() -> argparse.ArgumentParser:
    """
    Парсер CLI: по подкоманде на стадию пайплайна.

    Пути по умолчанию берутся из Settings (LEXTREND_*), флаг имеет приоритет.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", type=str.upper, choices=("TRACE", "DEBUG", "INFO", "WARNING", "ERROR"),
                        help="override LEXTREND_LOG_LEVEL")

    parser = argparse.ArgumentParser(
        prog="lextrend",
        description="Lexical trend analytics over news corpora: extract, count, aggregate, analyze, chart, verify.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        return commands.add_parser(
            name, parents=[common], help=help_text, description=help_text,
            epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    extract = command("extract", "extract headline and body text from a corpus manifest or record stream")
    extract.add_argument("--registry")
    extract.add_argument("--input", required=True, help="manifest .csv or length-prefixed record stream")
    extract.add_argument("--output", required=True, help="documents JSON-lines")
    extract.add_argument("--threads", type=int)
    extract.add_argument("--lenient", action="store_true", help="skip documents that fail extraction")

    count = command("count", "count lexicon patterns per article into the reproducibility counts CSV")
    count.add_argument("--registry")
    count.add_argument("--lexicon")
    count.add_argument("--config")
    count.add_argument("--input", required=True, help="documents JSON-lines")
    count.add_argument("--output", required=True, help="counts CSV")
    count.add_argument("--threads", type=int)

    aggregate = command("aggregate", "sum counts to outlet-year totals with the eligibility flag")
    aggregate.add_argument("--config")
    aggregate.add_argument("--input", required=True, help="counts CSV")
    aggregate.add_argument("--output", required=True, help="aggregates CSV")

    analyze = command("analyze", "build series, confidence bands and summary metrics")
    analyze.add_argument("--registry")
    analyze.add_argument("--lexicon")
    analyze.add_argument("--config")
    analyze.add_argument("--input", required=True, help="aggregates CSV or counts CSV")
    analyze.add_argument("--output", required=True, help="directory for series.csv, ci.csv, summary.csv")
    analyze.add_argument("--scope", nargs="+", choices=SCOPES)
    analyze.add_argument("--construct", nargs="+")
    analyze.add_argument("--mode", choices=("pooled", "unweighted"))
    analyze.add_argument("--smooth", type=int, help="odd moving-average window in years")

    chart = command("chart", "render SVG charts from 'analyze' outputs")
    chart.add_argument("--input", required=True, help="directory written by 'analyze'")
    chart.add_argument("--output", required=True, help="directory for SVG files")
    chart.add_argument("--charts", help="chart definitions YAML")
    chart.add_argument("--scope", nargs="+", choices=SCOPES)
    chart.add_argument("--construct", nargs="+")

    verify = command("verify", "re-check counts CSV row invariants and print every violation")
    verify.add_argument("--input", required=True, help="counts CSV")

    return parser


def _analysis_config_path(flag: str | None, default: str) -> str | None:
    """Явный --config обязан существовать; путь по умолчанию может отсутствовать (тогда параметры по умолчанию)."""
    if flag is not None:
        return flag
    if Path(default).is_file():
        return default
    logger.debug(f"[PIPELINE] {default} не найден, параметры анализа по умолчанию")
    return None


def run(args: argparse.Namespace, settings) -> int:
    started = time.perf_counter()
    if not Path(args.input).exists():
        raise ConfigError(f"input not found: {args.input}")
    pipeline = LexTrendPipeline(
        registry_path=getattr(args, "registry", None) or settings.REGISTRY_PATH,
        lexicon_path=getattr(args, "lexicon", None) or settings.LEXICON_PATH,
        config_path=_analysis_config_path(getattr(args, "config", None), settings.ANALYSIS_CONFIG_PATH),
        threads=getattr(args, "threads", None) or settings.THREADS,
        lenient=getattr(args, "lenient", False),
    )

    if args.command == "extract":
        result = pipeline.extract(args.input, args.output)
    elif args.command == "count":
        result = pipeline.count(args.input, args.output)
    elif args.command == "aggregate":
        result = pipeline.aggregate(args.input, args.output)
    elif args.command == "analyze":
        result = pipeline.analyze(args.input, args.output, args.scope, args.construct, args.mode, args.smooth)
    elif args.command == "chart":
        result = pipeline.chart(args.input, args.output, args.charts or settings.CHARTS_CONFIG_PATH,
                                args.scope, args.construct)
    else:
        violations = pipeline.verify(args.input)
        for line, message in violations:
            print(f"row {line}: {message}")
        return 4 if violations else 0

    logger.info(f"[PIPELINE] {args.command}: {result} за {time.perf_counter() - started:.1f} с")
    return 0


def main(argv: list[str] | None = None) -> int:
    """
    Точка входа CLI.

    Returns:
        int: Код выхода (см. EXIT_CODES_HELP)
    """
    args = build_parser().parse_args(argv)
    try:
        from config import settings
    except ValidationError as exc:
        print(f"lextrend: invalid settings: {exc.errors()[0]['msg']}", file=sys.stderr)
        return ConfigError.exit_code

    if args.log_level:
        setup_loguru_formatting(logger, log_path=settings.LOG_PATH, level=args.log_level,
                                include_pid_tid=(getattr(args, "threads", None) or 1) > 1)

    try:
        return run(args, settings)
    except LexTrendError as exc:
        logger.error(f"[PIPELINE] ❌ {args.command}: {type(exc).__name__}: {exc}")
        print(f"lextrend {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except UnicodeDecodeError as exc:
        # CSV входы читаются как UTF-8
        logger.error(f"[PIPELINE] ❌ {args.command}: input is not valid UTF-8: {exc}")
        print(f"lextrend {args.command}: error: input is not valid UTF-8: {exc}", file=sys.stderr)
        return SchemaMismatch.exit_code
    except Exception:
        logger.exception(f"[PIPELINE] ❌ {args.command}: непредвиденная ошибка")
        return 1


if __name__ == "__main__":
    sys.exit(main())
