"""
Точка входа CLI: по одному модулю на команду, общий обработчик ошибок.
"""
import argparse
import json
import sys

from sos_staircase.cli import bounds, certify, project, staircase, table
from sos_staircase.config import settings
from sos_staircase.exceptions import StaircaseError
from sos_staircase.logger import log_action, log_exception

COMMANDS = (table, staircase, project, certify, bounds)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sos-staircase",
        description="Moment-SOS relaxations, exactness thresholds and SOS certificates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    log_action("SYSTEM", "CLI_START", f"command={args.command} v{settings.VERSION}")
    try:
        return args.handler(args)
    except StaircaseError as exc:
        # Глобальный обработчик: причина в stderr одной JSON-строкой
        log_exception(args.command, exc)
        failure = {"status": "error", "error": type(exc).__name__, "reason": exc.detail}
        print(json.dumps(failure, ensure_ascii=False), file=sys.stderr)
        return exc.exit_code
