"""
Команда `bounds`: границы порогов ε_d из теоремы, константы Маркова и кэш вычисленных оценок.
"""
import argparse

import mpmath

from sos_staircase.cli.common import Command, OutputFormat, RunConfig, add_common_arguments, build_config
from sos_staircase.core.scalar import big, parse_scalar, precision
from sos_staircase.database import cached_enclosures, session_scope
from sos_staircase.logger import log_action
from sos_staircase.services.certificates import markov_bound
from sos_staircase.services.staircase import theoretical_bounds
from sos_staircase.utils.formatting import csv_text, emit, json_text

HEADER = ["d", "lower_bound", "upper_bound", "markov_coeff", "markov_lower_inv", "cached_lo", "cached_hi", "sandwich_ok"]
DIGITS = 15


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.BOUNDS.value, help="theoretical bounds next to cached thresholds")
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    return run(build_config(Command.BOUNDS, args))


def bound_rows(cfg: RunConfig) -> list[dict]:
    with session_scope() as session:
        cached = cached_enclosures(session)
    rows = []
    with precision(cfg.prec_bits):
        for d in cfg.orders:
            lower, upper = theoretical_bounds(d - 1)
            markov = markov_bound(d - 1) if d >= 2 else None
            record = cached.get(d)
            row = {
                "d": d,
                "lower_bound": mpmath.nstr(big(lower), DIGITS),
                "upper_bound": mpmath.nstr(big(upper), DIGITS),
                "markov_coeff": mpmath.nstr(markov[0], DIGITS) if markov else None,
                "markov_lower_inv": mpmath.nstr(markov[1], DIGITS) if markov else None,
                "cached_lo": None,
                "cached_hi": None,
                "sandwich_ok": None,
            }
            if record is not None:
                lo, hi = big(parse_scalar(record.lo)), big(parse_scalar(record.hi))
                row["cached_lo"] = mpmath.nstr(lo, DIGITS)
                row["cached_hi"] = mpmath.nstr(hi, DIGITS)
                row["sandwich_ok"] = bool(big(lower) <= hi and lo <= big(upper))
            rows.append(row)
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def run(cfg: RunConfig) -> int:
    rows = bound_rows(cfg)
    if cfg.format == OutputFormat.JSON:
        emit(json_text({"bounds": rows}), cfg.out)
    else:
        body = [[_cell(row[key]) for key in HEADER] for row in rows]
        emit(csv_text(HEADER, body), cfg.out)
    log_action("SYSTEM_CLI", "BOUNDS", f"orders={list(cfg.orders)} cached={sum(1 for r in rows if r['cached_hi'])}")
    return 0
