"""
Команда `staircase`: оценки порогов ε_d, кривые границ и наклон ln(1/ε_d).
"""
import argparse
import json
import sys
from fractions import Fraction

import mpmath

from sos_staircase.cli.common import Command, OutputFormat, RunConfig, add_common_arguments, build_config
from sos_staircase.core.scalar import big, precision, to_decimal
from sos_staircase.database import save_enclosure, session_scope
from sos_staircase.logger import log_action
from sos_staircase.models import StaircasePoint
from sos_staircase.services.staircase import bound_curves, point_to_json, sweep
from sos_staircase.utils.formatting import csv_text, emit, json_text

HEADER = [
    "d", "lo", "hi", "lower_bound", "upper_bound", "log10_inv_hi",
    "precision_bits", "wall_time_ms", "ln_inv_upper_bound", "ln_inv_lower_bound",
]
DIGITS = 15


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.STAIRCASE.value, help="exactness thresholds eps_d by bisection")
    add_common_arguments(parser)
    parser.add_argument("--width", type=float, default=None, help="absolute enclosure width")
    parser.add_argument("--rel-width", dest="rel_width", type=float, default=None, help="relative enclosure width")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    return run(build_config(Command.STAIRCASE, args, orders=(2, 3, 4, 5), rel_width=1e-3))


def _num(value) -> str:
    return mpmath.nstr(big(value), DIGITS)


def _row(point: StaircasePoint, ln_upper, ln_lower) -> list:
    enc = point.enclosure
    if enc is None:
        lo = hi = log_hi = "NA"
    else:
        lo, hi = _num(enc.lo), _num(enc.hi)
        log_hi = _num(-mpmath.log10(big(enc.hi)))
    return [
        point.d, lo, hi, _num(point.lower_bound), _num(point.upper_bound), log_hi,
        point.precision_bits, point.wall_time_ms, _num(ln_upper), _num(ln_lower),
    ]


def run(cfg: RunConfig) -> int:
    params = cfg.solver_params()
    width = Fraction(str(cfg.width))
    rel_width = Fraction(str(cfg.rel_width)) if cfg.rel_width is not None else None
    points, slope = sweep(cfg.orders, params, target_width=width, rel_width=rel_width, jobs=cfg.jobs)

    with session_scope() as session:
        for point in points:
            save_enclosure(session, point)

    with precision(cfg.prec_bits):
        curves = {d: (ln_upper, ln_lower) for d, ln_upper, ln_lower in bound_curves(cfg.orders)}
        slope_text = to_decimal(slope, 64) if slope is not None else None
        if cfg.format == OutputFormat.JSON:
            doc = {
                "points": [
                    {**point_to_json(p), "ln_inv_upper_bound": _num(curves[p.d][0]), "ln_inv_lower_bound": _num(curves[p.d][1])}
                    for p in points
                ],
                "slope": slope_text,
            }
            emit(json_text(doc), cfg.out)
        else:
            emit(csv_text(HEADER, [_row(p, *curves[p.d]) for p in points]), cfg.out)
            print(json.dumps({"slope": slope_text}), file=sys.stderr)

    failed = [p.d for p in points if p.error is not None]
    log_action("SYSTEM_CLI", "STAIRCASE", f"orders={list(cfg.orders)} failed={failed} slope={slope_text}")
    return 2 if failed else 0
