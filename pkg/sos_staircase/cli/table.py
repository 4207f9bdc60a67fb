"""
Команда `table`: сетка нижних оценок v_d(10^−k) и строка ε = 0.
"""
import argparse
from fractions import Fraction
from pathlib import Path

from sos_staircase.cli.common import Command, OutputFormat, RunConfig, add_common_arguments, build_config
from sos_staircase.config import settings
from sos_staircase.core.scalar import parse_scalar, precision, to_decimal
from sos_staircase.core.sdp_io import relaxation_to_json, to_sdpa
from sos_staircase.logger import log_action
from sos_staircase.models import ParamPop, Variant
from sos_staircase.services.dispatch import run_cells
from sos_staircase.services.relaxation import build_moment, make_pop
from sos_staircase.utils.formatting import csv_text, emit, fixed, json_text

NA = "NA"
LONG_ORDERS = tuple(range(1, 9))
LONG_LOG10_EPS = tuple(range(1, 10))
LONG_ZERO_THRESHOLD = 1e-60
LONG_PREC = 512


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.TABLE.value, help="grid of relaxation values v_d(eps)")
    add_common_arguments(parser)
    parser.add_argument("--long", action="store_true", help="full 8x9 grid at 512+ bits, zeros below 1e-60")
    parser.add_argument("--dump-dir", type=Path, default=None, help="write each relaxation as sdp-v1 JSON and SDPA text")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    defaults = {}
    if args.long:
        defaults = {
            "orders": LONG_ORDERS,
            "log10_eps": LONG_LOG10_EPS,
            "zero_threshold": LONG_ZERO_THRESHOLD,
            "prec_bits": max(LONG_PREC, settings.PREC),
        }
    return run(build_config(Command.TABLE, args, **defaults))


def table_rows(cfg: RunConfig) -> tuple[str, list[tuple[str, Fraction]]]:
    """Метки строк: k для ε = 10^−k (и "inf" для ε = 0) либо явные значения --epsilon."""
    if cfg.epsilons:
        return "epsilon", [(to_decimal(eps), eps) for eps in cfg.epsilons]
    rows = [(str(k), Fraction(1, 10 ** k)) for k in cfg.log10_eps]
    rows.append(("inf", Fraction(0)))
    return "k", rows


def dump_relaxations(target: Path, orders: tuple[int, ...], label: str, rows: list[tuple[str, Fraction]]) -> int:
    """Файлы <label><name>_d<d>.json и .dat-s для каждой клетки таблицы."""
    target.mkdir(parents=True, exist_ok=True)
    count = 0
    for name, eps in rows:
        pop = make_pop(ParamPop(epsilon=eps))
        for d in orders:
            relaxation = build_moment(pop, d)
            stem = f"{label}{name.replace('/', '_')}_d{d}"
            (target / f"{stem}.json").write_text(relaxation_to_json(relaxation), encoding="utf-8")
            (target / f"{stem}.dat-s").write_text(to_sdpa(relaxation.sdp), encoding="utf-8")
            count += 1
    log_action("relaxation", "DUMP", f"dir={target} files={2 * count}")
    return count


def run(cfg: RunConfig) -> int:
    label, rows = table_rows(cfg)
    if cfg.dump_dir is not None:
        dump_relaxations(cfg.dump_dir, cfg.orders, label, rows)
    params = cfg.solver_params()
    payloads = [
        {"epsilon": to_decimal(eps), "d": d, "variant": Variant.UNIVARIATE4.value, "params": params.model_dump()}
        for _, eps in rows
        for d in cfg.orders
    ]
    results = run_cells("solve_order", payloads, jobs=cfg.jobs)

    cells: list[list[dict]] = [results[i * len(cfg.orders):(i + 1) * len(cfg.orders)] for i in range(len(rows))]
    missing = sum(1 for row in cells for cell in row if cell["status"] != "ok")

    if cfg.format == OutputFormat.JSON:
        doc = {
            "orders": list(cfg.orders),
            "rows": [
                {
                    label: name,
                    "epsilon": to_decimal(eps),
                    "values": [cell.get("value") if cell["status"] == "ok" else None for cell in row],
                    "errors": [cell.get("reason") for cell in row],
                }
                for (name, eps), row in zip(rows, cells)
            ],
        }
        emit(json_text(doc), cfg.out)
    else:
        header = [label] + [f"v{d}" for d in cfg.orders]
        with precision(cfg.prec_bits):
            body = [
                [name] + [
                    fixed(parse_scalar(cell["value"]), 6, cfg.zero_threshold) if cell["status"] == "ok" else NA
                    for cell in row
                ]
                for (name, _), row in zip(rows, cells)
            ]
        emit(csv_text(header, body), cfg.out)

    log_action("SYSTEM_CLI", "TABLE", f"rows={len(rows)} orders={list(cfg.orders)} missing={missing}")
    return 2 if missing else 0
