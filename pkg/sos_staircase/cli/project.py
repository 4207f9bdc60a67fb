"""
Команда `project`: опорные значения проекции моментной релаксации задачи на окружности на (x1, x2).
"""
import argparse
from fractions import Fraction

from sos_staircase.cli.common import Command, OutputFormat, RunConfig, add_common_arguments, build_config
from sos_staircase.core.scalar import parse_scalar, precision, to_decimal
from sos_staircase.exceptions import ConfigError
from sos_staircase.logger import log_action
from sos_staircase.services.dispatch import run_cells
from sos_staircase.services.relaxation import support_directions
from sos_staircase.utils.formatting import csv_text, emit, fixed, json_text

MIN_DIRECTIONS = 8
DEFAULT_EPSILON = Fraction(3, 1000)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.PROJECT.value, help="support values of the projected relaxation")
    add_common_arguments(parser)
    parser.add_argument("--directions", type=int, default=None, help="number of evenly spaced directions")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    return run(build_config(Command.PROJECT, args, epsilons=(DEFAULT_EPSILON,), orders=(1, 2, 3, 4)))


def run(cfg: RunConfig) -> int:
    if cfg.directions < MIN_DIRECTIONS:
        raise ConfigError(f"at least {MIN_DIRECTIONS} directions are needed, got {cfg.directions}")
    params = cfg.solver_params()
    with precision(cfg.prec_bits):
        directions = [(to_decimal(u1), to_decimal(u2)) for u1, u2 in support_directions(cfg.directions)]
    grid = [(eps, d) for eps in cfg.epsilons for d in cfg.orders]
    payloads = [
        {"epsilon": to_decimal(eps), "d": d, "directions": [list(u) for u in directions], "params": params.model_dump()}
        for eps, d in grid
    ]
    results = run_cells("support", payloads, jobs=cfg.jobs)
    failed = sum(1 for result in results if result["status"] != "ok")

    if cfg.format == OutputFormat.JSON:
        doc = {
            "directions": [list(u) for u in directions],
            "polygons": [
                {
                    "epsilon": to_decimal(eps),
                    "d": d,
                    "supports": result.get("values"),
                    "error": result.get("reason"),
                }
                for (eps, d), result in zip(grid, results)
            ],
        }
        emit(json_text(doc), cfg.out)
    else:
        body = []
        with precision(cfg.prec_bits):
            for (eps, d), result in zip(grid, results):
                for k, (u1, u2) in enumerate(directions):
                    support = fixed(parse_scalar(result["values"][k]), 8) if result["status"] == "ok" else "NA"
                    body.append([
                        fixed(eps, 10), d, k,
                        fixed(parse_scalar(u1), 8), fixed(parse_scalar(u2), 8), support,
                    ])
        emit(csv_text(["epsilon", "d", "k", "u1", "u2", "support"], body), cfg.out)

    log_action("SYSTEM_CLI", "PROJECT", f"cells={len(grid)} directions={cfg.directions} failed={failed}")
    return 2 if failed else 0
