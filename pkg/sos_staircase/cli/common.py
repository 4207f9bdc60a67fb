"""
Общие флаги команд и RunConfig.
"""
import argparse
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from sos_staircase.config import settings
from sos_staircase.exceptions import ConfigError
from sos_staircase.models import SolverParams


class Command(str, Enum):
    TABLE = "table"
    STAIRCASE = "staircase"
    PROJECT = "project"
    CERTIFY = "certify"
    BOUNDS = "bounds"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    command: Command
    orders: tuple[int, ...] = (1, 2, 3, 4, 5)
    log10_eps: tuple[int, ...] = (1, 2, 3, 4, 5)
    epsilons: tuple[Fraction, ...] = ()
    prec_bits: int = Field(default_factory=lambda: settings.PREC, ge=53)
    gap_tol: float = Field(default_factory=lambda: settings.GAP_TOL)
    feas_tol: float = Field(default_factory=lambda: settings.FEAS_TOL)
    zero_threshold: float = Field(default_factory=lambda: settings.ZERO_THRESHOLD)
    format: OutputFormat = OutputFormat.CSV
    out: Path | None = None
    jobs: int = Field(default=1, ge=1)
    directions: int = 16
    width: float = 1e-6
    rel_width: float | None = None
    rationalize: bool = False
    denom_bound: int = Field(default=10 ** 6, ge=1)
    long: bool = False
    paulynomial: bool = False
    dump_dir: Path | None = None

    @field_validator("gap_tol", "feas_tol", "zero_threshold", "width")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("orders")
    @classmethod
    def _orders(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("order range must be nonempty")
        if min(value) < 1:
            raise ValueError("orders must be >= 1")
        return value

    def solver_params(self) -> SolverParams:
        return SolverParams.from_settings(precision=self.prec_bits, gap_tol=self.gap_tol, feas_tol=self.feas_tol)


# --- 1. РАЗБОР ДИАПАЗОНОВ ---

def parse_range(text: str) -> tuple[int, ...]:
    """"1-5" → (1, 2, 3, 4, 5); "2,4,7" → (2, 4, 7)."""
    values: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                first, last = part.split("-", 1)
                values.extend(range(int(first), int(last) + 1))
            else:
                values.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"cannot parse range {text!r}") from exc
    return tuple(values)


def parse_epsilons(text: str) -> tuple[Fraction, ...]:
    """Десятичные строки читаются точно: "0.2" → 1/5."""
    try:
        return tuple(Fraction(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse epsilon list {text!r}") from exc


# --- 2. ФЛАГИ ---

def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--prec-bits", type=int, default=None, help="working precision in bits")
    parser.add_argument("--gap-tol", type=float, default=None)
    parser.add_argument("--feas-tol", type=float, default=None)
    parser.add_argument("--orders", type=str, default=None, help='relaxation orders, e.g. "1-5" or "2,3"')
    parser.add_argument("--log10-eps", type=str, default=None, help='k values for eps = 10^-k, e.g. "1-5"')
    parser.add_argument("--epsilon", type=str, default=None, help="comma separated epsilon values")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=None)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--zero-threshold", type=float, default=None)


def build_config(command: Command, args: argparse.Namespace, **defaults: Any) -> RunConfig:
    """Флаги поверх значений команды по умолчанию; ошибки валидации → ConfigError."""
    values: dict[str, Any] = {"command": command, **defaults}
    mapping = {
        "prec_bits": args.prec_bits,
        "gap_tol": args.gap_tol,
        "feas_tol": args.feas_tol,
        "format": args.format,
        "out": args.out,
        "jobs": args.jobs,
        "zero_threshold": args.zero_threshold,
    }
    for name in ("directions", "width", "rel_width", "denom_bound", "dump_dir"):
        mapping[name] = getattr(args, name, None)
    for name in ("rationalize", "long", "paulynomial"):
        mapping[name] = getattr(args, name, None) or None
    if args.orders:
        mapping["orders"] = parse_range(args.orders)
    if args.log10_eps:
        mapping["log10_eps"] = parse_range(args.log10_eps)
    if args.epsilon:
        mapping["epsilons"] = parse_epsilons(args.epsilon)
    values.update({k: v for k, v in mapping.items() if v is not None})
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.errors()[0]['msg']}") from exc
