"""
Скаляры пакета.

BigScalar: mpmath.mpf, все вычисления идут внутри контекста `precision(bits)`,
результат операции получает рабочую точность контекста (максимум точностей операндов
обеспечивает вызывающий код, открывая контекст с нужным числом бит).
Rational: fractions.Fraction (всегда в несократимом виде).
"""
import math
from contextlib import contextmanager
from functools import wraps
from fractions import Fraction
from typing import Any, Iterator, TypeAlias

import mpmath
from mpmath import mp

from sos_staircase.config import settings

BigScalar: TypeAlias = mpmath.mpf
Scalar: TypeAlias = Any  # mpf | Fraction | int


def working_bits(bits: int | None = None) -> int:
    """Явно заданная точность либо max(текущая, settings.PREC)."""
    return bits or max(mp.prec, settings.PREC)


@contextmanager
def precision(bits: int) -> Iterator[int]:
    """Рабочая точность mpmath на время блока."""
    with mp.workprec(bits):
        yield bits


def at_working_precision(func):
    """Декоратор: тело выполняется на точности working_bits()."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        with precision(working_bits()):
            return func(*args, **kwargs)
    return wrapper


def is_rational(value: Scalar) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def big(value: Scalar) -> mpmath.mpf:
    """Приводит int/Fraction/str/float к mpf на текущей точности."""
    if isinstance(value, mpmath.mpf):
        return +value
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, str):
        return big(parse_scalar(value))
    return mpmath.mpf(value)


def to_fraction(value: Scalar) -> Fraction:
    """Точное (двоичное) рациональное значение."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, mpmath.mpf):
        sign, man, exp, _ = value._mpf_
        if man == 0:
            if value != 0:
                raise ValueError(f"non-finite value {value}")
            return Fraction(0)
        man, exp = (-int(man) if sign else int(man)), int(exp)
        return Fraction(man * 2 ** exp) if exp >= 0 else Fraction(man, 2 ** (-exp))
    return Fraction(value)


def digits_for(bits: int) -> int:
    return int(bits * math.log10(2)) + 2


def to_decimal(value: Scalar, bits: int | None = None) -> str:
    """
    Строка без потери точности: рациональные как "p/q" (целые как "p"),
    mpf как десятичная запись на полной точности.
    """
    if is_rational(value):
        frac = Fraction(value)
        return str(frac.numerator) if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"
    n = digits_for(bits or mp.prec)
    return mpmath.nstr(value, n, strip_zeros=True)


def parse_scalar(text: str) -> Scalar:
    """Обратная к to_decimal: "p/q" и целые дают Fraction, остальное mpf."""
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    if text.lstrip("+-").isdigit():
        return Fraction(int(text))
    return mpmath.mpf(text)


def unify(*values: Scalar) -> list:
    """Если хотя бы одно значение вещественное, все переводятся в mpf."""
    if all(is_rational(v) for v in values):
        return [Fraction(v) for v in values]
    return [big(v) for v in values]


def zero_like(value: Scalar) -> Scalar:
    return Fraction(0) if is_rational(value) else mpmath.mpf(0)


def is_zero(value: Scalar) -> bool:
    return value == 0


def pruning_threshold(bits: int | None = None) -> mpmath.mpf:
    """2^(−prec+16): ниже этого (относительно max) коэффициент считается нулем."""
    return mpmath.ldexp(1, -(bits or mp.prec) + 16)


# --- Константы ---
def four_e() -> mpmath.mpf:
    return 4 * mpmath.e
