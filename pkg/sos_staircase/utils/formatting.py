"""
Детерминированный вывод: фиксированное число знаков, CSV (',' и LF), JSON.
"""
import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable

from sos_staircase.core.scalar import Scalar, big, to_fraction


def fixed(value: Scalar, digits: int = 6, zero_threshold: Scalar | None = None) -> str:
    """Округление к ближайшему (половины к четному) через Fraction, без научной записи."""
    if zero_threshold is not None and abs(big(value)) < big(zero_threshold):
        return "0"
    scaled = round(to_fraction(value) * 10 ** digits)
    if scaled == 0:
        return "0." + "0" * digits if digits else "0"
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), 10 ** digits)
    if not digits:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:0{digits}d}"


def csv_text(header: list[str], rows: Iterable[list[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=",", lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def json_text(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def emit(text: str, out: Path | None) -> None:
    """В файл (UTF-8, LF) или в stdout."""
    if out is None:
        print(text, end="")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
