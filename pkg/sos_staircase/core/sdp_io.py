"""
Сериализация SdpProblem: JSON "sdp-v1" (decimal-строки) и разреженный текст в духе SDPA.
"""
import json
from typing import Any

from sos_staircase.core.scalar import at_working_precision, parse_scalar, precision, to_decimal, working_bits
from sos_staircase.models import LinearEquality, MomentRelaxation, SdpBlock, SdpProblem

SCHEMA = "sdp-v1"


def _entries_to_json(entries) -> list:
    return [[i, j, to_decimal(v)] for i, j, v in entries]


def _entries_from_json(items) -> tuple:
    return tuple((int(i), int(j), parse_scalar(v)) for i, j, v in items)

@at_working_precision
def problem_to_json(problem: SdpProblem, moment_index: dict | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "num_vars": problem.num_vars,
        "objective": [to_decimal(v) for v in problem.objective],
        "blocks": [
            {
                "dim": blk.dim,
                "constant": _entries_to_json(blk.constant),
                "coeffs": {str(k): _entries_to_json(v) for k, v in blk.coeffs.items()},
            }
            for blk in problem.blocks
        ],
        "equalities": [
            {"coeffs": {str(k): to_decimal(v) for k, v in eq.coeffs.items()}, "rhs": to_decimal(eq.rhs)}
            for eq in problem.equalities
        ],
        "labels": list(problem.labels),
    }
    if moment_index is not None:
        doc["moment_index"] = [[list(alpha), idx] for alpha, idx in moment_index.items()]
    return doc


def problem_from_json(doc: dict[str, Any], bits: int | None = None) -> SdpProblem:
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA}")
    with precision(working_bits(bits)):
        return _problem(doc)


def _problem(doc: dict[str, Any]) -> SdpProblem:
    return SdpProblem(
        num_vars=doc["num_vars"],
        objective=tuple(parse_scalar(v) for v in doc["objective"]),
        blocks=tuple(
            SdpBlock(
                dim=b["dim"],
                constant=_entries_from_json(b["constant"]),
                coeffs={int(k): _entries_from_json(v) for k, v in b["coeffs"].items()},
            )
            for b in doc["blocks"]
        ),
        equalities=tuple(
            LinearEquality(coeffs={int(k): parse_scalar(v) for k, v in e["coeffs"].items()}, rhs=parse_scalar(e["rhs"]))
            for e in doc["equalities"]
        ),
        labels=tuple(doc.get("labels", ())),
    )


def relaxation_to_json(relaxation: MomentRelaxation) -> str:
    doc = problem_to_json(relaxation.sdp, relaxation.moment_index)
    doc["order"] = relaxation.order
    return json.dumps(doc, indent=2, ensure_ascii=False)

@at_working_precision
def to_sdpa(problem: SdpProblem) -> str:
    """
    Разреженный формат SDPA: min c·x s.t. Σ x_i F_i − F0 ⪰ 0.
    Наш F0 входит со знаком минус; каждое равенство a·y = b становится
    парой диагональных элементов последнего LP-блока (a·y − b ≥ 0, b − a·y ≥ 0).
    """
    blocks = list(problem.blocks)
    p = len(problem.equalities)
    sizes = [str(blk.dim) for blk in blocks]
    if p:
        sizes.append(str(-2 * p))
    lines = [
        f'"sos-staircase {SCHEMA} export"',
        str(problem.num_vars),
        str(len(sizes)),
        " ".join(sizes),
        " ".join(to_decimal(v) for v in problem.objective),
    ]
    for b, blk in enumerate(blocks, start=1):
        for i, j, v in blk.constant:
            lines.append(f"0 {b} {i + 1} {j + 1} {to_decimal(-v)}")
        for k, entries in blk.coeffs.items():
            for i, j, v in entries:
                lines.append(f"{k + 1} {b} {i + 1} {j + 1} {to_decimal(v)}")
    if p:
        lp = len(blocks) + 1
        for r, eq in enumerate(problem.equalities):
            pos, neg = 2 * r + 1, 2 * r + 2
            if eq.rhs != 0:
                lines.append(f"0 {lp} {pos} {pos} {to_decimal(eq.rhs)}")
                lines.append(f"0 {lp} {neg} {neg} {to_decimal(-eq.rhs)}")
            for k, v in eq.coeffs.items():
                lines.append(f"{k + 1} {lp} {pos} {pos} {to_decimal(v)}")
                lines.append(f"{k + 1} {lp} {neg} {neg} {to_decimal(-v)}")
    return "\n".join(lines) + "\n"
