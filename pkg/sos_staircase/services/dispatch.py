"""
Пул задач для сеток (d, ε) и списков порядков.
Полезные нагрузки и результаты: JSON-словари с decimal-строками, поэтому результат
не зависит от того, где выполнялась ячейка: в процессе, в пуле процессов или в Celery.
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

from sos_staircase.config import settings
from sos_staircase.core.scalar import parse_scalar, precision, to_decimal
from sos_staircase.exceptions import ConfigError, StaircaseError
from sos_staircase.logger import log_action, log_exception
from sos_staircase.models import ParamPop, SolverParams, Variant
from sos_staircase.services.relaxation import project2d, solve_order
from sos_staircase.services.staircase import point_to_json, staircase_point


def _failure(context: str, exc: StaircaseError) -> dict:
    log_exception(context, exc, run_info="cell")
    return {"status": "error", "reason": exc.detail, "exit_code": exc.exit_code}


# --- 1. ЯЧЕЙКИ ---

def solve_order_cell(payload: dict) -> dict:
    """{"epsilon", "d", "variant", "params"} → {"status": "ok", "value"}."""
    params = SolverParams(**payload["params"])
    try:
        with precision(params.precision):
            eps = parse_scalar(payload["epsilon"])
            p = ParamPop(epsilon=eps, variant=Variant(payload.get("variant", Variant.UNIVARIATE4.value)))
            value = solve_order(p, payload["d"], params)
            return {"status": "ok", "value": to_decimal(value)}
    except StaircaseError as exc:
        return _failure("solve_order_cell", exc)


def threshold_cell(payload: dict) -> dict:
    params = SolverParams(**payload["params"])
    with precision(params.precision):
        width = parse_scalar(payload["target_width"])
        rel = parse_scalar(payload["rel_width"]) if payload.get("rel_width") else None
    point = staircase_point(payload["d"], width, params, rel_width=rel)
    return point_to_json(point)


def support_cell(payload: dict) -> dict:
    """{"epsilon", "d", "directions": [[u1, u2], ...], "params"} → {"status": "ok", "values"}."""
    params = SolverParams(**payload["params"])
    try:
        with precision(params.precision):
            eps = parse_scalar(payload["epsilon"])
            directions = [(parse_scalar(u1), parse_scalar(u2)) for u1, u2 in payload["directions"]]
            values = project2d(ParamPop(epsilon=eps, variant=Variant.BIVARIATE3), payload["d"], directions, params)
            return {"status": "ok", "values": [to_decimal(v) for v in values]}
    except StaircaseError as exc:
        return _failure("support_cell", exc)


CELLS: dict[str, Callable[[dict], dict]] = {
    "solve_order": solve_order_cell,
    "threshold": threshold_cell,
    "support": support_cell,
}


# --- 2. ЗАПУСК ---

def run_cells(kind: str, payloads: list[dict], jobs: int = 1, backend: str | None = None) -> list[dict]:
    """Результаты в порядке payloads."""
    if kind not in CELLS:
        raise ConfigError(f"unknown cell kind {kind!r}")
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    backend = backend or settings.TASK_BACKEND
    log_action("SYSTEM_DISPATCH", "RUN_CELLS", f"kind={kind} cells={len(payloads)} backend={backend} jobs={jobs}")

    if backend == "celery":
        from sos_staircase.core.celery_app import TASKS

        pending = [TASKS[kind].delay(payload) for payload in payloads]
        return [result.get() for result in pending]
    if backend != "local":
        raise ConfigError(f"unknown task backend {backend!r}")
    if jobs == 1 or len(payloads) <= 1:
        return [CELLS[kind](payload) for payload in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(CELLS[kind], payloads))
