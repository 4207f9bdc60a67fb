from celery import Celery

from sos_staircase.config import settings
from sos_staircase.services.dispatch import solve_order_cell, support_cell, threshold_cell

# Инициализируем инстанс Celery
celery_instance = Celery(
    "sos_staircase",
    broker=settings.CELERY_BROKER_URL,
    backend=settings.CELERY_RESULT_BACKEND
)

# Поддержка eager режима для тестов
if settings.ENV == "testing":
    celery_instance.conf.update(
        task_always_eager=True,
        task_eager_propagates=True
    )

celery_instance.conf.update(task_serializer="json", result_serializer="json", accept_content=["json"])


@celery_instance.task(name="solve_order_task")
def solve_order_task(payload: dict) -> dict:
    """Одна ячейка таблицы v_d(ε)."""
    return solve_order_cell(payload)


@celery_instance.task(name="threshold_task")
def threshold_task(payload: dict) -> dict:
    """Оценка порога ε_d для одного порядка (бисекция целиком внутри задачи)."""
    return threshold_cell(payload)


@celery_instance.task(name="support_task")
def support_task(payload: dict) -> dict:
    return support_cell(payload)


TASKS = {
    "solve_order": solve_order_task,
    "threshold": threshold_task,
    "support": support_task,
}
