from collections.abc import Iterator
from contextlib import contextmanager

from sqlmodel import Session, SQLModel, create_engine, select

from sos_staircase.config import DB_DIR, settings
from sos_staircase.core.scalar import precision, to_decimal
from sos_staircase.logger import log_action, log_error
from sos_staircase.models import EnclosureRecord, StaircasePoint

is_sqlite = settings.DATABASE_URL.startswith("sqlite")

if is_sqlite and ":memory:" not in settings.DATABASE_URL:
    DB_DIR.mkdir(parents=True, exist_ok=True)

connect_args = {"check_same_thread": False} if is_sqlite else {}
engine = create_engine(settings.DATABASE_URL, connect_args=connect_args)


def create_db_and_tables():
    """Инициализация кэша порогов"""
    try:
        SQLModel.metadata.create_all(engine)
    except Exception as e:
        log_error("DB_INIT", f"Критическая ошибка создания таблиц: {e}")
        return
    log_action("SYSTEM", "DB_INIT", f"Кэш порогов v{settings.VERSION} готов")


@contextmanager
def session_scope() -> Iterator[Session]:
    """Сессия кэша с таблицами, созданными при первом обращении."""
    create_db_and_tables()
    with Session(engine) as session:
        yield session


def save_enclosure(session: Session, point: StaircasePoint) -> EnclosureRecord | None:
    """Пишет оценку ε_d (decimal-строки на полной точности); точки с ошибкой не кэшируются."""
    enc = point.enclosure
    if enc is None:
        return None
    with precision(point.precision_bits or settings.PREC):
        record = EnclosureRecord(
            d=point.d,
            lo=to_decimal(enc.lo),
            hi=to_decimal(enc.hi),
            lo_status=enc.evidence.lo_status.value,
            hi_status=enc.evidence.hi_status.value,
            precision_bits=point.precision_bits,
            wall_time_ms=point.wall_time_ms,
        )
    try:
        session.add(record)
        session.commit()
        session.refresh(record)
    except Exception as e:
        session.rollback()
        log_error("DB_SAVE", f"Не удалось сохранить оценку d={point.d}: {e}")
        return None
    return record


def cached_enclosures(session: Session) -> dict[int, EnclosureRecord]:
    """Последняя сохраненная оценка для каждого d."""
    records = session.exec(select(EnclosureRecord).order_by(EnclosureRecord.d, EnclosureRecord.created_at, EnclosureRecord.id)).all()
    latest: dict[int, EnclosureRecord] = {}
    for record in records:
        latest[record.d] = record
    return latest
