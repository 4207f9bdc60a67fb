import logging
import traceback
from logging.handlers import TimedRotatingFileHandler
from sos_staircase.config import settings

LOG_DIR = settings.LOG_DIR
LOG_DIR.mkdir(parents=True, exist_ok=True)

formatter = logging.Formatter('%(asctime)s - [%(levelname)s] - %(name)s - %(message)s')

def setup_logger(name: str, log_file: str, level=logging.INFO, console: bool = False) -> logging.Logger:
    """
    Логгер с ротацией по полуночи; в тестах обычный FileHandler.
    console: дублировать записи в stderr (только системный канал).
    """
    if settings.is_testing:
        handler: logging.Handler = logging.FileHandler(LOG_DIR / log_file, encoding='utf-8')
    else:
        handler = TimedRotatingFileHandler(
            filename=LOG_DIR / log_file,
            when="midnight",
            interval=1,
            backupCount=30,
            encoding='utf-8'
        )
    handler.setFormatter(formatter)

    logger = logging.getLogger(name)
    logger.setLevel(level)
    logger.propagate = False
    if logger.hasHandlers():
        logger.handlers.clear()
    logger.addHandler(handler)

    if console:
        stream = logging.StreamHandler()
        stream.setFormatter(formatter)
        stream.setLevel(logging.WARNING)
        logger.addHandler(stream)
    return logger

# --- Каналы по подсистемам: actor → (логгер, значок) ---
CHANNELS: dict[str, tuple[logging.Logger, str]] = {
    "solver": (setup_logger("Solver", "solver.log"), "🧮"),
    "staircase": (setup_logger("Staircase", "staircase.log"), "🪜"),
    "certificates": (setup_logger("Certificates", "certificates.log"), "📜"),
    "relaxation": (setup_logger("Relaxation", "relaxation.log"), "📐"),
}
system_logger = setup_logger("System", "system.log", console=True)
error_logger = setup_logger("Error", "error.log", level=logging.ERROR)

def _channel(actor: str | None) -> tuple[logging.Logger, str]:
    return CHANNELS.get(actor or "", (system_logger, "⚙️"))

def log_action(actor: str | None, action: str, details: str, level: int = logging.INFO):
    """Одна строка на событие: решение SDP, проба бисекции, сертификат, запуск CLI."""
    logger, mark = _channel(actor)
    logger.log(level, f"{mark} {action} | {details}")

def log_warning(actor: str | None, action: str, details: str):
    """Регуляризация Ньютона, эскалация точности и прочие обходы численных трудностей."""
    log_action(actor, action, details, level=logging.WARNING)

def log_error(context: str, message: str):
    error_logger.error(f"❌ ERROR in {context}: {message}")

def format_exception_details(exc: Exception) -> str:
    """Последние строки стектрейса."""
    tb_lines = traceback.format_exception(type(exc), exc, exc.__traceback__)
    return "".join(tb_lines[-4:]).strip()

def log_exception(context: str, exc: Exception, run_info: str = "cli"):
    """Исключение с трассировкой; для NumericalBreakdown и ошибок бисекции run_info несет d и точность."""
    stack_info = format_exception_details(exc)
    error_logger.error(
        f"🔥 EXCEPTION [{context}] | Run: {run_info} | Error: {type(exc).__name__}: {exc!s}\nTraceback:\n{stack_info}"
    )
