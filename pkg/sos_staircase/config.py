import os
from pathlib import Path
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# --- 1. ГЕОГРАФИЯ ПРОЕКТА ---
ROOT_DIR = Path(__file__).resolve().parent.parent
PACKAGE_DIR = ROOT_DIR / "sos_staircase"
DB_DIR = ROOT_DIR / "db_data"
LOGS_DIR = ROOT_DIR / "logs"

app_mode = os.getenv("SOS_STAIRCASE_MODE", "dev")
env_file_name = f".env.{app_mode}"

# --- 2. КЛАСС НАСТРОЕК ---

class Settings(BaseSettings):
    """
    Defaults for every numeric run.
    Loaded from SOS_STAIRCASE_* environment variables or the .env file of the current mode.
    """
    ENV: str = "development"
    ROOT_DIR: Path = ROOT_DIR

    # Основное
    PROJECT_NAME: str = "sos-staircase"
    VERSION: str = "1.0.0"

    # Точность и допуски решателя
    PREC: int = 256
    MAX_PREC: int = 2048
    GAP_TOL: float = 1e-25
    FEAS_TOL: float = 1e-25
    MAX_ITERS: int = 250
    STEP_FRACTION: float = 0.98

    # Сертификаты
    RESIDUAL_TOL: float = 1e-20
    GRAM_EIG_TOL: float = 1e-25

    # Отчеты
    ZERO_THRESHOLD: float = 1e-20

    # БД (кэш вычисленных порогов)
    DATABASE_URL: str = f"sqlite:///{DB_DIR}/sos_staircase.db"

    # Пул задач: local (процессы) или celery
    TASK_BACKEND: str = "local"
    CELERY_BROKER_URL: str = "redis://redis:6379/0"
    CELERY_RESULT_BACKEND: str = "redis://redis:6379/0"

    LOG_DIR: Path = LOGS_DIR

    model_config = SettingsConfigDict(
        env_prefix="SOS_STAIRCASE_",
        env_file=ROOT_DIR / env_file_name,
        env_file_encoding='utf-8',
        extra='ignore'
    )

    @field_validator("GAP_TOL", "FEAS_TOL", "RESIDUAL_TOL", "GRAM_EIG_TOL", "ZERO_THRESHOLD")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("STEP_FRACTION")
    @classmethod
    def _fraction(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError("STEP_FRACTION must lie in (0, 1)")
        return value

    @field_validator("PREC", "MAX_PREC")
    @classmethod
    def _bits(cls, value: int) -> int:
        if value < 53:
            raise ValueError("precision below double is not supported")
        return value

    @property
    def is_testing(self) -> bool:
        return self.ENV.lower() == "testing"

settings = Settings()
