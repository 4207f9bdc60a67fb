import os

import pytest
from sqlalchemy.pool import StaticPool
from sqlmodel import Session, SQLModel, create_engine

# --- ⚙️ ОКРУЖЕНИЕ ---
os.environ.setdefault("SOS_STAIRCASE_ENV", "testing")
os.environ.setdefault("SOS_STAIRCASE_DATABASE_URL", "sqlite:///:memory:")

from sos_staircase.config import settings
settings.ENV = "testing"

sqlite_url = "sqlite:///:memory:"
engine = create_engine(sqlite_url, connect_args={"check_same_thread": False}, poolclass=StaticPool)

import sos_staircase.database as staircase_db
staircase_db.engine = engine

from sos_staircase.models import SolverParams


# --- 🧪 ФИКСТУРЫ ---

@pytest.fixture(name="session")
def session_fixture():
    SQLModel.metadata.create_all(engine)
    with Session(engine) as session:
        yield session
    SQLModel.metadata.drop_all(engine)


@pytest.fixture(name="params")
def params_fixture() -> SolverParams:
    """Быстрый режим: 128 бит, допуски 1e-20."""
    return SolverParams(precision=128, gap_tol=1e-20, feas_tol=1e-20)


@pytest.fixture(name="params256")
def params256_fixture() -> SolverParams:
    return SolverParams(precision=256, gap_tol=1e-25, feas_tol=1e-25)


@pytest.fixture(name="out_dir")
def out_dir_fixture(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path
