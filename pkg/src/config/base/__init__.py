import os
from pathlib import Path
from typing import Annotated

from fastapi import Depends
from sqlalchemy.engine import Engine
from sqlmodel import Session, SQLModel, create_engine

# Configuración del registro de corridas
LEDGER_FILE_NAME = "ledger.db"
DEFAULT_OUT_DIR = "runs"
OUT_ENV_VAR = "ASYMCOUPLE_OUT"
CONNECT_ARGS = {"check_same_thread": False}

_engine: Engine | None = None


def ledger_url(out_dir: str | Path) -> str:
    return f"sqlite:///{Path(out_dir) / LEDGER_FILE_NAME}"


def configure_ledger(out_dir: str | Path) -> Engine:
    """Points the ledger at <out_dir>/ledger.db and creates the tables."""
    global _engine
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    if _engine is not None:
        _engine.dispose()
    _engine = create_engine(ledger_url(out_dir), connect_args=CONNECT_ARGS)
    create_db_and_tables()
    return _engine


def get_engine() -> Engine:
    if _engine is None:
        return configure_ledger(os.environ.get(OUT_ENV_VAR, DEFAULT_OUT_DIR))
    return _engine


def create_db_and_tables():
    # El modelo de tabla debe estar importado antes de create_all
    from src.entities.report.models import ExperimentRun  # noqa: F401

    SQLModel.metadata.create_all(get_engine())


def get_session():
    with Session(get_engine()) as session:
        yield session


SessionDep = Annotated[Session, Depends(get_session)]
