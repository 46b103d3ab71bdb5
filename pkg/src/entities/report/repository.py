from collections.abc import Sequence

from sqlmodel import Session, select

from src.shared.base_repository import BaseRepository
from .models import ExperimentRun
from .schemes import ExperimentRunCreate


class ExperimentRunRepository(BaseRepository[ExperimentRun, ExperimentRunCreate]):
    def __init__(self):
        super().__init__(ExperimentRun)

    def by_fingerprint(self, db: Session, fingerprint: str) -> Sequence[ExperimentRun]:
        statement = (
            select(ExperimentRun)
            .where(ExperimentRun.fingerprint == fingerprint)
            .order_by(ExperimentRun.created_at)
        )
        return db.exec(statement).all()


experiment_run_repository = ExperimentRunRepository()
