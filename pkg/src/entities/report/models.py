from datetime import datetime

from sqlmodel import Field, SQLModel

from src.config.base.utils import get_uuid


# ================================================
# Registro de corridas
# ================================================
class ExperimentRun(SQLModel, table=True):
    id: str = Field(default_factory=get_uuid, primary_key=True)
    experiment: str = Field(max_length=100, index=True)
    model_id: str = Field(max_length=50, index=True)
    fingerprint: str = Field(max_length=16, index=True)
    status: str = Field(max_length=20)  # "pass", "fail", "blow-up"
    exit_code: int
    report_json: str
    created_at: datetime = Field(default_factory=datetime.now)
