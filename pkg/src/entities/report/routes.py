from src.shared.base_controller import ControllerBuilder
from .repository import experiment_run_repository
from .schemes import ExperimentRunDetail, ExperimentRunPublic

run_controller = (
    ControllerBuilder(
        repository=experiment_run_repository,
        path_name="runs",
        response_schema=ExperimentRunPublic,
    )
    .enable_read_only(detail_schema=ExperimentRunDetail)
    .enable_lookup("fingerprint", experiment_run_repository.by_fingerprint)
)
