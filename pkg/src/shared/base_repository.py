from typing import Generic, TypeVar
from collections.abc import Sequence
from sqlmodel import select, Session, SQLModel
from src.config.exception_handler import CouplingException, not_found_exception

ModelType = TypeVar("ModelType", bound=SQLModel)
CreateSchemaType = TypeVar("CreateSchemaType", bound=SQLModel)


class BaseRepository(Generic[ModelType, CreateSchemaType]):
    """Append-only repository over a SQLModel table: runs are recorded, never edited."""

    def __init__(self, model: type[ModelType]):
        """Initializes the repository with a specific SQLModel class.

        Args:
            model: The SQLModel table class.
        """
        self.model: type[ModelType] = model

    def get_by_id(self, db: Session, id: str) -> ModelType:
        """Fetches a record by its ID.

        Raises:
            NotFoundError: If no record has this ID.
        """
        try:
            obj = db.get(self.model, id)
        except Exception as e:
            raise CouplingException(f"Error fetching record: {e}") from e
        if obj is None:
            raise not_found_exception(self.model.__name__, id)
        return obj

    def get_all(
        self,
        db: Session,
        offset: int = 0,
        limit: int = 100,
    ) -> Sequence[ModelType]:
        """Retrieves a page of records.

        Args:
            db: Database session.
            offset: Number of records to skip.
            limit: Maximum number of records to return.
        """
        try:
            return db.exec(select(self.model).offset(offset).limit(limit)).all()
        except Exception as e:
            raise CouplingException(f"Error fetching records: {e}") from e

    def create(self, db: Session, obj_in: CreateSchemaType) -> ModelType:
        """Inserts a new record and returns it refreshed from the database."""
        try:
            db_obj = self.model.model_validate(obj_in)
            db.add(db_obj)
            db.commit()
            db.refresh(db_obj)
            return db_obj
        except Exception as e:
            db.rollback()
            raise CouplingException(f"Error creating record: {e}") from e
