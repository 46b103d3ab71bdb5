from collections.abc import Callable, Sequence
from typing import Annotated, Final

from fastapi import FastAPI, Query
from sqlmodel import Session, SQLModel

from src.config.base import SessionDep
from .base_repository import BaseRepository, CreateSchemaType, ModelType

Finder = Callable[[Session, str], Sequence[SQLModel]]


class ControllerBuilder:
    """Registers read-only REST routes for a repository on a FastAPI app.

    The ledger is written by the harness only, so nothing registered here
    mutates: a paged listing, a detail route and optional lookups by a
    secondary key.
    """

    def __init__(
        self,
        repository: BaseRepository[ModelType, CreateSchemaType],
        path_name: str,
        response_schema: type[SQLModel],
    ):
        """
        Args:
            repository: The repository serving the records.
            path_name: Collection path, e.g. "runs".
            response_schema: Schema of listed items.
        """
        self.repository: Final = repository
        self.path_name: Final = path_name
        self.list_schema: type[SQLModel] = response_schema
        self.detail_schema: type[SQLModel] | None = None
        self.listing = False
        self.lookups: dict[str, Finder] = {}

    def enable_listing(self):
        """GET /{path}/ with offset and limit."""
        if self.listing:
            raise ValueError("listing is already enabled")
        self.listing = True
        return self

    def enable_detail(self, schema: type[SQLModel] | None = None):
        """GET /{path}/{id}; the detail schema may carry more than the listing."""
        if self.detail_schema is not None:
            raise ValueError("detail route is already enabled")
        self.detail_schema = schema or self.list_schema
        return self

    def enable_lookup(self, key: str, finder: Finder):
        """GET /{path}/{key}/{value}, listing every record the finder returns."""
        if key in self.lookups:
            raise ValueError(f"lookup by {key} is already enabled")
        self.lookups[key] = finder
        return self

    def enable_read_only(self, detail_schema: type[SQLModel] | None = None):
        return self.enable_listing().enable_detail(detail_schema)

    def register_routes(self, app: FastAPI):
        # Lookups have two path segments and never shadow the detail route.
        if self.listing:
            self._register_listing(app)
        for key, finder in self.lookups.items():
            self._register_lookup(app, key, finder)
        if self.detail_schema is not None:
            self._register_detail(app)

    def _register_listing(self, app: FastAPI):
        @app.get(f"/{self.path_name}/", response_model=list[self.list_schema])
        def _(
            session: SessionDep,
            offset: int = 0,
            limit: Annotated[int, Query(le=100)] = 100,
        ):
            return self.repository.get_all(session, offset, limit)

    def _register_lookup(self, app: FastAPI, key: str, finder: Finder):
        @app.get(f"/{self.path_name}/{key}/{{value}}", response_model=list[self.list_schema])
        def _(value: str, session: SessionDep):
            return finder(session, value)

    def _register_detail(self, app: FastAPI):
        @app.get(f"/{self.path_name}/{{id}}", response_model=self.detail_schema)
        def _(id: str, session: SessionDep):
            return self.repository.get_by_id(session, id)
