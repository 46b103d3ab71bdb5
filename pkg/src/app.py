import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from src.config.base import create_db_and_tables
from src.config.exception_handler import CouplingException, NotFoundError
from src.entities.report.routes import run_controller
from src.services.presets import PRESETS


@asynccontextmanager
async def lifespan(app: FastAPI):
    create_db_and_tables()
    yield


# Inicializar la aplicación FastAPI
app = FastAPI(
    title="asymcouple run ledger",
    description="Read-only view of recorded coupling experiments",
    version="0.1.0",
    lifespan=lifespan,
)


# Manejo de excepciones
@app.exception_handler(CouplingException)
async def coupling_exception_handler(request: Request, exc: CouplingException):
    code = status.HTTP_404_NOT_FOUND if isinstance(exc, NotFoundError) else status.HTTP_400_BAD_REQUEST
    return JSONResponse(status_code=code, content={"message": exc.message})


@app.get("/")
async def root():
    return {"message": "asymcouple run ledger", "documentation": "/docs"}


@app.get("/presets/")
async def list_presets():
    return [{"name": p.name, "summary": p.summary} for p in PRESETS.values()]


# Registro de rutas
run_controller.register_routes(app)


# Punto de entrada para ejecución directa
if __name__ == "__main__":
    import uvicorn

    port = int(os.environ.get("PORT", 8000))
    host = os.environ.get("HOST", "127.0.0.1")
    uvicorn.run("src.app:app", host=host, port=port)
