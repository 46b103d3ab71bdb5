"""Experiment configuration: sectioned key = value files validated into SQLModel schemas."""

from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BeforeValidator, ValidationError
from sqlmodel import Field, SQLModel

from src.entities.system.catalog import build_model, k_star
from src.entities.system.models import ModelId, ModelSpec
from .base.utils import fingerprint
from .exception_handler import ConfigError, config_exception


def _split(value: Any) -> Any:
    """'1, 2.5' -> ['1', '2.5'];  '1..4' -> [1, 2, 3, 4]."""
    if not isinstance(value, str):
        return value if isinstance(value, list) else [value]
    items: list[Any] = []
    for token in (t.strip() for t in value.split(",")):
        if not token:
            continue
        if ".." in token:
            lo, hi = token.split("..", 1)
            items.extend(range(int(lo), int(hi) + 1))
        else:
            items.append(token)
    return items


FloatList = Annotated[list[float], BeforeValidator(_split)]
IntList = Annotated[list[int], BeforeValidator(_split)]


# ================================================
# Secciones
# ================================================
class ModelSection(SQLModel):
    id: ModelId
    params: dict[str, Any] = Field(default_factory=dict)


class IntegratorSection(SQLModel):
    dt: float = Field(default=1e-3, gt=0)
    horizon: int = Field(default=5, ge=1)
    scheme: Literal["etd1", "etd2"] = "etd2"
    # Defaults to ten records per unit interval.
    record_every: int | None = Field(default=None, ge=1)


class EnsembleSection(SQLModel):
    members: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, ge=1)
    chunk: int = Field(default=50, ge=1)


class CouplingSection(SQLModel):
    enabled: bool = True
    # Shorter than the state dimension means zero-padded.
    x0: FloatList = Field(default_factory=lambda: [1.0])
    y0: FloatList = Field(default_factory=lambda: [-1.0])


class EstimatorSection(SQLModel):
    contraction: bool = True
    zeta_check: bool = True
    zeta_check_until: float = Field(default=5.0, gt=0)
    distance: bool = False
    distance_times: IntList = Field(default_factory=lambda: list(range(1, 9)))
    distance_members: int = Field(default=300, ge=1)
    sample_cap: int = Field(default=300, ge=2)
    noise_floor_boot: int = Field(default=20, ge=0)
    lyapunov: bool = False
    lyapunov_scales: FloatList = Field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0])
    samples_per_state: int = Field(default=200, ge=2)
    axk: bool = False
    axk_ks: FloatList = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0, 10000.0])
    axk_horizon: int = Field(default=5, ge=0)
    axk_members: int = Field(default=500, ge=1)
    density: bool = False
    density_horizons: IntList = Field(default_factory=lambda: list(range(1, 11)))
    density_members: int = Field(default=500, ge=1)
    density_k: float = Field(default=10.0, gt=0)
    growth: bool = False


class OutputSection(SQLModel):
    directory: str = "runs"
    name: str = "experiment"
    trajectory_members: int = Field(default=10, ge=0)


SECTIONS: dict[str, type[SQLModel]] = {
    "model": ModelSection,
    "integrator": IntegratorSection,
    "ensemble": EnsembleSection,
    "coupling": CouplingSection,
    "estimators": EstimatorSection,
    "output": OutputSection,
}


class ExperimentConfig(SQLModel):
    model: ModelSection
    integrator: IntegratorSection = Field(default_factory=IntegratorSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    estimators: EstimatorSection = Field(default_factory=EstimatorSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @property
    def steps(self) -> int:
        return round(self.integrator.horizon / self.integrator.dt)

    @property
    def steps_per_unit(self) -> int:
        return round(1.0 / self.integrator.dt)

    @property
    def record_every(self) -> int:
        return self.integrator.record_every or max(1, self.steps_per_unit // 10)

    def fingerprint(self) -> str:
        """Hash of everything that changes results; output location and jobs do not."""
        payload = self.model_dump(mode="json", exclude={"output": {"directory"}, "ensemble": {"jobs"}})
        return fingerprint(payload)

    def build_model(self) -> ModelSpec:
        return build_model(self.model.id, **self.model.params)

    def initial_states(self, model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
        return _pad(self.coupling.x0, model.dim), _pad(self.coupling.y0, model.dim)

    def with_overrides(
        self, seed: int | None = None, out: str | Path | None = None, jobs: int | None = None
    ) -> ExperimentConfig:
        ensemble = self.ensemble.model_copy(
            update={k: v for k, v in {"seed": seed, "jobs": jobs}.items() if v is not None}
        )
        output = self.output.model_copy(update={"directory": str(out)} if out is not None else {})
        return self.model_copy(update={"ensemble": ensemble, "output": output})


def _pad(values: list[float], dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[: len(values)] = values
    return out


# ================================================
# Lectura
# ================================================
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number, keys lower-cased like configparser."""
    lines: dict[tuple[str, str], int] = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        if m := _SECTION_RE.match(line):
            section = m.group(1).strip()
            lines[(section, "")] = number
        elif (m := _KEY_RE.match(line)) and section:
            lines[(section, m.group(1).strip().lower())] = number
    return lines


def _scalar(raw: str) -> Any:
    raw = raw.strip()
    if raw.lower() in ("true", "yes", "on"):
        return True
    if raw.lower() in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_model_param(raw: str) -> Any:
    if "," in raw:
        return [_scalar(t) for t in raw.split(",") if t.strip()]
    return _scalar(raw)


class _Locator:
    def __init__(self, source: str, lines: dict[tuple[str, str], int]):
        self.source = source
        self.lines = lines

    def error(self, section: str, key: str, message: str, details: dict | None = None) -> ConfigError:
        line = self.lines.get((section, key), self.lines.get((section, ""), 0))
        where = f"{section}.{key}" if key else section
        return config_exception(f"{self.source}:{line}: {where}: {message}", details=details)


def _validate_section(name: str, raw: dict[str, Any], where: _Locator) -> SQLModel:
    schema = SECTIONS[name]
    for key in raw:
        if key not in schema.model_fields:
            raise where.error(name, key, "unknown key")
    try:
        return schema.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else ""
        raise where.error(name, key, first["msg"]) from exc


def _check_constraints(config: ExperimentConfig, where: _Locator) -> None:
    dt = config.integrator.dt
    if abs(config.steps_per_unit * dt - 1.0) > 1e-9:
        raise where.error("integrator", "dt", "must divide the unit interval", {"dt": dt})
    if config.steps_per_unit % config.record_every:
        raise where.error("integrator", "record_every", "must divide the steps per unit interval")
    params = config.model.params
    if config.model.id is ModelId.CHAIN and "truncation" in params:
        try:
            ks = k_star(float(params.get("a_squared", 0.0)))
        except ConfigError as exc:
            raise where.error("model", "a_squared", exc.message) from exc
        if int(params["truncation"]) < 4 * ks:
            raise where.error(
                "model", "truncation", f"must be >= 4 k* = {4 * ks}", {"k_star": ks}
            )
    try:
        model = config.build_model()
    except ConfigError as exc:
        raise where.error("model", "id", exc.message, exc.details) from exc
    for key in ("x0", "y0"):
        if len(getattr(config.coupling, key)) > model.dim:
            raise where.error("coupling", key, f"longer than the state dimension {model.dim}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validates a config text; every failure names the file and line of the offending key."""
    where = _Locator(source, _key_lines(text))
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        errors = getattr(exc, "errors", None)
        line = getattr(exc, "lineno", None) or (errors[0][0] if errors else 0)
        raise config_exception(f"{source}:{line}: {exc.message.splitlines()[0]}") from exc

    sections: dict[str, Any] = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise where.error(name, "", "unknown section", {"valid": list(SECTIONS)})
        raw = dict(parser[name])
        if name == "model":
            model_id = raw.pop("id", None)
            if model_id is None:
                raise where.error("model", "", "missing key id")
            raw = {"id": model_id, "params": {k: parse_model_param(v) for k, v in raw.items()}}
            try:
                sections[name] = ModelSection.model_validate(raw)
            except ValidationError as exc:
                raise where.error("model", "id", exc.errors()[0]["msg"], {"valid": [m.value for m in ModelId]}) from exc
        else:
            sections[name] = _validate_section(name, raw, where)
    if "model" not in sections:
        raise config_exception(f"{source}:0: missing section [model]")

    config = ExperimentConfig(**sections)
    _check_constraints(config, where)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise config_exception(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, source=path.name)
