import json
from pathlib import Path

import numpy as np
import pytest

from src.config.base import configure_ledger
from src.entities.measure.models import DiscreteMeasure
from src.entities.system import catalog

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def measure_cases() -> dict:
    raw = json.loads((DATA / "measures.json").read_text())

    def load(value):
        if isinstance(value, list):
            return DiscreteMeasure.from_json(json.dumps(value))
        return value

    return {name: {k: load(v) for k, v in case.items()} for name, case in raw.items()}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy():
    return catalog.toy2d()


@pytest.fixture(scope="session")
def small_gl():
    # L = 2 pi: lambda_5 + 1 = -1.25, so the gap is 1.
    return catalog.ginzburg_landau(n_modes=16, forced=5)


@pytest.fixture(scope="session")
def small_rd():
    return catalog.reaction_diffusion(n_modes=8)


@pytest.fixture(scope="session")
def chain5():
    return catalog.chain(a_squared=5.0)


@pytest.fixture
def ledger(tmp_path):
    """Fresh SQLite ledger under tmp_path."""
    engine = configure_ledger(tmp_path)
    yield engine
    engine.dispose()
