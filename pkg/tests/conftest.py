import os
from pathlib import Path

import pytest

# loggers must stay uncached so structlog.testing.capture_logs sees every event
os.environ["LOG_CACHE_LOGGERS"] = "false"

from fastapi_cache import FastAPICache
from fastapi_cache.backends.inmemory import InMemoryBackend

from app.models.schemas import GridSpec, MeasureSpec
from app.services.calculus_service import CalculusService
from app.services.donoghue_service import DonoghueService
from app.services.examples_service import ExamplesService
from app.services.measure_service import MeasureService
from app.services.model_service import ModelService

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(autouse=True)
def init_cache():
    FastAPICache.init(InMemoryBackend(), prefix="fastapi-cache")
    yield


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def load_measure(name: str) -> MeasureSpec:
    return MeasureSpec.model_validate_json((DATA_DIR / name).read_text())


@pytest.fixture
def two_atoms() -> MeasureSpec:
    return load_measure("two_atoms.json")


@pytest.fixture
def lebesgue_pi() -> MeasureSpec:
    return load_measure("lebesgue_pi.json")


@pytest.fixture
def single_atom() -> MeasureSpec:
    return load_measure("single_atom.json")


@pytest.fixture
def standard_grid() -> GridSpec:
    return GridSpec.standard()


@pytest.fixture
def measures() -> MeasureService:
    return MeasureService()


@pytest.fixture
def calculus() -> CalculusService:
    return CalculusService()


@pytest.fixture
def models(measures, calculus) -> ModelService:
    return ModelService(measures=measures, calculus=calculus)


@pytest.fixture
def donoghue(measures, models) -> DonoghueService:
    return DonoghueService(measures, models)


@pytest.fixture
def examples() -> ExamplesService:
    return ExamplesService()
