from typing import Optional

from fastapi import APIRouter, HTTPException

from app.core.errors import InadmissibleParameter, LSystemError
from app.models.domain import ExampleBundle, FunctionRole
from app.models.schemas import (
    ClassificationReport,
    ComplexValue,
    ExampleSummary,
    FunctionValue,
    GridSpec,
)
from app.services.donoghue_service import DonoghueService
from app.services.examples_service import ExamplesService

router = APIRouter()
examples_service = ExamplesService()
donoghue_service = DonoghueService()


def _bundle(example_id: int, ell: float, rho: Optional[float],
            mu_re: Optional[float], mu_im: Optional[float]) -> ExampleBundle:
    if example_id not in (1, 2, 3, 4):
        raise HTTPException(status_code=404, detail=f"unknown example {example_id}")
    mu = None if mu_re is None else complex(mu_re, mu_im or 0.0)
    try:
        return examples_service.bundle(example_id, ell, rho, mu)
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))


def _jsonable(value):
    if isinstance(value, complex):
        return ComplexValue.of(value).model_dump()
    if hasattr(value, "beta"):
        return value.beta
    if hasattr(value, "nu"):
        return ComplexValue.of(value.nu).model_dump()
    return value


@router.get("/examples/{example_id}", response_model=ExampleSummary)
async def get_example(example_id: int, ell: float = 1.0, rho: Optional[float] = None,
                      mu_re: Optional[float] = None, mu_im: Optional[float] = None):
    """Parameter kappa and the function roles available for an interval example."""
    bundle = _bundle(example_id, ell, rho, mu_re, mu_im)
    return ExampleSummary(
        example_id=example_id,
        ell=bundle.params.ell,
        kappa=bundle.kappa.kappa if bundle.kappa is not None else None,
        roles=list(bundle.available_roles()),
        extras={k: _jsonable(v) for k, v in bundle.extras.items()},
    )


@router.get("/examples/{example_id}/evaluate", response_model=FunctionValue)
async def evaluate_example(example_id: int, role: FunctionRole = FunctionRole.TRANSFER,
                           re: float = 0.0, im: float = 1.0, ell: float = 1.0,
                           rho: Optional[float] = None, mu_re: Optional[float] = None,
                           mu_im: Optional[float] = None):
    bundle = _bundle(example_id, ell, rho, mu_re, mu_im)
    try:
        fn = bundle.role(role)
        ev = fn.evaluate(complex(re, im))
    except InadmissibleParameter as e:
        raise HTTPException(status_code=422, detail=str(e))
    return FunctionValue(
        role=role.value,
        z=ComplexValue.of(ev.z),
        value=None if ev.pole else ComplexValue.of(ev.value),
        pole_flag=ev.pole,
        reason=ev.reason,
    )


@router.get("/examples/{example_id}/classification", response_model=ClassificationReport)
async def classify_example(example_id: int, ell: float = 1.0, rho: Optional[float] = None,
                           mu_re: Optional[float] = None, mu_im: Optional[float] = None,
                           herglotz: bool = False):
    """Donoghue-class membership of the example's impedance function."""
    bundle = _bundle(example_id, ell, rho, mu_re, mu_im)
    try:
        return donoghue_service.classify_impedance(
            bundle.impedance, grid=GridSpec.standard() if herglotz else None, kappa=bundle.kappa)
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))
