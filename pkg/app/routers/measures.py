from fastapi import APIRouter, HTTPException

from app.core.errors import LSystemError
from app.models.schemas import (
    BuildModelRequest,
    ComplexValue,
    MeasureSpec,
    ModelDump,
    WeylRequest,
)
from app.services.donoghue_service import DonoghueService
from app.services.measure_service import MeasureService
from app.services.model_service import ModelService

router = APIRouter()
measure_service = MeasureService()
model_service = ModelService(measures=measure_service)
donoghue_service = DonoghueService(measure_service, model_service)


@router.post("/measures/weyl", response_model=ComplexValue)
async def weyl_value(request: WeylRequest):
    """Regularized Cauchy transform M(z) of a posted measure."""
    service = MeasureService(request.quadrature) if request.quadrature else measure_service
    try:
        return ComplexValue.of(service.eval_weyl(request.measure, complex(request.z)))
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.post("/measures/normalization")
async def normalization(measure: MeasureSpec):
    try:
        return {"normalization": measure_service.normalization(measure),
                "closed_form": measure.is_closed_form}
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.post("/models", response_model=ModelDump, response_model_by_alias=True)
async def build_model(request: BuildModelRequest):
    """Discretize a measure into a finite functional model.

    The normalization must match the class of ``kappa`` either way; ``realize``
    discretizes the Donoghue-class sibling and scales the weights back.
    """
    try:
        if request.realize:
            model = donoghue_service.realize(request.measure, request.kappa, request.n)
        else:
            model = model_service.build_model(request.measure, request.kappa, request.n)
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return model_service.dump(model)
