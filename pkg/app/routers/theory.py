from fastapi import APIRouter, HTTPException
from fastapi_cache.decorator import cache

from app.config import settings
from app.core.errors import LSystemError
from app.models.domain import QuasiKernelPhase, UnimodularFactor
from app.models.schemas import BiExtensionReport, ComplexValue, SuiteReport, TheoremResult
from app.services.biextension_service import BiExtensionService
from app.services.donoghue_service import DonoghueService, independent_impedance_at_i
from app.services.verify_service import SUITES, VerifyService

router = APIRouter()
donoghue_service = DonoghueService()
biextension_service = BiExtensionService()


@router.get("/donoghue/theorem", response_model=TheoremResult)
async def theorem(kappa: float = 0.0, nu_re: float = 1.0, nu_im: float = 0.0):
    """(Q, L) of V(i) = Q + iL for transfer factor nu and von Neumann parameter kappa."""
    try:
        nu = UnimodularFactor(complex(nu_re, nu_im))
        Q, L = donoghue_service.nu_kappa_algebra(nu, kappa)
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))
    residual = abs(complex(Q, L) - independent_impedance_at_i(nu.nu, kappa))
    return TheoremResult(Q=Q, L=L, imag_residual=residual)


def _matrix(m):
    return [[ComplexValue.of(v) for v in row] for row in m]


@router.get("/biextension", response_model=BiExtensionReport)
async def biextension(kappa: float = 0.0, beta: float = 0.0):
    try:
        ext = biextension_service.build(kappa, QuasiKernelPhase(beta))
    except LSystemError as e:
        raise HTTPException(status_code=422, detail=str(e))
    try:
        channel = biextension_service.imaginary_part_channel(ext.S_A, ext.S_Astar, ext.kappa)
    except LSystemError:
        # only the quasi-kernel with U = 1 has the rank-one channel pattern
        channel = None
    return BiExtensionReport(
        kappa=ext.kappa.kappa,
        beta=ext.phase.beta,
        H=ComplexValue.of(ext.H),
        S_A=_matrix(ext.S_A),
        S_Astar=_matrix(ext.S_Astar),
        channel=channel,
    )


@router.get("/verify/{suite}", response_model=SuiteReport)
@cache(expire=settings.CACHE_EXPIRE_SECONDS)
async def verify(suite: str):
    """Run one property suite; reports are cached since the suites are deterministic."""
    if suite not in SUITES:
        raise HTTPException(status_code=404, detail=f"unknown suite {suite!r}; one of {SUITES}")
    return VerifyService().run(suite)
