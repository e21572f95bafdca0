from typing import Optional, Tuple, Union

import structlog

from app.config import settings
from app.core.errors import ConsistencyError, InadmissibleParameter, NormalizationMismatch
from app.models.domain import (
    AnalyticFn,
    DiscreteModel,
    FunctionRole,
    UnimodularFactor,
    VonNeumannKappa,
)
from app.models.schemas import Atom, ClassificationReport, GridSpec, MeasureSpec
from app.services.calculus_service import scaled
from app.services.measure_service import MeasureService
from app.services.model_service import ModelService

logger = structlog.get_logger(__name__)

KappaLike = Union[VonNeumannKappa, float]


class DonoghueService:
    """Membership in the Donoghue classes M and M_kappa, and realization of their members."""

    def __init__(self, measures: Optional[MeasureService] = None,
                 models: Optional[ModelService] = None):
        self.measures = measures or MeasureService()
        self.models = models or ModelService(self.measures.cfg, self.measures)

    def classify_impedance(self, V: AnalyticFn, grid: Optional[GridSpec] = None,
                           tol: Optional[float] = None,
                           kappa: Optional[KappaLike] = None) -> ClassificationReport:
        """Read Q + iL off V(i) and decide membership.

        With ``kappa`` given, ``in_M_kappa`` tests that specific class; otherwise it
        reports whether V lies in the class of its implied kappa.
        """
        tol = settings.EXACT_TOL if tol is None else tol
        value = V(1j)
        Q, L = value.real, value.imag
        kappa_hat = None
        if abs(Q) <= tol and 0.0 < L <= 1.0 + tol:
            kappa_hat = max((1.0 - L) / (1.0 + L), 0.0)
        target = None if kappa is None else VonNeumannKappa.of(kappa)
        if target is None:
            in_M_kappa = kappa_hat is not None and kappa_hat < 1.0
        else:
            in_M_kappa = abs(Q) <= tol and abs(L - target.scale) <= tol
        herglotz = self.measures.herglotz_check(V, grid) if grid is not None else None
        if kappa_hat is None:
            logger.info("impedance_outside_kappa_classes", Q=Q, L=L)
        return ClassificationReport(
            Q=Q, L=L, kappa_hat=kappa_hat,
            in_M=abs(Q) <= tol and abs(L - 1.0) <= tol,
            in_M_kappa=in_M_kappa,
            kappa_target=None if target is None else target.kappa,
            tol=tol,
            herglotz=herglotz,
        )

    def nu_kappa_algebra(self, nu: Union[UnimodularFactor, complex], kappa: KappaLike,
                          tol: float = 1e-12) -> Tuple[float, float]:
        """(Q, L) of the impedance of a system with transfer factor nu and parameter kappa.

        L = (nu - kappa^2 nu) / ((nu + kappa)(1 + kappa nu)) and
        Q = i (nu (1 - L) - kappa (1 + L)) / (nu + kappa), both real for |nu| = 1.
        """
        nu = UnimodularFactor.of(nu).nu
        k = VonNeumannKappa.of(kappa).kappa
        L = (nu - k * k * nu) / ((nu + k) * (1.0 + k * nu))
        Q = 1j * (nu * (1.0 - L) - k * (1.0 + L)) / (nu + k)
        residual = max(abs(L.imag), abs(Q.imag))
        if residual > tol:
            raise ConsistencyError(f"(Q, L) not real for nu={nu!r}, kappa={k!r}: residual {residual:.3e}")
        return Q.real, L.real

    def scale_between_classes(self, V0: AnalyticFn, kappa: KappaLike,
                              tol: Optional[float] = None) -> AnalyticFn:
        """z -> (1-kappa)/(1+kappa) V0(z) maps M onto M_kappa."""
        k = VonNeumannKappa.of(kappa)
        report = self.classify_impedance(V0, tol=tol)
        if not report.in_M:
            raise InadmissibleParameter(
                f"input is not in the Donoghue class: V(i) = {report.Q:+.3e} + {report.L:.6g}i")
        return scaled(V0, k.scale, role=FunctionRole.IMPEDANCE, kappa=k.kappa)

    def constant_impedance(self, kappa: KappaLike) -> AnalyticFn:
        """V = i (1-kappa)/(1+kappa), the impedance of the model on Lebesgue measure / pi."""
        k = VonNeumannKappa.of(kappa)
        return AnalyticFn.constant(1j * k.scale, role=FunctionRole.IMPEDANCE,
                                   label="constant impedance").relabel(kappa=k.kappa)

    @staticmethod
    def constant_resolvent_coefficient(kappa: KappaLike) -> complex:
        """c in (T - z)^{-1} = (B - z)^{-1} + c (., g_zbar) g_z for the constant model."""
        k = VonNeumannKappa.of(kappa).kappa
        if k == 0.0:
            raise InadmissibleParameter("the constant model has no finite correction at kappa = 0")
        return 1j * (k - 1.0) / (2.0 * k)

    def realize(self, measure: MeasureSpec, kappa: KappaLike, n: int,
                close_tail: Optional[float] = None,
                tol: Optional[float] = None) -> DiscreteModel:
        """Model in M_kappa whose impedance is the Herglotz function of ``measure``.

        The measure is rescaled by (1+kappa)/(1-kappa) to the Donoghue class and
        discretized. ``close_tail`` lumps a positive normalization deficit into two
        atoms at +-close_tail, for measures known only on a window.
        """
        k = VonNeumannKappa.of(kappa)
        tol = self.models.membership_tol(measure) if tol is None else tol
        measured = self.measures.normalization(measure)
        deficit = k.scale - measured
        if close_tail is not None and deficit > tol:
            if close_tail <= 0:
                raise InadmissibleParameter("close_tail must be positive")
            weight = 0.5 * deficit * (1.0 + close_tail ** 2)
            measure = measure.with_atoms([Atom(location=-close_tail, weight=weight),
                                          Atom(location=close_tail, weight=weight)])
            logger.info("tail_closed", deficit=deficit, at=close_tail)
            measured = self.measures.normalization(measure)
        if abs(measured - k.scale) > tol:
            logger.warning("normalization_mismatch", measured=measured, required=k.scale)
            raise NormalizationMismatch(measured, k.scale)
        if n < len(measure.atoms):
            raise InadmissibleParameter(f"n={n} is smaller than the {len(measure.atoms)} atoms")
        donoghue = measure.scaled(k.inverse_scale)
        nodes, weights = self.models.discretize(donoghue, n)
        model = DiscreteModel(nodes, weights * k.scale, k, exact=not measure.density)
        logger.info("realized", kappa=k.kappa, nodes=model.size)
        return model

    def kappa_from_normalization(self, measure: MeasureSpec) -> VonNeumannKappa:
        """The kappa whose class matches the measure's normalization L <= 1."""
        L = self.measures.normalization(measure)
        if not 0.0 < L <= 1.0 + self.models.membership_tol(measure):
            raise InadmissibleParameter(f"L={L!r} lies outside (0, 1]")
        return VonNeumannKappa(max((1.0 - L) / (1.0 + L), 0.0))


def independent_impedance_at_i(nu: complex, kappa: float) -> complex:
    """V(i) = i (nu - kappa) / (nu + kappa), from W(i) = nu / kappa through the Cayley map."""
    return 1j * (nu - kappa) / (nu + kappa)

