"""Finite functional model: B = diag(lambda), the rank-one dissipative resolvent of T,
and the two independent routes to the transfer function.
"""
import math
from typing import List, Optional, Tuple, Union

import numpy as np
import structlog
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from app.config import settings
from app.core.errors import (
    InadmissibleParameter,
    ModelSizeError,
    NoComparablePoints,
    NormalizationMismatch,
    PoleError,
    QuadratureError,
)
from app.models.domain import (
    AnalyticFn,
    DiscreteModel,
    FunctionRole,
    UnimodularFactor,
    VonNeumannKappa,
    pole_safe_ratio,
)
from app.models.schemas import (
    CrossCheckReport,
    GridSpec,
    MeasureSpec,
    ModelDump,
    QuadratureConfig,
)
from app.services.calculus_service import CalculusService
from app.services.measure_service import MeasureService

logger = structlog.get_logger(__name__)

KappaLike = Union[VonNeumannKappa, float]
HALF_PI = 0.5 * math.pi


class ModelService:
    def __init__(self, cfg: Optional[QuadratureConfig] = None,
                 measures: Optional[MeasureService] = None,
                 calculus: Optional[CalculusService] = None):
        self.cfg = cfg or QuadratureConfig()
        self.measures = measures or MeasureService(self.cfg)
        self.calculus = calculus or CalculusService()

    # --- construction -------------------------------------------------------

    def membership_tol(self, measure: MeasureSpec) -> float:
        return settings.EXACT_TOL if measure.is_closed_form else settings.QUADRATURE_TOL

    def check_normalization(self, measure: MeasureSpec, kappa: VonNeumannKappa,
                            tol: Optional[float] = None) -> float:
        tol = self.membership_tol(measure) if tol is None else tol
        measured = self.measures.normalization(measure)
        if abs(measured - kappa.scale) > tol:
            logger.warning("normalization_mismatch", measured=measured, required=kappa.scale,
                           tol=tol)
            raise NormalizationMismatch(measured, kappa.scale)
        return measured

    def build_model(self, measure: MeasureSpec, kappa: KappaLike, n: int,
                    tol: Optional[float] = None) -> DiscreteModel:
        """Discretize ``measure`` to at most ``n`` nodes as a model in M_kappa."""
        kappa = VonNeumannKappa.of(kappa)
        self.check_normalization(measure, kappa, tol)
        nodes, weights = self.discretize(measure, n)
        model = DiscreteModel(nodes, weights, kappa, exact=not measure.density)
        logger.info("model_built", nodes=model.size, kappa=kappa.kappa,
                    normalization=model.normalization)
        return model

    def discretize(self, measure: MeasureSpec, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Atoms verbatim plus Gauss-Legendre nodes in theta = arctan(lambda).

        In theta the normalization integral becomes a plain integral of rho(tan theta),
        so each node's weight is rho(lambda) (1 + lambda^2) times its Gauss weight.
        Unbounded ends beyond the tail cutoff are lumped into one node each.
        """
        n_atoms = len(measure.atoms)
        plans = [self._piece_plan(piece) for piece in measure.density]
        reserved = sum(len(tails) + 1 for _, tails in plans)
        budget = n - n_atoms
        if budget < reserved:
            raise ModelSizeError(
                f"n={n} is too small: {n_atoms} atoms and {reserved} density slots needed")

        nodes: List[np.ndarray] = [measure.atom_locations]
        weights: List[np.ndarray] = [measure.atom_weights]
        interior = budget - sum(len(tails) for _, tails in plans)
        for k, (piece, (core, tails)) in enumerate(zip(measure.density, plans)):
            share = interior // len(plans) + (1 if k < interior % len(plans) else 0)
            x, w = self._gauss_nodes(piece, core, share)
            nodes.append(x)
            weights.append(w)
            for tail in tails:
                x, w = self._tail_lump(piece, tail)
                nodes.append(x)
                weights.append(w)

        all_nodes = np.concatenate(nodes)
        all_weights = np.concatenate(weights)
        keep = all_weights > 0
        merged, inverse = np.unique(all_nodes[keep], return_inverse=True)
        merged_weights = np.bincount(inverse, weights=all_weights[keep])
        return merged, merged_weights

    def _piece_plan(self, piece):
        """Theta interval of the Gauss core and of each lumped tail."""
        lo, hi = piece.support()
        cut = self.cfg.tail_cutoff
        core_lo = lo if math.isfinite(lo) else min(-cut, hi - cut)
        core_hi = hi if math.isfinite(hi) else max(cut, lo + cut)
        tails = []
        if not math.isfinite(lo):
            tails.append((-HALF_PI, math.atan(core_lo)))
        if not math.isfinite(hi):
            tails.append((math.atan(core_hi), HALF_PI))
        return (math.atan(core_lo), math.atan(core_hi)), tails

    def _gauss_nodes(self, piece, core, m: int):
        x, g = leggauss(m)
        t0, t1 = core
        half, mid = 0.5 * (t1 - t0), 0.5 * (t1 + t0)
        lam = np.tan(mid + half * x)
        return lam, piece.rho(lam) * (1.0 + lam ** 2) * half * g

    def _tail_lump(self, piece, tail):
        t0, t1 = tail
        if piece.kind == "constant":
            mass = piece.value * (t1 - t0)
        else:
            result = quad(lambda t: float(piece.rho(math.tan(t))), t0, t1,
                          epsabs=self.cfg.abs_tol, epsrel=self.cfg.rel_tol,
                          limit=self.cfg.max_subdivisions, full_output=1)
            if len(result) > 3:
                raise QuadratureError("tail mass did not converge", float(result[1]))
            mass = float(result[0])
        lam = math.tan(0.5 * (t0 + t1))
        return np.array([lam]), np.array([mass * (1.0 + lam * lam)])

    def sibling(self, model: DiscreteModel) -> DiscreteModel:
        """The kappa = 0 model on the same nodes with the Donoghue weights."""
        return DiscreteModel(model.nodes, model.donoghue_weights, VonNeumannKappa(0.0),
                             exact=model.exact)

    def dump(self, model: DiscreteModel) -> ModelDump:
        return ModelDump(nodes=model.nodes.tolist(), weights=model.weights.tolist(),
                         kappa=model.kappa.kappa, normalization=model.normalization,
                         exact=model.exact)

    def load(self, dump: ModelDump) -> DiscreteModel:
        model = DiscreteModel(dump.nodes, dump.weights, VonNeumannKappa(dump.kappa),
                              exact=dump.exact)
        if abs(model.normalization - model.kappa.scale) > settings.QUADRATURE_TOL:
            raise NormalizationMismatch(model.normalization, model.kappa.scale)
        return model

    # --- resolvents ---------------------------------------------------------

    def _vector(self, model: DiscreteModel, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        if f.shape != model.nodes.shape:
            raise InadmissibleParameter(f"vector of shape {f.shape} does not fit {model.size} nodes")
        return f

    def resolvent_B(self, model: DiscreteModel, z: complex, f) -> np.ndarray:
        """(B - z)^{-1} f = f_j / (lambda_j - z)."""
        return self._vector(model, f) * model.deficiency_vector(z)

    @staticmethod
    def pole_radius(model: DiscreteModel) -> float:
        """Exclusion radius for the denominator of p(z).

        Exact-atom models use ``POLE_RADIUS``. Quadrature-built models know M_0
        only to about ``QUADRATURE_TOL * n**2``, and a denominator below that is
        indistinguishable from zero.
        """
        if model.exact:
            return settings.POLE_RADIUS
        return max(settings.POLE_RADIUS, settings.QUADRATURE_TOL * model.size ** 2)

    def p_function(self, model: DiscreteModel, z: complex, dedicated: bool = True) -> complex:
        """Coefficient of the rank-one correction in the resolvent of T."""
        kappa = model.kappa.kappa
        m0 = model.weyl0(z)
        radius = self.pole_radius(model)
        if kappa == 0.0 and dedicated:
            return pole_safe_ratio(1.0, m0 - 1j, z, "p(z)", radius)
        shift = 1j * (kappa + 1.0) / (kappa - 1.0)
        return pole_safe_ratio(1.0, m0 + shift, z, "p(z)", radius)

    def resolvent_T(self, model: DiscreteModel, z: complex, f,
                    dedicated: bool = True) -> np.ndarray:
        """(T - z)^{-1} f = (B - z)^{-1} f - p(z) (f, g_zbar) g_z."""
        z = complex(z)
        f = self._vector(model, f)
        g_z = model.deficiency_vector(z)
        g_zbar = model.deficiency_vector(z.conjugate())
        p = self.p_function(model, z, dedicated)
        return f * g_z - p * model.inner(f, g_zbar) * g_z

    # --- functions of the model ---------------------------------------------

    def model_impedance(self, model: DiscreteModel, z: complex) -> complex:
        """V(z) = (1-kappa)/(1+kappa) M_0(z), which is model.weyl(z) by normalization."""
        return model.weyl(z)

    def impedance_function(self, model: DiscreteModel) -> AnalyticFn:
        return AnalyticFn(model.weyl, role=FunctionRole.IMPEDANCE, kappa=model.kappa.kappa,
                          label=f"model[{model.size}]")

    def weyl_function(self, model: DiscreteModel) -> AnalyticFn:
        return AnalyticFn(model.weyl0, role=FunctionRole.WEYL, label=f"model0[{model.size}]")

    def model_transfer_resolvent_path(self, model: DiscreteModel, z: complex) -> complex:
        """W = 1 - 2i s_kappa (M_0 - p M_0^2), built from the resolvent formula alone."""
        z = complex(z)
        if z.imag <= 0:
            raise InadmissibleParameter("the resolvent path is defined on the upper half-plane")
        m0 = model.weyl0(z)
        p = self.p_function(model, z)
        return 1.0 - 2j * model.kappa.scale * (m0 - p * m0 * m0)

    def transfer_mobius_function(self, model: DiscreteModel,
                                 nu: Union[UnimodularFactor, complex, None] = None) -> AnalyticFn:
        s = self.calculus.livsic_from_weyl(self.weyl_function(model))
        S = self.calculus.char_from_livsic(s, model.kappa)
        return self.calculus.transfer_from_char(S, nu)

    def model_transfer_mobius_path(self, model: DiscreteModel, z: complex) -> complex:
        return self.transfer_mobius_function(model)(z)

    def cross_check(self, model: DiscreteModel, grid: Optional[GridSpec] = None,
                    nu: Union[UnimodularFactor, complex, None] = None) -> CrossCheckReport:
        """Compare the resolvent route (times ``nu``) with 1/S from the Möbius chain."""
        grid = grid or GridSpec.model_default()
        factor = UnimodularFactor.of(nu).nu
        mobius = self.transfer_mobius_function(model)
        max_abs, max_rel, compared, poles = 0.0, 0.0, 0, 0
        for z in grid.points():
            try:
                w_res = factor * self.model_transfer_resolvent_path(model, z)
                w_mob = mobius(z)
            except (PoleError, ZeroDivisionError):
                poles += 1
                continue
            compared += 1
            max_abs = max(max_abs, abs(w_res - w_mob))
            max_rel = max(max_rel, abs(w_res / w_mob - 1.0))
        if poles:
            logger.info("cross_check_poles_skipped", poles=poles, compared=compared)
        if compared == 0:
            raise NoComparablePoints(f"all {poles} grid points are poles of the transfer function")
        return CrossCheckReport(max_abs=max_abs, max_rel=max_rel, compared=compared, poles=poles)
