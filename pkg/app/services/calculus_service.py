"""Möbius calculus linking the Weyl, Livsic, characteristic, transfer and impedance roles.

Every transform is a scalar linear-fractional map ``(a f + b) / (c f + d)``
applied pointwise to an :class:`AnalyticFn`. Denominators inside the pole
radius raise :class:`PoleError`, which ``AnalyticFn.evaluate`` turns into a
tagged pole outcome.
"""
import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import structlog

from app.config import settings
from app.core.errors import InadmissibleParameter, RoleMismatch
from app.models.domain import (
    AnalyticFn,
    Evaluation,
    FunctionRole,
    UnimodularFactor,
    VonNeumannKappa,
    pole_safe_ratio,
)
from app.models.schemas import ComplexValue, GridSpec, LivsicClassReport, RayProbe

logger = structlog.get_logger(__name__)

KappaLike = Union[VonNeumannKappa, float]


@dataclass(frozen=True)
class Mobius:
    """z -> (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def transform(self, w: complex, z: complex, where: str) -> complex:
        return pole_safe_ratio(self.a * w + self.b, self.c * w + self.d, z, where)

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def then(self, other: "Mobius") -> "Mobius":
        """The map ``other(self(w))``."""
        return Mobius(
            other.a * self.a + other.b * self.c,
            other.a * self.b + other.b * self.d,
            other.c * self.a + other.d * self.c,
            other.c * self.b + other.d * self.d,
        )


def _require_role(fn: AnalyticFn, *roles: FunctionRole):
    if fn.role not in roles and fn.role is not FunctionRole.OTHER:
        raise RoleMismatch(
            f"expected role in {[r.value for r in roles]}, got {fn.role.value!r}")


def _apply(fn: AnalyticFn, mobius: Mobius, role: FunctionRole, where: str, **meta) -> AnalyticFn:
    def evaluator(z: complex) -> complex:
        return mobius.transform(fn(z), z, where)
    return AnalyticFn(evaluator, role=role, kappa=meta.get("kappa", fn.kappa),
                      nu=meta.get("nu", fn.nu), label=f"{where}({fn.label})")


class CalculusService:
    # M -> s and back
    LIVSIC = Mobius(1, -1j, 1, 1j)
    CAYLEY_W_TO_V = Mobius(1j, -1j, 1, 1)

    def livsic_from_weyl(self, M: AnalyticFn) -> AnalyticFn:
        """s(z) = (M(z) - i) / (M(z) + i)."""
        _require_role(M, FunctionRole.WEYL)
        return _apply(M, self.LIVSIC, FunctionRole.LIVSIC, "livsic")

    def weyl_from_livsic(self, s: AnalyticFn) -> AnalyticFn:
        """M(z) = (1/i) (s(z) + 1) / (s(z) - 1)."""
        _require_role(s, FunctionRole.LIVSIC)
        return _apply(s, Mobius(-1j, -1j, 1, -1), FunctionRole.WEYL, "weyl")

    @staticmethod
    def _kappa_map(kappa: float) -> Mobius:
        # (f - kappa) / (kappa f - 1) is its own inverse
        return Mobius(1, -kappa, kappa, -1)

    def char_from_livsic(self, s: AnalyticFn, kappa: KappaLike) -> AnalyticFn:
        """S(z) = (s(z) - kappa) / (kappa s(z) - 1)."""
        _require_role(s, FunctionRole.LIVSIC)
        k = VonNeumannKappa.of(kappa)
        return _apply(s, self._kappa_map(k.kappa), FunctionRole.CHARACTERISTIC, "char",
                      kappa=k.kappa)

    def livsic_from_char(self, S: AnalyticFn, kappa: KappaLike) -> AnalyticFn:
        _require_role(S, FunctionRole.CHARACTERISTIC)
        k = VonNeumannKappa.of(kappa)
        return _apply(S, self._kappa_map(k.kappa), FunctionRole.LIVSIC, "livsic",
                      kappa=k.kappa)

    def transfer_from_char(self, S: AnalyticFn,
                           nu: Union[UnimodularFactor, complex, None] = None) -> AnalyticFn:
        """W(z) = nu / S(z); zeros of S become poles of W."""
        _require_role(S, FunctionRole.CHARACTERISTIC)
        factor = UnimodularFactor.of(nu).nu
        return _apply(S, Mobius(0, factor, 1, 0), FunctionRole.TRANSFER, "transfer",
                      nu=factor)

    def impedance_from_transfer(self, W: AnalyticFn) -> AnalyticFn:
        """V(z) = i (W(z) - 1) / (W(z) + 1)."""
        _require_role(W, FunctionRole.TRANSFER)
        return _apply(W, self.CAYLEY_W_TO_V, FunctionRole.IMPEDANCE, "impedance")

    def transfer_from_impedance(self, V: AnalyticFn) -> AnalyticFn:
        """W(z) = (1 - i V(z)) / (1 + i V(z)); V = i is a pole."""
        _require_role(V, FunctionRole.IMPEDANCE)
        return _apply(V, Mobius(-1j, 1, 1j, 1), FunctionRole.TRANSFER, "transfer")

    def kappa_from_char(self, S: AnalyticFn, tol: Optional[float] = None) -> VonNeumannKappa:
        """kappa = Re S(i); a non-real S(i) means the deficiency basis is not aligned."""
        _require_role(S, FunctionRole.CHARACTERISTIC)
        tol = settings.EXACT_TOL if tol is None else tol
        value = S(1j)
        if abs(value.imag) > tol:
            logger.warning("kappa_convention_violation", im_s_at_i=value.imag, tol=tol)
        kappa = value.real
        if -tol < kappa < 0.0:
            kappa = 0.0
        return VonNeumannKappa(kappa)

    def livsic_class_check(
        self,
        s: AnalyticFn,
        ray_radii: Sequence[float] = (1.0, 10.0, 100.0, 1000.0),
        alphas: Sequence[float] = (0.25 * math.pi,),
        arguments: Sequence[float] = (0.5 * math.pi,),
        tol: Optional[float] = None,
    ) -> LivsicClassReport:
        """Sample |z (s(z) - exp(2 i alpha))| along rays z = R exp(i theta).

        Growth across the sampled radii is reported, never used as a pass/fail gate.
        """
        tol = settings.EXACT_TOL if tol is None else tol
        at_i = s(1j)
        radii = sorted(float(r) for r in ray_radii)
        probes = []
        for theta in arguments:
            if not 0.0 < theta < math.pi:
                raise InadmissibleParameter(f"ray argument {theta} outside (0, pi)")
            for alpha in alphas:
                target = cmath.exp(2j * alpha)
                values = []
                for radius in radii:
                    z = radius * cmath.exp(1j * theta)
                    values.append(abs(z * (s(z) - target)))
                probes.append(RayProbe(
                    alpha=alpha, argument=theta, radii=radii, magnitudes=values,
                    monotone_growth=all(b > a for a, b in zip(values, values[1:])),
                ))
        return LivsicClassReport(s_at_i=ComplexValue.of(at_i), vanishes_at_i=abs(at_i) <= tol,
                                 tol=tol, probes=probes)

    def role_from_weyl(self, M: AnalyticFn, role: Union[FunctionRole, str],
                       kappa: KappaLike = 0.0,
                       nu: Union[UnimodularFactor, complex, None] = None) -> AnalyticFn:
        """Follow M -> s -> S -> W -> V until ``role`` is reached."""
        role = FunctionRole(role)
        if role is FunctionRole.WEYL:
            return M
        s = self.livsic_from_weyl(M)
        if role is FunctionRole.LIVSIC:
            return s
        S = self.char_from_livsic(s, kappa)
        if role is FunctionRole.CHARACTERISTIC:
            return S
        W = self.transfer_from_char(S, nu)
        if role is FunctionRole.TRANSFER:
            return W
        if role is FunctionRole.IMPEDANCE:
            return self.impedance_from_transfer(W)
        raise RoleMismatch(f"no chain step produces role {role.value!r}")

    @staticmethod
    def extension_mobius(alpha: float) -> Mobius:
        c, s = math.cos(alpha), math.sin(alpha)
        return Mobius(c, -s, s, c)

    def weyl_extension_transform(self, M: AnalyticFn, alpha: float) -> AnalyticFn:
        """(cos a M - sin a) / (cos a + sin a M): the Weyl function of the rotated extension."""
        _require_role(M, FunctionRole.WEYL)
        if not 0.0 <= alpha < math.pi:
            raise InadmissibleParameter(f"alpha={alpha} outside [0, pi)")
        return _apply(M, self.extension_mobius(alpha), FunctionRole.WEYL, "extension")

    def compose_extension_angles(self, alpha: float, beta: float) -> float:
        """Angle of T_alpha after T_beta, reduced to [0, pi)."""
        return math.fmod(alpha + beta, math.pi)

    # --- grids --------------------------------------------------------------

    def evaluate_points(self, fn: AnalyticFn, points: Iterable[complex],
                        workers: Optional[int] = None) -> List[Evaluation]:
        points = list(points)
        workers = settings.GRID_WORKERS if workers is None else workers
        if workers <= 1:
            return [fn.evaluate(z) for z in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn.evaluate, points))

    def evaluate_grid(self, fn: AnalyticFn, grid: GridSpec,
                      workers: Optional[int] = None) -> List[Evaluation]:
        return self.evaluate_points(fn, grid.points(), workers)


def scaled(fn: AnalyticFn, factor: float, role: Optional[FunctionRole] = None,
           kappa: Optional[float] = None) -> AnalyticFn:
    """Pointwise real multiple of ``fn``."""
    return AnalyticFn(lambda z: factor * fn(z), role=role or fn.role,
                      kappa=fn.kappa if kappa is None else kappa,
                      label=f"{factor:.6g}*{fn.label}")

