import cmath
import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from app.config import settings
from app.core.errors import InadmissibleParameter, QuadratureError
from app.models.domain import AnalyticFn, FunctionRole, HalfPlanePoint
from app.models.schemas import (
    AtomEstimate,
    CauchyProfileDensity,
    CompactTableDensity,
    ConstantDensity,
    GridSpec,
    HerglotzReport,
    MeasureSpec,
    QuadratureConfig,
    StieltjesTable,
)

logger = structlog.get_logger(__name__)

DEFAULT_EPS_LADDER = (1e-2, 1e-3, 1e-4)


def _half_log1p_square(lam: float) -> float:
    return math.log(math.hypot(1.0, lam))


def _constant_antiderivative(lam: float, z: complex) -> complex:
    """log(lam - z) - log(1 + lam^2)/2 for Im z > 0, with its limits at +-inf."""
    if lam == math.inf:
        return 0j
    if lam == -math.inf:
        return -1j * math.pi
    return cmath.log(lam - z) - _half_log1p_square(lam)


class MeasureService:
    def __init__(self, cfg: Optional[QuadratureConfig] = None):
        self.cfg = cfg or QuadratureConfig()

    # --- regularized Cauchy integrals ---------------------------------------

    def eval_weyl(self, measure: MeasureSpec, z: Union[complex, HalfPlanePoint]) -> complex:
        """M(z) = integral of (1/(lambda - z) - lambda/(1 + lambda^2)) dmu.

        Points in the lower half-plane are evaluated by reflection.
        """
        point = z if isinstance(z, HalfPlanePoint) else HalfPlanePoint(z)
        w = point.upper
        value = 0j
        if measure.atoms:
            lam, weights = measure.atom_locations, measure.atom_weights
            value += complex(np.sum(weights * (1.0 / (lam - w) - lam / (1.0 + lam ** 2))))
        for piece in measure.density:
            value += self._density_weyl(piece, w)
        return value if point.in_upper else value.conjugate()

    def normalization(self, measure: MeasureSpec) -> float:
        """L = integral of dmu / (1 + lambda^2)."""
        total = 0.0
        if measure.atoms:
            lam, weights = measure.atom_locations, measure.atom_weights
            total += float(np.sum(weights / (1.0 + lam ** 2)))
        for piece in measure.density:
            total += self._density_normalization(piece)
        return total

    def weyl_function(self, measure: MeasureSpec, label: str = "") -> AnalyticFn:
        return AnalyticFn(lambda z: self.eval_weyl(measure, z), role=FunctionRole.WEYL,
                          label=label or "measure")

    def _density_weyl(self, piece, z: complex) -> complex:
        if isinstance(piece, ConstantDensity):
            lo, hi = piece.support()
            return piece.value * (_constant_antiderivative(hi, z) - _constant_antiderivative(lo, z))
        if isinstance(piece, CauchyProfileDensity):
            pole = complex(piece.center, -piece.width)
            regularizer = (1.0 / (pole - 1j)).real
            return piece.amplitude * (1.0 / (pole - z) - regularizer)
        if isinstance(piece, CompactTableDensity):
            def kernel(lam):
                return 1.0 / (lam - z) - lam / (1.0 + lam * lam)
            re = self._quad(lambda lam: float(piece.rho(lam)) * kernel(lam).real, piece, "Re M")
            im = self._quad(lambda lam: float(piece.rho(lam)) * kernel(lam).imag, piece, "Im M")
            return complex(re, im)
        raise InadmissibleParameter(f"unknown density kind {piece.kind!r}")

    def _density_normalization(self, piece) -> float:
        if isinstance(piece, ConstantDensity):
            lo, hi = piece.support()
            return piece.value * (math.atan(hi) - math.atan(lo))
        if isinstance(piece, CauchyProfileDensity):
            pole = complex(piece.center, -piece.width)
            return piece.amplitude * (1.0 / (pole - 1j)).imag
        if isinstance(piece, CompactTableDensity):
            return self._quad(lambda lam: float(piece.rho(lam)) / (1.0 + lam * lam), piece, "L")
        raise InadmissibleParameter(f"unknown density kind {piece.kind!r}")

    def _quad(self, integrand: Callable[[float], float], piece: CompactTableDensity, what: str) -> float:
        knots = np.linspace(piece.lower, piece.upper, len(piece.values))
        breaks = knots[1:-1] if 0 < knots.size - 2 <= self.cfg.max_subdivisions // 2 else None
        result = quad(
            integrand, piece.lower, piece.upper,
            epsabs=self.cfg.abs_tol, epsrel=self.cfg.rel_tol,
            limit=self.cfg.max_subdivisions, points=breaks, full_output=1,
        )
        # quad appends a diagnostic message only when it gave up
        if len(result) > 3:
            raise QuadratureError(
                f"{what} integral on [{piece.lower}, {piece.upper}] did not converge "
                f"within {self.cfg.max_subdivisions} subdivisions", float(result[1]))
        return float(result[0])

    # --- inverse problem ----------------------------------------------------

    def stieltjes_invert(
        self,
        fn: AnalyticFn,
        window: Tuple[float, float],
        eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
        grid_n: int = 401,
        atom_floor: float = 1e-8,
    ) -> StieltjesTable:
        """Recover density and atoms from (1/pi) Im fn(lambda + i eps) as eps -> 0."""
        ladder = self._check_ladder(eps_ladder)
        lo, hi = window
        if not lo < hi or grid_n < 3:
            raise InadmissibleParameter("window must be increasing and grid_n >= 3")
        grid = np.linspace(lo, hi, grid_n)
        samples = np.array([[fn(complex(x, eps)).imag for x in grid] for eps in ladder])

        def refine(j: int) -> float:
            eps = ladder[-1]
            left, right = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
            best = minimize_scalar(lambda x: -fn(complex(x, eps)).imag, bounds=(left, right),
                                   method="bounded", options={"xatol": eps * 1e-3})
            return float(best.x)

        def masses(x: float):
            return [eps * fn(complex(x, eps)).imag for eps in ladder]

        return self._tabulate(grid, ladder, samples, refine, masses, atom_floor)

    def stieltjes_invert_samples(
        self,
        frame: pd.DataFrame,
        window: Optional[Tuple[float, float]] = None,
        atom_floor: float = 1e-8,
    ) -> StieltjesTable:
        """Inversion from tabulated samples with columns re_z, im_z, im_f.

        The eps ladder is the set of distinct Im z rows; atoms stay on grid points.
        """
        data = frame
        if "pole_flag" in data:
            data = data[data["pole_flag"] == 0]
        if window is not None:
            data = data[(data["re_z"] >= window[0]) & (data["re_z"] <= window[1])]
        table = data.pivot_table(index="im_z", columns="re_z", values="im_f", aggfunc="first")
        table = table.dropna(axis=1).sort_index(ascending=False)
        ladder = self._check_ladder(table.index.to_list())
        grid = table.columns.to_numpy(dtype=float)
        if grid.size < 3:
            raise InadmissibleParameter("samples must cover at least three real points")
        samples = table.to_numpy(dtype=float)

        def masses_at(j: int):
            return [eps * samples[k, j] for k, eps in enumerate(ladder)]

        return self._tabulate(grid, ladder, samples, refine=None, masses=masses_at,
                              atom_floor=atom_floor)

    def _check_ladder(self, eps_ladder: Sequence[float]) -> list:
        ladder = [float(e) for e in eps_ladder]
        if len(ladder) < 2 or any(e <= 0 for e in ladder) or any(
                b >= a for a, b in zip(ladder, ladder[1:])):
            raise InadmissibleParameter("eps ladder needs >= 2 strictly decreasing positive values")
        return ladder

    def _tabulate(self, grid, ladder, samples, refine, masses, atom_floor) -> StieltjesTable:
        herglotz = bool(samples.min() >= -settings.EXACT_TOL)
        if not herglotz:
            logger.warning("non_herglotz_input", min_im=float(samples.min()))

        e1, e2 = ladder[-2], ladder[-1]
        d1, d2 = samples[-2] / math.pi, samples[-1] / math.pi
        density = (e1 * d2 - e2 * d1) / (e1 - e2)

        finest = samples[-1]
        scale = max(float(np.max(np.abs(finest))), np.finfo(float).tiny)
        peaks, _ = find_peaks(finest, prominence=1e-8 * scale)
        atoms = []
        for j in peaks:
            location = refine(int(j)) if refine is not None else float(grid[j])
            ladder_masses = masses(location) if refine is not None else masses(int(j))
            m1, m2 = ladder_masses[-2], ladder_masses[-1]
            if m2 <= atom_floor or abs(m2 - m1) > 0.01 * abs(m2):
                continue
            weight = (e1 * m2 - e2 * m1) / (e1 - e2)
            atoms.append(AtomEstimate(location=location, weight=weight, spread=abs(m2 - m1)))
        logger.info("stieltjes_inversion", grid_n=int(len(grid)), rungs=len(ladder),
                    candidates=int(len(peaks)), atoms=len(atoms))
        return StieltjesTable(
            grid=[float(x) for x in grid],
            eps_ladder=ladder,
            samples=samples.tolist(),
            density=density.tolist(),
            atoms=atoms,
            herglotz=herglotz,
        )

    # --- diagnostics --------------------------------------------------------

    def herglotz_check(self, fn: AnalyticFn, grid: GridSpec,
                       abs_tol: Optional[float] = None) -> HerglotzReport:
        """Min of Im fn over the grid and the reflection residual |fn(z-bar) - conj fn(z)|."""
        tol = settings.EXACT_TOL if abs_tol is None else abs_tol
        min_im, residual, evaluated, poles = math.inf, 0.0, 0, 0
        for z in grid.points():
            up, down = fn.evaluate(z), fn.evaluate(z.conjugate())
            if up.pole or down.pole:
                poles += 1
                continue
            evaluated += 1
            min_im = min(min_im, up.value.imag)
            residual = max(residual, abs(down.value - up.value.conjugate()))
        passed = evaluated > 0 and min_im >= -tol and residual <= tol
        return HerglotzReport(
            min_im=min_im if evaluated else None,
            symmetry_residual=residual,
            abs_tol=tol,
            evaluated=evaluated,
            poles=poles,
            passed=passed,
        )
