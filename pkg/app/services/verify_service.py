"""Property suites run by ``verify`` and ``GET /api/verify/{suite}``.

Each suite returns a :class:`SuiteReport` with one row per check and the
largest residual seen. Expected failures carry status XFAIL.
"""
import cmath
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import structlog

from app.config import settings
from app.core.errors import InadmissibleParameter, PoleError
from app.models.domain import (
    BoundaryVariant,
    DiscreteModel,
    IntervalOperatorParams,
    QuasiKernelPhase,
    UnimodularFactor,
    VonNeumannKappa,
)
from app.models.schemas import (
    Atom,
    CheckResult,
    ConstantDensity,
    GridSpec,
    MeasureSpec,
    SuiteReport,
)
from app.services.biextension_service import BiExtensionService
from app.services.calculus_service import CalculusService
from app.services.donoghue_service import DonoghueService, independent_impedance_at_i
from app.services.examples_service import ExamplesService
from app.services.measure_service import MeasureService
from app.services.model_service import ModelService

logger = structlog.get_logger(__name__)

SUITES = ("reciprocity", "cayley", "donoghue", "biextension", "examples")
RANDOM_KAPPAS = (0.0, 0.3, 0.7)
ELL = 1.0


def _check(name: str, residual: float, tolerance: float, note: str = "") -> CheckResult:
    status = "PASS" if residual <= tolerance else "FAIL"
    return CheckResult(name=name, status=status, max_residual=float(residual),
                       tolerance=tolerance, note=note)


def _flag(name: str, ok: bool, note: str = "") -> CheckResult:
    return CheckResult(name=name, status="PASS" if ok else "FAIL", max_residual=0.0 if ok else 1.0,
                       tolerance=0.0, note=note)


def max_difference(f: Callable[[complex], complex], g: Callable[[complex], complex],
                   points: Iterable[complex], relative: bool = False) -> Tuple[float, int]:
    """Largest |f - g| (or |f - g| / max(1, |g|)) over the points where both are finite."""
    worst, compared = 0.0, 0
    for z in points:
        try:
            a, b = f(z), g(z)
        except (PoleError, ZeroDivisionError):
            continue
        if not (cmath.isfinite(a) and cmath.isfinite(b)):
            continue
        compared += 1
        gap = abs(a - b)
        worst = max(worst, gap / max(1.0, abs(b)) if relative else gap)
    return worst, compared


class VerifyService:
    def __init__(self, seed: Optional[int] = None, n_models: Optional[int] = None):
        self.seed = settings.VERIFY_SEED if seed is None else seed
        self.n_models = settings.VERIFY_MODELS if n_models is None else n_models
        self.measures = MeasureService()
        self.calculus = CalculusService()
        self.models = ModelService(measures=self.measures, calculus=self.calculus)
        self.donoghue = DonoghueService(self.measures, self.models)
        self.biextension = BiExtensionService()
        self.examples = ExamplesService()

    def run(self, suite: str) -> SuiteReport:
        runners: Dict[str, Callable[[], List[CheckResult]]] = {
            "reciprocity": self.reciprocity,
            "cayley": self.cayley,
            "donoghue": self.donoghue_suite,
            "biextension": self.biextension_suite,
            "examples": self.examples_suite,
        }
        if suite not in runners:
            raise InadmissibleParameter(f"unknown suite {suite!r}", SUITES)
        report = SuiteReport(suite=suite, checks=runners[suite]())
        failed = [c.name for c in report.checks if c.status == "FAIL"]
        logger.info("suite_finished", suite=suite, checks=len(report.checks), failed=failed)
        return report

    def run_all(self, suites: Optional[Iterable[str]] = None) -> List[SuiteReport]:
        return [self.run(name) for name in (suites or SUITES)]

    # --- random models ------------------------------------------------------

    def random_models(self) -> List[DiscreteModel]:
        """Exact-atom models with at most ten nodes, kappa cycling through 0, 0.3 and 0.7."""
        rng = np.random.default_rng(self.seed)
        models = []
        for k in range(self.n_models):
            kappa = VonNeumannKappa(RANDOM_KAPPAS[k % len(RANDOM_KAPPAS)])
            size = int(rng.integers(1, 11))
            nodes = np.unique(np.round(rng.uniform(-4.0, 4.0, size), 6))
            weights = rng.uniform(0.1, 1.0, nodes.size)
            weights *= kappa.scale / np.sum(weights / (1.0 + nodes ** 2))
            models.append(DiscreteModel(nodes, weights, kappa))
        return models

    def reciprocity(self) -> List[CheckResult]:
        grid = GridSpec.model_default()
        checks = []
        models = self.random_models()
        for kappa in RANDOM_KAPPAS:
            worst, compared, poles = 0.0, 0, 0
            for model in models:
                if model.kappa.kappa != kappa:
                    continue
                report = self.models.cross_check(model, grid)
                worst = max(worst, report.max_rel)
                compared += report.compared
                poles += report.poles
            checks.append(_check(f"W*S = 1, kappa={kappa}", worst, 1e-10,
                                 f"{compared} points, {poles} poles skipped"))
        control = next((m for m in models if m.kappa.kappa > 0.0), None)
        if control is not None:
            checks.append(self.unimodular_control(control, grid))
        for bundle in (self.examples.example1_functions(ELL),
                       self.examples.example4_functions(ELL, -2.0)):
            W, S = bundle.transfer, bundle.characteristic
            worst, _ = max_difference(lambda z: W(z) * S(z), lambda z: 1.0,
                                      GridSpec.standard().points())
            checks.append(_check(f"W*S = 1, {W.label}", worst, 1e-12))
        return checks

    def unimodular_control(self, model: DiscreteModel, grid: GridSpec,
                           nu: complex = cmath.exp(0.25j * math.pi)) -> CheckResult:
        """A stray factor nu on the resolvent path must show up as |nu - 1| in cross_check."""
        report = self.models.cross_check(model, grid, nu=nu)
        expected = abs(nu - 1.0)
        return _check("cross check detects a unimodular factor", abs(report.max_rel - expected),
                      1e-9, f"max_rel {report.max_rel:.16g}, expected {expected:.16g}")

    # --- Cayley / Möbius round trips ---------------------------------------

    def cayley(self) -> List[CheckResult]:
        points = GridSpec.model_default().points()
        calc = self.calculus
        worst_ms, worst_sk, worst_wv, worst_chain = 0.0, 0.0, 0.0, 0.0
        for model in self.random_models():
            M = self.models.weyl_function(model)
            s = calc.livsic_from_weyl(M)
            worst_ms = max(worst_ms, max_difference(calc.weyl_from_livsic(s), M, points, True)[0])
            S = calc.char_from_livsic(s, model.kappa)
            worst_sk = max(worst_sk, max_difference(calc.livsic_from_char(S, model.kappa), s,
                                                    points, True)[0])
            W = calc.transfer_from_char(S)
            V = calc.impedance_from_transfer(W)
            worst_wv = max(worst_wv, max_difference(calc.transfer_from_impedance(V), W,
                                                    points, True)[0])
            worst_chain = max(worst_chain, max_difference(V, model.weyl, points, True)[0])
        checks = [
            _check("M -> s -> M", worst_ms, 1e-10),
            _check("s -> S -> s", worst_sk, 1e-10),
            _check("W -> V -> W", worst_wv, 1e-10),
            _check("chain impedance = (1-kappa)/(1+kappa) M_0", worst_chain, 1e-10),
        ]

        M = self.examples.example2_functions(ELL).weyl
        alpha, beta = 0.4, 2.9
        composed = calc.weyl_extension_transform(calc.weyl_extension_transform(M, alpha), beta)
        direct = calc.weyl_extension_transform(M, calc.compose_extension_angles(alpha, beta))
        checks.append(_check("extension angles compose mod pi",
                             max_difference(composed, direct, GridSpec.standard().points(), True)[0],
                             1e-12))
        return checks

    # --- Donoghue classes ---------------------------------------------------

    def theorem_sweep(self, n_nu: int = 64, kappas: Iterable[float] = None) -> List[CheckResult]:
        kappas = [k / 10 for k in range(10)] if kappas is None else list(kappas)
        residual, wrong = 0.0, []
        for kappa in kappas:
            k = VonNeumannKappa(kappa)
            for j in range(n_nu):
                nu = UnimodularFactor.from_angle(2.0 * math.pi * j / n_nu)
                Q, L = self.donoghue.nu_kappa_algebra(nu, k)
                direct = independent_impedance_at_i(nu.nu, k.kappa)
                residual = max(residual, abs(complex(Q, L) - direct))
                in_M = abs(Q) <= 1e-12 and abs(L - 1.0) <= 1e-12
                in_M_kappa = abs(Q) <= 1e-12 and abs(L - k.scale) <= 1e-12
                if in_M != (k.kappa == 0.0):
                    wrong.append((kappa, j, "M"))
                if k.kappa > 0.0 and in_M_kappa != (j == 0):
                    wrong.append((kappa, j, "M_kappa"))
        note = f"{len(kappas)} kappas x {n_nu} nu"
        return [
            _check("(Q, L) matches i(nu-kappa)/(nu+kappa)", residual, 1e-12, note),
            _flag("(Q, L) = (0, 1) iff kappa = 0; M_kappa iff nu = 1", not wrong,
                  f"{len(wrong)} misclassified" if wrong else note),
        ]

    def donoghue_suite(self) -> List[CheckResult]:
        checks = self.theorem_sweep()
        ex = self.examples
        e1, e2 = ex.example1_functions(ELL), ex.example2_functions(ELL)
        e4 = ex.example4_functions(ELL, -2.0)
        checks += [
            _check("V_ex1(i) = i(1-kappa)/(1+kappa)",
                   abs(e1.impedance(1j) - 1j * e1.kappa.scale), 1e-12),
            _check("V_ex2(i) = i", abs(e2.impedance(1j) - 1j), 1e-12),
            _check("V_ex4(i) = i(1-kappa)/(1+kappa)",
                   abs(e4.impedance(1j) - 1j * e4.kappa.scale), 1e-12),
        ]
        phases = [cmath.exp(2j * math.pi * k / 8) for k in range(8)]
        worst = max(abs(ex.example3_functions(ELL, mu).impedance(1j) - 1j) for mu in phases)
        checks.append(_check("V_ex3(i) = i for all phases", worst, 1e-12, "8th roots of unity"))

        grid = GridSpec.standard().points()
        for bundle in (e1, e4):
            scaled = self.donoghue.scale_between_classes(e2.impedance, bundle.kappa)
            checks.append(_check(f"{bundle.impedance.label} = scale * V_ex2",
                                 max_difference(bundle.impedance, scaled, grid)[0], 1e-12))

        two_atoms = MeasureSpec(atoms=(Atom(location=-1.0, weight=1 / 3),
                                       Atom(location=1.0, weight=1 / 3)))
        kappa = self.donoghue.kappa_from_normalization(two_atoms)
        model = self.donoghue.realize(two_atoms, kappa, 2)
        report = self.donoghue.classify_impedance(self.models.impedance_function(model))
        checks.append(_check("realize then classify recovers kappa",
                             abs((report.kappa_hat or math.inf) - kappa.kappa), 1e-8))
        checks.append(self.constant_model_check())
        return checks

    def constant_model_check(self, n: int = 64) -> CheckResult:
        """Lebesgue measure / pi: M is identically i and p(z) = 1/(M_0 - i) blows up."""
        measure = MeasureSpec(density=(ConstantDensity(value=1.0 / math.pi),))
        model = self.models.build_model(measure, 0.0, n)
        grid = GridSpec(re_min=-1.0, re_max=1.0, im_min=1.0, im_max=10.0, n_re=5, n_im=5)
        worst, poles = 0.0, 0
        for z in grid.points():
            worst = max(worst, abs(model.weyl(z) - 1j))
            try:
                self.models.model_transfer_resolvent_path(model, z)
            except PoleError:
                poles += 1
        note = (f"{poles}/{grid.size} poles on the resolvent path, "
                f"radius {self.models.pole_radius(model):.3g}")
        status = "PASS" if worst <= 1e-3 and poles == grid.size else "FAIL"
        return CheckResult(name="constant model M = i", status=status, max_residual=worst,
                           tolerance=1e-3, note=note)

    # --- bi-extensions ------------------------------------------------------

    def biextension_suite(self) -> List[CheckResult]:
        worst_channel, worst_h = 0.0, 0.0
        for j in range(10):
            kappa = j / 10
            ext = self.biextension.build(kappa)
            D = (ext.S_A - ext.S_Astar) / 2j
            expected = (1.0 - kappa) / (2.0 + 2.0 * kappa)
            worst_channel = max(worst_channel, float(np.max(np.abs(D - expected))))
            worst_h = max(worst_h, abs(ext.H - 1j / (1.0 + kappa)))
            self.biextension.imaginary_part_channel(ext.S_A, ext.S_Astar, kappa)
        worst_x = 0.0
        for kappa in (0.0, 0.25, 0.5, 0.9):
            for beta in (0.0, 0.3, 0.5 * math.pi, 2.5):
                phase = QuasiKernelPhase(beta)
                X, residual = self.biextension.solve_boundary_system(kappa, phase)
                H = self.biextension.h_parameter(kappa, phase)
                worst_x = max(worst_x, residual, abs(X * phase.U.conjugate() - H))
        return [
            _check("(S_A - S_A*)/2i = (1-kappa)/(2+2kappa) ones", worst_channel, 1e-14),
            _check("H(kappa, 1) = i/(1+kappa)", worst_h, 1e-14),
            _check("boundary system solution matches H", worst_x, 1e-12),
        ]

    # --- interval examples --------------------------------------------------

    def examples_suite(self) -> List[CheckResult]:
        ex, calc = self.examples, self.calculus
        grid = GridSpec.standard().points()
        e1 = ex.example1_functions(ELL)
        e2 = ex.example2_functions(ELL)
        e4 = ex.example4_functions(ELL, -2.0)
        checks = [_check("kappa_ex1 = exp(-ell)", abs(e1.kappa.kappa - math.exp(-ELL)), 1e-14)]

        for bundle in (e1, e4):
            S = calc.char_from_livsic(bundle.livsic, bundle.kappa)
            W = calc.transfer_from_char(S)
            V = calc.impedance_from_transfer(W)
            worst = max(max_difference(S, bundle.characteristic, grid, True)[0],
                        max_difference(W, bundle.transfer, grid, True)[0],
                        max_difference(V, bundle.impedance, grid, True)[0])
            checks.append(_check(f"pipeline from s reproduces {bundle.transfer.label}", worst, 1e-12))
        checks.append(_check("W_ex2 * (-s) = 1",
                             max_difference(lambda z: -e2.transfer(z) * e2.livsic(z),
                                            lambda z: 1.0, grid)[0], 1e-12))

        a = math.exp(ELL)
        identity = abs((-2.0 + 1.0) / (-2.0 - 1.0) - e4.kappa.scale * (a + 1.0) / (a - 1.0))
        checks.append(_check("(rho+1)/(rho-1) = scale (e+1)/(e-1)", identity, 1e-13))
        e4_edge = ex.example4_functions(ELL, a)
        checks.append(_check("rho = exp(ell) reproduces example 2",
                             max(max_difference(e4_edge.transfer, e2.transfer, grid)[0],
                                 max_difference(e4_edge.impedance, e2.impedance, grid)[0]), 1e-12))
        e3 = ex.example3_functions(ELL, 1.0)
        checks.append(_check("mu = 1 reproduces example 2",
                             max(max_difference(e3.transfer, e2.transfer, grid)[0],
                                 max_difference(e3.impedance, e2.impedance, grid)[0]), 1e-12))
        checks.append(self.phase_coincidence_check())

        for bundle in (e1, e2, e4):
            worst, _ = max_difference(lambda z: ex.transfer_via_resolvent(bundle.params, z),
                                      bundle.transfer, grid, True)
            checks.append(_check(f"resolvent transfer = {bundle.transfer.label}", worst, 1e-12))

        checks += self.resolvent_checks([e1.params, e2.params, e4.params])
        return checks

    def phase_coincidence_check(self) -> CheckResult:
        """mu = -1 is claimed to coincide with example 2; the displayed W is its negative."""
        ex = self.examples
        e2 = ex.example2_functions(ELL)
        e3 = ex.example3_functions(ELL, -1.0)
        grid = GridSpec.standard().points()
        gap, _ = max_difference(e3.transfer, e2.transfer, grid)
        ratio_gap, _ = max_difference(lambda z: e3.transfer(z) / e2.transfer(z), lambda z: -1.0, grid)
        note = f"W ratio to example 2 is -1 within {ratio_gap:.1e}; V = -1/V_ex2"
        if gap <= 1e-12:
            return CheckResult(name="mu = -1 coincides with example 2", status="PASS",
                               max_residual=gap, tolerance=1e-12, note="coincidence holds")
        status = "XFAIL" if ratio_gap <= 1e-12 else "FAIL"
        return CheckResult(name="mu = -1 coincides with example 2", status=status,
                           max_residual=gap, tolerance=1e-12, note=note)

    def resolvent_checks(self, params_list: List[IntervalOperatorParams],
                         z: complex = 2j) -> List[CheckResult]:
        checks = []
        n = settings.RESOLVENT_QUAD_N
        for params in params_list:
            name = params.boundary.value
            for variant in ("T", "T*"):
                coarse = self.examples.ode_residual(params, variant, z, np.sin, n)
                fine = self.examples.ode_residual(params, variant, z, np.sin, 2 * n)
                order = math.log2(coarse / fine) if fine > 0 else math.inf
                checks.append(_check(f"ODE residual {name} {variant}", coarse, 1e-5,
                                     f"observed order {order:.2f}"))
                sol = self.examples.resolvent_apply(params, variant, z, np.sin, n)
                checks.append(_check(f"boundary condition {name} {variant}",
                                     self.examples.boundary_residual(params, variant, sol), 1e-10))
        params = next((p for p in params_list if p.boundary is BoundaryVariant.EXP_T0),
                      IntervalOperatorParams(ELL, BoundaryVariant.EXP_T0))
        checks.append(self.mollifier_check(params, z))
        return checks

    def mollifier_check(self, params: IntervalOperatorParams, z: complex = 2j,
                        widths: Tuple[float, ...] = (8e-3, 4e-3, 2e-3),
                        quad_n: int = 20000) -> CheckResult:
        """Bumps at 0 and ell, extrapolated to zero width, reproduce the closed-form delta values."""
        r0, rl = self.examples.extended_resolvent_delta(params, z)
        worst = 0.0
        for at_end, coefficient in ((False, r0), (True, rl)):
            sol = self.examples.mollified_delta_limit(params, z, at_end, widths, quad_n)
            target = coefficient * np.exp(-1j * z * sol.t)
            rel = np.max(np.abs(sol.values - target)) / np.max(np.abs(target))
            worst = max(worst, float(rel))
        return _check(f"mollified delta resolvent {params.boundary.value}", worst, 1e-4,
                      f"widths {widths}, z={z}")
