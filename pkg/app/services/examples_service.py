"""Closed-form corpus for the operator i d/dt on [0, ell].

All functions are written in E = exp(-i ell z). Boundary conditions have the
form x(ell) = b x(0); ``b = None`` stands for x(0) = 0.
"""
import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy.integrate import cumulative_simpson, simpson

from app.config import settings
from app.core.errors import InadmissibleParameter
from app.models.domain import (
    AnalyticFn,
    BoundaryVariant,
    ExampleBundle,
    FunctionRole,
    IntervalOperatorParams,
    QuasiKernelPhase,
    UnimodularFactor,
    VonNeumannKappa,
    pole_safe_ratio,
)

logger = structlog.get_logger(__name__)

SampleSource = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampledFunction:
    t: np.ndarray
    values: np.ndarray


def _E(ell: float, z: complex) -> complex:
    return cmath.exp(-1j * ell * z)


def bump(t: np.ndarray, start: float, width: float) -> np.ndarray:
    """Unit-mass sin^2 bump on [start, start + width]."""
    s = (np.asarray(t, dtype=float) - start) / width
    inside = (s >= 0.0) & (s <= 1.0)
    return np.where(inside, 2.0 / width * np.sin(np.pi * s) ** 2, 0.0)


class ExamplesService:
    # --- closed forms -------------------------------------------------------

    def _livsic(self, ell: float, kappa: Optional[float]) -> AnalyticFn:
        a = math.exp(ell)

        def s(z: complex) -> complex:
            E = _E(ell, z)
            return pole_safe_ratio(a - E, 1.0 - a * E, z, "s")
        return AnalyticFn(s, role=FunctionRole.LIVSIC, kappa=kappa, label="s")

    def _weyl(self, ell: float) -> AnalyticFn:
        a = math.exp(ell)
        gain = (a + 1.0) / (a - 1.0)

        def M(z: complex) -> complex:
            E = _E(ell, z)
            return 1j * gain * pole_safe_ratio(E - 1.0, E + 1.0, z, "M")
        return AnalyticFn(M, role=FunctionRole.WEYL, label="M")

    def example1_functions(self, ell: float) -> ExampleBundle:
        """x(0) = 0: kappa = exp(-ell), S = exp(i ell z), W = exp(-i ell z)."""
        params = IntervalOperatorParams(ell, BoundaryVariant.DIRICHLET_T)
        kappa = math.exp(-ell)

        def V(z: complex) -> complex:
            E = _E(ell, z)
            return 1j * pole_safe_ratio(E - 1.0, E + 1.0, z, "V")
        return ExampleBundle(
            params=params,
            kappa=VonNeumannKappa(kappa),
            livsic=self._livsic(ell, kappa),
            characteristic=AnalyticFn(lambda z: cmath.exp(1j * ell * z),
                                      role=FunctionRole.CHARACTERISTIC, kappa=kappa, label="S1"),
            transfer=AnalyticFn(lambda z: _E(ell, z), role=FunctionRole.TRANSFER, kappa=kappa,
                                nu=1.0, label="W1"),
            impedance=AnalyticFn(V, role=FunctionRole.IMPEDANCE, kappa=kappa, label="V1"),
            weyl=self._weyl(ell),
        )

    def example2_functions(self, ell: float) -> ExampleBundle:
        """x(ell) = exp(ell) x(0): kappa = 0, S = -s, W = -1/s, V = M."""
        params = IntervalOperatorParams(ell, BoundaryVariant.EXP_T0)
        a = math.exp(ell)
        s = self._livsic(ell, 0.0)

        def W(z: complex) -> complex:
            E = _E(ell, z)
            return pole_safe_ratio(a * E - 1.0, a - E, z, "W2")
        return ExampleBundle(
            params=params,
            kappa=VonNeumannKappa(0.0),
            livsic=s,
            characteristic=AnalyticFn(lambda z: -s(z), role=FunctionRole.CHARACTERISTIC,
                                      kappa=0.0, label="S2"),
            transfer=AnalyticFn(W, role=FunctionRole.TRANSFER, kappa=0.0, nu=1.0, label="W2"),
            impedance=self._weyl(ell).relabel(role=FunctionRole.IMPEDANCE, kappa=0.0, label="V2"),
            weyl=self._weyl(ell),
        )

    def example3_functions(self, ell: float, mu: complex) -> ExampleBundle:
        """Phase family x(ell) + mu ... as displayed: W, V and the parameters U, beta, nu."""
        params = IntervalOperatorParams(ell, BoundaryVariant.PHASE_FAMILY, mu=mu)
        mu = params.mu
        a, ai = math.exp(ell), math.exp(-ell)
        if abs(mu * a + 1.0) <= settings.POLE_RADIUS:
            raise InadmissibleParameter("mu exp(ell) = -1 makes the transfer prefactor degenerate")
        U = -(1.0 + mu * a) / (mu + a)
        nu = (2.0 * mu * ai + ai * ai + 1.0) / (mu + 2.0 * ai + mu * ai * ai)
        if abs(abs(nu) - 1.0) > 1e-12:
            raise InadmissibleParameter(f"|nu|={abs(nu)!r} is not 1 for mu={mu!r}")
        prefactor = (a + mu) / (mu * a + 1.0)
        mub = mu.conjugate()

        def W(z: complex) -> complex:
            E = _E(ell, z)
            return prefactor * pole_safe_ratio(a * E - 1.0, a - E, z, "W3")

        def V(z: complex) -> complex:
            E = _E(ell, z)
            num = (mub * E - 1.0) * (a * a + 1.0) + 2.0 * a * E - 2.0 * mub * a
            den = (mub * E + 1.0) * (a * a - 1.0)
            return 1j * pole_safe_ratio(num, den, z, "V3")
        phase = QuasiKernelPhase.from_unimodular(U / abs(U))
        return ExampleBundle(
            params=params,
            kappa=VonNeumannKappa(0.0),
            transfer=AnalyticFn(W, role=FunctionRole.TRANSFER, kappa=0.0, label="W3"),
            impedance=AnalyticFn(V, role=FunctionRole.IMPEDANCE, kappa=0.0, label="V3"),
            extras={
                "U": U,
                "beta": phase.beta,
                "phase": phase,
                "nu": UnimodularFactor(nu / abs(nu)),
                "prefactor": prefactor,
            },
        )

    def example4_functions(self, ell: float, rho: float) -> ExampleBundle:
        """x(ell) = rho x(0): kappa = (rho - e^ell)/(rho e^ell - 1)."""
        params = IntervalOperatorParams(ell, BoundaryVariant.RHO_FAMILY, rho=rho)
        rho = params.rho
        a = math.exp(ell)
        kappa = (rho - a) / (rho * a - 1.0)
        gain = (rho + 1.0) / (rho - 1.0)

        def S(z: complex) -> complex:
            E = _E(ell, z)
            return pole_safe_ratio(rho - E, rho * E - 1.0, z, "S4")

        def W(z: complex) -> complex:
            E = _E(ell, z)
            return pole_safe_ratio(rho * E - 1.0, rho - E, z, "W4")

        def V(z: complex) -> complex:
            E = _E(ell, z)
            return 1j * gain * pole_safe_ratio(E - 1.0, E + 1.0, z, "V4")
        return ExampleBundle(
            params=params,
            kappa=VonNeumannKappa(kappa),
            livsic=self._livsic(ell, kappa),
            characteristic=AnalyticFn(S, role=FunctionRole.CHARACTERISTIC, kappa=kappa, label="S4"),
            transfer=AnalyticFn(W, role=FunctionRole.TRANSFER, kappa=kappa, nu=1.0, label="W4"),
            impedance=AnalyticFn(V, role=FunctionRole.IMPEDANCE, kappa=kappa, label="V4"),
            weyl=self._weyl(ell),
            extras={"gain": gain},
        )

    def example1_flipped(self, ell: float) -> ExampleBundle:
        """Same operator as example 1 with the channel orientation reversed: W -> -W, V -> -1/V."""
        base = self.example1_functions(ell)
        kappa = base.kappa.kappa

        def V(z: complex) -> complex:
            E = _E(ell, z)
            return 1j * pole_safe_ratio(E + 1.0, E - 1.0, z, "V1 flipped")
        return ExampleBundle(
            params=base.params,
            kappa=base.kappa,
            transfer=AnalyticFn(lambda z: -_E(ell, z), role=FunctionRole.TRANSFER, kappa=kappa,
                                label="-W1"),
            impedance=AnalyticFn(V, role=FunctionRole.IMPEDANCE, kappa=kappa, label="-1/V1"),
        )

    def bundle(self, example_id: int, ell: float, rho: Optional[float] = None,
               mu: Optional[complex] = None) -> ExampleBundle:
        if example_id == 1:
            return self.example1_functions(ell)
        if example_id == 2:
            return self.example2_functions(ell)
        if example_id == 3:
            return self.example3_functions(ell, 1.0 if mu is None else mu)
        if example_id == 4:
            if rho is None:
                raise InadmissibleParameter("example 4 needs rho",
                                            IntervalOperatorParams.rho_intervals(ell))
            return self.example4_functions(ell, rho)
        raise InadmissibleParameter(f"unknown example {example_id}", ("1", "2", "3", "4"))

    # --- resolvent kernels --------------------------------------------------

    @staticmethod
    def boundary_ratio(params: IntervalOperatorParams, variant: str = "T") -> Optional[float]:
        """b in x(ell) = b x(0) for the operator (``T``) or its adjoint (``T*``)."""
        if variant not in ("T", "T*"):
            raise InadmissibleParameter(f"unknown variant {variant!r}", ("T", "T*"))
        adjoint = variant == "T*"
        if params.boundary is BoundaryVariant.DIRICHLET_T:
            return 0.0 if adjoint else None
        if params.boundary in (BoundaryVariant.EXP_T0, BoundaryVariant.PHASE_FAMILY):
            return math.exp(-params.ell) if adjoint else math.exp(params.ell)
        return 1.0 / params.rho if adjoint else params.rho

    def _samples(self, params: IntervalOperatorParams, f: SampleSource,
                 quad_n: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
        n = settings.RESOLVENT_QUAD_N if quad_n is None else quad_n
        if n < 2 or n % 2:
            raise InadmissibleParameter(f"quad_n={n} must be an even number >= 2")
        t = np.linspace(0.0, params.ell, n + 1)
        values = np.asarray(f(t) if callable(f) else f, dtype=complex)
        if values.shape != t.shape:
            raise InadmissibleParameter(f"expected {t.size} samples, got {values.shape}")
        return t, values

    def resolvent_apply(self, params: IntervalOperatorParams, variant: str, z: complex,
                        f: SampleSource, quad_n: Optional[int] = None) -> SampledFunction:
        """x(t) = -i e^{-izt} (F(t) + c F(ell)), F(t) = int_0^t f(s) e^{izs} ds, c = E/(b - E).

        The cumulative integral uses composite Simpson on the uniform grid.
        """
        z = complex(z)
        t, values = self._samples(params, f, quad_n)
        integrand = values * np.exp(1j * z * t)
        F = (cumulative_simpson(integrand.real, x=t, initial=0.0)
             + 1j * cumulative_simpson(integrand.imag, x=t, initial=0.0))
        b = self.boundary_ratio(params, variant)
        E = _E(params.ell, z)
        c = 0.0 if b is None else pole_safe_ratio(E, b - E, z, f"boundary condition of {variant}")
        return SampledFunction(t, -1j * np.exp(-1j * z * t) * (F + c * F[-1]))

    def ode_residual(self, params: IntervalOperatorParams, variant: str, z: complex,
                     f: SampleSource, quad_n: Optional[int] = None) -> float:
        """L2 norm of i x' - z x - f for x = R_z f, x' by second-order differences."""
        t, values = self._samples(params, f, quad_n)
        x = self.resolvent_apply(params, variant, z, values, t.size - 1).values
        residual = 1j * np.gradient(x, t, edge_order=2) - complex(z) * x - values
        return float(math.sqrt(simpson(np.abs(residual) ** 2, x=t)))

    def boundary_residual(self, params: IntervalOperatorParams, variant: str,
                          solution: SampledFunction) -> float:
        b = self.boundary_ratio(params, variant)
        x0, xl = solution.values[0], solution.values[-1]
        return float(abs(x0) if b is None else abs(xl - b * x0))

    def extended_resolvent_delta(self, params: IntervalOperatorParams,
                                 z: complex) -> Tuple[complex, complex]:
        """Coefficients (r0, r_ell) with R(delta(t)) = r0 e^{-izt} and R(delta(t - ell)) = r_ell e^{-izt}."""
        b = self.boundary_ratio(params, "T")
        if b is None:
            return -1j, 0j
        z = complex(z)
        E = _E(params.ell, z)
        den = E - b
        return 1j * pole_safe_ratio(b, den, z, "extended resolvent"), \
            1j * pole_safe_ratio(1.0, den, z, "extended resolvent")

    def channel(self, params: IntervalOperatorParams) -> Tuple[float, float]:
        """Coefficients (c0, c_ell) of chi = c0 delta(t) + c_ell delta(t - ell)."""
        if params.boundary is BoundaryVariant.DIRICHLET_T:
            return 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)
        if params.boundary is BoundaryVariant.EXP_T0:
            a = math.exp(params.ell)
            k = math.sqrt((a + 1.0) / (2.0 * (a - 1.0)))
            return -k, k
        if params.boundary is BoundaryVariant.RHO_FAMILY:
            k = math.sqrt((params.rho + 1.0) / (2.0 * (params.rho - 1.0)))
            return -k, k
        raise InadmissibleParameter(
            "no channel vector consistent with the displayed transfer function of the phase family",
            ("dirichlet_T", "exp_T0", "rho_family"))

    def transfer_via_resolvent(self, params: IntervalOperatorParams, z: complex) -> complex:
        """W(z) = 1 - 2i (R chi, chi) from the closed-form delta values."""
        z = complex(z)
        c0, cl = self.channel(params)
        r0, rl = self.extended_resolvent_delta(params, z)
        amplitude = c0 * r0 + cl * rl
        pairing = c0 * amplitude + cl * amplitude * _E(params.ell, z)
        return 1.0 - 2j * pairing

    def mollified_delta_resolvent(self, params: IntervalOperatorParams, z: complex,
                                  at_end: bool, width: float,
                                  quad_n: Optional[int] = None) -> SampledFunction:
        """R_z applied to a unit bump at t = 0 (or t = ell); tends to the delta values."""
        start = params.ell - width if at_end else 0.0
        return self.resolvent_apply(params, "T", z, lambda t: bump(t, start, width), quad_n)

    def mollified_delta_limit(self, params: IntervalOperatorParams, z: complex, at_end: bool,
                              widths: Sequence[float] = (8e-3, 4e-3, 2e-3),
                              quad_n: Optional[int] = None) -> SampledFunction:
        """Richardson extrapolation of the mollified resolvent to zero bump width.

        ``widths`` must halve at every step; the error is a power series in the
        width, and each level removes one more term. Samples are returned outside
        the widest bump only.
        """
        widths = [float(w) for w in widths]
        if len(widths) < 2 or not np.allclose(widths[1:], np.array(widths[:-1]) / 2.0):
            raise InadmissibleParameter(f"widths {widths} must halve at every step")
        sols = [self.mollified_delta_resolvent(params, z, at_end, w, quad_n) for w in widths]
        t = sols[0].t
        mask = (t > widths[0]) & (t < params.ell - widths[0])
        table = [sol.values[mask] for sol in sols]
        for level in range(1, len(widths)):
            factor = 2.0 ** level
            table = [(factor * fine - coarse) / (factor - 1.0)
                     for coarse, fine in zip(table, table[1:])]
        logger.debug("mollifier_extrapolated", widths=widths, at_end=at_end)
        return SampledFunction(t[mask], table[0])
