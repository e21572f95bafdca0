"""In-memory value types shared by the services.

Schemas that cross a file or HTTP boundary live in ``schemas.py``; the types
here hold callables, complex numbers and numpy arrays and never leave the
process.
"""
from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from app.config import settings
from app.core.errors import (
    ConventionViolation,
    InadmissibleParameter,
    PoleError,
)

UNIMODULAR_TOL = 1e-14


class FunctionRole(str, Enum):
    WEYL = "weyl"
    LIVSIC = "livsic"
    CHARACTERISTIC = "characteristic"
    TRANSFER = "transfer"
    IMPEDANCE = "impedance"
    OTHER = "other"


def pole_safe_ratio(num: complex, den: complex, z: complex, where: str,
                    radius: Optional[float] = None) -> complex:
    """Return ``num / den`` or raise :class:`PoleError` inside the exclusion radius."""
    radius = settings.POLE_RADIUS if radius is None else radius
    if abs(den) <= radius:
        raise PoleError(z, where)
    return num / den


@dataclass(frozen=True)
class HalfPlanePoint:
    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if z.imag == 0.0:
            raise InadmissibleParameter(f"z={z!r} lies on the real axis")
        object.__setattr__(self, "z", z)

    @property
    def in_upper(self) -> bool:
        return self.z.imag > 0

    @property
    def upper(self) -> complex:
        """The representative of ``z`` in the upper half-plane."""
        return self.z if self.in_upper else self.z.conjugate()


@dataclass(frozen=True)
class Evaluation:
    z: complex
    value: Optional[complex]
    pole: bool = False
    reason: str = ""


@dataclass(frozen=True)
class AnalyticFn:
    """An evaluable function on C \\ R tagged with its role in the function chain."""

    evaluator: Callable[[complex], complex]
    role: FunctionRole = FunctionRole.OTHER
    kappa: Optional[float] = None
    nu: Optional[complex] = None
    label: str = ""

    def __call__(self, z: complex) -> complex:
        return complex(self.evaluator(complex(z)))

    def evaluate(self, z: complex) -> Evaluation:
        try:
            value = self(z)
        except (PoleError, ZeroDivisionError) as exc:
            return Evaluation(complex(z), None, True, str(exc) or "division by zero")
        except OverflowError as exc:
            return Evaluation(complex(z), None, True, f"overflow: {exc}")
        if not cmath.isfinite(value):
            return Evaluation(complex(z), None, True, "non-finite value")
        return Evaluation(complex(z), value)

    def relabel(self, **changes: Any) -> "AnalyticFn":
        return dataclasses.replace(self, **changes)

    @classmethod
    def constant(cls, value: complex, role: FunctionRole = FunctionRole.OTHER,
                 label: str = "") -> "AnalyticFn":
        value = complex(value)
        return cls(lambda z: value, role=role, label=label or f"const {value}")


@dataclass(frozen=True)
class VonNeumannKappa:
    kappa: float

    def __post_init__(self):
        raw = self.kappa
        if isinstance(raw, complex):
            if raw.imag != 0.0:
                raise ConventionViolation(
                    f"kappa must be real in the aligned basis, got {raw!r}")
            raw = raw.real
        value = float(raw)
        if not (0.0 <= value < 1.0) or math.isnan(value):
            raise InadmissibleParameter(f"kappa={value!r} outside [0, 1)", ("[0, 1)",))
        object.__setattr__(self, "kappa", value)

    @classmethod
    def of(cls, value: Union["VonNeumannKappa", float]) -> "VonNeumannKappa":
        return value if isinstance(value, VonNeumannKappa) else cls(value)

    @property
    def scale(self) -> float:
        """(1-kappa)/(1+kappa): the Donoghue weight of the class M_kappa."""
        return (1.0 - self.kappa) / (1.0 + self.kappa)

    @property
    def inverse_scale(self) -> float:
        return (1.0 + self.kappa) / (1.0 - self.kappa)

    def __float__(self) -> float:
        return self.kappa


@dataclass(frozen=True)
class UnimodularFactor:
    nu: complex = 1.0 + 0.0j

    def __post_init__(self):
        nu = complex(self.nu)
        if abs(abs(nu) - 1.0) > UNIMODULAR_TOL:
            raise InadmissibleParameter(f"|nu|={abs(nu)!r} is not 1")
        object.__setattr__(self, "nu", nu)

    @classmethod
    def of(cls, value: Union["UnimodularFactor", complex, None]) -> "UnimodularFactor":
        if value is None:
            return cls()
        return value if isinstance(value, UnimodularFactor) else cls(value)

    @classmethod
    def from_angle(cls, theta: float) -> "UnimodularFactor":
        return cls(cmath.exp(1j * theta))


@dataclass(frozen=True)
class QuasiKernelPhase:
    """U = exp(2i beta) with beta in [0, pi)."""

    beta: float = 0.0

    def __post_init__(self):
        beta = float(self.beta)
        if not (0.0 <= beta < math.pi):
            raise InadmissibleParameter(f"beta={beta!r} outside [0, pi)", ("[0, pi)",))
        object.__setattr__(self, "beta", beta)

    @property
    def U(self) -> complex:
        return cmath.exp(2j * self.beta)

    @classmethod
    def from_unimodular(cls, U: complex) -> "QuasiKernelPhase":
        U = complex(U)
        if abs(abs(U) - 1.0) > UNIMODULAR_TOL:
            raise InadmissibleParameter(f"|U|={abs(U)!r} is not 1")
        beta = math.fmod(cmath.phase(U) / 2.0 + math.pi, math.pi)
        # fmod can land on pi itself for phases rounding to -pi
        return cls(0.0 if beta >= math.pi else beta)


@dataclass(frozen=True)
class ScalarBiExtension:
    kappa: VonNeumannKappa
    phase: QuasiKernelPhase
    H: complex
    S_A: np.ndarray
    S_Astar: np.ndarray


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """N-node weighted diagonal model of (B-dot, T_B, B) with parameter kappa.

    ``weights`` are normalized to the class M_kappa, i.e.
    ``sum(w / (1 + nodes**2)) == (1 - kappa) / (1 + kappa)``. The Donoghue
    weights ``w * (1 + kappa) / (1 - kappa)`` carry the kappa = 0 normalization.
    ``exact`` is False when the nodes come from quadrature of a density; M_0 is
    then only known up to the discretization error.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kappa: VonNeumannKappa
    exact: bool = True

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise InadmissibleParameter("nodes and weights must be equal-length 1-d arrays")
        if np.any(np.diff(nodes) <= 0):
            raise InadmissibleParameter("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise InadmissibleParameter("weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "kappa", VonNeumannKappa.of(self.kappa))

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def normalization(self) -> float:
        return float(np.sum(self.weights / (1.0 + self.nodes ** 2)))

    @property
    def donoghue_weights(self) -> np.ndarray:
        return self.weights * self.kappa.inverse_scale

    @property
    def regularizer(self) -> float:
        """sum w_j lambda_j / (1 + lambda_j^2), the gap between raw and regularized pairings."""
        return float(np.sum(self.weights * self.nodes / (1.0 + self.nodes ** 2)))

    def _kernel(self, z: complex) -> np.ndarray:
        gaps = self.nodes - z
        hit = np.flatnonzero(np.abs(gaps) <= settings.POLE_RADIUS)
        if hit.size:
            raise PoleError(z, "model kernel", node=int(hit[0]))
        return 1.0 / gaps

    def weyl(self, z: complex) -> complex:
        """M(z) = sum w_j (1/(lambda_j - z) - lambda_j/(1 + lambda_j^2))."""
        z = complex(z)
        kernel = self._kernel(z) - self.nodes / (1.0 + self.nodes ** 2)
        return complex(np.sum(self.weights * kernel))

    def weyl0(self, z: complex) -> complex:
        """The kappa = 0 normalized Weyl function M_0 of the rescaled measure."""
        return self.weyl(z) * self.kappa.inverse_scale

    def raw_pairing(self, z: complex) -> complex:
        return complex(np.sum(self.weights * self._kernel(complex(z))))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Weighted inner product with the Donoghue weights."""
        return complex(np.sum(self.donoghue_weights * f * np.conj(g)))

    def deficiency_vector(self, z: complex) -> np.ndarray:
        return self._kernel(complex(z))


class BoundaryVariant(str, Enum):
    DIRICHLET_T = "dirichlet_T"
    EXP_T0 = "exp_T0"
    PHASE_FAMILY = "phase_family"
    RHO_FAMILY = "rho_family"


@dataclass(frozen=True)
class IntervalOperatorParams:
    """The operator i d/dt on [0, ell] with one of four boundary families."""

    ell: float
    boundary: BoundaryVariant
    mu: Optional[complex] = None
    rho: Optional[float] = None

    def __post_init__(self):
        ell = float(self.ell)
        if not ell > 0:
            raise InadmissibleParameter(f"ell={ell!r} must be positive")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "boundary", BoundaryVariant(self.boundary))
        if self.boundary is BoundaryVariant.PHASE_FAMILY:
            if self.mu is None or abs(abs(complex(self.mu)) - 1.0) > 1e-12:
                raise InadmissibleParameter("phase family needs a unimodular mu")
            object.__setattr__(self, "mu", complex(self.mu))
        if self.boundary is BoundaryVariant.RHO_FAMILY:
            if self.rho is None:
                raise InadmissibleParameter("rho family needs rho", self.rho_intervals(ell))
            rho = float(self.rho)
            if not (rho < -1.0 or rho >= math.exp(ell)):
                raise InadmissibleParameter(
                    f"rho={rho!r} is not admissible for ell={ell!r}", self.rho_intervals(ell))
            object.__setattr__(self, "rho", rho)

    @staticmethod
    def rho_intervals(ell: float):
        return ("(-inf, -1)", f"[{math.exp(ell):.17g}, +inf)")


@dataclass(frozen=True)
class ExampleBundle:
    params: IntervalOperatorParams
    kappa: Optional[VonNeumannKappa]
    transfer: AnalyticFn
    impedance: AnalyticFn
    livsic: Optional[AnalyticFn] = None
    characteristic: Optional[AnalyticFn] = None
    weyl: Optional[AnalyticFn] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def role(self, role: Union[FunctionRole, str]) -> AnalyticFn:
        role = FunctionRole(role)
        fn = {
            FunctionRole.WEYL: self.weyl,
            FunctionRole.LIVSIC: self.livsic,
            FunctionRole.CHARACTERISTIC: self.characteristic,
            FunctionRole.TRANSFER: self.transfer,
            FunctionRole.IMPEDANCE: self.impedance,
        }.get(role)
        if fn is None:
            raise InadmissibleParameter(
                f"role {role.value!r} is not part of this example", self.available_roles())
        return fn

    def available_roles(self):
        return tuple(
            name for name, fn in (
                ("weyl", self.weyl), ("livsic", self.livsic),
                ("characteristic", self.characteristic),
                ("transfer", self.transfer), ("impedance", self.impedance),
            ) if fn is not None
        )
