"""Scalar (*)-extensions for deficiency indices (1,1).

A bi-extension is recorded by the 2x2 matrices S_A and S_A* acting on the
coordinates of the two boundary directions. Only the scalar case is built, so
the operator parameters collapse to complex numbers and kappa is real.
"""
import math
from typing import Optional, Tuple, Union

import numpy as np
import structlog

from app.core.errors import ConventionViolation
from app.models.domain import QuasiKernelPhase, ScalarBiExtension, VonNeumannKappa
from app.models.schemas import ChannelReport

logger = structlog.get_logger(__name__)

KappaLike = Union[VonNeumannKappa, float]
PATTERN_TOL = 1e-14


class BiExtensionService:
    def h_parameter(self, kappa: KappaLike, phase: QuasiKernelPhase) -> complex:
        """H = i/(1-kappa^2) [(1 - kappa U)/(1 - conj(U) kappa) - kappa U] conj(U)."""
        k = VonNeumannKappa.of(kappa).kappa
        U = phase.U
        Ubar = U.conjugate()
        return 1j / (1.0 - k * k) * ((1.0 - k * U) / (1.0 - Ubar * k) - k * U) * Ubar

    def solve_boundary_system(self, kappa: KappaLike,
                              phase: QuasiKernelPhase) -> Tuple[complex, float]:
        """Least-squares solution X = H U of the two scalar boundary equations.

        With K = conj(U) kappa the equations read
            conj(X)(1 - conj(K)) + K X (K - 1) = i (K - 1)
            conj(K) conj(X) (conj(K) - 1) + X (1 - K) = i (1 - conj(K)).
        Each has the form a X + b conj(X) = c, which is real-linear in (Re X, Im X).
        Returns X and the largest equation residual.
        """
        k = VonNeumannKappa.of(kappa).kappa
        K = phase.U.conjugate() * k
        Kb = K.conjugate()
        equations = [
            (K * (K - 1.0), 1.0 - Kb, 1j * (K - 1.0)),
            (1.0 - K, Kb * (Kb - 1.0), 1j * (1.0 - Kb)),
        ]
        rows, rhs = [], []
        for a, b, c in equations:
            col_x, col_y = a + b, 1j * (a - b)
            rows += [[col_x.real, col_y.real], [col_x.imag, col_y.imag]]
            rhs += [c.real, c.imag]
        solution, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
        X = complex(solution[0], solution[1])
        residual = max(abs(a * X + b * X.conjugate() - c) for a, b, c in equations)
        return X, residual

    def s_matrices(self, kappa: KappaLike, H: complex) -> Tuple[np.ndarray, np.ndarray]:
        """S_A = [[-H k, H], [k (H k - i), i - k H]] and its adjoint partner S_A*.

        S_A* = [[-k conj(H) - i, (k conj(H) + i) k], [conj(H), -conj(H) k]].
        """
        k = VonNeumannKappa.of(kappa).kappa
        Hb = complex(H).conjugate()
        S_A = np.array([[-H * k, H],
                        [k * (H * k - 1j), 1j - k * H]], dtype=complex)
        S_Astar = np.array([[-k * Hb - 1j, (k * Hb + 1j) * k],
                            [Hb, -Hb * k]], dtype=complex)
        return S_A, S_Astar

    def imaginary_part_channel(self, S_A: np.ndarray, S_Astar: np.ndarray,
                               kappa: Optional[KappaLike] = None,
                               tol: float = PATTERN_TOL) -> ChannelReport:
        """Rank and coefficient of (1/2i)(S_A - S_A*), which must be c [[1, 1], [1, 1]], c >= 0."""
        D = (np.asarray(S_A) - np.asarray(S_Astar)) / 2j
        coefficient = D[0, 0].real
        pattern = np.full((2, 2), coefficient)
        mismatch = float(np.max(np.abs(D - pattern)))
        if mismatch > tol or coefficient < -tol:
            logger.warning("channel_pattern_mismatch", mismatch=mismatch, coefficient=coefficient)
            raise ConventionViolation(
                f"imaginary part is not a nonnegative multiple of ones(2, 2): mismatch {mismatch:.3e}")
        if kappa is not None:
            expected = (1.0 - VonNeumannKappa.of(kappa).kappa) / (2.0 + 2.0 * VonNeumannKappa.of(kappa).kappa)
            if abs(coefficient - expected) > tol:
                raise ConventionViolation(
                    f"channel coefficient {coefficient!r} differs from (1-kappa)/(2+2kappa)={expected!r}")
        rank = int(np.linalg.matrix_rank(D.real, tol=tol))
        if rank != 1:
            raise ConventionViolation(f"imaginary part has rank {rank}, expected 1")
        return ChannelReport(rank=rank, coefficient=coefficient,
                             channel_norm=math.sqrt(2.0 * max(coefficient, 0.0)))

    def build(self, kappa: KappaLike, phase: Optional[QuasiKernelPhase] = None) -> ScalarBiExtension:
        k = VonNeumannKappa.of(kappa)
        phase = phase or QuasiKernelPhase(0.0)
        H = self.h_parameter(k, phase)
        S_A, S_Astar = self.s_matrices(k, H)
        return ScalarBiExtension(kappa=k, phase=phase, H=H, S_A=S_A, S_Astar=S_Astar)
