import math

import numpy as np
import pytest

from app.core.errors import ConventionViolation, InadmissibleParameter
from app.models.domain import QuasiKernelPhase
from app.services.biextension_service import BiExtensionService


@pytest.fixture
def biextensions() -> BiExtensionService:
    return BiExtensionService()


@pytest.mark.parametrize("kappa", [0.0, 0.25, 0.5, 0.9])
def test_channel_pattern_for_real_quasi_kernel(biextensions, kappa):
    ext = biextensions.build(kappa)
    report = biextensions.imaginary_part_channel(ext.S_A, ext.S_Astar, kappa)
    assert report.rank == 1
    assert report.coefficient == pytest.approx((1 - kappa) / (2 + 2 * kappa), abs=1e-14)
    assert report.channel_norm == pytest.approx(math.sqrt(2 * report.coefficient))


def test_h_parameter_at_half(biextensions):
    assert biextensions.h_parameter(0.5, QuasiKernelPhase(0.0)) == pytest.approx(2j / 3)
    assert biextensions.h_parameter(0.5, QuasiKernelPhase(0.5 * math.pi)) == pytest.approx(-2j)


def test_other_phases_break_the_pattern(biextensions):
    ext = biextensions.build(0.5, QuasiKernelPhase(0.5 * math.pi))
    with pytest.raises(ConventionViolation):
        biextensions.imaginary_part_channel(ext.S_A, ext.S_Astar)


def test_wrong_coefficient_is_reported(biextensions):
    ext = biextensions.build(0.5)
    with pytest.raises(ConventionViolation):
        biextensions.imaginary_part_channel(ext.S_A, ext.S_Astar, 0.2)


@pytest.mark.parametrize("kappa, beta", [(0.0, 0.0), (0.3, 0.0), (0.3, 1.1), (0.7, 2.5)])
def test_boundary_system_returns_h_times_u(biextensions, kappa, beta):
    phase = QuasiKernelPhase(beta)
    X, residual = biextensions.solve_boundary_system(kappa, phase)
    assert residual <= 1e-12
    assert X == pytest.approx(biextensions.h_parameter(kappa, phase) * phase.U, abs=1e-12)


def test_s_matrices_shape(biextensions):
    S_A, S_Astar = biextensions.s_matrices(0.2, 1j)
    assert S_A.shape == S_Astar.shape == (2, 2)
    assert S_A.dtype == np.complex128


def test_phase_validation():
    with pytest.raises(InadmissibleParameter):
        QuasiKernelPhase(math.pi)
    assert QuasiKernelPhase.from_unimodular(-1.0).beta == pytest.approx(0.5 * math.pi)
    assert QuasiKernelPhase.from_unimodular(1.0).beta == 0.0
