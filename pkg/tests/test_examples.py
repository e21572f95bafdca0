import cmath
import math

import numpy as np
import pytest
from scipy.integrate import simpson

from app.core.errors import InadmissibleParameter, PoleError
from app.models.domain import BoundaryVariant, IntervalOperatorParams
from app.services.examples_service import SampledFunction, bump

E = math.exp(1.0)


def test_dirichlet_example_at_i(examples):
    bundle = examples.example1_functions(1.0)
    assert bundle.kappa.kappa == pytest.approx(math.exp(-1.0))
    assert bundle.transfer(1j) == pytest.approx(E)
    assert bundle.characteristic(1j) == pytest.approx(1 / E)
    assert bundle.impedance(0.7 + 0.4j) == pytest.approx(cmath.tan(0.35 + 0.2j))


@pytest.mark.parametrize("example_id, rho", [(1, None), (4, -2.0), (4, 5.0)])
def test_livsic_chain_reproduces_characteristic(calculus, examples, standard_grid, example_id, rho):
    bundle = examples.bundle(example_id, 1.0, rho=rho)
    S = calculus.char_from_livsic(bundle.livsic, bundle.kappa)
    for z in standard_grid.points():
        assert S(z) == pytest.approx(bundle.characteristic(z), rel=1e-10)


def test_exp_example(examples):
    bundle = examples.example2_functions(1.0)
    assert bundle.kappa.kappa == 0.0
    assert bundle.transfer(2j) == pytest.approx((E * E ** 2 - 1) / (E - E ** 2))
    assert bundle.impedance(1j) == pytest.approx(1j)
    z = 0.3 + 0.8j
    assert bundle.transfer(z) * bundle.livsic(z) == pytest.approx(-1.0)
    with pytest.raises(PoleError):
        bundle.transfer(1j)


def test_rho_example(examples):
    bundle = examples.example4_functions(1.0, -2.0)
    assert bundle.kappa.kappa == pytest.approx((2 + E) / (2 * E + 1))
    assert bundle.kappa.kappa == pytest.approx(0.73304, abs=1e-5)
    assert bundle.transfer(1j) == pytest.approx((-2 * E - 1) / (-2 - E))
    assert bundle.extras["gain"] == pytest.approx(1 / 3)


def test_rho_at_exp_ell_is_exp_example(examples, standard_grid):
    edge = examples.example4_functions(1.0, E)
    base = examples.example2_functions(1.0)
    assert edge.kappa.kappa == pytest.approx(0.0, abs=1e-15)
    for z in standard_grid.points():
        assert edge.transfer(z) == pytest.approx(base.transfer(z), rel=1e-10)


@pytest.mark.parametrize("rho", [0.0, -1.0, 2.0])
def test_rho_outside_admissible_intervals(examples, rho):
    with pytest.raises(InadmissibleParameter) as exc:
        examples.example4_functions(1.0, rho)
    assert exc.value.admissible


def test_phase_family_parameters(examples):
    plus = examples.example3_functions(1.0, 1.0)
    assert plus.extras["U"] == pytest.approx(-1.0)
    assert plus.extras["beta"] == pytest.approx(0.5 * math.pi)
    assert plus.extras["nu"].nu == pytest.approx(1.0)
    minus = examples.example3_functions(1.0, -1.0)
    assert minus.extras["U"] == pytest.approx(1.0)
    assert minus.extras["beta"] == 0.0
    assert minus.extras["prefactor"] == pytest.approx(-1.0)
    assert minus.livsic is None and minus.characteristic is None


def test_phase_family_impedance_is_in_donoghue_class(examples):
    for k in range(8):
        mu = cmath.exp(2j * math.pi * k / 8)
        assert examples.example3_functions(1.0, mu).impedance(1j) == pytest.approx(1j, abs=1e-12)


def test_phase_family_mu_one_is_exp_example(examples, standard_grid):
    phase = examples.example3_functions(1.0, 1.0)
    base = examples.example2_functions(1.0)
    for z in standard_grid.points():
        assert phase.transfer(z) == pytest.approx(base.transfer(z), rel=1e-10)


@pytest.mark.xfail(strict=True, reason="the displayed transfer function at mu = -1 is minus W_ex2")
def test_phase_family_mu_minus_one_is_exp_example(examples, standard_grid):
    phase = examples.example3_functions(1.0, -1.0)
    base = examples.example2_functions(1.0)
    for z in standard_grid.points():
        assert phase.transfer(z) == pytest.approx(base.transfer(z), rel=1e-10)


def test_phase_family_mu_minus_one_is_negated(examples, standard_grid):
    phase = examples.example3_functions(1.0, -1.0)
    base = examples.example2_functions(1.0)
    for z in standard_grid.points():
        assert phase.transfer(z) == pytest.approx(-base.transfer(z), rel=1e-10)


def test_flipped_orientation_leaves_the_classes(donoghue, examples):
    flipped = examples.example1_flipped(1.0)
    assert flipped.impedance(1j) == pytest.approx(1j / math.tanh(0.5))
    report = donoghue.classify_impedance(flipped.impedance)
    assert report.kappa_hat is None
    assert not report.in_M_kappa


def test_bundle_dispatch(examples):
    assert examples.bundle(3, 1.0).extras["U"] == pytest.approx(-1.0)
    with pytest.raises(InadmissibleParameter):
        examples.bundle(4, 1.0)
    with pytest.raises(InadmissibleParameter):
        examples.bundle(5, 1.0)
    assert examples.bundle(2, 1.0).available_roles() == (
        "weyl", "livsic", "characteristic", "transfer", "impedance")
    with pytest.raises(InadmissibleParameter):
        examples.bundle(3, 1.0).role("livsic")


def test_boundary_ratios(examples):
    dirichlet = IntervalOperatorParams(1.0, BoundaryVariant.DIRICHLET_T)
    assert examples.boundary_ratio(dirichlet, "T") is None
    assert examples.boundary_ratio(dirichlet, "T*") == 0.0
    rho = IntervalOperatorParams(1.0, BoundaryVariant.RHO_FAMILY, rho=-2.0)
    assert examples.boundary_ratio(rho, "T") == -2.0
    assert examples.boundary_ratio(rho, "T*") == -0.5
    with pytest.raises(InadmissibleParameter):
        examples.boundary_ratio(rho, "A")


def test_dirichlet_resolvent_of_constant(examples):
    params = IntervalOperatorParams(1.0, BoundaryVariant.DIRICHLET_T)
    sol = examples.resolvent_apply(params, "T", 1j, lambda t: np.ones_like(t))
    assert np.max(np.abs(sol.values - (-1j * (np.exp(sol.t) - 1.0)))) < 1e-10


@pytest.mark.parametrize("boundary, rho", [
    (BoundaryVariant.DIRICHLET_T, None),
    (BoundaryVariant.EXP_T0, None),
    (BoundaryVariant.RHO_FAMILY, -2.0),
])
@pytest.mark.parametrize("variant", ["T", "T*"])
def test_resolvent_solves_the_boundary_problem(examples, boundary, rho, variant):
    params = IntervalOperatorParams(1.0, boundary, rho=rho)
    coarse = examples.ode_residual(params, variant, 2j, np.sin, 1000)
    fine = examples.ode_residual(params, variant, 2j, np.sin, 2000)
    assert fine < coarse <= 1e-4
    sol = examples.resolvent_apply(params, variant, 2j, np.sin)
    assert examples.boundary_residual(params, variant, sol) <= 1e-10


def test_sample_count_is_checked(examples):
    params = IntervalOperatorParams(1.0, BoundaryVariant.EXP_T0)
    with pytest.raises(InadmissibleParameter):
        examples.resolvent_apply(params, "T", 2j, np.sin, quad_n=7)
    with pytest.raises(InadmissibleParameter):
        examples.resolvent_apply(params, "T", 2j, np.zeros(5), quad_n=8)


@pytest.mark.parametrize("example_id, rho", [(1, None), (2, None), (4, -2.0), (4, 6.0)])
def test_transfer_from_the_resolvent(examples, standard_grid, example_id, rho):
    bundle = examples.bundle(example_id, 1.0, rho=rho)
    for z in standard_grid.points():
        assert examples.transfer_via_resolvent(bundle.params, z) == pytest.approx(
            bundle.transfer(z), rel=1e-10)


def test_resolvent_transfer_poles(examples):
    params = examples.example2_functions(1.0).params
    assert examples.transfer_via_resolvent(params, 2j) == pytest.approx(
        (E * E ** 2 - 1) / (E - E ** 2))
    with pytest.raises(PoleError):
        examples.transfer_via_resolvent(params, 1j)
    phase = examples.example3_functions(1.0, 1.0).params
    with pytest.raises(InadmissibleParameter):
        examples.channel(phase)


def test_delta_values(examples):
    dirichlet = IntervalOperatorParams(1.0, BoundaryVariant.DIRICHLET_T)
    assert examples.extended_resolvent_delta(dirichlet, 2j) == (-1j, 0j)
    exp_params = IntervalOperatorParams(1.0, BoundaryVariant.EXP_T0)
    r0, rl = examples.extended_resolvent_delta(exp_params, 2j)
    assert r0 == pytest.approx(1j * E / (E ** 2 - E))
    assert rl == pytest.approx(1j / (E ** 2 - E))


def test_bump_has_unit_mass():
    t = np.linspace(0.0, 1.0, 20001)
    assert simpson(bump(t, 0.2, 0.01), x=t) == pytest.approx(1.0, abs=1e-6)
    assert bump(np.array([0.1, 0.5]), 0.2, 0.01).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("at_end", [False, True])
def test_mollified_delta_tends_to_closed_form(examples, at_end):
    params = IntervalOperatorParams(1.0, BoundaryVariant.EXP_T0)
    width = 2e-3
    r0, rl = examples.extended_resolvent_delta(params, 2j)
    sol = examples.mollified_delta_resolvent(params, 2j, at_end, width, quad_n=20000)
    mask = (sol.t > width) & (sol.t < 1.0 - width)
    target = (rl if at_end else r0) * np.exp(2.0 * sol.t[mask])
    assert np.max(np.abs(sol.values[mask] - target)) / np.max(np.abs(target)) < 1e-2


@pytest.mark.parametrize("at_end", [False, True])
def test_extrapolated_mollifier_converges_to_closed_form(examples, at_end):
    params = IntervalOperatorParams(1.0, BoundaryVariant.EXP_T0)
    r0, rl = examples.extended_resolvent_delta(params, 2j)
    coefficient = rl if at_end else r0

    def error(sol):
        target = coefficient * np.exp(2.0 * sol.t)
        return np.max(np.abs(sol.values - target)) / np.max(np.abs(target))

    limit = examples.mollified_delta_limit(params, 2j, at_end, quad_n=20000)
    single = examples.mollified_delta_resolvent(params, 2j, at_end, 2e-3, quad_n=20000)
    mask = (single.t > 8e-3) & (single.t < 1.0 - 8e-3)
    assert np.array_equal(limit.t, single.t[mask])
    single = SampledFunction(single.t[mask], single.values[mask])
    assert error(limit) < 1e-4
    assert error(limit) < error(single) / 10


def test_mollifier_widths_must_halve(examples):
    params = IntervalOperatorParams(1.0, BoundaryVariant.EXP_T0)
    with pytest.raises(InadmissibleParameter):
        examples.mollified_delta_limit(params, 2j, False, widths=(8e-3, 3e-3))
    with pytest.raises(InadmissibleParameter):
        examples.mollified_delta_limit(params, 2j, False, widths=(8e-3,))
