import math

import pytest
from structlog.testing import capture_logs

from app.core.errors import InadmissibleParameter, PoleError, RoleMismatch
from app.models.domain import AnalyticFn, FunctionRole
from app.models.schemas import GridSpec
from app.services.calculus_service import Mobius

POINTS = [0.3 + 0.2j, -1.0 + 1.0j, 2.0 + 5.0j]


def weyl_of_unit_atom() -> AnalyticFn:
    return AnalyticFn(lambda z: -1 / z, role=FunctionRole.WEYL, label="-1/z")


def test_mobius_inverse_and_composition():
    m = Mobius(2, 1j, -1, 3)
    identity = m.then(m.inverse())
    for w in POINTS:
        assert identity.transform(w, w, "id") == pytest.approx(w)
    other = Mobius(1, -1j, 1, 1j)
    assert m.then(other).transform(0.5, 0.5, "c") == pytest.approx(
        other.transform(m.transform(0.5, 0.5, "m"), 0.5, "o"))


def test_mobius_pole():
    with pytest.raises(PoleError):
        Mobius(1, 0, 1, -1).transform(1.0, 2j, "unit pole")


def test_livsic_vanishes_at_i(calculus):
    s = calculus.livsic_from_weyl(weyl_of_unit_atom())
    assert abs(s(1j)) < 1e-15
    M = calculus.weyl_from_livsic(s)
    for z in POINTS:
        assert M(z) == pytest.approx(-1 / z)


def test_role_checks(calculus):
    W = AnalyticFn(lambda z: z, role=FunctionRole.TRANSFER)
    with pytest.raises(RoleMismatch):
        calculus.livsic_from_weyl(W)
    untagged = AnalyticFn(lambda z: -1 / z)
    assert calculus.livsic_from_weyl(untagged).role is FunctionRole.LIVSIC


def test_kappa_map_is_involution(calculus):
    s = calculus.livsic_from_weyl(weyl_of_unit_atom())
    S = calculus.char_from_livsic(s, 0.4)
    assert S(1j) == pytest.approx(0.4)
    back = calculus.livsic_from_char(S, 0.4)
    for z in POINTS:
        assert back(z) == pytest.approx(s(z))


def test_kappa_from_char(calculus):
    const = AnalyticFn.constant(0.25, role=FunctionRole.CHARACTERISTIC)
    assert calculus.kappa_from_char(const).kappa == 0.25
    tiny_negative = AnalyticFn.constant(-1e-12, role=FunctionRole.CHARACTERISTIC)
    assert calculus.kappa_from_char(tiny_negative).kappa == 0.0


def test_kappa_convention_violation_is_logged(calculus):
    skew = AnalyticFn.constant(0.3 + 0.1j, role=FunctionRole.CHARACTERISTIC)
    with capture_logs() as logs:
        kappa = calculus.kappa_from_char(skew)
    assert kappa.kappa == pytest.approx(0.3)
    assert any(entry["event"] == "kappa_convention_violation" for entry in logs)


def test_zero_of_char_is_transfer_pole(calculus):
    S = AnalyticFn.constant(0.0, role=FunctionRole.CHARACTERISTIC)
    ev = calculus.transfer_from_char(S).evaluate(1j)
    assert ev.pole and ev.value is None
    assert "transfer" in ev.reason


def test_transfer_impedance_round_trip(calculus):
    W = AnalyticFn(lambda z: (z - 1j) / (z + 2j), role=FunctionRole.TRANSFER)
    V = calculus.impedance_from_transfer(W)
    back = calculus.transfer_from_impedance(V)
    for z in POINTS:
        assert back(z) == pytest.approx(W(z))


def test_chain_impedance_is_scaled_weyl(calculus):
    M = weyl_of_unit_atom()
    V = calculus.role_from_weyl(M, "impedance", kappa=0.5)
    for z in POINTS:
        assert V(z) == pytest.approx(M(z) / 3)
    assert calculus.role_from_weyl(M, FunctionRole.WEYL) is M


def test_livsic_class_check(calculus):
    s = calculus.livsic_from_weyl(weyl_of_unit_atom())
    report = calculus.livsic_class_check(s, alphas=(0.25 * math.pi, 0.5 * math.pi),
                                         arguments=(0.5 * math.pi, 0.25 * math.pi))
    assert report.vanishes_at_i
    assert len(report.probes) == 4
    assert all(len(p.magnitudes) == 4 for p in report.probes)
    with pytest.raises(InadmissibleParameter):
        calculus.livsic_class_check(s, arguments=(math.pi,))


def test_extension_transform(calculus):
    M = weyl_of_unit_atom()
    same = calculus.weyl_extension_transform(M, 0.0)
    assert same(1 + 1j) == pytest.approx(M(1 + 1j))
    assert calculus.compose_extension_angles(3.0, 0.5) == pytest.approx(3.5 - math.pi)
    twice = calculus.weyl_extension_transform(calculus.weyl_extension_transform(M, 2.0), 2.5)
    once = calculus.weyl_extension_transform(M, calculus.compose_extension_angles(2.0, 2.5))
    for z in POINTS:
        assert twice(z) == pytest.approx(once(z))
    with pytest.raises(InadmissibleParameter):
        calculus.weyl_extension_transform(M, math.pi)


def test_parallel_grid_matches_serial(calculus):
    fn = weyl_of_unit_atom()
    grid = GridSpec.model_default()
    serial = calculus.evaluate_grid(fn, grid, workers=1)
    threaded = calculus.evaluate_grid(fn, grid, workers=4)
    assert [e.value for e in serial] == [e.value for e in threaded]
    assert [e.z for e in serial] == grid.points()


def test_grid_is_row_major():
    grid = GridSpec(re_min=0.0, re_max=1.0, im_min=1.0, im_max=4.0, n_re=2, n_im=3)
    assert grid.points() == pytest.approx([1j, 1 + 1j, 2j, 1 + 2j, 4j, 1 + 4j])
    assert any(abs(z - 1j) < 1e-12 for z in GridSpec().points())
