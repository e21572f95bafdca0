import cmath
import math

import numpy as np
import pytest

from app.config import settings
from app.core.errors import (
    InadmissibleParameter,
    ModelSizeError,
    NormalizationMismatch,
    PoleError,
)
from app.models.domain import DiscreteModel, VonNeumannKappa
from app.models.schemas import GridSpec, ModelDump


@pytest.fixture
def unit_node() -> DiscreteModel:
    return DiscreteModel([0.0], [1.0], VonNeumannKappa(0.0))


@pytest.fixture
def constant_model(models, lebesgue_pi) -> DiscreteModel:
    return models.build_model(lebesgue_pi, 0.0, n=64)


def test_model_validation():
    with pytest.raises(InadmissibleParameter):
        DiscreteModel([1.0, 0.0], [1.0, 1.0], 0.0)
    with pytest.raises(InadmissibleParameter):
        DiscreteModel([0.0, 1.0], [1.0, 0.0], 0.0)
    with pytest.raises(InadmissibleParameter):
        DiscreteModel([0.0, 1.0], [1.0], 0.0)
    with pytest.raises(InadmissibleParameter):
        DiscreteModel([0.0], [1.0], 1.0)


def test_weyl_at_i_is_normalization(models, two_atoms):
    model = models.build_model(two_atoms, 0.5, n=2)
    assert model.weyl(1j) == pytest.approx(1j * model.normalization)
    assert model.weyl0(1j) == pytest.approx(1j)


def test_node_hit_is_a_pole(unit_node):
    with pytest.raises(PoleError) as exc:
        unit_node.weyl(0.0)
    assert exc.value.node == 0


def test_one_node_reference_values(models, unit_node):
    z = 2j
    assert unit_node.weyl0(z) == pytest.approx(0.5j)
    assert models.p_function(unit_node, z) == pytest.approx(2j)
    assert models.model_transfer_resolvent_path(unit_node, z) == pytest.approx(3.0)
    assert models.resolvent_T(unit_node, z, [1.0]) == pytest.approx(np.array([1j]))
    assert models.model_transfer_mobius_path(unit_node, z) == pytest.approx(3.0)


def test_deficiency_vector_norm(models, two_atoms):
    model = models.build_model(two_atoms, 0.5, n=2)
    for z in (0.3 + 0.4j, -2 + 1.5j):
        g = model.deficiency_vector(z)
        assert model.inner(g, g).real == pytest.approx(model.weyl0(z).imag / z.imag)


def test_resolvent_paths_agree(models, two_atoms):
    model = models.build_model(two_atoms, 0.5, n=2)
    report = models.cross_check(model)
    assert report.compared + report.poles == GridSpec.model_default().size
    assert report.compared > 0
    assert report.max_rel <= 1e-10


def test_resolvent_path_needs_upper_half_plane(models, unit_node):
    with pytest.raises(InadmissibleParameter):
        models.model_transfer_resolvent_path(unit_node, 1 - 1j)


def test_vector_shape_is_checked(models, unit_node):
    with pytest.raises(InadmissibleParameter):
        models.resolvent_B(unit_node, 1j, [1.0, 2.0])


def test_dedicated_branch_matches_general_formula(models, unit_node):
    for z in (1j, 0.5 + 3j):
        assert models.p_function(unit_node, z, dedicated=True) == pytest.approx(
            models.p_function(unit_node, z, dedicated=False))


def test_constant_density_discretization(constant_model):
    assert constant_model.size == 64
    assert constant_model.normalization == pytest.approx(1.0, abs=1e-12)
    for z in (1j, 0.5 + 2j, -1 + 4j):
        assert abs(constant_model.weyl(z) - 1j) < 1e-3


def test_too_few_nodes(models, lebesgue_pi):
    with pytest.raises(ModelSizeError):
        models.build_model(lebesgue_pi, 0.0, n=2)


def test_wrong_class_is_rejected(models, two_atoms):
    with pytest.raises(NormalizationMismatch):
        models.build_model(two_atoms, 0.0, n=2)


def test_dump_and_load(models, two_atoms):
    model = models.build_model(two_atoms, 0.5, n=2)
    dump = models.dump(model)
    payload = dump.model_dump(by_alias=True)
    assert payload["schema"] == 1
    loaded = models.load(ModelDump.model_validate(payload))
    assert np.array_equal(loaded.nodes, model.nodes)
    assert loaded.kappa == model.kappa
    broken = ModelDump(nodes=[-1.0, 1.0], weights=[1.0, 1.0], kappa=0.5)
    with pytest.raises(NormalizationMismatch):
        models.load(broken)


def test_sibling_carries_donoghue_weights(models, two_atoms):
    model = models.build_model(two_atoms, 0.5, n=2)
    sibling = models.sibling(model)
    assert sibling.kappa.kappa == 0.0
    assert sibling.normalization == pytest.approx(1.0)
    assert sibling.weyl(0.7 + 0.2j) == pytest.approx(model.weyl0(0.7 + 0.2j))


def test_constant_model_with_positive_kappa(models, lebesgue_pi):
    model = models.build_model(lebesgue_pi.scaled(1 / 3), 0.5, n=64)
    z = 0.3 + 2j
    assert abs(models.model_transfer_mobius_path(model, z) - 2.0) < 1e-2
    assert abs(models.model_transfer_resolvent_path(model, z) - 2.0) < 1e-2
    assert abs(models.p_function(model, z) - 0.5j) < 1e-2


@pytest.fixture
def four_node_model() -> DiscreteModel:
    nodes = np.array([-2.0, -0.5, 1.0, 3.0])
    weights = np.array([0.4, 1.0, 0.7, 1.5])
    kappa = VonNeumannKappa(0.3)
    weights = weights * kappa.scale / np.sum(weights / (1.0 + nodes ** 2))
    return DiscreteModel(nodes, weights, kappa)


@pytest.mark.parametrize("z", [0.4 + 0.7j, -1.0 + 2.0j])
def test_resolvent_defect_is_constant(models, four_node_model, z):
    model = four_node_model
    f = np.array([1.0, 2j, -1.0, 0.5])
    x = models.resolvent_T(model, z, f)
    defect = (model.nodes - z) * x - f
    coefficient = -models.p_function(model, z) * model.inner(f, model.deficiency_vector(z.conjugate()))
    assert np.max(np.abs(defect - coefficient)) < 1e-12
    # the constant direction is orthogonal to the domain constraint sum(w h) = 0
    h = np.array([1.0 / model.donoghue_weights[0], -1.0 / model.donoghue_weights[1], 0.0, 0.0])
    assert abs(model.inner(defect, h)) < 1e-12


def test_dedicated_branch_on_several_nodes(models, four_node_model):
    sibling = models.sibling(four_node_model)
    for z in (0.4 + 0.7j, 2.5 + 0.1j):
        assert models.p_function(sibling, z, dedicated=True) == pytest.approx(
            models.p_function(sibling, z, dedicated=False), rel=1e-14)


def test_cross_check_sees_a_unimodular_factor(models):
    nodes = np.array([-1.5, 0.2, 2.0])
    kappa = VonNeumannKappa(0.3)
    weights = np.array([0.5, 1.0, 0.8])
    weights = weights * kappa.scale / np.sum(weights / (1.0 + nodes ** 2))
    model = DiscreteModel(nodes, weights, kappa)
    nu = cmath.exp(0.25j * math.pi)
    report = models.cross_check(model, nu=nu)
    assert report.compared > 0
    assert report.max_rel == pytest.approx(abs(nu - 1.0), rel=1e-9)


def test_quadrature_model_transfer_is_a_pole(models, constant_model):
    assert not constant_model.exact
    assert models.pole_radius(constant_model) > 1e-3
    grid = GridSpec(re_min=-1.0, re_max=1.0, im_min=1.0, im_max=10.0, n_re=5, n_im=5)
    for z in grid.points():
        with pytest.raises(PoleError):
            models.model_transfer_resolvent_path(constant_model, z)


def test_exact_models_keep_the_tight_pole_radius(models, unit_node, two_atoms):
    assert unit_node.exact
    assert models.pole_radius(unit_node) == settings.POLE_RADIUS
    assert models.build_model(two_atoms, 0.5, n=2).exact


def test_dump_keeps_quadrature_provenance(models, constant_model):
    loaded = models.load(models.dump(constant_model))
    assert not loaded.exact
    assert not models.sibling(constant_model).exact
