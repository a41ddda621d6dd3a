import itertools

import numpy as np
import pytest

from entropy_lab import entropy, sphere, variation
from entropy_lab.errors import (
    ConfigurationError,
    DegenerateDirectionError,
    NoHarmonicFormError,
    UnsupportedBackgroundError,
)
from entropy_lab.sphere import ConformalMetric
from entropy_lab.variation import HolomorphicField

from conftest import random_zonal

OPS = {
    "p0": variation.apply_p0,
    "l1": variation.apply_l1,
    "l1_bar": variation.apply_l1_bar,
    "l1_prime": variation.apply_l1_prime,
    "l1_prime_bar": variation.apply_l1_prime_bar,
    "dstar_d": variation.apply_dstar_d,
}


def closed_form(l):
    n = l * (l + 1) / 2
    return n**2 * (n - 1) ** 2 / (1 - 2 * n)


def test_nu():
    np.testing.assert_array_equal(variation.nu([0, 1, 2, 3]), [0.0, 1.0, 3.0, 6.0])


def test_modal_table_closed_forms(grid):
    t = variation.modal_table(grid, 8)
    n = variation.nu(np.arange(9))
    np.testing.assert_allclose(t.p0, 1 - 2 * n)
    np.testing.assert_allclose(t.l1, 1 - n)
    np.testing.assert_allclose(t.l1_prime, -n)
    np.testing.assert_allclose(t.dstar_d, n * (n - 1))
    assert max(r["max_residual"] for r in t.rows()) < 1e-12
    factor = t.fixed_class_factor()
    np.testing.assert_allclose(factor[1:], [closed_form(l) for l in range(1, 9)], rtol=1e-14)


def test_modal_table_requires_round_background(grid):
    with pytest.raises(UnsupportedBackgroundError):
        variation.modal_table(grid, 4, background=ConformalMetric.sphere(grid, 0.1 * grid.basis[:, 2]))
    with pytest.raises(ConfigurationError):
        variation.modal_table(grid, grid.l_max + 1)


@pytest.mark.parametrize("a, b", list(itertools.combinations(sorted(OPS), 2)))
def test_operators_commute_at_round_metric(grid, rng, a, b):
    psi = random_zonal(rng, grid, 0, 12)
    norm = variation.commutator_norm(grid, OPS[a], OPS[b], psi)
    assert norm < 1e-10 * np.sqrt(grid.area_weights @ OPS[a](grid, OPS[b](grid, psi)) ** 2)


def test_operator_relations(grid, rng):
    psi = random_zonal(rng, grid, 0, 12)
    x = HolomorphicField(0.3 * grid.basis[:, 1])
    for field in (variation.ZERO_FIELD, x):
        p0 = variation.apply_p0(grid, psi, field)
        split = variation.apply_l1(grid, psi, field) + variation.apply_l1_prime_bar(grid, psi, field)
        np.testing.assert_allclose(p0, split, atol=1e-9)


@pytest.mark.parametrize("l", range(0, 7))
def test_fixed_class_unit_modes(grid, l):
    rep = variation.second_variation_fixed_class(grid.basis[:, l], grid)
    assert rep.analytic == pytest.approx(closed_form(l), rel=1e-12, abs=1e-12)
    assert rep.status == "PASSED"
    assert rep.kernel == (l <= 1)


def test_fixed_class_l2_value(grid):
    assert variation.second_variation_fixed_class(grid.basis[:, 2], grid, fd=False).analytic == \
        pytest.approx(-7.2, rel=1e-13)


def test_fixed_class_nonpositive(grid, rng):
    for _ in range(200):
        psi = random_zonal(rng, grid, 0, 10)
        rep = variation.second_variation_fixed_class(psi, grid, fd=False)
        assert rep.analytic <= 1e-12
        assert rep.sign in ("negative", "zero")


def test_normalizations(grid, rng):
    psi = random_zonal(rng, grid, 0, 8)
    k = variation.second_variation_fixed_class(psi, grid, fd=False, normalization="kahler")
    r = variation.second_variation_fixed_class(psi, grid, fd=False, normalization="riemannian")
    assert r.analytic == pytest.approx(2 * k.analytic, rel=1e-14)
    with pytest.raises(ConfigurationError):
        variation.second_variation_fixed_class(psi, grid, normalization="other")


def test_kernel_basis():
    kb = variation.kernel_basis(4)
    assert kb.dimension == 4
    assert kb.count("constant") == 1
    assert kb.count("holomorphy_potential") == 3
    assert kb.l1l1_dimension == 3
    assert np.max(kb.residuals) < 1e-9
    np.testing.assert_allclose(kb.gram(), np.eye(4), atol=1e-12)
    # independent check: the kernel is spanned by 1, x, y, z
    pts = kb.space.points
    vals = kb.evaluate(pts)
    affine = np.column_stack([np.ones(len(pts)), pts])
    coef, *_ = np.linalg.lstsq(affine, vals, rcond=None)
    assert np.max(np.abs(affine @ coef - vals)) < 1e-10


def test_kernel_basis_degree_check():
    with pytest.raises(ConfigurationError):
        variation.kernel_basis(1)


def test_linearized_f_response(grid, rng):
    psi = random_zonal(rng, grid, 0, 8)
    psi /= np.sqrt(grid.area_weights @ psi**2)
    u = variation.linearized_f_response(psi, grid)
    assert u.residual < 1e-9
    fd = variation.fd_f_response(psi, grid)
    assert np.max(np.abs(fd - u.values)) < 1e-6


def test_linearized_f_response_with_field(grid, rng):
    psi = random_zonal(rng, grid, 0, 6)
    x = HolomorphicField(0.2 * grid.basis[:, 1])
    u = variation.linearized_f_response(psi, grid, x=x)
    lhs = variation.apply_p0(grid, u.values - x.apply(grid, psi), x)
    rhs = variation.apply_l1_prime(grid, variation.apply_l1(grid, psi, x), x)
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * np.max(np.abs(rhs))


# -- class-changing directions -----------------------------------------------


def test_traceless_class_direction_is_traceless():
    d = variation.traceless_class_direction(3.0, 1.0, a=0.5)
    assert d.meta["b"] == pytest.approx(-1.0)
    assert sum(d.form) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateDirectionError):
        variation.traceless_class_direction(1.0, 1.0)


def test_cor21_rejected_on_sphere(grid):
    with pytest.raises(NoHarmonicFormError):
        variation.traceless_class_direction(metric=ConformalMetric.sphere(grid))
    with pytest.raises(NoHarmonicFormError):
        variation.second_variation_general(ConformalMetric.sphere(grid), variation.traceless_class_direction())


def test_second_variation_general_product(small_grid):
    g = ConformalMetric.product(small_grid)
    theta = variation.traceless_class_direction(1.0, -1.0, a=2.0, metric=g)
    rep = variation.second_variation_general(g, theta, normalization="riemannian")
    assert rep.analytic == pytest.approx(256 * np.pi**2, rel=1e-13)
    assert rep.status == "PASSED"
    assert rep.sign == "positive"


def test_second_variation_general_potentials_only(small_grid):
    g = ConformalMetric.product(small_grid)
    psi = (small_grid.basis[:, 2], 0.5 * small_grid.basis[:, 3])
    rep = variation.second_variation_general(g, psi=psi)
    expected = 4 * np.pi * (closed_form(2) + 0.25 * closed_form(3))
    assert rep.analytic == pytest.approx(expected, rel=1e-12)
    assert rep.status == "PASSED"


def test_second_variation_general_needs_round_background(small_grid):
    g = ConformalMetric.product(small_grid, 0.1 * small_grid.basis[:, 2], None)
    with pytest.raises(UnsupportedBackgroundError):
        variation.second_variation_general(g)


# -- Riemannian operator ------------------------------------------------------


@pytest.mark.parametrize("l", range(0, 7))
def test_riemannian_form_on_potential_tensors(grid, l):
    rep = variation.stability_form(variation.potential_tensor(grid, grid.basis[:, l]))
    ref = variation.second_variation_fixed_class(grid.basis[:, l], grid, fd=False,
                                                 normalization="riemannian")
    assert rep.analytic == pytest.approx(ref.analytic, abs=1e-6)
    assert rep.status == "PASSED"


def test_riemannian_form_vanishes_on_lie_directions(grid, rng):
    for _ in range(5):
        h = variation.lie_tensor(grid, random_zonal(rng, grid, 0, 6), random_zonal(rng, grid, 0, 6))
        assert abs(variation.stability_form(h, fd=False).analytic) < 1e-6


def test_riemannian_L_is_symmetric(grid, rng):
    h = variation.potential_tensor(grid, random_zonal(rng, grid, 0, 6)) + \
        variation.lie_tensor(grid, random_zonal(rng, grid, 0, 5))
    k = variation.potential_tensor(grid, random_zonal(rng, grid, 0, 6))
    hk = grid.area_weights @ sphere.tensor_inner(h, variation.riemannian_L(k))
    kh = grid.area_weights @ sphere.tensor_inner(k, variation.riemannian_L(h))
    assert hk == pytest.approx(kh, rel=1e-8)


def test_riemannian_L_background_check(small_grid):
    h = variation.potential_tensor(small_grid, small_grid.basis[:, 2])
    with pytest.raises(UnsupportedBackgroundError):
        variation.riemannian_L(h, ConformalMetric.product(small_grid))


def test_report_status_logic():
    ok = variation.QuadraticFormReport("d", analytic=-7.2, normalization="kahler", oracle=-7.2 + 1e-5)
    bad = variation.QuadraticFormReport("d", analytic=-7.2, normalization="kahler", oracle=-7.0)
    none = variation.QuadraticFormReport("d", analytic=-7.2, normalization="kahler")
    assert (ok.status, bad.status, none.status) == ("PASSED", "FAILED", "UNCHECKED")
    assert bad.as_dict()["analytic"] == -7.2


def test_first_variation_vanishes_at_round_metric(grid, rng):
    g0 = ConformalMetric.sphere(grid)
    prof = entropy.solve_minimizer(g0)
    for _ in range(5):
        d = entropy.VariationDirection.potential(random_zonal(rng, grid, 0, 8, 0.05))
        assert abs(entropy.first_variation(g0, prof, d)) < 1e-12
