import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from entropy_lab import sphere
from entropy_lab.errors import AliasingError, ConfigurationError
from entropy_lab.sphere import Convention, ConformalMetric, SymTensorField

from conftest import random_zonal

MU = sp.Symbol("mu")


def _nodal(expr, grid):
    return sp.lambdify(MU, expr, "numpy")(grid.mu_nodes) * np.ones(grid.n_nodes)


def _sym_lap0(expr):
    return sp.diff((1 - MU**2) * sp.diff(expr, MU), MU)


# -- grid -------------------------------------------------------------------


def test_grid_invariants(grid):
    assert grid.n_nodes >= grid.l_max + 1
    assert np.isclose(grid.weights.sum(), 2.0, atol=1e-15)
    np.testing.assert_allclose(grid.mu_nodes, -grid.mu_nodes[::-1], atol=0)
    np.testing.assert_allclose(grid.forward @ grid.basis, np.eye(grid.l_max + 1), atol=1e-13)


@pytest.mark.parametrize("n, l_max", [(4, 4), (10, 0), (3.5, 2)])
def test_build_grid_rejects_bad_sizes(n, l_max):
    with pytest.raises(ConfigurationError):
        sphere.build_grid(n, l_max)


def test_quadrature_closed_forms(grid):
    g0 = ConformalMetric.sphere(grid)
    p1 = sphere.zonal_mode(grid, 1, normalized=False)
    p2 = sphere.zonal_mode(grid, 2, normalized=False)
    assert sphere.integrate(g0, p2**2) == pytest.approx(4 * np.pi / 5, rel=1e-14)
    assert sphere.integrate(g0, sphere.grad_norm_sq(g0, p1)) == pytest.approx(8 * np.pi / 3, rel=1e-14)
    assert g0.volume() == pytest.approx(4 * np.pi, rel=1e-15)


def test_laplacian_eigenvalues(grid):
    for l in range(grid.l_max + 1):
        y = grid.basis[:, l]
        np.testing.assert_allclose(grid.round_laplacian(y), -l * (l + 1) * y, atol=1e-10 * (1 + l * l))


def test_spectral_and_nodal_laplacian_agree(grid, rng):
    u = random_zonal(rng, grid, 0, grid.l_max)
    a = grid.round_laplacian(u)
    b = grid.round_laplacian_nodal(u)
    assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(a))


def test_laplacian_convention_is_explicit(grid):
    g = ConformalMetric.sphere(grid, 0.1 * grid.basis[:, 2])
    phi = grid.basis[:, 3]
    with pytest.raises(ConfigurationError):
        sphere.laplacian(g, phi)
    real = sphere.laplacian(g, phi, Convention.REAL).values
    cplx = sphere.laplacian(g, phi, Convention.COMPLEX).values
    np.testing.assert_allclose(cplx, 0.5 * real, rtol=0, atol=1e-14)


def test_gauss_curvature_matches_symbolic(grid):
    u_expr = sp.Rational(1, 10) * MU**2 - sp.Rational(3, 50) * MU**3 + sp.Rational(1, 20) * MU
    k_expr = sp.exp(-2 * u_expr) * (1 - _sym_lap0(u_expr))
    g = ConformalMetric.sphere(grid, _nodal(u_expr, grid))
    np.testing.assert_allclose(sphere.gauss_curvature(g).values, _nodal(k_expr, grid), rtol=1e-12)


def test_gauss_bonnet(grid, rng):
    for _ in range(5):
        g = ConformalMetric.sphere(grid, random_zonal(rng, grid, 1, 10, 0.4))
        assert sphere.integrate(g, sphere.gauss_curvature(g)) == pytest.approx(4 * np.pi, rel=1e-12)


def test_product_curvature(small_grid):
    g = ConformalMetric.product(small_grid)
    np.testing.assert_allclose(sphere.scalar_curvature(g).values, 4.0, atol=1e-13)
    assert g.volume() == pytest.approx(16 * np.pi**2, rel=1e-14)


def test_laplacian_integrates_to_zero(grid, rng):
    g = ConformalMetric.sphere(grid, random_zonal(rng, grid, 1, 6, 0.3))
    phi = random_zonal(rng, grid, 0, 10)
    lap = sphere.laplacian(g, phi, Convention.REAL)
    assert abs(sphere.integrate(g, lap)) < 1e-14 * np.max(np.abs(lap.values)) * g.volume()
    # integration by parts: ∫ φ Δφ = -∫ |Dφ|²
    lhs = sphere.integrate(g, phi * lap.values)
    rhs = -sphere.integrate(g, sphere.grad_norm_sq(g, phi))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_aliasing_strict_and_lenient(small_grid):
    high = sphere.zonal_mode(small_grid, small_grid.l_max + 4, normalized=False)
    with pytest.raises(AliasingError):
        small_grid.band_limit(high, strict=True)
    with pytest.warns(UserWarning):
        small_grid.band_limit(high)
    with pytest.raises(ConfigurationError):
        small_grid.band_limit(np.full(small_grid.n_nodes, np.nan))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=17, max_size=17))
def test_transform_roundtrip(coeffs):
    grid = sphere.default_grid(16)
    c = np.array(coeffs)
    np.testing.assert_allclose(grid.to_modes(grid.to_nodal(c)), c, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=8, max_size=8))
def test_gauss_bonnet_property(coeffs):
    grid = sphere.default_grid(16)
    c = np.zeros(grid.l_max + 1)
    c[1:9] = coeffs
    g = ConformalMetric.from_modes(grid, c)
    assert sphere.integrate(g, sphere.gauss_curvature(g)) == pytest.approx(4 * np.pi, rel=1e-11)


# -- tensors ----------------------------------------------------------------


def _christoffel_hessian(phi_theta):
    """Hessian of ``φ(θ)`` for ``dθ² + sin²θ dφ²`` in the orthonormal frame."""
    th = sp.Symbol("theta")
    f = phi_theta(th)
    gam_phiphi_theta = -sp.sin(th) * sp.cos(th)  # Γ^θ_φφ
    h_tt = sp.diff(f, th, 2)
    h_pp = -gam_phiphi_theta * sp.diff(f, th)
    return th, h_tt, sp.simplify(h_pp / sp.sin(th) ** 2)


def test_hessian_matches_christoffel_oracle(grid):
    th, h_tt, h_pp = _christoffel_hessian(lambda t: sp.cos(t) ** 3 - 2 * sp.cos(t) ** 2)
    theta = np.arccos(grid.mu_nodes)
    hess = sphere.hessian(grid, grid.mu_nodes**3 - 2 * grid.mu_nodes**2)
    np.testing.assert_allclose(hess.a, sp.lambdify(th, h_tt)(theta), atol=1e-12)
    np.testing.assert_allclose(hess.b, sp.lambdify(th, h_pp)(theta), atol=1e-12)
    np.testing.assert_allclose(hess.trace(), grid.round_laplacian(grid.mu_nodes**3 - 2 * grid.mu_nodes**2),
                               atol=1e-11)


def test_bochner_identity(grid, rng):
    # div D²φ = d(Δφ) + Ric(dφ) with Ric = g on the unit sphere
    phi = random_zonal(rng, grid, 0, 12)
    div = sphere.divergence(sphere.hessian(grid, phi))
    expected = -grid.d_mu(grid.round_laplacian(phi) + phi)
    np.testing.assert_allclose(div.p, expected, atol=1e-9 * np.max(np.abs(expected)))
    np.testing.assert_allclose(div.q, 0.0, atol=1e-12)


def test_conformal_tensor_identities(grid, rng):
    phi = random_zonal(rng, grid, 0, 10)
    h = SymTensorField.conformal(grid, phi)
    lap = grid.round_laplacian(phi)
    np.testing.assert_allclose(sphere.double_divergence(h), lap, atol=1e-9)
    rough = sphere.rough_laplacian(h)
    np.testing.assert_allclose(rough.a, lap, atol=1e-9)
    np.testing.assert_allclose(rough.b, lap, atol=1e-9)
    np.testing.assert_allclose(sphere.tensor_inner(h, h), 2 * phi**2, rtol=1e-14)
    assert h.is_conformal()


def test_killing_field_has_zero_lie_derivative(grid):
    h = sphere.lie_derivative_round(grid, np.zeros(grid.n_nodes), np.ones(grid.n_nodes))
    for comp in (h.a, h.b, h.c):
        np.testing.assert_allclose(comp, 0.0, atol=1e-13)


def test_conformal_killing_fields(grid):
    # Z = grad of the l=1 mode is conformal Killing: L_Z g0 = (div Z) g0
    p = np.ones(grid.n_nodes)
    h = sphere.lie_derivative_round(grid, p, np.zeros(grid.n_nodes))
    np.testing.assert_allclose(h.a, h.b, atol=1e-13)
    np.testing.assert_allclose(h.c, 0.0, atol=1e-13)


def test_polynomial_space_spectrum():
    space = sphere.SpherePolynomialSpace(4)
    q = space.orthonormal_basis()
    assert q.shape[1] == 25
    stiff = q.T @ space.stiffness_matrix() @ q
    eig = np.sort(np.linalg.eigvalsh(stiff))
    expected = np.sort(np.concatenate([[l * (l + 1)] * (2 * l + 1) for l in range(5)]))
    np.testing.assert_allclose(eig, expected, atol=1e-10)
