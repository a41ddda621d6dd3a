"""Discrete differential geometry of conformal metrics on S² and S²×S².

Fields are axisymmetric (zonal): functions of ``mu = cos(theta)`` sampled on
Gauss-Legendre nodes. A band-limited field is a polynomial of degree
``<= l_max`` in ``mu``; it is stored by its nodal values and expanded in the
orthonormal zonal harmonics ``Y_l = sqrt((2l+1)/4pi) P_l(mu)`` on demand.

On the product manifold a field is an ``(N, N)`` array on the tensor grid,
the first axis belonging to the first factor.

Symmetric 2-tensors are stored by their components in the orthonormal frame
``e1 = d/dtheta``, ``e2 = (1/sin theta) d/dphi`` of the round metric. The
tensor calculus helpers at the bottom of the module work on the round
background and keep every quantity a polynomial in ``mu`` by carrying
one-forms as ``alpha_i = sin(theta) * reduced_i``.
"""

import enum
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import AliasingError, ConfigurationError

__all__ = [
    "Convention",
    "CollocationGrid",
    "ModeSpectrum",
    "ScalarField",
    "ConformalMetric",
    "SymTensorField",
    "OneForm",
    "SpherePolynomialSpace",
    "build_grid",
    "default_grid",
    "zonal_mode",
    "gauss_curvature",
    "scalar_curvature",
    "laplacian",
    "integrate",
    "grad_norm_sq",
    "hessian",
    "divergence",
    "double_divergence",
    "rough_laplacian",
    "sym_gradient",
    "curvature_action",
    "tensor_inner",
    "lie_derivative_round",
]

ALIAS_TOL = 1e-10


class Convention(enum.Enum):
    """Which Laplacian on functions.

    ``REAL`` is the Laplace-Beltrami operator (``Y_l -> -l(l+1) Y_l`` on the
    unit sphere); ``COMPLEX`` is the Kähler ``g^{i\\bar j} d_i d_{\\bar j}``,
    half of it.
    """

    REAL = "real"
    COMPLEX = "complex"


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    """Gauss-Legendre nodes in ``mu`` with a zonal spectral truncation.

    Use :func:`build_grid` rather than the constructor.
    """

    n_nodes: int
    l_max: int
    mu_nodes: np.ndarray
    weights: np.ndarray
    basis: np.ndarray = field(repr=False)
    dbasis: np.ndarray = field(repr=False)
    d2basis: np.ndarray = field(repr=False)

    @property
    def degrees(self):
        return np.arange(self.l_max + 1)

    @cached_property
    def area_weights(self):
        """Quadrature weights for ``dV0 = 2 pi dmu`` (round sphere)."""
        return _readonly(2.0 * np.pi * self.weights)

    @cached_property
    def forward(self):
        """Nodal values -> zonal harmonic coefficients (``(l_max+1, N)``).

        Discrete least-squares projection; the Gram correction removes the
        ``O(1e-13)`` orthogonality defect of double-precision nodes, so that
        ``forward @ basis`` is the identity to round-off.
        """
        bw = self.basis.T * self.area_weights
        return _readonly(np.linalg.solve(bw @ self.basis, bw))

    @cached_property
    def lap_eigenvalues(self):
        """Eigenvalues ``-l(l+1)`` of the round real Laplacian."""
        l = self.degrees.astype(float)
        return _readonly(-l * (l + 1.0))

    @cached_property
    def sin2(self):
        return _readonly(1.0 - self.mu_nodes**2)

    @cached_property
    def product_area_weights(self):
        return _readonly(np.outer(self.area_weights, self.area_weights))

    # transforms --------------------------------------------------------

    def to_modes(self, values):
        """Project nodal values (1D or tensor-grid 2D) onto zonal modes."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return self.forward @ values
        return self.forward @ values @ self.forward.T

    def to_nodal(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 1:
            return self.basis @ coeffs
        return self.basis @ coeffs @ self.basis.T

    def band_limit(self, values, strict=False, what="field", warn=True):
        """Truncate ``values`` to ``l_max``.

        Energy lost in the truncation beyond ``ALIAS_TOL`` (relative) raises
        :class:`AliasingError` when ``strict`` and warns otherwise.
        """
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ConfigurationError(f"{what} has non-finite entries")
        projected = self.to_nodal(self.to_modes(values))
        scale = max(1.0, float(np.max(np.abs(values))))
        alias = float(np.max(np.abs(projected - values))) / scale
        if alias > ALIAS_TOL:
            msg = f"{what} aliased beyond l_max={self.l_max} (defect {alias:.3e})"
            if strict:
                raise AliasingError(msg)
            if warn:
                warnings.warn(msg, stacklevel=3)
        return projected

    def d_mu(self, values, axis=0):
        """First ``mu``-derivative of the degree-``l_max`` interpolant along
        ``axis``."""
        v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        out = self.dbasis @ (self.forward @ v)
        return np.moveaxis(out, 0, axis)

    def d2_mu(self, values, axis=0):
        v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        out = self.d2basis @ (self.forward @ v)
        return np.moveaxis(out, 0, axis)

    def along(self, nodal, axis, ndim):
        """Broadcast a per-node array along ``axis`` of an ``ndim`` array."""
        shape = [1] * ndim
        shape[axis] = self.n_nodes
        return np.reshape(nodal, shape)

    def round_laplacian(self, values, axis=0):
        """Real Laplacian of the round metric along ``axis``.

        Applied spectrally (``Y_l -> -l(l+1) Y_l``) after projection onto
        degrees ``<= l_max``; this keeps the round-off of band-limited inputs
        at the size of the largest active eigenvalue.
        """
        v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        out = self.basis @ ((self.lap_eigenvalues * (self.forward @ v).T).T)
        return np.moveaxis(out, 0, axis)

    def round_laplacian_nodal(self, values, axis=0):
        """Same operator assembled from nodal derivatives,
        ``(1 - mu^2) phi'' - 2 mu phi'``; an independent check of
        :meth:`round_laplacian`."""
        values = np.asarray(values, dtype=float)
        nd = values.ndim
        s2 = self.along(self.sin2, axis, nd)
        mu = self.along(self.mu_nodes, axis, nd)
        return s2 * self.d2_mu(values, axis) - 2.0 * mu * self.d_mu(values, axis)

    def integrate0(self, values):
        """``∫ values dV0`` on the round sphere or the round product."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return float(self.area_weights @ values)
        return float(np.sum(self.product_area_weights * values))


def build_grid(n_nodes, l_max):
    """Gauss-Legendre collocation grid.

    Parameters
    ----------
    n_nodes : int
        Number of nodes in ``mu``; must be ``>= l_max + 1``.
    l_max : int
        Spectral truncation degree, ``>= 1``.
    """
    if int(n_nodes) != n_nodes or int(l_max) != l_max:
        raise ConfigurationError("n_nodes and l_max must be integers")
    n_nodes, l_max = int(n_nodes), int(l_max)
    if l_max < 1 or n_nodes < l_max + 1:
        raise ConfigurationError(
            f"need n_nodes >= l_max + 1 >= 2, got n_nodes={n_nodes}, l_max={l_max}"
        )
    mu, w = npleg.leggauss(n_nodes)
    # leggauss is symmetric only to rounding; symmetrise explicitly
    mu = 0.5 * (mu - mu[::-1])
    w = 0.5 * (w + w[::-1])
    w *= 2.0 / w.sum()
    l = np.arange(l_max + 1)
    norm = np.sqrt((2 * l + 1) / (4 * np.pi))
    eye = np.eye(l_max + 1) * norm
    basis = np.stack([npleg.legval(mu, eye[k]) for k in l], axis=1)
    dbasis = np.stack([npleg.legval(mu, npleg.legder(eye[k])) for k in l], axis=1)
    d2basis = np.stack(
        [npleg.legval(mu, npleg.legder(eye[k], 2)) for k in l], axis=1
    )
    return CollocationGrid(
        n_nodes=n_nodes,
        l_max=l_max,
        mu_nodes=_readonly(mu),
        weights=_readonly(w),
        basis=_readonly(basis),
        dbasis=_readonly(dbasis),
        d2basis=_readonly(d2basis),
    )


def default_grid(l_max=32):
    """Grid with the 3/2 over-integration rule used throughout the package."""
    return build_grid((3 * (l_max + 1) + 1) // 2, l_max)


def zonal_mode(grid, l, normalized=True):
    """Nodal values of ``Y_l`` (unit ``L²(dV0)`` norm) or of ``P_l``."""
    if normalized:
        return grid.basis[:, l].copy()
    return npleg.legval(grid.mu_nodes, np.eye(l + 1)[l])


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    """Zonal harmonic coefficients of a field (1D, or 2D on the product)."""

    grid: CollocationGrid
    coeffs: np.ndarray

    def to_field(self):
        return ScalarField(self.grid, self.grid.to_nodal(self.coeffs))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a zonal function (1D) or of a function on the tensor
    grid of S²×S² (2D)."""

    grid: CollocationGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.grid.n_nodes
        if v.shape not in ((n,), (n, n)):
            raise ConfigurationError(f"field shape {v.shape} does not fit grid {n}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field has non-finite entries")
        object.__setattr__(self, "values", _readonly(v))

    representation = "nodal"

    @property
    def product(self):
        return self.values.ndim == 2

    @classmethod
    def from_modes(cls, grid, coeffs):
        return cls(grid, grid.to_nodal(coeffs))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.mu_nodes))

    @classmethod
    def constant(cls, grid, value=0.0, product=False):
        shape = (grid.n_nodes, grid.n_nodes) if product else (grid.n_nodes,)
        return cls(grid, np.full(shape, float(value)))

    def spectrum(self):
        return ModeSpectrum(self.grid, self.grid.to_modes(self.values))

    def band_limited(self, strict=False):
        return ScalarField(self.grid, self.grid.band_limit(self.values, strict))

    def __add__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other)

    def __sub__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - other)

    def __mul__(self, scalar):
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def _as_values(grid, phi):
    if isinstance(phi, ScalarField):
        if phi.grid is not grid:
            raise ConfigurationError("field and metric live on different grids")
        return phi.values
    return np.asarray(phi, dtype=float)


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """``e^{2u} g0`` on S², or ``e^{2u1} g0 ⊕ e^{2u2} g0`` on S²×S².

    ``g0`` is the round metric of curvature 1 and area 4π. Conformal factors
    are band-limited on entry.
    """

    grid: CollocationGrid
    u: tuple

    def __post_init__(self):
        us = tuple(self.u)
        if len(us) not in (1, 2):
            raise ConfigurationError("a conformal metric has one or two factors")
        n = self.grid.n_nodes
        for ui in us:
            if np.shape(ui) != (n,):
                raise ConfigurationError("conformal factors are zonal arrays")
        object.__setattr__(self, "u", tuple(_readonly(ui) for ui in us))

    # constructors -------------------------------------------------------

    @classmethod
    def sphere(cls, grid, u=None, strict=False, warn=True):
        u = np.zeros(grid.n_nodes) if u is None else _as_values(grid, u)
        return cls(grid, (grid.band_limit(u, strict, "conformal factor", warn),))

    @classmethod
    def product(cls, grid, u1=None, u2=None, strict=False, warn=True):
        us = []
        for ui in (u1, u2):
            ui = np.zeros(grid.n_nodes) if ui is None else _as_values(grid, ui)
            us.append(grid.band_limit(ui, strict, "conformal factor", warn))
        return cls(grid, tuple(us))

    def with_u(self, *us, warn=True):
        """Same kind of metric with new conformal factors."""
        if len(us) != len(self.u):
            raise ConfigurationError("wrong number of conformal factors")
        if self.is_product:
            return ConformalMetric.product(self.grid, *us, warn=warn)
        return ConformalMetric.sphere(self.grid, us[0], warn=warn)

    @classmethod
    def from_modes(cls, grid, *coeffs):
        return cls(grid, tuple(grid.to_nodal(c) for c in coeffs))

    # basic data ---------------------------------------------------------

    @property
    def kind(self):
        return "sphere" if len(self.u) == 1 else "product"

    @property
    def is_product(self):
        return len(self.u) == 2

    @cached_property
    def factor_rho(self):
        """Per-factor conformal factors ``e^{2u_i}`` at the nodes."""
        return tuple(np.exp(2.0 * ui) for ui in self.u)

    @cached_property
    def rho(self):
        """Volume density ``dV_g / dV0`` at the nodes (2D on the product)."""
        if self.is_product:
            return np.outer(*self.factor_rho)
        return self.factor_rho[0]

    @property
    def area_weights(self):
        if self.is_product:
            return self.grid.product_area_weights
        return self.grid.area_weights

    def factor_volumes(self):
        return tuple(float(self.grid.area_weights @ r) for r in self.factor_rho)

    def volume(self):
        return float(np.prod(self.factor_volumes()))

    def u_modes(self):
        return tuple(self.grid.to_modes(ui) for ui in self.u)

    def is_round(self, tol=1e-12):
        return all(float(np.max(np.abs(ui))) <= tol for ui in self.u)

    def normalized(self, area=4.0 * np.pi):
        """Shift each factor so that it has the given area."""
        g = self.grid
        us = [ui + 0.5 * np.log(area / float(g.area_weights @ np.exp(2 * ui)))
              for ui in self.u]
        return ConformalMetric(g, tuple(us))

    def field(self, values):
        return ScalarField(self.grid, values)


def _factor_curvature(grid, u):
    return np.exp(-2.0 * u) * (1.0 - grid.round_laplacian(u))


def gauss_curvature(g):
    """Gauss curvature ``K = e^{-2u}(1 - Δ0 u)``.

    Returns a :class:`ScalarField` on S², a pair of zonal fields (one per
    factor) on the product.
    """
    ks = tuple(ScalarField(g.grid, _factor_curvature(g.grid, ui)) for ui in g.u)
    return ks if g.is_product else ks[0]


def scalar_curvature(g):
    """Riemannian scalar curvature ``R`` (``2K`` per surface factor)."""
    ks = [_factor_curvature(g.grid, ui) for ui in g.u]
    if g.is_product:
        return ScalarField(g.grid, 2.0 * ks[0][:, None] + 2.0 * ks[1][None, :])
    return ScalarField(g.grid, 2.0 * ks[0])


def laplacian(g, phi, convention=None):
    """``Δ_g φ`` under an explicit convention.

    ``Convention.REAL`` gives the Laplace-Beltrami operator
    ``e^{-2u} Δ0``; ``Convention.COMPLEX`` gives half of it. There is no
    default: passing ``None`` raises :class:`ConfigurationError`.
    """
    if not isinstance(convention, Convention):
        raise ConfigurationError("laplacian needs convention=Convention.REAL or COMPLEX")
    v = _as_values(g.grid, phi)
    if g.is_product:
        if v.ndim != 2:
            raise ConfigurationError("product metric needs a tensor-grid field")
        r1, r2 = g.factor_rho
        out = (g.grid.round_laplacian(v, 0) / r1[:, None]
               + g.grid.round_laplacian(v, 1) / r2[None, :])
    else:
        out = g.grid.round_laplacian(v) / g.rho
    if convention is Convention.COMPLEX:
        out = 0.5 * out
    return ScalarField(g.grid, out)


def integrate(g, phi):
    """``∫ φ dV_g`` by Gauss quadrature."""
    v = _as_values(g.grid, phi)
    return float(np.sum(g.area_weights * g.rho * v))


def grad_norm_sq(g, phi):
    """``|Dφ|²_g = e^{-2u} |Dφ|²_0`` (summed over factors on the product)."""
    v = _as_values(g.grid, phi)
    s2 = g.grid.sin2
    if g.is_product:
        r1, r2 = g.factor_rho
        d1 = g.grid.d_mu(v, 0)
        d2 = g.grid.d_mu(v, 1)
        out = (s2[:, None] * d1**2 / r1[:, None]
               + s2[None, :] * d2**2 / r2[None, :])
    else:
        out = s2 * g.grid.d_mu(v) ** 2 / g.rho
    return ScalarField(g.grid, out)


# ---------------------------------------------------------------------------
# Symmetric tensors on the round sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymTensorField:
    """Axisymmetric symmetric 2-tensor by its round-frame components.

    ``h = a e1⊗e1 + c (e1⊗e2 + e2⊗e1) + b e2⊗e2`` with ``e1 = dθ`` and
    ``e2 = sin θ dφ``; in coordinates ``h = a dθ² + 2 c sinθ dθ dφ +
    b sin²θ dφ²``. Smoothness at the poles requires ``a - b`` and ``c`` to
    vanish like ``sin²θ``.
    """

    grid: CollocationGrid
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.n_nodes,):
                raise ConfigurationError("tensor components are zonal arrays")
            if not np.all(np.isfinite(v)):
                raise ConfigurationError("tensor has non-finite entries")
            object.__setattr__(self, name, _readonly(v))

    @classmethod
    def zero(cls, grid):
        z = np.zeros(grid.n_nodes)
        return cls(grid, z, z, z)

    @classmethod
    def conformal(cls, grid, phi):
        """``φ g0``."""
        phi = _as_values(grid, phi)
        return cls(grid, phi, phi, np.zeros_like(phi))

    def trace(self):
        """``tr_{g0} h``."""
        return self.a + self.b

    def __add__(self, other):
        return SymTensorField(self.grid, self.a + other.a, self.b + other.b,
                              self.c + other.c)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, s):
        s = float(s)
        return SymTensorField(self.grid, s * self.a, s * self.b, s * self.c)

    __rmul__ = __mul__

    def is_conformal(self, tol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.a))))
        return (float(np.max(np.abs(self.a - self.b))) <= tol * scale
                and float(np.max(np.abs(self.c))) <= tol * scale)


@dataclass(frozen=True, eq=False)
class OneForm:
    """Axisymmetric one-form ``α = sinθ (p e1 + q e2)`` stored by the
    reduced components ``p, q`` (polynomials in ``mu`` for smooth α)."""

    grid: CollocationGrid
    p: np.ndarray
    q: np.ndarray


def _reduced_diag(h):
    # (a - b) / sin²θ and c / sin²θ, polynomial for smooth tensors
    s2 = h.grid.sin2
    return (h.a - h.b) / s2, h.c / s2


def hessian(grid, phi):
    """Round Hessian ``D²φ`` of a zonal function."""
    v = _as_values(grid, phi)
    mu = grid.mu_nodes
    d1 = grid.d_mu(v)
    d2 = grid.d2_mu(v)
    return SymTensorField(grid, grid.sin2 * d2 - mu * d1, -mu * d1, np.zeros_like(v))


def divergence(h):
    """Round divergence ``(div h)_j = D^i h_ij`` as a :class:`OneForm`."""
    g = h.grid
    mu = g.mu_nodes
    p, r = _reduced_diag(h)
    return OneForm(g, -g.d_mu(h.a) + mu * p, -g.d_mu(h.c) + 2.0 * mu * r)


def codifferential(alpha):
    """``div α`` of a one-form."""
    g = alpha.grid
    return -g.d_mu(g.sin2 * alpha.p)


def double_divergence(h):
    """``div div h``."""
    return codifferential(divergence(h))


def sym_gradient(alpha):
    """``sym ∇α`` (half the Lie derivative of ``g0`` along ``α♯``)."""
    g = alpha.grid
    mu = g.mu_nodes
    s2 = g.sin2
    a = -s2 * g.d_mu(alpha.p) + mu * alpha.p
    b = mu * alpha.p
    c = -0.5 * s2 * g.d_mu(alpha.q)
    return SymTensorField(g, a, b, c)


def rough_laplacian(h):
    """Connection Laplacian ``tr ∇²h`` on the round sphere (``= -D*D h``)."""
    g = h.grid
    mu2 = g.mu_nodes**2
    p, r = _reduced_diag(h)
    return SymTensorField(
        g,
        g.round_laplacian(h.a) - 2.0 * mu2 * p,
        g.round_laplacian(h.b) + 2.0 * mu2 * p,
        g.round_laplacian(h.c) - 4.0 * mu2 * r,
    )


def curvature_action(h):
    """``Rm(h, ·)_ij = R_ikjl h^kl = g_ij tr h - h_ij`` at curvature 1."""
    t = h.trace()
    return SymTensorField(h.grid, t - h.a, t - h.b, -h.c)


def tensor_inner(h, k):
    """Pointwise ``<h, k>_{g0} = h_ij k^ij``."""
    return h.a * k.a + h.b * k.b + 2.0 * h.c * k.c


def lie_derivative_round(grid, p, q):
    """``L_Z g0`` for the axisymmetric field ``Z♭ = sinθ (p e1 + q e2)``.

    ``p`` generates a meridional (gradient-like) flow, ``q`` a twist about
    the axis; constant ``q`` is the rotation Killing field.
    """
    p = _as_values(grid, p)
    q = _as_values(grid, q)
    return 2.0 * sym_gradient(OneForm(grid, p, q))


# ---------------------------------------------------------------------------
# Full (non-zonal) polynomial space on S²
# ---------------------------------------------------------------------------


class SpherePolynomialSpace:
    """Restrictions to S² of polynomials in ``(x, y, z)`` of degree ``<= degree``.

    This is a discretization independent of the zonal grid: it sees every
    spherical harmonic of degree ``<= degree`` (all ``m``). Mass and
    stiffness matrices are assembled by an exact product quadrature
    (Gauss-Legendre in ``z``, trapezoid in ``φ``) from the monomial basis and
    its tangential gradients. The monomial set is linearly dependent on the
    sphere (``x²+y²+z² = 1``); :meth:`orthonormal_basis` removes the
    redundancy.
    """

    def __init__(self, degree):
        if degree < 0:
            raise ConfigurationError("degree must be non-negative")
        self.degree = int(degree)
        self.exponents = [
            (i, j, k)
            for total in range(self.degree + 1)
            for i in range(total + 1)
            for j in range(total + 1 - i)
            for k in [total - i - j]
        ]
        nz = self.degree + 2
        nphi = 2 * self.degree + 3
        z, wz = npleg.leggauss(nz)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - zz**2)
        self.points = np.stack([s * np.cos(pp), s * np.sin(pp), zz], -1).reshape(-1, 3)
        self.quad_weights = np.repeat(wz, nphi) * (2.0 * np.pi / nphi)

    def evaluate(self, points=None):
        """Monomial values, shape ``(n_points, n_monomials)``."""
        x = self.points if points is None else np.atleast_2d(points)
        e = np.array(self.exponents)
        return np.prod(x[:, None, :] ** e[None, :, :], axis=-1)

    def tangential_gradients(self, points=None):
        """Tangential gradients, shape ``(n_points, n_monomials, 3)``."""
        x = self.points if points is None else np.atleast_2d(points)
        e = np.array(self.exponents, dtype=float)
        grads = np.empty((x.shape[0], len(self.exponents), 3))
        for axis in range(3):
            lowered = e.copy()
            lowered[:, axis] = np.maximum(lowered[:, axis] - 1, 0)
            grads[:, :, axis] = e[:, axis] * np.prod(
                x[:, None, :] ** lowered[None, :, :], axis=-1
            )
        radial = np.einsum("pmk,pk->pm", grads, x)
        return grads - radial[:, :, None] * x[:, None, :]

    def mass_matrix(self):
        v = self.evaluate()
        return (v * self.quad_weights[:, None]).T @ v

    def stiffness_matrix(self):
        gr = self.tangential_gradients()
        return np.einsum("p,pak,pbk->ab", self.quad_weights, gr, gr)

    def orthonormal_basis(self, rel_tol=1e-10):
        """Coefficient matrix ``Q`` whose columns are ``L²``-orthonormal
        functions spanning the space."""
        m = self.mass_matrix()
        scale = np.sqrt(np.diag(m))
        ms = m / np.outer(scale, scale)
        vals, vecs = np.linalg.eigh(ms)
        keep = vals > rel_tol * vals.max()
        return (vecs[:, keep] / np.sqrt(vals[keep])) / scale[:, None]
