"""The entropy functional λ(g), its minimizer and its first variation.

The functional used throughout is

    W(g, f) = ∫ (R + |Df|² + 2 f) e^{-f} dV_g,   ∫ e^{-f} dV_g = V(g),

with ``R`` the Riemannian scalar curvature. With ``w = e^{-f/2}`` it becomes
the ground-state energy

    E(w) = ∫ (4 |Dw|² + R w² - 2 w² ln w²) dV_g,   ∫ w² dV_g = V,

whose minimizer solves ``-4 Δw + R w - 2 w ln w² = m w`` with ``m = λ / V``.
On the round sphere ``w ≡ 1``, ``λ = 8π`` and ``m = 2``.

The weight 2 on the ``f`` term is what makes the round metrics critical for
every variation and λ monotone along the normalized Ricci flow; in Kähler
normalization (complex Laplacian, Ricci form) all values are halved.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    ConstraintError,
    DegenerateDirectionError,
    NoHarmonicFormError,
    SolverError,
)
from .sphere import (
    ConformalMetric,
    ScalarField,
    SymTensorField,
    grad_norm_sq,
    gauss_curvature,
    integrate,
    scalar_curvature,
)

__all__ = [
    "F_WEIGHT",
    "EntropyProfile",
    "VariationDirection",
    "FDEstimate",
    "w_functional",
    "solve_minimizer",
    "first_variation",
    "fd_lambda_derivative",
    "soliton_tensor",
    "soliton_residual",
    "soliton_rate",
]

F_WEIGHT = 2.0
DEFAULT_TOL = 1e-10
MIN_CONFORMAL_FACTOR = 1e-6
CONSTRAINT_TOL = 1e-8


# ---------------------------------------------------------------------------
# Galerkin discretization of the ground-state problem
# ---------------------------------------------------------------------------


class _Galerkin:
    """Nodal basis, quadrature and metric data for ``E(w)``.

    ``w`` is expanded in zonal harmonics up to ``l_max`` (Kronecker products
    on S²×S²). ``stiff`` is the matrix of ``∫ |Dw|²_g dV_g`` and ``lap`` maps
    coefficients to nodal values of ``ρ Δ_g w`` where ``ρ = dV_g/dV0``.
    """

    def __init__(self, g):
        grid = g.grid
        b = np.asarray(grid.basis)
        ell = grid.degrees.astype(float)
        kdiag = ell * (ell + 1.0)
        self.grid = grid
        if g.is_product:
            r1, r2 = g.factor_rho
            w0 = grid.area_weights
            m1 = (b.T * (w0 * r1)) @ b
            m2 = (b.T * (w0 * r2)) @ b
            kmat = np.diag(kdiag)
            bl = b * (-kdiag)
            self.basis = np.kron(b, b)
            self.stiff = np.kron(kmat, m2) + np.kron(m1, kmat)
            self.lap = (np.kron(np.ones_like(r1), r2)[:, None] * np.kron(bl, b)
                        + np.kron(r1, np.ones_like(r2))[:, None] * np.kron(b, bl))
            self.quad = np.asarray(grid.product_area_weights).ravel()
            self.rho = np.asarray(g.rho).ravel()
            k1, k2 = (k.values for k in gauss_curvature(g))
            rt = 2.0 * (k1 * r1)[:, None] * r2[None, :] + 2.0 * r1[:, None] * (k2 * r2)[None, :]
            self.r_rho = rt.ravel()
        else:
            self.basis = b
            self.stiff = np.diag(kdiag)
            self.lap = b * (-kdiag)
            self.quad = np.asarray(grid.area_weights)
            self.rho = np.asarray(g.rho)
            self.r_rho = scalar_curvature(g).values * self.rho
        self.volume = float(self.quad @ self.rho)
        self.shape = g.rho.shape

    def constant_coeffs(self, value=1.0):
        # exact projection of a constant: only the (0, 0) mode
        c = np.zeros(self.basis.shape[1])
        c[0] = value / float(self.basis[0, 0])
        return c

    def energy(self, c):
        w = self.basis @ c
        w2 = w * w
        pot = self.quad @ (self.r_rho * w2 - F_WEIGHT * self.rho * w2 * np.log(w2))
        return 4.0 * float(c @ self.stiff @ c) + float(pot)

    def constraint(self, c):
        w = self.basis @ c
        return float(self.quad @ (self.rho * w * w))

    def _defect_rho(self, c, m):
        w = self.basis @ c
        return (-4.0 * (self.lap @ c) + self.r_rho * w
                - self.rho * (F_WEIGHT * w * np.log(w * w) + m * w))

    def pointwise_residual(self, c, m):
        """``-4 Δw + R w - 2 w ln w² - m w`` in ``L²(dV_g)`` at the nodes."""
        res_rho = self._defect_rho(c, m)
        return float(np.sqrt(self.quad @ (res_rho**2 / self.rho)))

    def galerkin_residual(self, c, m):
        """Norm of the defect (times ``ρ``) projected on the trial space.

        This is what the discrete problem can drive to zero; the nodal
        defect also carries the part of ``ρ w ln w²`` above ``l_max``.
        """
        proj = self.basis.T @ (self.quad * self._defect_rho(c, m))
        return float(np.linalg.norm(proj))

    def kkt(self, c, kappa):
        b, q = self.basis, self.quad
        w = b @ c
        lw = np.log(w * w)
        a = F_WEIGHT
        g_e = 8.0 * self.stiff @ c + b.T @ (q * (2.0 * self.r_rho * w
                                                  - a * self.rho * (2.0 * w * lw + 2.0 * w)))
        g_c = 2.0 * b.T @ (q * self.rho * w)
        h_e = 8.0 * self.stiff + (b.T * (q * (2.0 * self.r_rho - a * self.rho * (2.0 * lw + 6.0)))) @ b
        h_c = 2.0 * (b.T * (q * self.rho)) @ b
        return g_e, g_c, h_e, h_c


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    """Minimizer data for λ(g).

    Attributes
    ----------
    metric : ConformalMetric
    f : ScalarField
        Minimizing potential, ``f = -ln w²``.
    w : ScalarField
        Ground state ``e^{-f/2}``, positive.
    lam : float
        λ(g).
    multiplier : float
        Constant ``m`` of the minimizer equation, equal to ``λ / V``.
    residual : float
        Norm of the minimizer-equation defect on the discrete trial space
        (see :meth:`_Galerkin.galerkin_residual`).
    nodal_residual : float
        ``L²(dV_g)`` norm of the defect at the quadrature nodes, including
        the part the truncation cannot represent.
    iterations : int
    coeffs : ndarray
        Galerkin coefficients of ``w``.
    trajectory : tuple
        ``(iteration, residual, energy)`` per iteration.
    """

    metric: ConformalMetric
    f: ScalarField
    w: ScalarField
    lam: float
    multiplier: float
    residual: float
    nodal_residual: float
    iterations: int
    coeffs: np.ndarray = field(repr=False)
    trajectory: tuple = field(default=(), repr=False)

    @property
    def lambda_(self):
        return self.lam

    @property
    def volume(self):
        return self.metric.volume()

    def summary(self):
        return {
            "lambda": self.lam,
            "multiplier": self.multiplier,
            "residual": self.residual,
            "nodal_residual": self.nodal_residual,
            "iterations": self.iterations,
        }


def _check_metric(g):
    if not isinstance(g, ConformalMetric):
        raise ConfigurationError("expected a ConformalMetric")
    rmin = min(float(np.min(r)) for r in g.factor_rho)
    if rmin < MIN_CONFORMAL_FACTOR:
        raise ConfigurationError(
            f"conformal factor too close to degenerate (min e^(2u) = {rmin:.3e})"
        )


def w_functional(g, f):
    """``W(g, f) = ∫ (R + |Df|² + 2f) e^{-f} dV_g``.

    Raises
    ------
    ConstraintError
        If ``∫ e^{-f} dV_g`` differs from ``V(g)`` by more than ``1e-8``
        relative.
    """
    fv = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    if g.is_product and fv.ndim == 1:
        raise ConfigurationError("product metric needs a tensor-grid potential")
    vol = g.volume()
    ef = np.exp(-fv)
    defect = integrate(g, ef) - vol
    if abs(defect) > CONSTRAINT_TOL * vol:
        raise ConstraintError(f"measure constraint violated by {defect:.3e}", defect)
    r = scalar_curvature(g).values
    integrand = (r + grad_norm_sq(g, fv).values + F_WEIGHT * fv) * ef
    return integrate(g, integrand)


def solve_minimizer(g, tol=DEFAULT_TOL, max_iter=60):
    """Solve for the minimizer of ``W(g, ·)`` and return its profile.

    Newton iteration on the Galerkin KKT system of the ground-state problem,
    starting from ``f = 0``, with step halving to keep ``w`` positive and the
    KKT residual decreasing. When a Newton step cannot be accepted a few
    projected gradient steps are taken instead.

    Raises
    ------
    SolverError
        No convergence within ``max_iter`` or loss of positivity.
    """
    _check_metric(g)
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    gal = _Galerkin(g)
    vol = gal.volume
    c = gal.constant_coeffs(1.0)
    g_e, g_c, _, _ = gal.kkt(c, 0.0)
    kappa = float(g_e @ g_c / (g_c @ g_c))
    traj = []

    def kkt_norm(c_, k_):
        ge, gc, _, _ = gal.kkt(c_, k_)
        return float(np.hypot(np.linalg.norm(ge - k_ * gc), gal.constraint(c_) - vol))

    it = 0
    res = gal.galerkin_residual(c, kappa + F_WEIGHT)
    traj.append((0, res, gal.energy(c)))
    while res > 1e-3 * tol:
        if it >= max_iter:
            if res <= tol:
                break
            raise SolverError(
                f"minimizer did not converge in {max_iter} iterations (residual {res:.3e})",
                {"trajectory": traj, "volume": vol},
            )
        it += 1
        g_e, g_c, h_e, h_c = gal.kkt(c, kappa)
        rhs = -np.r_[g_e - kappa * g_c, gal.constraint(c) - vol]
        n = c.size
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = h_e - kappa * h_c
        jac[:n, n] = -g_c
        jac[n, :n] = g_c
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            step = None
        current = float(np.linalg.norm(rhs))
        accepted = False
        if step is not None and np.all(np.isfinite(step)):
            t = 1.0
            for _ in range(30):
                c_new = c + t * step[:n]
                k_new = kappa + t * step[n]
                if np.min(gal.basis @ c_new) > 0 and kkt_norm(c_new, k_new) < current * (1 - 1e-4 * t) + 1e-12 * (1 + abs(vol)):
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            c_new, k_new = _gradient_steps(gal, c, vol)
        if np.min(gal.basis @ c_new) <= 0:
            raise SolverError("ground state lost positivity", {"trajectory": traj})
        if not accepted and kkt_norm(c_new, k_new) >= current and res <= tol:
            # stagnated at the discretization floor
            break
        small_step = float(np.linalg.norm(c_new - c)) <= 1e-14 * float(np.linalg.norm(c))
        c, kappa = c_new, k_new
        res = gal.galerkin_residual(c, kappa + F_WEIGHT)
        traj.append((it, res, gal.energy(c)))
        if small_step and res <= tol:
            break
    if res > tol:
        raise SolverError(f"minimizer residual {res:.3e} above tolerance {tol:.1e}",
                          {"trajectory": traj})
    w = gal.basis @ c
    lam = gal.energy(c)
    shape = gal.shape
    w_field = ScalarField(g.grid, w.reshape(shape))
    f_field = ScalarField(g.grid, (-np.log(w * w)).reshape(shape))
    return EntropyProfile(
        metric=g,
        f=f_field,
        w=w_field,
        lam=float(lam),
        multiplier=float(kappa + F_WEIGHT),
        residual=float(res),
        nodal_residual=gal.pointwise_residual(c, kappa + F_WEIGHT),
        iterations=it,
        coeffs=c,
        trajectory=tuple(traj),
    )


def _gradient_steps(gal, c, vol, n_steps=20):
    """Normalized gradient flow with backtracking on the energy."""
    for _ in range(n_steps):
        g_e, g_c, _, h_c = gal.kkt(c, 0.0)
        # Riesz representative in the weighted L² inner product
        direction = np.linalg.solve(0.5 * h_c, g_e)
        e0 = gal.energy(c)
        tau = 0.1
        while tau > 1e-12:
            trial = c - tau * direction
            w = gal.basis @ trial
            if np.min(w) > 0:
                trial = trial * np.sqrt(vol / gal.constraint(trial))
                if gal.energy(trial) < e0:
                    c = trial
                    break
            tau *= 0.5
        else:
            break
    g_e, g_c, _, _ = gal.kkt(c, 0.0)
    return c, float(g_e @ g_c / (g_c @ g_c))


# ---------------------------------------------------------------------------
# Soliton tensor Ric - g + D²f
# ---------------------------------------------------------------------------


def _factor_soliton(grid, u, k, rho, f, axis, ndim):
    """Frame components ``(E11, E22)`` in the round coframe of one factor,
    before the ``ρ⁻²`` of the metric contraction."""
    s2 = grid.along(grid.sin2, axis, ndim)
    mu = grid.along(grid.mu_nodes, axis, ndim)
    du = grid.along(grid.d_mu(u), axis, ndim)
    kr = grid.along((k - 1.0) * rho, axis, ndim)
    f1 = grid.d_mu(f, axis)
    f2 = grid.d2_mu(f, axis)
    cross = s2 * du * f1
    e11 = kr + s2 * f2 - mu * f1 - cross
    e22 = kr - mu * f1 + cross
    return e11, e22


def soliton_tensor(g, profile):
    """``E = Ric - g + D²f`` in the round orthonormal coframe.

    On S² returns a :class:`SymTensorField` (``E12 = 0`` by symmetry). On
    the product returns a dict with the diagonal blocks ``(E11, E22)`` of each
    factor as tensor-grid arrays and the mixed component ``E_{θ1 θ2}``.
    """
    f = profile.f.values
    grid = g.grid
    ks = gauss_curvature(g)
    if not g.is_product:
        e11, e22 = _factor_soliton(grid, g.u[0], ks.values, g.rho, f, 0, 1)
        return SymTensorField(grid, e11, e22, np.zeros_like(e11))
    blocks = []
    for axis in (0, 1):
        blocks.append(_factor_soliton(grid, g.u[axis], ks[axis].values,
                                      g.factor_rho[axis], f, axis, 2))
    s = np.sqrt(grid.sin2)
    mixed = s[:, None] * s[None, :] * grid.d_mu(grid.d_mu(f, 0), 1)
    return {"blocks": tuple(blocks), "mixed": mixed}


def _soliton_norm_sq(g, e):
    if not g.is_product:
        return (e.a**2 + e.b**2 + 2.0 * e.c**2) / g.rho**2
    r1, r2 = g.factor_rho
    (a1, b1), (a2, b2) = e["blocks"]
    return ((a1**2 + b1**2) / r1[:, None] ** 2
            + (a2**2 + b2**2) / r2[None, :] ** 2
            + 2.0 * e["mixed"] ** 2 / (r1[:, None] * r2[None, :]))


def soliton_residual(g, profile):
    """``‖Ric - g + D²f‖`` in ``L²(dV_g)``."""
    e = soliton_tensor(g, profile)
    return float(np.sqrt(max(integrate(g, _soliton_norm_sq(g, e)), 0.0)))


def soliton_rate(g, profile):
    """``∫ |Ric - g + D²f|² e^{-f} dV_g``, the rate of increase of λ along
    the normalized Ricci flow."""
    e = soliton_tensor(g, profile)
    return integrate(g, _soliton_norm_sq(g, e) * profile.w.values**2)


# ---------------------------------------------------------------------------
# Variation directions
# ---------------------------------------------------------------------------


_KINDS = ("potential", "tensor", "conformal", "harmonic_form")


def _tup(x):
    return tuple(np.asarray(v, dtype=float) for v in x)


@dataclass(frozen=True, eq=False)
class VariationDirection:
    """A direction ``h = δg`` at a conformal metric.

    Kinds
    -----
    potential
        Kähler potential ``ψ``: ``ω_t = ω + t i∂∂̄ψ``, i.e.
        ``h = (Δ_c ψ) g`` on each factor. On the product only sums
        ``ψ1(x1) + ψ2(x2)`` are admissible (the mixed complex Hessian of a
        general ψ is not a product metric).
    tensor
        Arbitrary axisymmetric symmetric tensor on S² (round-frame
        components). It is reduced to a conformal rate plus a Lie
        derivative for the finite-difference path.
    conformal
        ``h = 2 δu_i g_i`` on each factor.
    harmonic_form
        ``θ = c1 ω1 + c2 ω2`` on the product, ``h = c1 g1 + c2 g2``,
        optionally with a potential part. Traceless: ``c1 + c2 = 0``.
    """

    kind: str
    psi: tuple = None
    tensor: SymTensorField = None
    du: tuple = None
    form: tuple = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown direction kind {self.kind!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def potential(cls, *psi):
        """``potential(psi)`` on S², ``potential(psi1, psi2)`` on the product."""
        vals = [p.values if isinstance(p, ScalarField) else p for p in psi]
        for v in vals:
            if np.ndim(v) != 1:
                raise DegenerateDirectionError(
                    "only factor-wise potentials are admissible directions"
                )
        return cls("potential", psi=_tup(vals))

    @classmethod
    def from_tensor(cls, h):
        return cls("tensor", tensor=h)

    @classmethod
    def conformal(cls, *du):
        vals = [d.values if isinstance(d, ScalarField) else d for d in du]
        return cls("conformal", du=_tup(vals))

    @classmethod
    def harmonic_form(cls, c1, c2, psi=None, meta=None):
        if abs(c1 + c2) > 1e-12 * max(1.0, abs(c1), abs(c2)):
            raise DegenerateDirectionError("harmonic form direction must be traceless")
        psi = None if psi is None else _tup(psi)
        return cls("harmonic_form", psi=psi, form=(float(c1), float(c2)),
                   meta=dict(meta or {}))

    # geometry -----------------------------------------------------------

    def _check(self, g):
        n_fac = 2 if g.is_product else 1
        if self.kind == "harmonic_form" and not g.is_product:
            raise NoHarmonicFormError("S² has no traceless harmonic (1,1)-form")
        if self.kind == "tensor" and g.is_product:
            raise ConfigurationError("tensor directions are supported on S² only")
        for part in (self.psi, self.du):
            if part is not None:
                if len(part) != n_fac:
                    raise ConfigurationError("direction and metric have different factors")
                for v in part:
                    if v.shape != (g.grid.n_nodes,):
                        raise ConfigurationError("direction and metric live on different grids")
        if self.tensor is not None and self.tensor.grid is not g.grid:
            raise ConfigurationError("direction and metric live on different grids")

    def potential_rates(self, g):
        """Per-factor ``Δ_{c,g} ψ_i`` (the relative change of the volume
        form per unit t)."""
        return tuple(0.5 * g.grid.round_laplacian(p) / r
                     for p, r in zip(self.psi, g.factor_rho))

    def conformal_rates(self, g):
        """Per-factor ``δu_i`` with ``h = 2 δu_i g_i`` (the conformal part
        of ``h``)."""
        self._check(g)
        nf = len(g.u)
        zero = tuple(np.zeros(g.grid.n_nodes) for _ in range(nf))
        if self.kind == "conformal":
            return self.du
        if self.kind == "potential":
            return tuple(0.5 * r for r in self.potential_rates(g))
        if self.kind == "harmonic_form":
            out = tuple(np.full(g.grid.n_nodes, 0.5 * c) for c in self.form)
            if self.psi is not None:
                out = tuple(o + 0.5 * r for o, r in zip(out, self.potential_rates(g)))
            return out
        du, _ = _reduce_tensor(g, self.tensor)
        return (du,) if nf == 1 else zero

    def tensor_components(self, g):
        """``h`` in the round coframe (S² only)."""
        self._check(g)
        if g.is_product:
            raise ConfigurationError("tensor components are available on S² only")
        if self.kind == "tensor":
            return self.tensor
        du = self.conformal_rates(g)[0]
        return SymTensorField.conformal(g.grid, 2.0 * du * g.rho)

    def trace(self, g):
        """``tr_g h``."""
        if g.is_product:
            return sum(4.0 * d[:, None] if i == 0 else 4.0 * d[None, :]
                       for i, d in enumerate(self.conformal_rates(g)))
        h = self.tensor_components(g)
        return (h.a + h.b) / g.rho

    def path(self, g, t):
        """Metric ``g_t`` along this direction.

        Potential directions follow ``ω + t i∂∂̄ψ`` exactly, harmonic forms
        the volume-preserving exponential path, conformal and tensor
        directions ``u + t δu``.
        """
        self._check(g)
        us = [np.asarray(u) for u in g.u]
        if self.kind in ("potential", "harmonic_form"):
            new = []
            rates = self.potential_rates(g) if self.psi is not None else [0.0] * len(us)
            forms = self.form or (0.0,) * len(us)
            for u, r, c in zip(us, rates, forms):
                factor = 1.0 + t * r
                if np.min(factor) <= 0:
                    raise DegenerateDirectionError(
                        f"potential path leaves the Kähler cone at t={t}"
                    )
                new.append(u + 0.5 * np.log(factor) + 0.5 * t * c)
        else:
            new = [u + t * d for u, d in zip(us, self.conformal_rates(g))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return g.with_u(*new, warn=False)


def _reduce_tensor(g, h):
    """Split ``h = 2 δu g + L_Z g`` on S² and return ``(δu, Z)``.

    ``Z♭ = sinθ (p e1 + q e2)`` with respect to ``g0``. The trace-free part
    of ``h`` fixes ``p`` and ``q`` up to conformal Killing fields, which do
    not change ``δu``.
    """
    from numpy.polynomial import legendre as npleg

    grid = g.grid
    rho = g.rho
    s2 = grid.sin2
    mu = grid.mu_nodes

    def antiderivative(vals):
        # Legendre coefficients in P_l (unnormalized)
        coef = grid.forward @ vals
        ell = grid.degrees
        coef = coef * np.sqrt((2 * ell + 1) / (4 * np.pi))
        return npleg.legval(mu, npleg.legint(coef))

    p = antiderivative(-(h.a - h.b) / (2.0 * rho * s2))
    q = antiderivative(-h.c / (rho * s2))
    u_mu = grid.d_mu(g.u[0])
    z_u = -s2 * p * u_mu
    div_z = -grid.d_mu(s2 * p)
    tr_lie = 2.0 * div_z + 4.0 * z_u
    du = 0.25 * ((h.a + h.b) / rho - tr_lie)
    return du, (p, q)


# ---------------------------------------------------------------------------
# First variation and the finite-difference oracle
# ---------------------------------------------------------------------------


def first_variation(g, profile, direction):
    """Analytic ``dλ(g + t h)/dt`` at ``t = 0``.

    ``-∫ <h, Ric - g + D²f>_g e^{-f} dV_g`` plus the multiplier term
    ``(λ - 2V)/(2V) ∫ tr_g h dV_g`` from holding ``∫ e^{-f} = V(g)``; the
    latter vanishes for volume-preserving ``h``.
    """
    if profile.metric is not g:
        if profile.metric.grid is not g.grid:
            raise ConfigurationError("profile and metric live on different grids")
    direction._check(g)
    w2 = profile.w.values**2
    e = soliton_tensor(g, profile)
    if g.is_product:
        du1, du2 = direction.conformal_rates(g)
        r1, r2 = g.factor_rho
        (a1, b1), (a2, b2) = e["blocks"]
        inner = (2.0 * du1[:, None] * (a1 + b1) / r1[:, None]
                 + 2.0 * du2[None, :] * (a2 + b2) / r2[None, :])
    else:
        h = direction.tensor_components(g)
        inner = (h.a * e.a + h.b * e.b + 2.0 * h.c * e.c) / g.rho**2
    vol = g.volume()
    tr = direction.trace(g)
    return (-integrate(g, inner * w2)
            + (profile.lam - 2.0 * vol) / (2.0 * vol) * integrate(g, tr))


@dataclass(frozen=True)
class FDEstimate:
    """Richardson-extrapolated central difference.

    ``value`` combines the stencils at ``eps`` and ``eps/2``; ``error`` is
    the difference between the extrapolated and the finer raw estimate.
    """

    value: float
    error: float
    order: int
    eps: float
    raw: tuple


def fd_lambda_derivative(g, direction, order=1, eps=1e-3, tol=DEFAULT_TOL,
                         scale=1.0):
    """Central finite difference of ``t ↦ λ(g_t)`` at ``t = 0``.

    Parameters
    ----------
    order : {1, 2}
    eps : float
        Coarse stencil spacing; the fine stencil uses ``eps/2``.
    scale : float
        Multiplies λ before differencing (0.5 gives Kähler normalization).
    """
    if order not in (1, 2):
        raise ConfigurationError("order must be 1 or 2")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")

    def lam(t):
        return scale * solve_minimizer(direction.path(g, t), tol=tol).lam

    lam0 = lam(0.0) if order == 2 else 0.0
    raw = []
    for h in (eps, 0.5 * eps):
        lp, lm = lam(h), lam(-h)
        if order == 1:
            raw.append((lp - lm) / (2.0 * h))
        else:
            raw.append((lp - 2.0 * lam0 + lm) / (h * h))
    value = (4.0 * raw[1] - raw[0]) / 3.0
    return FDEstimate(float(value), float(abs(value - raw[1])), order, eps, tuple(raw))
