"""Second variation of λ at the round (Kähler-Einstein) metrics.

Kähler-side operators act on potentials with the complex Laplacian
``Δ = ½ Δ_real`` (eigenvalue ``-ν``, ``ν = l(l+1)/2`` on the unit sphere):

    P0 ψ  = 2Δψ + ψ - (X + X̄)ψ        L1 ψ  = Δψ + ψ - Xψ
    L1' ψ = Δψ - Xψ                    D*D ψ = Δ²ψ + Δψ  (at X = 0)

Quadratic forms are reported in one of two normalizations. ``"kahler"`` is
the second derivative of λ/2 (the functional written with the Ricci form and
the complex Laplacian); ``"riemannian"`` is the second derivative of λ
itself and is twice as large.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .entropy import (
    VariationDirection,
    fd_lambda_derivative,
    solve_minimizer,
)
from .errors import (
    ConfigurationError,
    DegenerateDirectionError,
    NoHarmonicFormError,
    SolverError,
    UnsupportedBackgroundError,
)
from .sphere import (
    ConformalMetric,
    ScalarField,
    SpherePolynomialSpace,
    SymTensorField,
    curvature_action,
    divergence,
    double_divergence,
    hessian,
    lie_derivative_round,
    rough_laplacian,
    sym_gradient,
    tensor_inner,
)

__all__ = [
    "NORMALIZATIONS",
    "HolomorphicField",
    "ModalOperatorTable",
    "KernelBasis",
    "QuadraticFormReport",
    "apply_p0",
    "apply_p0_prime",
    "apply_l1",
    "apply_l1_bar",
    "apply_l1_prime",
    "apply_l1_prime_bar",
    "apply_dstar_d",
    "modal_table",
    "kernel_basis",
    "second_variation_fixed_class",
    "linearized_f_response",
    "fd_f_response",
    "potential_tensor",
    "lie_tensor",
    "commutator_norm",
    "second_variation_general",
    "traceless_class_direction",
    "cor21_direction",
    "riemannian_L",
    "stability_form",
    "quadratic_form_16",
]

NORMALIZATIONS = {"kahler": 0.5, "riemannian": 1.0}
ABS_TOL = 1e-6
REL_TOL = 1e-3


def _scale(normalization):
    try:
        return NORMALIZATIONS[normalization]
    except KeyError:
        raise ConfigurationError(
            f"normalization must be one of {sorted(NORMALIZATIONS)}"
        ) from None


def _values(grid, psi, strict=True, what="potential"):
    v = psi.values if isinstance(psi, ScalarField) else np.asarray(psi, dtype=float)
    if v.shape != (grid.n_nodes,):
        raise ConfigurationError(f"{what} must be a zonal field on the grid")
    return grid.band_limit(v, strict=strict, what=what)


# ---------------------------------------------------------------------------
# Kähler-side operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HolomorphicField:
    """Holomorphic vector field ``X`` entering the soliton operators.

    Described by a real zonal potential ``theta`` with ``X = ∇^{1,0} θ``,
    so that on real zonal functions ``X(ψ) = X̄(ψ) = ½ <dθ, dψ>`` in the
    complex normalization. ``theta=None`` is the zero field (the only one
    relevant at a Kähler-Einstein background).
    """

    theta: np.ndarray = None

    @property
    def is_zero(self):
        return self.theta is None or not np.any(self.theta)

    def apply(self, grid, psi):
        if self.is_zero:
            return np.zeros(grid.n_nodes)
        return 0.5 * grid.sin2 * grid.d_mu(self.theta) * grid.d_mu(psi)

    def apply_bar(self, grid, psi):
        # real zonal potentials: X̄ψ = conj(Xψ) = Xψ
        return self.apply(grid, psi)


ZERO_FIELD = HolomorphicField()


def _lap_c(grid, psi):
    return 0.5 * grid.round_laplacian(psi)


def apply_p0(grid, psi, x=ZERO_FIELD):
    """``P0 ψ = 2Δψ + ψ - (X + X̄)ψ``."""
    psi = np.asarray(psi, dtype=float)
    return 2.0 * _lap_c(grid, psi) + psi - x.apply(grid, psi) - x.apply_bar(grid, psi)


def apply_p0_prime(grid, psi, x=ZERO_FIELD):
    """``P0'``; coincides with ``P0`` on a Kähler-Einstein background."""
    return apply_p0(grid, psi, x)


def apply_l1(grid, psi, x=ZERO_FIELD):
    """``L1 ψ = Δψ + ψ - Xψ``."""
    psi = np.asarray(psi, dtype=float)
    return _lap_c(grid, psi) + psi - x.apply(grid, psi)


def apply_l1_bar(grid, psi, x=ZERO_FIELD):
    psi = np.asarray(psi, dtype=float)
    return _lap_c(grid, psi) + psi - x.apply_bar(grid, psi)


def apply_l1_prime(grid, psi, x=ZERO_FIELD):
    """``L1' ψ = Δψ - Xψ``."""
    psi = np.asarray(psi, dtype=float)
    return _lap_c(grid, psi) - x.apply(grid, psi)


def apply_l1_prime_bar(grid, psi, x=ZERO_FIELD):
    psi = np.asarray(psi, dtype=float)
    return _lap_c(grid, psi) - x.apply_bar(grid, psi)


def apply_dstar_d(grid, psi, x=ZERO_FIELD):
    """Lichnerowicz operator ``D*D = L1' L1`` on potentials."""
    return apply_l1_prime(grid, apply_l1(grid, psi, x), x)


def _modal_solve(grid, apply, eigen, rhs, x):
    """Invert a Kähler-side operator.

    At ``X = 0`` every operator is diagonal in zonal harmonics and is
    inverted by modal division; otherwise GMRES on the spectral
    coefficients. Zero modal eigenvalues raise rather than regularize.
    """
    coeffs = grid.to_modes(rhs)
    if x.is_zero:
        if np.any(np.abs(eigen) < 1e-13):
            raise SolverError("operator is singular on the band-limited space")
        return grid.to_nodal(coeffs / eigen)
    n = grid.l_max + 1
    op = LinearOperator((n, n), matvec=lambda c: grid.to_modes(apply(grid, grid.to_nodal(c), x)),
                        dtype=float)
    sol, info = gmres(op, coeffs, rtol=1e-13, atol=0.0, restart=n, maxiter=10 * n)
    if info != 0:
        raise SolverError("GMRES did not converge", {"info": info})
    return grid.to_nodal(sol)


def nu(l):
    """Complex-Laplacian eigenvalue magnitude ``l(l+1)/2``."""
    l = np.asarray(l, dtype=float)
    return 0.5 * l * (l + 1.0)


# ---------------------------------------------------------------------------
# Modal table
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModalOperatorTable:
    """Eigenvalues per degree at the round metric with ``X = 0``.

    ``residuals[name][l]`` is the collinearity defect of the assembled
    operator applied to the degree-``l`` zonal mode.
    """

    degrees: np.ndarray
    nu: np.ndarray
    p0: np.ndarray
    l1: np.ndarray
    l1_prime: np.ndarray
    p0_prime: np.ndarray
    dstar_d: np.ndarray
    residuals: dict = field(repr=False)

    OPERATORS = ("p0", "l1", "l1_prime", "p0_prime", "dstar_d")

    def rows(self):
        for i, l in enumerate(self.degrees):
            yield {
                "l": int(l),
                "nu": float(self.nu[i]),
                **{name: float(getattr(self, name)[i]) for name in self.OPERATORS},
                "max_residual": float(max(self.residuals[n][i] for n in self.OPERATORS)),
            }

    def fixed_class_factor(self):
        """Per-degree value of the fixed-class form on a unit mode
        (Kähler normalization): ``L1'² L1² / P0``."""
        return self.l1_prime**2 * self.l1**2 / self.p0


_APPLY = {
    "p0": apply_p0,
    "l1": apply_l1,
    "l1_prime": apply_l1_prime,
    "p0_prime": apply_p0_prime,
    "dstar_d": apply_dstar_d,
}


def modal_table(grid, l_max=None, background=None, tol=1e-10):
    """Tabulate and verify the Kähler-side operator spectra.

    Raises
    ------
    UnsupportedBackgroundError
        If ``background`` is given and is not the round metric.
    SolverError
        If an assembled operator fails the collinearity check.
    """
    if background is not None and (background.is_product or not background.is_round()):
        raise UnsupportedBackgroundError("modal table requires the round S² metric")
    l_max = grid.l_max if l_max is None else int(l_max)
    if l_max > grid.l_max or l_max < 0:
        raise ConfigurationError("l_max must not exceed the grid truncation")
    ls = np.arange(l_max + 1)
    n = nu(ls)
    closed = {
        "p0": 1.0 - 2.0 * n,
        "l1": 1.0 - n,
        "l1_prime": -n,
        "p0_prime": 1.0 - 2.0 * n,
        "dstar_d": n * (n - 1.0),
    }
    residuals = {}
    w = grid.area_weights
    for name, op in _APPLY.items():
        # defects are measured relative to the operator norm on the band,
        # the natural size of the transform round-off it amplifies
        full = nu(grid.degrees)
        norm = {
            "p0": np.abs(1.0 - 2.0 * full),
            "p0_prime": np.abs(1.0 - 2.0 * full),
            "l1": np.abs(1.0 - full),
            "l1_prime": full,
            "dstar_d": full * np.abs(full - 1.0),
        }[name].max()
        res = np.empty(l_max + 1)
        for l in ls:
            y = grid.basis[:, l]
            ay = op(grid, y)
            rayleigh = float(w @ (y * ay)) / float(w @ (y * y))
            res[l] = float(np.sqrt(w @ (ay - rayleigh * y) ** 2)) / max(1.0, norm)
            if res[l] > tol or abs(rayleigh - closed[name][l]) > tol * max(1.0, norm):
                raise SolverError(
                    f"operator {name} fails its modal check at l={l}",
                    {"rayleigh": rayleigh, "closed_form": closed[name][l], "residual": res[l]},
                )
        residuals[name] = res
    return ModalOperatorTable(
        degrees=ls, nu=n, residuals=residuals, **closed,
    )


# ---------------------------------------------------------------------------
# Kernel of the fixed-class second variation on the full sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Null directions of the fixed-class second variation on S².

    The second variation vanishes exactly on ``ker(L̄1'L1') ⊕ ker(L̄1 L1)``:
    constants (tag ``"constant"``, killed by ``L1'``) and holomorphy
    potentials ``θ_v + θ̄_v`` (tag ``"holomorphy_potential"``, killed by
    ``L1``). Elements are ``L²(dV)``-orthonormal functions in the ambient
    polynomial space, stored as monomial coefficient vectors.

    Attributes
    ----------
    residuals : ndarray
        Per element, the norm of its annihilating factor applied to it
        (``L̄1 L1`` for holomorphy potentials, ``L̄1' L1'`` for constants).
    form_residuals : ndarray
        Per element, ``‖P0⁻¹ L̄1'L1' L̄1L1 ψ‖``.
    l1l1_dimension : int
        ``dim ker(L̄1 L1)`` on its own.
    """

    space: SpherePolynomialSpace
    coefficients: np.ndarray
    tags: tuple
    degrees: tuple
    residuals: np.ndarray
    form_residuals: np.ndarray
    l1l1_residuals: np.ndarray
    l1l1_dimension: int
    spectrum: np.ndarray = field(repr=False)

    @property
    def dimension(self):
        return len(self.tags)

    def count(self, tag):
        return sum(t == tag for t in self.tags)

    def evaluate(self, points):
        """Values of every element at ``points`` (``(n, 3)`` on S²)."""
        return self.space.evaluate(points) @ self.coefficients

    def gram(self):
        m = self.space.mass_matrix()
        return self.coefficients.T @ m @ self.coefficients


def _space_operators(space):
    q = space.orthonormal_basis()
    stiff = q.T @ space.stiffness_matrix() @ q
    stiff = 0.5 * (stiff + stiff.T)
    lap_c = -0.5 * stiff
    eye = np.eye(lap_c.shape[0])
    return q, lap_c, eye


def kernel_basis(degree=4, rel_tol=1e-8):
    """Compute the null space of the fixed-class second variation.

    Parameters
    ----------
    degree : int
        Polynomial degree of the ambient trial space; it must be at least 2
        so that non-kernel modes are present.
    rel_tol : float
        Eigenvalues below ``rel_tol`` times the largest count as zero.
    """
    if degree < 2:
        raise ConfigurationError("kernel computation needs degree >= 2")
    space = SpherePolynomialSpace(degree)
    q, lap_c, eye = _space_operators(space)
    l1 = lap_c + eye
    l1p = lap_c
    p0 = 2.0 * lap_c + eye
    l1l1 = l1.T @ l1
    l1pl1p = l1p.T @ l1p
    form = np.linalg.solve(p0, l1pl1p @ l1l1)
    form = 0.5 * (form + form.T)
    vals, vecs = np.linalg.eigh(form)
    scale = float(np.max(np.abs(vals)))
    null = np.abs(vals) <= rel_tol * scale
    kern = vecs[:, null]
    # split the null space by Laplacian eigenvalue
    lap_k = kern.T @ lap_c @ kern
    lvals, lvecs = np.linalg.eigh(0.5 * (lap_k + lap_k.T))
    order = np.argsort(-lvals, kind="stable")
    kern = kern @ lvecs[:, order]
    lvals = lvals[order]
    tags, degs, res, fres, lres = [], [], [], [], []
    for j in range(kern.shape[1]):
        v = kern[:, j]
        r_l1 = float(np.linalg.norm(l1l1 @ v))
        r_l1p = float(np.linalg.norm(l1pl1p @ v))
        lres.append(r_l1)
        fres.append(float(np.linalg.norm(form @ v)))
        l_est = 0.5 * (-1.0 + np.sqrt(max(1.0 - 8.0 * lvals[j], 0.0)))
        degs.append(int(round(l_est)))
        if r_l1 <= r_l1p:
            tags.append("holomorphy_potential")
            res.append(r_l1)
        else:
            tags.append("constant")
            res.append(r_l1p)
    l1_vals = np.linalg.eigvalsh(l1l1)
    l1l1_dim = int(np.sum(np.abs(l1_vals) <= rel_tol * float(np.max(np.abs(l1_vals)))))
    return KernelBasis(
        space=space,
        coefficients=q @ kern,
        tags=tuple(tags),
        degrees=tuple(degs),
        residuals=np.array(res),
        form_residuals=np.array(fres),
        l1l1_residuals=np.array(lres),
        l1l1_dimension=l1l1_dim,
        spectrum=vals,
    )


# ---------------------------------------------------------------------------
# Quadratic-form reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFormReport:
    """Analytic second variation with its finite-difference cross-check.

    ``status`` is ``"PASSED"`` when ``|analytic - oracle| <=
    max(abs_tol, rel_tol |analytic|)``, ``"FAILED"`` otherwise and
    ``"UNCHECKED"`` without an oracle.
    """

    direction: str
    analytic: float
    normalization: str
    oracle: float = None
    oracle_error: float = None
    abs_tol: float = ABS_TOL
    rel_tol: float = REL_TOL
    kernel: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def sign(self):
        if abs(self.analytic) <= 1e-9:
            return "zero"
        return "positive" if self.analytic > 0 else "negative"

    @property
    def discrepancy(self):
        if self.oracle is None:
            return None
        return abs(self.analytic - self.oracle)

    @property
    def status(self):
        if self.oracle is None:
            return "UNCHECKED"
        bound = max(self.abs_tol, self.rel_tol * abs(self.analytic))
        return "PASSED" if self.discrepancy <= bound else "FAILED"

    def as_dict(self):
        return {
            "direction": self.direction,
            "analytic": self.analytic,
            "oracle": self.oracle,
            "oracle_error": self.oracle_error,
            "normalization": self.normalization,
            "sign": self.sign,
            "kernel": self.kernel,
            "status": self.status,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
        }


def _fd_eps(rates, eps):
    # keep the potential path well inside the Kähler cone
    peak = max(float(np.max(np.abs(r))) for r in rates) if rates else 0.0
    if peak * eps > 0.02:
        eps = 0.02 / peak
    return eps


def _fixed_class_value(grid, coeffs):
    ls = grid.degrees
    n = nu(ls)
    factor = n**2 * (n - 1.0) ** 2 / (1.0 - 2.0 * n)
    return float(np.sum(coeffs**2 * factor))


def second_variation_fixed_class(psi, grid=None, fd=True, normalization="kahler",
                                 eps=1e-3, strict=True):
    """Second variation of λ along ``ω + t i∂∂̄ψ`` at the round S².

    The analytic value is ``∫ ψ P0⁻¹ (L̄1'L1')(L̄1L1) ψ dV`` by modal
    diagonalization; with ``fd=True`` the report carries the second
    difference of λ along the exact potential path.

    Raises
    ------
    AliasingError
        If ``psi`` has content above ``l_max`` (``strict=True``).
    """
    if grid is None:
        if not isinstance(psi, ScalarField):
            raise ConfigurationError("grid is required for raw arrays")
        grid = psi.grid
    v = _values(grid, psi, strict=strict)
    s = _scale(normalization)
    coeffs = grid.to_modes(v)
    analytic = 2.0 * s * _fixed_class_value(grid, coeffs)
    kernel = bool(np.all(np.abs(coeffs[2:]) <= 1e-12 * max(1.0, float(np.max(np.abs(coeffs))))))
    oracle = err = None
    if fd:
        g = ConformalMetric.sphere(grid)
        d = VariationDirection.potential(v)
        est = fd_lambda_derivative(g, d, order=2, eps=_fd_eps(d.potential_rates(g), eps),
                                   scale=s)
        oracle, err = est.value, est.error
    return QuadraticFormReport(
        direction="potential(" + _describe_modes(coeffs) + ")",
        analytic=analytic,
        normalization=normalization,
        oracle=oracle,
        oracle_error=err,
        kernel=kernel,
        extra={"coefficients": coeffs},
    )


def _describe_modes(coeffs, tol=1e-12):
    active = [l for l, c in enumerate(coeffs) if abs(c) > tol]
    if not active:
        return "0"
    if len(active) == 1:
        return f"l={active[0]}"
    return f"l={active[0]}..{active[-1]}"


def linearized_f_response(psi, grid=None, x=ZERO_FIELD, tol=1e-9):
    """``u = df_t/dt`` along ``ω + t i∂∂̄ψ`` at the round S².

    Solves ``P0(u - X(ψ)) = (L1' L1) ψ``. The returned field carries the
    achieved residual ``‖P0(u - Xψ) - L1'L1ψ‖`` in ``L²(dV)`` as
    ``residual``.
    """
    if grid is None:
        grid = psi.grid
    v = _values(grid, psi)
    rhs = apply_l1_prime(grid, apply_l1(grid, v, x), x)
    eig = 1.0 - 2.0 * nu(grid.degrees)
    shifted = _modal_solve(grid, apply_p0, eig, rhs, x)
    u = shifted + x.apply(grid, v)
    defect = apply_p0(grid, u - x.apply(grid, v), x) - rhs
    resid = float(np.sqrt(grid.area_weights @ defect**2))
    if resid > tol * max(1.0, float(np.sqrt(grid.area_weights @ rhs**2))):
        raise SolverError("P0 solve residual above tolerance", {"residual": resid})
    out = ScalarField(grid, u)
    object.__setattr__(out, "residual", resid)
    return out


def second_variation_general(metric, theta=None, psi=None, fd=True,
                             normalization="kahler", eps=1e-3):
    """Second variation along ``ω + t(θ + i∂∂̄ψ)`` at a round background.

    ``∫ ‖θ‖² dV + ∫ <D*Dψ, P0'⁻¹ D*Dψ> dV``. On S² ``θ`` must be ``None``;
    on S²×S² ``θ`` is a ``harmonic_form`` direction and ``ψ`` a pair of
    factor potentials. ``‖θ‖²`` is the Hermitian norm in Kähler
    normalization and the full tensor contraction (twice it) in Riemannian
    normalization.
    """
    if not metric.is_round():
        raise UnsupportedBackgroundError("second variation needs a round background")
    grid = metric.grid
    s = _scale(normalization)
    if theta is not None and not metric.is_product:
        raise NoHarmonicFormError("S² has no traceless harmonic (1,1)-form")
    if theta is not None and theta.kind != "harmonic_form":
        raise ConfigurationError("theta must be a harmonic_form direction")
    n_fac = 2 if metric.is_product else 1
    if psi is None:
        psis = tuple(np.zeros(grid.n_nodes) for _ in range(n_fac))
    elif metric.is_product:
        psis = tuple(_values(grid, p) for p in psi)
    else:
        psis = (_values(grid, psi),)
    if len(psis) != n_fac:
        raise ConfigurationError("one potential per factor is required")
    area = 4.0 * np.pi
    other = area ** (n_fac - 1)
    theta_part = 0.0
    c = (0.0, 0.0)
    if theta is not None:
        c = theta.form
        theta_part = (c[0] ** 2 + c[1] ** 2) * metric.volume()
    pot_part = sum(other * _fixed_class_value(grid, grid.to_modes(p)) for p in psis)
    analytic = 2.0 * s * (theta_part + pot_part)
    oracle = err = None
    if fd:
        if metric.is_product:
            d = VariationDirection.harmonic_form(c[0], c[1], psi=psis)
        else:
            d = VariationDirection.potential(psis[0])
        rates = list(d.potential_rates(metric)) if d.psi is not None else []
        est = fd_lambda_derivative(metric, d, order=2, eps=_fd_eps(rates, eps), scale=s)
        oracle, err = est.value, est.error
    desc = f"theta=({c[0]:g},{c[1]:g})" if theta is not None else "theta=0"
    desc += ", psi=" + ",".join(_describe_modes(grid.to_modes(p)) for p in psis)
    return QuadraticFormReport(
        direction=desc,
        analytic=analytic,
        normalization=normalization,
        oracle=oracle,
        oracle_error=err,
        kernel=abs(analytic) <= 1e-12,
        extra={"theta_part": 2.0 * s * theta_part, "potential_part": 2.0 * s * pot_part},
    )


def traceless_class_direction(p=1.0, q=-1.0, a=1.0, metric=None):
    """Traceless class-changing direction from ``ω' = p ω1 + q ω2``.

    Returns ``θ = a ω' + b ω`` with ``a tr_ω ω' + b n = 0`` (``n = 2``),
    so ``tr_ω θ ≡ 0``. The coefficients are stored in ``meta``.

    Raises
    ------
    DegenerateDirectionError
        If ``ω'`` is proportional to ``ω`` (``p == q``), or if ``metric`` is
        given and is not a product (S² has a one-dimensional ``H^{1,1}``).
    """
    if metric is not None and not metric.is_product:
        raise NoHarmonicFormError("S² has no traceless harmonic (1,1)-form")
    if abs(p - q) <= 1e-14 * max(1.0, abs(p), abs(q)):
        raise DegenerateDirectionError("ω' is proportional to the Kähler class")
    if a == 0:
        raise DegenerateDirectionError("a must be non-zero")
    n = 2.0
    b = -a * (p + q) / n
    c1, c2 = a * p + b, a * q + b
    return VariationDirection.harmonic_form(
        c1, c2, meta={"a": float(a), "b": float(b), "omega_prime": (float(p), float(q))}
    )


# ---------------------------------------------------------------------------
# Riemannian second-variation operator on the round S²
# ---------------------------------------------------------------------------


def _p_solve(grid, rhs):
    """Solve ``P u = rhs`` with ``P = 2Δ + 2`` by modal division."""
    l = grid.degrees.astype(float)
    eig = 2.0 - 2.0 * l * (l + 1.0)
    return grid.to_nodal(grid.to_modes(rhs) / eig)


def riemannian_L(h, background=None):
    """Apply the Riemannian stability operator at the round S².

    ``Lh = -½ D*D h + Rm(h) + δ*δ h + ½ D²(tr h) - D²u`` where ``u`` solves
    ``P u = Δ tr h + tr h - div div h`` with ``P = 2Δ + 2``. Here ``D*D`` is
    the rough Laplacian on tensors, ``Rm(h) = g tr h - h`` and
    ``δ*δ h = -sym ∇(div h)``.
    """
    if background is not None and (background.is_product or not background.is_round()):
        raise UnsupportedBackgroundError("the stability operator is assembled at the round S²")
    grid = h.grid
    tr = h.trace()
    l_prime = grid.round_laplacian(tr) + tr - double_divergence(h)
    u = _p_solve(grid, l_prime)
    div_h = divergence(h)
    term = (
        0.5 * rough_laplacian(h)
        + curvature_action(h)
        - sym_gradient(div_h)
        + 0.5 * hessian(grid, tr)
        - hessian(grid, u)
    )
    return term


def stability_form(h, fd=True, normalization="riemannian", eps=1e-3):
    """``(h, Lh) = ∫ <h, Lh> dV`` at the round S² with a finite-difference
    cross-check along the conformal reduction of ``h``."""
    if not isinstance(h, SymTensorField):
        raise ConfigurationError("h must be a SymTensorField")
    grid = h.grid
    s = _scale(normalization)
    lh = riemannian_L(h)
    analytic = s * float(grid.area_weights @ tensor_inner(h, lh))
    oracle = err = None
    if fd:
        g = ConformalMetric.sphere(grid)
        d = VariationDirection.from_tensor(h)
        du = d.conformal_rates(g)[0]
        peak = float(np.max(np.abs(du)))
        if peak == 0.0:
            oracle, err = 0.0, 0.0
        else:
            est = fd_lambda_derivative(g, d, order=2, eps=min(eps, 0.02 / peak), scale=s)
            oracle, err = est.value, est.error
    return QuadraticFormReport(
        direction="tensor",
        analytic=analytic,
        normalization=normalization,
        oracle=oracle,
        oracle_error=err,
        kernel=abs(analytic) <= 1e-6,
    )


# public aliases kept for callers that use the original operation names
cor21_direction = traceless_class_direction
quadratic_form_16 = stability_form

def potential_tensor(grid, psi):
    """Riemannian form ``(Δ_c ψ) g0`` of the Kähler direction ``i∂∂̄ψ``."""
    v = _values(grid, psi)
    return SymTensorField.conformal(grid, 0.5 * grid.round_laplacian(v))


def lie_tensor(grid, p, q=None):
    """``L_Z g0`` for ``Z♭ = sinθ (p e1 + q e2)``."""
    q = np.zeros(grid.n_nodes) if q is None else q
    return lie_derivative_round(grid, p, q)


def commutator_norm(grid, a, b, psi, x=ZERO_FIELD):
    """``‖[A, B] ψ‖`` in ``L²(dV0)`` for two of the Kähler-side operators."""
    ab = a(grid, b(grid, psi, x), x)
    ba = b(grid, a(grid, psi, x), x)
    return float(np.sqrt(grid.area_weights @ (ab - ba) ** 2))



def fd_f_response(psi, grid=None, eps=1e-4, tol=1e-12):
    """Richardson central difference of the solved minimizer ``f_t`` along
    ``ω + t i∂∂̄ψ`` at the round S² (nodal values)."""
    if grid is None:
        grid = psi.grid
    v = _values(grid, psi)
    g = ConformalMetric.sphere(grid)
    d = VariationDirection.potential(v)
    eps = _fd_eps(d.potential_rates(g), eps)

    def f_at(t):
        return solve_minimizer(d.path(g, t), tol=tol).f.values

    coarse = (f_at(eps) - f_at(-eps)) / (2.0 * eps)
    fine = (f_at(0.5 * eps) - f_at(-0.5 * eps)) / eps
    return (4.0 * fine - coarse) / 3.0
