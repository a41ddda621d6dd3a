"""Normalized Ricci flow of conformal metrics on S², gauge fixing and the
extremum audit.

On ``g = e^{2u} g0`` the normalized flow ``∂g/∂t = -Ric + g`` reads

    ∂u/∂t = (1 - K) / 2 = ½ (1 - e^{-2u}) + ½ e^{-2u} Δ0 u.

The IMEX step treats the diffusion ``½ e^{-2u} Δ0 u`` implicitly with the
coefficient frozen at the old time level and the reaction term explicitly,
then restores the area ``4π`` by a constant shift of ``u``.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.optimize import brentq

from .entropy import solve_minimizer, soliton_rate, soliton_residual
from .errors import ConfigurationError, SolverError, StepRejectedError
from .sphere import ConformalMetric, gauss_curvature

__all__ = [
    "TRAJECTORY_COLUMNS",
    "FlowConfig",
    "FlowRecord",
    "FlowState",
    "FlowResult",
    "mobius_factor",
    "mobius_metric",
    "pullback_mobius",
    "gauge_fix",
    "distance_to_round",
    "initial_state",
    "step",
    "run_to_convergence",
    "extremum_audit",
    "AuditReport",
    "random_metric",
    "trajectory_csv",
]

TRAJECTORY_COLUMNS = ("t", "lambda", "soliton_residual", "dist_to_round", "area")
ROUND_LAMBDA = 8.0 * np.pi
AREA = 4.0 * np.pi


# ---------------------------------------------------------------------------
# Möbius gauge
# ---------------------------------------------------------------------------


def mobius_factor(mu, s):
    """Conformal factor ``u_s`` of the zonal Möbius map ``φ_s``:
    ``φ_s^* g0 = e^{2 u_s} g0`` with ``u_s = -ln(cosh s + mu sinh s)``."""
    return -np.log(np.cosh(s) + mu * np.sinh(s))


def mobius_map(mu, s):
    """``φ_s`` in the ``mu`` coordinate."""
    return (mu * np.cosh(s) + np.sinh(s)) / (np.cosh(s) + mu * np.sinh(s))


def mobius_metric(grid, s):
    """The round metric pulled back by ``φ_s``."""
    return ConformalMetric.sphere(grid, mobius_factor(grid.mu_nodes, s), warn=False)


def _pullback_values(grid, u, s):
    # evaluate the band-limited interpolant of u at the displaced nodes
    coeffs = grid.forward @ u
    ell = grid.degrees
    leg = coeffs * np.sqrt((2 * ell + 1) / (4 * np.pi))
    mu = grid.mu_nodes
    return npleg.legval(mobius_map(mu, s), leg) + mobius_factor(mu, s)


def pullback_mobius(g, s):
    """``φ_s^* g`` as a conformal metric (truncated to ``l_max``)."""
    if g.is_product:
        raise ConfigurationError("gauge fixing is implemented on S² only")
    return ConformalMetric.sphere(g.grid, _pullback_values(g.grid, g.u[0], s), warn=False)


def _dipole(grid, u):
    return float(grid.forward[1] @ u)


def gauge_fix(g, tol=1e-14):
    """Möbius representative of ``g`` whose ``u`` has no ``l = 1`` part.

    The dipole coefficient of ``u ∘ φ_s + u_s`` is driven to zero by a
    bracketing root search in ``s``. Metrics that already satisfy the
    normalization are returned unchanged.
    """
    if g.is_product:
        raise ConfigurationError("gauge fixing is implemented on S² only")
    grid = g.grid
    u = g.u[0]
    if abs(_dipole(grid, u)) <= tol:
        return g

    def dip(s):
        return _dipole(grid, _pullback_values(grid, u, s))

    d0 = dip(0.0)
    width = 0.25
    lo = hi = 0.0
    for _ in range(40):
        lo, hi = -width, width
        if dip(lo) * d0 < 0 or dip(hi) * d0 < 0:
            break
        width *= 1.6
    else:
        raise SolverError("no Möbius normalization found", {"dipole": d0})
    a, b = (lo, 0.0) if dip(lo) * d0 < 0 else (0.0, hi)
    s = brentq(dip, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return pullback_mobius(g, s)


def distance_to_round(g):
    """``max |u|`` of the gauge-fixed representative."""
    return float(np.max(np.abs(gauge_fix(g).u[0])))


# ---------------------------------------------------------------------------
# Flow state and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowConfig:
    """Integration settings.

    Parameters
    ----------
    dt : float
        Initial (and, with ``dt_policy="fixed"``, constant) step.
    dt_policy : {"adaptive", "fixed"}
        Adaptive steps grow by ``growth`` after acceptance, up to ``dt_max``
        and to the curvature bound ``cfl / max|1 - K|``.
    integrator : {"imex", "rk4"}
    refresh_every : int
        λ is recomputed every this many steps (1 by default; the
        monotonicity audit only uses refreshed values).
    """

    t_end: float = 50.0
    dt: float = 0.05
    dt_policy: str = "adaptive"
    dt_max: float = 0.25
    dt_min: float = 1e-8
    growth: float = 1.25
    cfl: float = 0.2
    integrator: str = "imex"
    gauge: str = "center_of_mass"
    refresh_every: int = 1
    dist_tol: float = 1e-6
    residual_tol: float = 1e-8
    monotonicity_tol: float = 1e-10
    max_rejections: int = 10
    max_steps: int = 100000
    solver_tol: float = 1e-10

    def __post_init__(self):
        if not (self.dt > 0 and self.dt_max > 0 and self.t_end >= 0):
            raise ConfigurationError("dt, dt_max must be positive and t_end non-negative")
        if self.dist_tol <= 0 or self.residual_tol <= 0:
            raise ConfigurationError("thresholds must be positive")
        if self.dt_policy not in ("adaptive", "fixed"):
            raise ConfigurationError(f"unknown dt policy {self.dt_policy!r}")
        if self.integrator not in ("imex", "rk4"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.gauge not in ("center_of_mass", "none"):
            raise ConfigurationError(f"unknown gauge mode {self.gauge!r}")
        if self.refresh_every < 1:
            raise ConfigurationError("refresh_every must be >= 1")


@dataclass(frozen=True)
class FlowRecord:
    t: float
    lam: float
    soliton_residual: float
    dist_to_round: float
    area: float
    rate: float = float("nan")

    def row(self):
        return (self.t, self.lam, self.soliton_residual, self.dist_to_round, self.area)


@dataclass
class FlowState:
    """Single-owner trajectory state; :func:`step` returns a new state whose
    history extends this one."""

    metric: ConformalMetric
    time: float
    profile: object
    history: list = field(default_factory=list)
    steps: int = 0
    rejections: int = 0
    dt: float = 0.05

    @property
    def lam(self):
        return self.profile.lam


def _record(g, t, profile, gauge="center_of_mass"):
    dist = distance_to_round(g) if gauge == "center_of_mass" else float(np.max(np.abs(g.u[0])))
    return FlowRecord(
        t=float(t),
        lam=float(profile.lam),
        soliton_residual=soliton_residual(g, profile),
        dist_to_round=dist,
        area=g.volume(),
        rate=soliton_rate(g, profile),
    )


def initial_state(u0, grid=None, config=None):
    """Flow state at ``t = 0`` from ``u0`` (normalized to area 4π)."""
    config = config or FlowConfig()
    if isinstance(u0, ConformalMetric):
        g = u0
    else:
        g = ConformalMetric.sphere(grid, u0)
    if g.is_product:
        raise ConfigurationError("the flow is implemented on S² only")
    g = g.normalized(AREA)
    prof = solve_minimizer(g, tol=config.solver_tol)
    return FlowState(metric=g, time=0.0, profile=prof, history=[_record(g, 0.0, prof, config.gauge)],
                     dt=config.dt)


def _rhs(grid, u):
    k = np.exp(-2.0 * u) * (1.0 - grid.round_laplacian(u))
    return 0.5 * (1.0 - k)


def _imex(grid, u, dt):
    e = np.exp(-2.0 * u)
    lam = grid.lap_eigenvalues
    op = np.eye(grid.l_max + 1) - 0.5 * dt * (grid.forward * e) @ (grid.basis * lam)
    rhs = grid.forward @ u + 0.5 * dt * (grid.forward @ (1.0 - e))
    return grid.basis @ np.linalg.solve(op, rhs)


def _rk4(grid, u, dt):
    k1 = _rhs(grid, u)
    k2 = _rhs(grid, u + 0.5 * dt * k1)
    k3 = _rhs(grid, u + 0.5 * dt * k2)
    k4 = _rhs(grid, u + dt * k3)
    return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _curvature_bound(g, config):
    k = gauss_curvature(g).values
    dev = float(np.max(np.abs(1.0 - k)))
    return config.dt_max if dev == 0 else min(config.dt_max, config.cfl / dev)


def step(state, dt=None, config=None):
    """Advance one accepted step.

    A step that lowers λ by more than ``monotonicity_tol`` (or produces a
    non-finite field) is retried with half the step, at most
    ``max_rejections`` times.

    Raises
    ------
    StepRejectedError
        After ``max_rejections`` consecutive rejections; the diagnostics
        carry the partial trajectory.
    """
    config = config or FlowConfig()
    g = state.metric
    grid = g.grid
    dt = state.dt if dt is None else float(dt)
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    advance = _imex if config.integrator == "imex" else _rk4
    refresh = (state.steps + 1) % config.refresh_every == 0
    rejections = 0
    while True:
        u_new = advance(grid, g.u[0], dt)
        ok = np.all(np.isfinite(u_new))
        if ok:
            trial = ConformalMetric.sphere(grid, u_new, warn=False).normalized(AREA)
            try:
                prof = solve_minimizer(trial, tol=config.solver_tol) if refresh else state.profile
            except SolverError:
                ok = False
            if ok and refresh and prof.lam < state.profile.lam - config.monotonicity_tol:
                ok = False
        if ok:
            break
        rejections += 1
        if rejections >= config.max_rejections:
            raise StepRejectedError(
                f"step rejected {rejections} times at t={state.time:.6g}",
                {"history": [r.row() for r in state.history], "dt": dt},
            )
        dt *= 0.5
    t_new = state.time + dt
    history = list(state.history)
    if refresh:
        history.append(_record(trial, t_new, prof, config.gauge))
    next_dt = dt
    if config.dt_policy == "adaptive":
        next_dt = min(dt * config.growth, _curvature_bound(trial, config))
        next_dt = max(next_dt, config.dt_min)
    return FlowState(metric=trial, time=t_new, profile=prof, history=history,
                     steps=state.steps + 1, rejections=state.rejections + rejections,
                     dt=next_dt)


@dataclass(frozen=True)
class FlowResult:
    state: FlowState
    verdict: str
    converged_at: float = None

    @property
    def history(self):
        return self.state.history

    def max_lambda_drop(self):
        lams = [r.lam for r in self.state.history]
        drops = [lams[i] - lams[i + 1] for i in range(len(lams) - 1)]
        return max(drops, default=0.0)


def _converged(rec, config):
    return rec.dist_to_round < config.dist_tol and rec.soliton_residual < config.residual_tol


def run_to_convergence(u0, grid=None, config=None):
    """Integrate until the gauge-fixed metric is round or ``t_end``.

    Returns a :class:`FlowResult` with verdict ``"converged_to_KE"`` or
    ``"not_converged"``. Step failures propagate with the partial
    trajectory attached.
    """
    config = config or FlowConfig()
    state = u0 if isinstance(u0, FlowState) else initial_state(u0, grid, config)
    if _converged(state.history[-1], config):
        return FlowResult(state, "converged_to_KE", state.time)
    while state.time < config.t_end and state.steps < config.max_steps:
        dt = min(state.dt, config.t_end - state.time)
        if config.dt_policy == "fixed":
            dt = min(config.dt, config.t_end - state.time)
        state = step(state, dt, config)
        rec = state.history[-1]
        if rec.t == state.time and _converged(rec, config):
            return FlowResult(state, "converged_to_KE", state.time)
    return FlowResult(state, "not_converged")


def trajectory_csv(history, tolerance=None):
    """CSV text of a trajectory; ``tolerance`` adds a per-row column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(TRAJECTORY_COLUMNS)
    if tolerance is not None:
        cols.append("monotonicity_tol")
    writer.writerow(cols)
    for rec in history:
        row = [repr(float(x)) for x in rec.row()]
        if tolerance is not None:
            row.append(repr(float(tolerance)))
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Extremum audit
# ---------------------------------------------------------------------------


def random_metric(grid, rng, modes=(1, 8), max_amplitude=0.3):
    """Random band-limited conformal metric of area 4π with ``max |u|``
    drawn uniformly in ``(0, max_amplitude]`` (before normalization)."""
    lo, hi = modes
    coeffs = np.zeros(grid.l_max + 1)
    coeffs[lo:hi + 1] = rng.normal(size=hi - lo + 1)
    u = grid.basis @ coeffs
    amp = max_amplitude * (1.0 - rng.random())
    u *= amp / float(np.max(np.abs(u)))
    return ConformalMetric.sphere(grid, u).normalized(AREA)


@dataclass(frozen=True)
class AuditReport:
    """One row per sample: λ, gap ``8π - λ``, gauge-fixed distance and the
    verdict for that sample."""

    rows: tuple
    eq_tol: float
    dist_tol: float

    @property
    def passed(self):
        return all(r["ok"] for r in self.rows)

    @property
    def counterexamples(self):
        return [r for r in self.rows if not r["ok"]]


def extremum_audit(samples, eq_tol=1e-8, dist_tol=1e-6, solver_tol=1e-10):
    """Check ``λ(g) <= 8π`` with equality only near the round metric.

    ``eq_tol`` is relative to ``8π``. A sample fails when λ exceeds ``8π``
    beyond the tolerance, or when it attains ``8π`` while its gauge-fixed
    distance to the round metric is at least ``dist_tol``.
    """
    rows = []
    bound = eq_tol * ROUND_LAMBDA
    for i, g in enumerate(samples):
        prof = solve_minimizer(g, tol=solver_tol)
        gap = ROUND_LAMBDA - prof.lam
        dist = distance_to_round(g)
        equal = abs(gap) <= bound
        ok = gap >= -bound and (not equal or dist < dist_tol)
        rows.append({"index": i, "lambda": prof.lam, "gap": gap, "dist_to_round": dist,
                     "equality": equal, "ok": ok})
    return AuditReport(tuple(rows), eq_tol, dist_tol)

