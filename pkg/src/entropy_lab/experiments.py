"""Scenario configs, deterministic runners and the acceptance aggregator.

A scenario is an INI file::

    [scenario]
    name = round_lambda
    kind = lambda
    geometry = sphere
    seed = 0
    criterion = 1

    [grid]
    l_max = 32

    [parameters]
    modes =
    amplitudes =

    [tolerances]
    lambda_rel = 1e-8

Every key is validated against the schema of its kind before anything is
computed. Running a scenario writes ``<name>.csv`` (the canonical table),
``<name>.checks.csv`` (one judged number per row with its tolerance),
``<name>.json`` (machine-readable mirror with the config echo) and, for flow
scenarios, one trajectory CSV per run. Wall-clock times are returned in the
:class:`RunArtifact` and printed, never written, so artifacts are
byte-stable.
"""

import configparser
import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import entropy, flow, sphere, variation
from .errors import AliasingError, ConfigurationError, EntropyLabError, SolverError

__all__ = [
    "KINDS",
    "CRITERIA",
    "Scenario",
    "Check",
    "RunArtifact",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "run_validated",
    "acceptance",
    "thread_cap",
]

CRITERIA = tuple(range(1, 11))
GEOMETRIES = ("sphere", "product")

_INT = "int"
_FLOAT = "float"
_INTS = "ints"
_FLOATS = "floats"
_STR = "str"
_STRS = "strs"

SCENARIO_KEYS = {
    "name": _STR,
    "kind": _STR,
    "geometry": _STR,
    "seed": _INT,
    "criterion": _INT,
    "description": _STR,
}
GRID_KEYS = {"l_max": _INT, "n_nodes": _INT}

# per kind: (parameter schema with defaults, tolerance defaults)
SCHEMAS = {
    "lambda": (
        {"modes": (_INTS, []), "amplitudes": (_FLOATS, []), "max_runtime": (_FLOAT, 1.0)},
        {"lambda_rel": 1e-8, "f_abs": 1e-8, "multiplier_abs": 1e-9, "residual": 1e-10},
    ),
    "spectrum": (
        {"table_l_max": (_INT, 8)},
        {"collinearity": 1e-10},
    ),
    "first_variation": (
        {"pairs": (_INT, 20), "metric_max_degree": (_INT, 5), "metric_amplitude": (_FLOAT, 0.3),
         "direction_max_degree": (_INT, 5), "round_directions": (_INT, 20), "fd_eps": (_FLOAT, 1e-3)},
        {"fd_rel": 1e-6, "round_abs": 1e-9},
    ),
    "variation_fixed_class": (
        {"modes": (_INTS, [1, 2, 3, 4, 5, 6]), "random_samples": (_INT, 20),
         "random_max_degree": (_INT, 8)},
        {"closed_form_rel": 1e-4, "fd_rel": 1e-3, "fd_abs": 1e-6, "nonpositive": 1e-9},
    ),
    "kernel": (
        {"degree": (_INT, 4)},
        {"residual": 1e-9},
    ),
    "variation_general": (
        {"p": (_FLOAT, 1.0), "q": (_FLOAT, -1.0), "a": (_FLOAT, 2.0), "closed_form_a": (_FLOATS, [0.05, 0.1])},
        {"closed_form_rel": 1e-3, "fd_rel": 1e-3, "lambda_rel": 1e-10},
    ),
    "riemannian_L": (
        {"modes": (_INTS, [0, 1, 2, 3, 4, 5, 6]), "lie_samples": (_INT, 10), "lie_max_degree": (_INT, 5)},
        {"consistency_abs": 1e-6, "lie_abs": 1e-6, "fd_rel": 1e-3},
    ),
    "f_response": (
        {"samples": (_INT, 20), "max_degree": (_INT, 8), "fd_eps": (_FLOAT, 1e-4)},
        {"residual": 1e-9, "fd_abs": 1e-6},
    ),
    "flow": (
        {"mode": (_INT, 2), "amplitude": (_FLOAT, 0.05), "t_end": (_FLOAT, 50.0), "dt": (_FLOAT, 0.05),
         "integrator": (_STR, "imex"), "max_runtime": (_FLOAT, 60.0)},
        {"monotonicity": 1e-10, "dist": 1e-6, "soliton_residual": 1e-8},
    ),
    "basin_sweep": (
        {"modes": (_INTS, [2, 3, 4, 5, 6]), "amplitudes": (_FLOATS, [-0.1, -0.05, 0.05, 0.1]),
         "mixed_samples": (_INT, 4), "t_end": (_FLOAT, 50.0), "dt": (_FLOAT, 0.05),
         "max_runtime": (_FLOAT, 60.0)},
        {"monotonicity": 1e-10, "dist": 1e-6, "soliton_residual": 1e-8},
    ),
    "extremum_audit": (
        {"samples": (_INT, 50), "max_amplitude": (_FLOAT, 0.3), "min_degree": (_INT, 1),
         "max_degree": (_INT, 8), "mobius_s": (_FLOATS, [0.2, -0.4])},
        {"equality_rel": 1e-8, "dist": 1e-6},
    ),
    "determinism": (
        {"scenarios": (_STRS, [])},
        {},
    ),
}
KINDS = tuple(SCHEMAS)


def thread_cap():
    """Worker count from ``ENTROPY_LAB_THREADS`` (default 1)."""
    raw = os.environ.get("ENTROPY_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"ENTROPY_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError("ENTROPY_LAB_THREADS must be >= 1")
    return n


def _parse(kind, raw, key):
    raw = raw.strip()
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _STR:
            return raw
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if kind == _INTS:
            return [int(x) for x in items]
        if kind == _FLOATS:
            return [float(x) for x in items]
        return items
    except ValueError:
        raise ConfigurationError(f"key {key!r}: cannot parse {raw!r} as {kind}") from None


@dataclass(frozen=True)
class Scenario:
    """Validated scenario."""

    name: str
    kind: str
    geometry: str
    seed: int
    criterion: int
    grid: dict
    parameters: dict
    tolerances: dict
    source: str = None
    strict_aliasing: bool = False

    def echo(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "geometry": self.geometry,
            "seed": self.seed,
            "criterion": self.criterion,
            "grid": dict(sorted(self.grid.items())),
            "parameters": dict(sorted(self.parameters.items())),
            "tolerances": dict(sorted(self.tolerances.items())),
            "strict_aliasing": self.strict_aliasing,
        }

    def build_grid(self):
        l_max = self.grid["l_max"]
        n = self.grid.get("n_nodes")
        if n is None:
            return sphere.default_grid(l_max)
        return sphere.build_grid(n, l_max)


def parse_scenario(text, source=None, seed=None, tol_overrides=None, strict_aliasing=False):
    """Validate INI text against the schema; raise
    :class:`ConfigurationError` naming the first offending key."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<scenario>")
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    allowed_sections = {"scenario", "grid", "parameters", "tolerances"}
    for sec in cp.sections():
        if sec not in allowed_sections:
            raise ConfigurationError(f"unknown section [{sec}]")
    if not cp.has_section("scenario"):
        raise ConfigurationError("missing [scenario] section")
    sc = cp["scenario"]
    for key in sc:
        if key not in SCENARIO_KEYS:
            raise ConfigurationError(f"unknown key {key!r} in [scenario]")
    for req in ("name", "kind"):
        if req not in sc:
            raise ConfigurationError(f"missing key {req!r} in [scenario]")
    kind = sc["kind"].strip()
    if kind not in SCHEMAS:
        raise ConfigurationError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    name = sc["name"].strip()
    if not name or any(ch in name for ch in "/\\ "):
        raise ConfigurationError("name must be a non-empty token without spaces or slashes")
    geometry = sc.get("geometry", "product" if kind == "variation_general" else "sphere").strip()
    if geometry not in GEOMETRIES:
        raise ConfigurationError(f"unknown geometry {geometry!r}")
    scen_seed = _parse(_INT, sc.get("seed", "0"), "seed")
    if seed is not None:
        scen_seed = int(seed)
    criterion = _parse(_INT, sc.get("criterion", "0"), "criterion")
    if criterion and criterion not in CRITERIA:
        raise ConfigurationError(f"criterion must be one of {CRITERIA}")

    grid = {"l_max": 32}
    if cp.has_section("grid"):
        for key, raw in cp["grid"].items():
            if key not in GRID_KEYS:
                raise ConfigurationError(f"unknown key {key!r} in [grid]")
            grid[key] = _parse(GRID_KEYS[key], raw, key)
    if grid["l_max"] < 1 or ("n_nodes" in grid and grid["n_nodes"] < grid["l_max"] + 1):
        raise ConfigurationError("grid needs l_max >= 1 and n_nodes >= l_max + 1")

    pschema, tdefaults = SCHEMAS[kind]
    params = {k: v[1] for k, v in pschema.items()}
    if cp.has_section("parameters"):
        for key, raw in cp["parameters"].items():
            if key not in pschema:
                raise ConfigurationError(f"unknown key {key!r} in [parameters] for kind {kind}")
            params[key] = _parse(pschema[key][0], raw, key)
    tols = dict(tdefaults)
    if cp.has_section("tolerances"):
        for key, raw in cp["tolerances"].items():
            if key not in tdefaults:
                raise ConfigurationError(f"unknown key {key!r} in [tolerances] for kind {kind}")
            tols[key] = _parse(_FLOAT, raw, key)
    for key, value in (tol_overrides or {}).items():
        if key not in tdefaults:
            raise ConfigurationError(f"unknown tolerance override {key!r} for kind {kind}")
        tols[key] = float(value)
    for key, value in tols.items():
        if not value > 0:
            raise ConfigurationError(f"tolerance {key!r} must be positive")
    if kind == "determinism" and not params["scenarios"]:
        raise ConfigurationError("determinism scenario needs a 'scenarios' list")
    return Scenario(name, kind, geometry, scen_seed, criterion, grid, params, tols,
                    source=source, strict_aliasing=strict_aliasing)


def load_scenario(path, **kwargs):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_scenario(text, source=str(path), **kwargs)


def parse_tol_overrides(text):
    """``"key=value,key=value"`` -> dict."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigurationError(f"tolerance override {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigurationError(f"tolerance override {item!r} has a non-numeric value") from None
    return out


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    """One judged quantity. ``value`` is ``None`` for wall-clock checks,
    whose measurement is kept out of the artifacts."""

    criterion: int
    check: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def row(self):
        return [self.criterion, self.check, _fmt(self.value), _fmt(self.tolerance),
                "pass" if self.passed else "fail", self.detail]


CHECK_COLUMNS = ("criterion", "check", "value", "tolerance", "verdict", "detail")


@dataclass
class RunArtifact:
    name: str
    kind: str
    paths: list
    checks: list
    config: dict
    wall_clock: float = 0.0
    exit_code: int = 0
    timings: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def verdicts(self):
        return {c.check: c.passed for c in self.checks}


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class _Ctx:
    """Collects tables and checks for one scenario run."""

    def __init__(self, scenario):
        self.s = scenario
        self.p = scenario.parameters
        self.t = scenario.tolerances
        self.crit = scenario.criterion
        self.checks = []
        self.table = None
        self.extra_files = {}
        self.timings = {}
        self.rng = np.random.default_rng(scenario.seed)

    def check(self, name, value, tol, passed, detail=""):
        self.checks.append(Check(self.crit, name, value, tol, bool(passed), detail))

    def timed_check(self, name, seconds, limit, detail=""):
        self.timings[name] = seconds
        self.check(name, None, limit, seconds < limit, detail)


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------


def _band_check(ctx, grid, values, what):
    return grid.band_limit(values, strict=ctx.s.strict_aliasing, what=what)


def _run_lambda(ctx):
    s, p, t = ctx.s, ctx.p, ctx.t
    grid = s.build_grid()
    modes, amps = p["modes"], p["amplitudes"]
    if len(modes) != len(amps):
        raise ConfigurationError("modes and amplitudes must have equal length")
    u = np.zeros(grid.n_nodes)
    for l, a in zip(modes, amps):
        if l < 0:
            raise ConfigurationError("modes must be non-negative")
        u = u + a * sphere.zonal_mode(grid, l, normalized=False)
    u = _band_check(ctx, grid, u, "initial conformal factor")
    if s.geometry == "product":
        g = sphere.ConformalMetric.product(grid, u, u)
        expected = 64.0 * np.pi**2
    else:
        g = sphere.ConformalMetric.sphere(grid, u)
        expected = 8.0 * np.pi
    start = time.perf_counter()
    prof = entropy.solve_minimizer(g, tol=t["residual"])
    elapsed = time.perf_counter() - start
    ctx.table = (("name", "lambda", "multiplier", "residual", "iterations"),
                 [(s.name, prof.lam, prof.multiplier, prof.residual, prof.iterations)])
    round_metric = g.is_round()
    ctx.check("residual", prof.residual, t["residual"], prof.residual <= t["residual"])
    vol = g.volume()
    ctx.check("multiplier_vs_lambda_over_volume", abs(prof.multiplier - prof.lam / vol),
              t["multiplier_abs"], abs(prof.multiplier - prof.lam / vol) <= t["multiplier_abs"])
    if round_metric:
        rel = abs(prof.lam - expected) / expected
        ctx.check("lambda_rel_error", rel, t["lambda_rel"], rel <= t["lambda_rel"],
                  f"expected {expected!r}")
        fmax = float(np.max(np.abs(prof.f.values)))
        ctx.check("f_max_abs", fmax, t["f_abs"], fmax <= t["f_abs"])
        m_expected = expected / vol
        merr = abs(prof.multiplier - m_expected)
        ctx.check("multiplier_error", merr, t["multiplier_abs"], merr <= t["multiplier_abs"],
                  f"expected {m_expected!r}")
        ctx.timed_check("runtime_seconds", elapsed, p["max_runtime"])
    else:
        gap = expected - prof.lam
        ctx.check("lambda_below_round_value", gap, t["lambda_rel"] * expected,
                  gap > t["lambda_rel"] * expected)


def _run_spectrum(ctx):
    grid = ctx.s.build_grid()
    lt = ctx.p["table_l_max"]
    if lt > grid.l_max:
        raise ConfigurationError("table_l_max exceeds grid l_max")
    table = variation.modal_table(grid, lt, tol=ctx.t["collinearity"])
    cols = ("l", "nu", "p0", "l1", "l1_prime", "p0_prime", "dstar_d", "max_residual", "residual_tol")
    rows = [(r["l"], r["nu"], r["p0"], r["l1"], r["l1_prime"], r["p0_prime"], r["dstar_d"],
             r["max_residual"], ctx.t["collinearity"]) for r in table.rows()]
    ctx.table = (cols, rows)
    worst = max(r[7] for r in rows)
    ctx.check("max_collinearity_residual", worst, ctx.t["collinearity"], worst <= ctx.t["collinearity"])
    ctx.check("nu_0_is_0", table.nu[0], 0.0, table.nu[0] == 0.0)
    ctx.check("nu_1_is_1", table.nu[1] if lt >= 1 else 1.0, 0.0, lt < 1 or table.nu[1] == 1.0)
    ctx.check("dstar_d_nonnegative", float(np.min(table.dstar_d)), 0.0, np.min(table.dstar_d) >= 0)
    ctx.check("p0_prime_min_abs", float(np.min(np.abs(table.p0_prime))), 0.0,
              np.min(np.abs(table.p0_prime)) > 0)


def _random_zonal(rng, grid, lo, hi):
    c = np.zeros(grid.l_max + 1)
    c[lo:hi + 1] = rng.normal(size=hi - lo + 1)
    return grid.basis @ c


def _map(fn, items):
    n = thread_cap()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _run_first_variation(ctx):
    grid = ctx.s.build_grid()
    p, t, rng = ctx.p, ctx.t, ctx.rng
    kinds = ("conformal", "potential", "tensor")
    jobs = []
    for i in range(p["pairs"]):
        u = _random_zonal(rng, grid, 1, p["metric_max_degree"])
        u *= p["metric_amplitude"] * (0.25 + 0.75 * rng.random()) / float(np.max(np.abs(u)))
        kind = kinds[i % 3]
        a = _random_zonal(rng, grid, 0, p["direction_max_degree"])
        b = _random_zonal(rng, grid, 0, p["direction_max_degree"])
        jobs.append((i, u, kind, a, b))

    def one(job):
        i, u, kind, a, b = job
        g = sphere.ConformalMetric.sphere(grid, u)
        prof = entropy.solve_minimizer(g)
        if kind == "conformal":
            d = entropy.VariationDirection.conformal(a / np.max(np.abs(a)))
        elif kind == "potential":
            rate = entropy.VariationDirection.potential(a).potential_rates(g)[0]
            d = entropy.VariationDirection.potential(a / float(np.max(np.abs(rate))))
        else:
            h = (sphere.SymTensorField.conformal(grid, a)
                 + sphere.lie_derivative_round(grid, b, a))
            scale = max(float(np.max(np.abs(h.a))), float(np.max(np.abs(h.b))))
            d = entropy.VariationDirection.from_tensor(h * (1.0 / scale))
        an = entropy.first_variation(g, prof, d)
        fd = entropy.fd_lambda_derivative(g, d, order=1, eps=p["fd_eps"])
        rel = abs(an - fd.value) / max(abs(fd.value), 1e-300)
        return (i, kind, an, fd.value, fd.error, rel, t["fd_rel"])

    rows = _map(one, jobs)
    worst = max(r[5] for r in rows)
    g0 = sphere.ConformalMetric.sphere(grid)
    prof0 = entropy.solve_minimizer(g0)
    round_rows = []
    for j in range(p["round_directions"]):
        psi = _random_zonal(rng, grid, 0, p["direction_max_degree"])
        d = entropy.VariationDirection.potential(psi)
        d = entropy.VariationDirection.potential(psi / float(np.max(np.abs(d.potential_rates(g0)[0]))))
        val = entropy.first_variation(g0, prof0, d)
        fd = entropy.fd_lambda_derivative(g0, d, order=1, eps=p["fd_eps"])
        round_rows.append(max(abs(val), abs(fd.value)))
    ctx.table = (("index", "kind", "analytic", "fd", "fd_error", "rel_error", "rel_tol"), rows)
    ctx.check("max_rel_error_vs_fd", worst, t["fd_rel"], worst <= t["fd_rel"],
              f"pairs={len(rows)}")
    rmax = max(round_rows, default=0.0)
    ctx.check("round_potential_max_abs", rmax, t["round_abs"], rmax <= t["round_abs"],
              f"directions={len(round_rows)}")


def _run_fixed_class(ctx):
    grid = ctx.s.build_grid()
    p, t, rng = ctx.p, ctx.t, ctx.rng
    rows = []
    worst_cf = worst_fd = 0.0
    for l in p["modes"]:
        if l > grid.l_max:
            raise ConfigurationError(f"mode {l} exceeds l_max")
        rep = variation.second_variation_fixed_class(grid.basis[:, l], grid)
        nu = 0.5 * l * (l + 1)
        closed = nu**2 * (nu - 1) ** 2 / (1 - 2 * nu)
        cf = abs(rep.analytic - closed) / abs(closed) if closed else abs(rep.analytic)
        fdr = abs(rep.analytic - rep.oracle) / abs(rep.analytic) if closed else abs(rep.oracle)
        # kernel modes are judged in absolute terms
        cf_tol = t["closed_form_rel"] if closed else t["nonpositive"]
        fd_tol = t["fd_rel"] if closed else t["fd_abs"]
        rows.append((f"l={l}", rep.analytic, closed, rep.oracle, cf, cf_tol, fdr, fd_tol))
        ctx.check(f"closed_form_l{l}", cf, cf_tol, cf <= cf_tol)
        ctx.check(f"fd_l{l}", fdr, fd_tol, fdr <= fd_tol)
        worst_cf, worst_fd = max(worst_cf, cf), max(worst_fd, fdr)
    maxval = -np.inf
    for i in range(p["random_samples"]):
        psi = _random_zonal(rng, grid, 0, p["random_max_degree"])
        rep = variation.second_variation_fixed_class(psi, grid, fd=False)
        maxval = max(maxval, rep.analytic)
        rows.append((f"random{i}", rep.analytic, "", "", "", "", "", ""))
    ctx.table = (("direction", "analytic", "closed_form", "fd", "closed_form_err", "closed_form_tol",
                  "fd_err", "fd_tol"), rows)
    if p["random_samples"]:
        ctx.check("random_max_value", maxval, t["nonpositive"], maxval <= t["nonpositive"])


def _run_kernel(ctx):
    kb = variation.kernel_basis(ctx.p["degree"])
    tol = ctx.t["residual"]
    rows = [(i, kb.tags[i], kb.degrees[i], kb.residuals[i], kb.form_residuals[i], tol)
            for i in range(kb.dimension)]
    ctx.table = (("index", "tag", "degree", "residual", "form_residual", "residual_tol"), rows)
    ctx.check("dimension", kb.dimension, 0.0, kb.dimension == 4)
    ctx.check("l1_count", kb.count("holomorphy_potential"), 0.0, kb.count("holomorphy_potential") == 3)
    ctx.check("constant_count", kb.count("constant"), 0.0, kb.count("constant") == 1)
    ctx.check("ker_l1l1_dimension", kb.l1l1_dimension, 0.0, kb.l1l1_dimension == 3)
    worst = float(max(np.max(kb.residuals), np.max(kb.form_residuals)))
    ctx.check("max_residual", worst, tol, worst < tol)
    gram_err = float(np.max(np.abs(kb.gram() - np.eye(kb.dimension))))
    ctx.check("orthonormality", gram_err, 1e-10, gram_err <= 1e-10)


def _run_general(ctx):
    s, p, t = ctx.s, ctx.p, ctx.t
    if s.geometry != "product":
        raise ConfigurationError("variation_general needs geometry = product")
    grid = s.build_grid()
    g = sphere.ConformalMetric.product(grid)
    theta = variation.traceless_class_direction(p["p"], p["q"], a=p["a"], metric=g)
    rep = variation.second_variation_general(g, theta, normalization="riemannian")
    c1 = theta.form[0]
    closed = 64.0 * np.pi**2 * c1**2
    rel_cf = abs(rep.analytic - closed) / closed
    rel_fd = abs(rep.analytic - rep.oracle) / abs(rep.analytic)
    rows = [("theta", rep.analytic, closed, rep.oracle, rep.oracle_error, rel_cf, rel_fd,
             t["closed_form_rel"], t["fd_rel"])]
    ctx.check("closed_form_rel", rel_cf, t["closed_form_rel"], rel_cf <= t["closed_form_rel"])
    ctx.check("fd_rel", rel_fd, t["fd_rel"], rel_fd <= t["fd_rel"])
    ctx.check("strictly_positive", rep.analytic, 0.0, rep.analytic > 0)
    worst = 0.0
    for a in p["closed_form_a"]:
        prof = entropy.solve_minimizer(theta.path(g, a / (0.5 * c1)))
        lam_cf = 32.0 * np.pi**2 * (np.exp(2 * a) + np.exp(-2 * a))
        rel = abs(prof.lam - lam_cf) / lam_cf
        worst = max(worst, rel)
        rows.append((f"lambda(a={a!r})", prof.lam, lam_cf, "", "", rel, "", t["lambda_rel"], ""))
    ctx.check("scaling_family_lambda_rel", worst, t["lambda_rel"], worst <= t["lambda_rel"])
    ctx.table = (("direction", "analytic", "closed_form", "fd", "fd_error", "closed_form_err",
                  "fd_err", "closed_form_tol", "fd_tol"), rows)


def _run_riemannian_L(ctx):
    grid = ctx.s.build_grid()
    p, t, rng = ctx.p, ctx.t, ctx.rng
    rows = []
    worst = 0.0
    worst_fd = 0.0
    for l in p["modes"]:
        h = variation.potential_tensor(grid, grid.basis[:, l])
        rep = variation.stability_form(h)
        ref = variation.second_variation_fixed_class(grid.basis[:, l], grid, fd=False,
                                                     normalization="riemannian")
        diff = abs(rep.analytic - ref.analytic)
        worst = max(worst, diff)
        fd_ok = rep.status == "PASSED"
        worst_fd = max(worst_fd, rep.discrepancy / max(abs(rep.analytic), 1.0))
        rows.append((f"potential l={l}", rep.analytic, ref.analytic, rep.oracle, diff,
                     t["consistency_abs"], fd_ok))
    ctx.check("potential_consistency_abs", worst, t["consistency_abs"], worst <= t["consistency_abs"])
    worst_lie = 0.0
    for i in range(p["lie_samples"]):
        a = _random_zonal(rng, grid, 0, p["lie_max_degree"])
        b = _random_zonal(rng, grid, 0, p["lie_max_degree"])
        h = variation.lie_tensor(grid, a, b)
        rep = variation.stability_form(h, fd=False)
        worst_lie = max(worst_lie, abs(rep.analytic))
        rows.append((f"lie{i}", rep.analytic, 0.0, "", abs(rep.analytic), t["lie_abs"], ""))
    ctx.check("lie_null_abs", worst_lie, t["lie_abs"], worst_lie <= t["lie_abs"])
    ctx.check("fd_agreement", worst_fd, t["fd_rel"], worst_fd <= t["fd_rel"])
    ctx.table = (("direction", "h_Lh", "fixed_class_value", "fd", "abs_diff", "abs_tol", "fd_passed"), rows)


def _run_f_response(ctx):
    grid = ctx.s.build_grid()
    p, t, rng = ctx.p, ctx.t, ctx.rng
    rows = []
    worst_res = worst_fd = 0.0
    for i in range(p["samples"]):
        psi = _random_zonal(rng, grid, 0, p["max_degree"])
        psi /= float(np.sqrt(grid.area_weights @ psi**2))
        u = variation.linearized_f_response(psi, grid)
        fd = variation.fd_f_response(psi, grid, eps=p["fd_eps"])
        diff = float(np.max(np.abs(fd - u.values)))
        worst_res, worst_fd = max(worst_res, u.residual), max(worst_fd, diff)
        rows.append((i, u.residual, t["residual"], diff, t["fd_abs"]))
    ctx.table = (("index", "p0_residual", "residual_tol", "fd_max_diff", "fd_tol"), rows)
    ctx.check("max_p0_residual", worst_res, t["residual"], worst_res < t["residual"])
    ctx.check("max_fd_diff", worst_fd, t["fd_abs"], worst_fd <= t["fd_abs"])


def _flow_run(grid, u0, p, t, integrator="imex"):
    cfg = flow.FlowConfig(t_end=p["t_end"], dt=p["dt"], integrator=integrator,
                          dist_tol=t["dist"], residual_tol=t["soliton_residual"],
                          monotonicity_tol=t["monotonicity"])
    start = time.perf_counter()
    res = flow.run_to_convergence(u0, grid, cfg)
    return res, time.perf_counter() - start


def _monotonicity(history):
    worst, where = 0.0, -1
    for k in range(len(history) - 1):
        drop = history[k].lam - history[k + 1].lam
        if drop > worst:
            worst, where = drop, k + 1
    return worst, where


def _flow_checks(ctx, label, res, elapsed):
    t = ctx.t
    drop, where = _monotonicity(res.history)
    last = res.history[-1]
    ctx.check(f"{label}_max_lambda_drop", drop, t["monotonicity"], drop <= t["monotonicity"],
              f"trajectory={label} step={where} drop={drop!r}" if drop > t["monotonicity"] else "")
    ctx.check(f"{label}_dist_to_round", last.dist_to_round, t["dist"], last.dist_to_round < t["dist"])
    ctx.check(f"{label}_soliton_residual", last.soliton_residual, t["soliton_residual"],
              last.soliton_residual < t["soliton_residual"])
    ctx.check(f"{label}_converged_by_t_end", last.t, ctx.p["t_end"],
              res.verdict == "converged_to_KE" and last.t <= ctx.p["t_end"])
    ctx.timed_check(f"{label}_runtime_seconds", elapsed, ctx.p["max_runtime"])


def _run_flow(ctx):
    grid = ctx.s.build_grid()
    p = ctx.p
    u0 = p["amplitude"] * sphere.zonal_mode(grid, p["mode"], normalized=False)
    u0 = _band_check(ctx, grid, u0, "initial conformal factor")
    res, elapsed = _flow_run(grid, u0, p, ctx.t, p["integrator"])
    ctx.extra_files[f"{ctx.s.name}.trajectory.csv"] = flow.trajectory_csv(res.history, ctx.t["monotonicity"])
    _flow_checks(ctx, "run0", res, elapsed)
    last = res.history[-1]
    ctx.table = (("run", "mode", "amplitude", "verdict", "t_final", "dist_to_round", "soliton_residual",
                  "steps", "dist_tol", "residual_tol"),
                 [(0, p["mode"], p["amplitude"], res.verdict, last.t, last.dist_to_round,
                   last.soliton_residual, res.state.steps, ctx.t["dist"], ctx.t["soliton_residual"])])


def _run_basin(ctx):
    grid = ctx.s.build_grid()
    p, rng = ctx.p, ctx.rng
    inits = []
    for l in p["modes"]:
        for a in p["amplitudes"]:
            if abs(a) > 0.1 + 1e-15:
                raise ConfigurationError("basin amplitudes must satisfy |a| <= 0.1")
            u0 = a * sphere.zonal_mode(grid, l, normalized=False)
            inits.append((str(l), a, _band_check(ctx, grid, u0, "initial conformal factor")))
    lo, hi = min(p["modes"]), max(p["modes"])
    for i in range(p["mixed_samples"]):
        u = _random_zonal(rng, grid, lo, hi)
        amp = 0.1 * (0.2 + 0.8 * rng.random())
        u *= amp / float(np.max(np.abs(u)))
        inits.append((f"{lo}-{hi}", amp, u))

    def one(item):
        return _flow_run(grid, item[2], p, ctx.t)

    results = _map(one, inits)
    rows = []
    for k, ((mode, amp, _), (res, elapsed)) in enumerate(zip(inits, results)):
        label = f"run{k:02d}"
        ctx.extra_files[f"{ctx.s.name}.{label}.csv"] = flow.trajectory_csv(res.history, ctx.t["monotonicity"])
        _flow_checks(ctx, label, res, elapsed)
        last = res.history[-1]
        rows.append((label, mode, amp, res.verdict, last.t, last.dist_to_round, last.soliton_residual,
                     res.state.steps, ctx.t["dist"], ctx.t["soliton_residual"]))
    ctx.check("run_count", len(rows), 12, len(rows) >= 12)
    ctx.table = (("run", "mode", "amplitude", "verdict", "t_final", "dist_to_round", "soliton_residual",
                  "steps", "dist_tol", "residual_tol"), rows)


def _run_audit(ctx):
    grid = ctx.s.build_grid()
    p, t, rng = ctx.p, ctx.t, ctx.rng
    samples, labels = [], []
    for i in range(p["samples"]):
        samples.append(flow.random_metric(grid, rng, (p["min_degree"], p["max_degree"]), p["max_amplitude"]))
        labels.append(f"random{i:02d}")
    samples.append(sphere.ConformalMetric.sphere(grid))
    labels.append("round")
    for s in p["mobius_s"]:
        samples.append(flow.mobius_metric(grid, s))
        labels.append(f"mobius(s={s!r})")
    rep = flow.extremum_audit(samples, eq_tol=t["equality_rel"], dist_tol=t["dist"])
    rows = [(labels[r["index"]], r["lambda"], r["gap"], r["dist_to_round"], r["equality"], r["ok"],
             t["equality_rel"] * 8 * np.pi, t["dist"]) for r in rep.rows]
    ctx.table = (("sample", "lambda", "gap", "dist_to_round", "equality", "ok", "equality_abs_tol",
                  "dist_tol"), rows)
    random_rows = rep.rows[: p["samples"]]
    min_gap = min(r["gap"] for r in random_rows) if random_rows else 0.0
    ctx.check("random_min_gap", min_gap, t["equality_rel"] * 8 * np.pi, min_gap > t["equality_rel"] * 8 * np.pi,
              f"samples={len(random_rows)}")
    bad = rep.counterexamples
    ctx.check("counterexamples", len(bad), 0.0, not bad,
              "; ".join(labels[r["index"]] for r in bad))
    gauge_rows = rep.rows[p["samples"]:]
    worst = max((abs(r["gap"]) for r in gauge_rows), default=0.0)
    ctx.check("gauge_equivalents_equality", worst, t["equality_rel"] * 8 * np.pi,
              worst <= t["equality_rel"] * 8 * np.pi)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _run_determinism(ctx):
    base = Path(ctx.s.source).parent if ctx.s.source else Path.cwd()
    rows = []
    all_same = True
    for entry in ctx.p["scenarios"]:
        path = (base / entry) if not Path(entry).is_absolute() else Path(entry)
        digests = []
        with tempfile.TemporaryDirectory() as tmp:
            for rep in ("a", "b"):
                out = Path(tmp) / rep
                art = run_scenario(path, out, seed=ctx.s.seed, quiet=True)
                if art.exit_code == 3:
                    raise SolverError(f"determinism sub-run {entry} hit a solver error")
                digests.append({Path(q).name: _sha256(q) for q in art.paths})
        a, b = digests
        for fname in sorted(set(a) | set(b)):
            same = a.get(fname) == b.get(fname)
            all_same &= same
            rows.append((entry, fname, a.get(fname, ""), b.get(fname, ""), same))
    ctx.table = (("scenario", "file", "sha256_first", "sha256_second", "identical"), rows)
    ctx.check("byte_identical", sum(1 for r in rows if not r[4]), 0.0, all_same,
              f"files={len(rows)}")


RUNNERS = {
    "lambda": _run_lambda,
    "spectrum": _run_spectrum,
    "first_variation": _run_first_variation,
    "variation_fixed_class": _run_fixed_class,
    "kernel": _run_kernel,
    "variation_general": _run_general,
    "riemannian_L": _run_riemannian_L,
    "f_response": _run_f_response,
    "flow": _run_flow,
    "basin_sweep": _run_basin,
    "extremum_audit": _run_audit,
    "determinism": _run_determinism,
}


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def execute(scenario, out_dir):
    """Run a validated scenario and write its artifacts."""
    out_dir = Path(out_dir)
    ctx = _Ctx(scenario)
    start = time.perf_counter()
    RUNNERS[scenario.kind](ctx)
    wall = time.perf_counter() - start
    name = scenario.name
    paths = []
    cols, rows = ctx.table
    main = out_dir / f"{name}.csv"
    _write(main, _csv_text(cols, rows))
    paths.append(main)
    chk = out_dir / f"{name}.checks.csv"
    _write(chk, _csv_text(CHECK_COLUMNS, [c.row() for c in ctx.checks]))
    paths.append(chk)
    for fname in sorted(ctx.extra_files):
        fp = out_dir / fname
        _write(fp, ctx.extra_files[fname])
        paths.append(fp)
    payload = {
        "scenario": name,
        "kind": scenario.kind,
        "criterion": scenario.criterion,
        "config": scenario.echo(),
        "columns": list(cols),
        "rows": [[_jsonable(v) if v != "" else None for v in r] for r in rows],
        "checks": [
            {"criterion": c.criterion, "check": c.check, "value": _jsonable(c.value),
             "tolerance": _jsonable(c.tolerance), "passed": c.passed, "detail": c.detail}
            for c in ctx.checks
        ],
        "passed": all(c.passed for c in ctx.checks),
        "files": [p.name for p in paths],
    }
    js = out_dir / f"{name}.json"
    _write(js, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    paths.append(js)
    return RunArtifact(name=name, kind=scenario.kind, paths=[str(p) for p in paths],
                       checks=ctx.checks, config=scenario.echo(), wall_clock=wall,
                       exit_code=0 if payload["passed"] else 1, timings=ctx.timings)


def run_scenario(config_path, out_dir=None, seed=None, strict_aliasing=False,
                 tol_overrides=None, quiet=False):
    """Load, validate and run a scenario file.

    Exit codes on the returned artifact: 0 all checks pass, 1 a check
    failed, 2 configuration error (the artifact then has no files), 3 solver
    error (a ``<name>.diagnostics.json`` is written).
    """
    try:
        scen = load_scenario(config_path, seed=seed, tol_overrides=tol_overrides,
                             strict_aliasing=strict_aliasing)
    except ConfigurationError as exc:
        return RunArtifact("", "", [], [], {"error": str(exc)}, exit_code=2)
    return run_validated(scen, out_dir)


def run_validated(scen, out_dir=None):
    """Run a validated :class:`Scenario`, mapping failures to exit codes."""
    out_dir = Path(out_dir) if out_dir is not None else Path("results")
    try:
        return execute(scen, out_dir)
    except (ConfigurationError, AliasingError) as exc:
        return RunArtifact(scen.name, scen.kind, [], [], {"error": str(exc)}, exit_code=2)
    except (SolverError, EntropyLabError, np.linalg.LinAlgError) as exc:
        diag = {
            "scenario": scen.name,
            "error": type(exc).__name__,
            "message": str(exc),
            "diagnostics": _jsonable(getattr(exc, "diagnostics", {})),
            "config": scen.echo(),
        }
        path = out_dir / f"{scen.name}.diagnostics.json"
        _write(path, json.dumps(_jsonable(diag), indent=2, sort_keys=True, default=str) + "\n")
        return RunArtifact(scen.name, scen.kind, [str(path)], [], scen.echo(), exit_code=3)


# ---------------------------------------------------------------------------
# Acceptance aggregation
# ---------------------------------------------------------------------------


CRITERION_TITLES = {
    1: "lambda at the round metric",
    2: "first variation vs finite differences",
    3: "fixed-class modal second variation",
    4: "kernel of the fixed-class form",
    5: "class-changing direction on the product",
    6: "Riemannian operator consistency",
    7: "linearized minimizer response",
    8: "flow monotonicity and stability",
    9: "extremum audit",
    10: "determinism",
}


def acceptance(report_dir):
    """Aggregate ``*.json`` artifacts into a per-criterion summary.

    Returns ``(summary_rows, exit_code)`` and writes
    ``acceptance_summary.csv`` / ``.json`` into ``report_dir``. A criterion
    without any artifact is ``ABSENT`` and fails.
    """
    report_dir = Path(report_dir)
    by_crit = {c: [] for c in CRITERIA}
    if report_dir.is_dir():
        for path in sorted(report_dir.glob("*.json")):
            if path.name.startswith("acceptance_summary") or path.name.endswith(".diagnostics.json"):
                if path.name.endswith(".diagnostics.json"):
                    try:
                        diag = json.loads(path.read_text(encoding="utf-8"))
                        crit = diag.get("config", {}).get("criterion")
                    except (OSError, ValueError):
                        continue
                    if crit in by_crit:
                        by_crit[crit].append({"scenario": diag.get("scenario"), "check": "solver",
                                              "passed": False, "value": None, "tolerance": None,
                                              "detail": diag.get("message", "")})
                continue
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, ValueError):
                continue
            for chk in data.get("checks", []):
                crit = chk.get("criterion")
                if crit in by_crit:
                    by_crit[crit].append({"scenario": data.get("scenario"), **chk})
    rows = []
    for crit in CRITERIA:
        checks = by_crit[crit]
        if not checks:
            status, detail = "ABSENT", ""
        else:
            failed = [c for c in checks if not c["passed"]]
            status = "PASS" if not failed else "FAIL"
            detail = "; ".join(
                f"{c['scenario']}:{c['check']}" + (f" ({c['detail']})" if c.get("detail") else "")
                for c in failed
            )
        measured = "; ".join(
            f"{c['check']}={_fmt(c['value'])}<=tol {_fmt(c['tolerance'])}"
            for c in checks if c.get("value") is not None
        )
        rows.append((crit, CRITERION_TITLES[crit], status, len(checks), measured, detail))
    code = 0 if all(r[2] == "PASS" for r in rows) else 1
    if report_dir.is_dir():
        cols = ("criterion", "title", "status", "checks", "measured", "failures")
        _write(report_dir / "acceptance_summary.csv", _csv_text(cols, rows))
        _write(report_dir / "acceptance_summary.json",
               json.dumps([dict(zip(cols, r)) for r in rows], indent=2, sort_keys=True) + "\n")
    return rows, code
