"""Critical-point search, solution assembly, sweeps and configuration files.

A run is described by a :class:`RunConfig`, usually read from a flat
``key = value`` file.  Two modes exist: ``full`` runs the reduction on the
graded Galerkin space, ``semi`` only uses the closed-form reduced energy
G(t) = -c4 ln t + c1 phi t.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import brentq

from .bubble import SQRT, THEOREM2, BubbleError, ScaleLaw, alpha_n, delta_of_t
from .energy import ExpansionError, ExpansionReport, expansion_constants, g_reduced, verify_expansion
from .geometry import SPHERE, TORUS, GeometryError, ManifoldModel
from .operator import OperatorError, OperatorSpec, constant_spec, paneitz_tensor, q_curvature
from .reduction import Discretization, ReductionError, ReductionProblem, ReductionState

FULL = "full"
SEMI = "semi"

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
STATIONARITY_TOL = 1e-6
BOUNDARY_FRACTION = 0.01


class ConfigError(ValueError):
    """Invalid configuration file or option (exit code 2)."""


class CriticalPointError(ArithmeticError):
    """Boundary optimum or a diverging gradient iteration (exit code 3)."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


# -- presets and configuration ------------------------------------------------

PRESETS: dict[str, dict] = {
    "torus5": {"model": TORUS, "n": 5, "b": 1.0, "c": 1.0, "eps": [1e-3, 3e-4, 1e-4]},
    "torus6": {"model": TORUS, "n": 6, "b": 1.0, "c": 1.0, "eps": [1e-3, 1e-4]},
    # round S^6 with the exact Paneitz coefficients: u0 = 1 is degenerate
    "sphere6-paneitz": {"model": SPHERE, "n": 6, "b": 10.0, "c": 24.0, "eps": [1e-3, 1e-4]},
    "sphere6": {"model": SPHERE, "n": 6, "b": 10.0, "c": 25.0, "eps": [1e-3, 3e-4, 1e-4]},
    "sphere9": {"model": SPHERE, "n": 9, "b": 39.5, "c": 1.0, "eps": [1e-4, 1e-5]},
    # second-theorem variant with A = A_paneitz; t0 ~ 9.4 puts delta outside the cutoff
    # ball at desk-scale eps, so the preset runs on the closed-form G
    "sphere10-thm2": {"model": SPHERE, "n": 10, "b": None, "c": 1.0, "variant": THEOREM2,
                      "mode": SEMI, "eps": [1e-4, 1e-5]},
}


@dataclass
class RunConfig:
    """Everything a run needs; ``b = None`` means the Paneitz value a_P."""

    preset: str | None = None
    model: str = TORUS
    n: int = 5
    b: float | None = 1.0
    c: float = 1.0
    variant: str = "theorem1"
    mode: str = FULL
    eps: list = field(default_factory=lambda: [1e-3, 3e-4, 1e-4])
    t_window: tuple | None = None
    t_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    panels: int = 200
    quad: int = 10
    K: int = 6
    rho: float = 2.5
    r0: float | None = None
    gamma: float = 10.0
    fd_step: float = 5e-3
    stationarity_tol: float = STATIONARITY_TOL
    landscape: bool = True
    out: str | None = None

    def __post_init__(self):
        self.validate()

    # -- derived objects ------------------------------------------------------
    def manifold(self) -> ManifoldModel:
        return ManifoldModel(self.model, self.n, 8 if self.model == TORUS else 64)

    def spec(self) -> OperatorSpec:
        model = self.manifold()
        b = paneitz_tensor(model)[0] if self.b is None else self.b
        return constant_spec(model, b, self.c)

    def law(self) -> ScaleLaw:
        return ScaleLaw(self.n, self.variant)

    def discretization(self) -> Discretization:
        return Discretization(self.panels, self.quad, self.K, self.rho)

    def report(self) -> ExpansionReport:
        return expansion_constants(self.spec(), self.law())

    def window(self) -> tuple[float, float]:
        """[a, b]: configured, else [t0/5, 5 t0], else [0.1, 10]."""
        if self.t_window is not None:
            return self.t_window
        try:
            t0 = self.report().t0
        except (ExpansionError, OperatorError):
            return 0.1, 10.0
        return t0 / 5.0, 5.0 * t0

    def seed(self) -> int:
        """Seed for randomized probes, derived from the configuration contents."""
        return int(config_hash(self)[:8], 16)

    def validate(self):
        try:
            kind = self.manifold().kind
            self.law()
        except (GeometryError, BubbleError) as err:
            raise ConfigError(str(err)) from err
        self.model = kind
        if self.mode not in (FULL, SEMI):
            raise ConfigError(f"mode must be {FULL!r} or {SEMI!r}, not {self.mode!r}")
        if self.mode == FULL and kind == TORUS and self.n > 6:
            raise ConfigError("full-PDE torus runs are limited to n <= 6")
        if self.n == 7 and self.law().variant != THEOREM2:
            raise ConfigError("n = 7 is not covered by the first theorem")
        if any(not 0.0 < e <= 0.1 for e in self.eps):
            raise ConfigError("every eps must lie in (0, 0.1]")
        if self.t_window is not None:
            a, b = self.t_window
            if not 0.0 < a < b:
                raise ConfigError(f"t window must satisfy 0 < a < b, got [{a}, {b}]")
        if any(t <= 0 for t in self.t_grid):
            raise ConfigError("t grid entries must be positive")
        if self.panels < 20 or self.quad < 4 or self.K < 1:
            raise ConfigError("resolution too small (panels >= 20, quad >= 4, K >= 1)")
        if self.c <= 0:
            raise ConfigError("the potential c must be positive")
        if self.fd_step <= 0 or self.gamma <= 0:
            raise ConfigError("fd_step and gamma must be positive")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["t_window"] = list(self.t_window) if self.t_window is not None else None
        return out


def config_hash(config: RunConfig) -> str:
    payload = dict(config.as_dict())
    payload.pop("out", None)
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


_KEY_ALIASES = {"h": "c", "regime": "variant", "kind": "model", "window": "t_window",
                "epsilon": "eps", "eps_list": "eps"}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` pairs; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        key = _KEY_ALIASES.get(key.lower(), key.lower())
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _float_list(value: str) -> list[float]:
    value = value.strip().strip("[]()")
    return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _optional_float(value: str) -> float | None:
    v = value.strip().lower()
    return None if v in ("", "none", "paneitz", "a_p") else float(value)


_CONVERTERS = {
    "preset": str, "model": str, "variant": str, "mode": lambda v: v.strip().lower(), "out": str,
    "n": int, "panels": int, "quad": int, "K": int,
    "b": _optional_float, "r0": _optional_float,
    "c": float, "rho": float, "gamma": float, "fd_step": float, "stationarity_tol": float,
    "eps": _float_list, "t_grid": _float_list, "landscape": _bool,
    "t_window": lambda v: tuple(_float_list(v)),
}


def build_config(values: dict) -> RunConfig:
    """RunConfig from string (or already typed) values; a preset supplies defaults."""
    values = dict(values)
    base: dict = {}
    preset = values.get("preset")
    if preset:
        preset = str(preset).strip().lower()
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        base = dict(PRESETS[preset], preset=preset)
    names = {f.name for f in fields(RunConfig)} | {"k"}
    for key, value in values.items():
        if key == "preset":
            continue
        if key not in names:
            raise ConfigError(f"unknown configuration key {key!r}")
        key = "K" if key == "k" else key
        try:
            base[key] = _CONVERTERS[key](value) if isinstance(value, str) else value
        except ValueError as err:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({err})") from err
    if base.get("t_window") is not None and len(base["t_window"]) != 2:
        raise ConfigError("t_window needs exactly two numbers a, b")
    return RunConfig(**base)


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read a configuration file and apply overrides (already typed or strings)."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_config_text(fh.read())
        except OSError as err:
            raise ConfigError(f"cannot read config {path!r}: {err.strerror}") from err
        except UnicodeDecodeError as err:
            raise ConfigError(f"config {path!r} is not UTF-8") from err
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if not values.get("preset") and path is None and not overrides:
        values["preset"] = "torus5"
    return build_config(values)


def make_problem(config: RunConfig) -> ReductionProblem:
    return ReductionProblem(config.spec(), config.law(), config.r0, config.discretization(), config.gamma)


# -- critical point -------------------------------------------------------------

@dataclass
class CriticalPoint:
    t: float
    xi: list
    I: float
    dI: float
    slope_scale: float
    certificate: float
    window: tuple
    method: str
    evaluations: int
    trace: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.certificate <= STATIONARITY_TOL


class EnergyCurve:
    """t -> I_eps(t) with memoization and a five-point derivative."""

    def __init__(self, func, fd_step: float):
        self.func, self.h = func, fd_step
        self.cache: dict[float, float] = {}

    def __call__(self, t: float) -> float:
        t = float(t)
        if t not in self.cache:
            self.cache[t] = float(self.func(t))
        return self.cache[t]

    def derivative(self, t: float) -> float:
        s = self.h * t
        return (self(t - 2 * s) - 8 * self(t - s) + 8 * self(t + s) - self(t + 2 * s)) / (12 * s)


def _golden(curve: EnergyCurve, a: float, b: float, rel_width: float, trace: list) -> tuple[float, float]:
    """Golden-section search in log t; returns the final bracket."""
    lo, hi = math.log(a), math.log(b)
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = curve(math.exp(x1)), curve(math.exp(x2))
    while hi - lo > rel_width:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = curve(math.exp(x1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = curve(math.exp(x2))
        trace.append(("golden", math.exp(lo), math.exp(hi)))
    return math.exp(lo), math.exp(hi)


def _polish(curve: EnergyCurve, lo: float, hi: float, a: float, b: float, trace: list) -> float:
    """Root of the finite-difference derivative inside [lo, hi], widened if needed."""
    dlo, dhi = curve.derivative(lo), curve.derivative(hi)
    for _ in range(6):
        if dlo < 0 < dhi:
            break
        if dlo >= 0:
            lo = max(a * (1 + 3 * curve.h), lo / 1.2)
            dlo = curve.derivative(lo)
        if dhi <= 0:
            hi = min(b / (1 + 3 * curve.h), hi * 1.2)
            dhi = curve.derivative(hi)
    else:
        raise CriticalPointError("no sign change of dI/dt near the golden-section minimum", trace)
    t = brentq(curve.derivative, lo, hi, xtol=1e-12 * hi, rtol=1e-13, maxiter=60)
    trace.append(("brent", lo, hi, t))
    return float(t)


def _secant(curve: EnergyCurve, seed: float, a: float, b: float, eps: float, trace: list,
            maxiter: int = 40) -> float:
    """Secant iteration on dI/dt from the analytic seed t0."""
    t_prev, t = seed, seed * 1.05
    d_prev, d = curve.derivative(t_prev), curve.derivative(t)
    for it in range(maxiter):
        trace.append(("secant", it, t, d))
        if d == d_prev:
            break
        step = -d * (t - t_prev) / (d - d_prev)
        t_prev, d_prev = t, d
        t = t + step
        if not a < t < b or not math.isfinite(t):
            raise CriticalPointError(f"secant iteration left the window at t = {t:.6g}", trace)
        d = curve.derivative(t)
        if abs(d) <= 1e-8 * abs(curve(t)) / eps and abs(step) <= 1e-12 * t:
            return t
    if abs(d) <= 1e-8 * abs(curve(t)) / eps:
        return t
    raise CriticalPointError("secant iteration did not converge", trace)


def _uses_gradient_search(config: RunConfig) -> bool:
    return config.law().variant != THEOREM2 and 8 <= config.n <= 13


def find_critical_point(config: RunConfig, eps: float, problem: ReductionProblem | None = None,
                        report: ExpansionReport | None = None) -> CriticalPoint:
    """Interior critical point t* of t -> I_eps(t) on the configured window.

    Full mode evaluates the reduced energy; semi mode searches G itself.
    Dimensions 8..13 (first theorem) use a secant iteration from t0, the
    other cases a golden-section search followed by a root polish of dI/dt.
    """
    report = config.report() if report is None else report
    a, b = config.window()
    xi = [float(x) for x in config.manifold().default_pole()]
    trace: list = []
    if config.mode == SEMI:
        curve = EnergyCurve(lambda t: eps * float(g_reduced(report, t)), config.fd_step)

        def exact_slope(t):
            return eps * (-report.c4 / t + report.c1 * report.phi_xi)

        lo, hi = _golden(curve, a, b, 1e-3, trace)
        if exact_slope(lo) * exact_slope(hi) > 0:
            raise CriticalPointError("window too small: G has no stationary point inside", trace)
        t = float(brentq(exact_slope, lo, hi, xtol=1e-15, rtol=1e-15))
        dI = exact_slope(t)
        method = "golden+brent (closed form)"
    else:
        problem = make_problem(config) if problem is None else problem

        curve = EnergyCurve(lambda t: _reduced_I(problem, eps, t), config.fd_step)
        if _uses_gradient_search(config):
            t = _secant(curve, report.t0, a, b, eps, trace)
            method = "secant"
        else:
            lo, hi = _golden(curve, a, b, 0.02, trace)
            t = _polish(curve, lo, hi, a, b, trace)
            method = "golden+brent"
        dI = curve.derivative(t)
    if t <= a * (1 + BOUNDARY_FRACTION) or t >= b * (1 - BOUNDARY_FRACTION):
        raise CriticalPointError(f"window too small: optimum t = {t:.6g} at the edge of [{a:.6g}, {b:.6g}]",
                                 trace)
    scale = abs(curve(b) - curve(a)) / (b - a)
    return CriticalPoint(float(t), xi, curve(t), float(dI), float(scale), abs(dI) / scale, (a, b),
                         method, len(curve.cache), trace)


def _reduced_I(problem: ReductionProblem, eps: float, t: float) -> float:
    state = problem.state(eps, t)
    return state.energy(state.solve_phi())


# -- assembly and multipliers -----------------------------------------------------

@dataclass
class SolutionRecord:
    eps: float
    t_star: float
    xi_star: list
    delta_star: float
    I_star: float
    residual_norm: float
    residual_ratio: float
    u_min: float
    u_max: float
    depth: float
    depth_expected: float
    multiplier: float
    norm_phi: float

    def as_dict(self) -> dict:
        return asdict(self)


def multiplier_tolerance(eps: float) -> float:
    """max(1e-7, 10 eps^2 ln^2 eps)."""
    return max(1e-7, 10.0 * eps**2 * math.log(eps) ** 2)


def lagrange_multipliers(state: ReductionState, c=None) -> tuple[float, ...]:
    """Solve gram . lambda = (DJ(u)[Z_i])_i for u = u0 - W + phi.

    Only Z_0 survives the symmetry reduction, so the tuple has one entry.
    """
    return (state.lagrange_multiplier(c),)


def assemble_solution(config: RunConfig, eps: float, t: float, xi=None,
                      problem: ReductionProblem | None = None, bubble: bool = True,
                      delta: float | None = None) -> tuple[SolutionRecord, ReductionState]:
    """u_eps = u0 - W + phi at (t, xi) together with its residual diagnostics.

    ``bubble=False`` drops W (the exactly solvable case u = u0); ``delta``
    then only fixes the scale of Z_0 and eps may be zero.
    """
    problem = make_problem(config) if problem is None else problem
    xi = [float(x) for x in config.manifold().default_pole()] if xi is None else list(xi)
    if delta is None:
        delta = delta_of_t(problem.law, eps, t)
    state = problem.state(eps, t, delta=delta, bubble=bubble)
    c = state.solve_phi()
    res = state.strong_residual(c)
    lo, hi = state.extremes(c)
    n = problem.n
    depth_expected = problem.u0 - (alpha_n(n) * delta ** (-(n - 4) / 2.0) if bubble else 0.0)
    scale = eps * abs(math.log(eps)) if eps > 0 else float("nan")
    rec = SolutionRecord(
        eps=float(eps), t_star=float(t), xi_star=xi, delta_star=float(delta), I_star=state.energy(c),
        residual_norm=res, residual_ratio=res / scale, u_min=lo, u_max=hi, depth=state.centre_value(c),
        depth_expected=float(depth_expected), multiplier=lagrange_multipliers(state, c)[0],
        norm_phi=float(np.linalg.norm(c)))
    return rec, state


def reduce_diagnostics(config: RunConfig, eps: float, t: float = 1.0,
                       problem: ReductionProblem | None = None, seed: int | None = None) -> dict:
    """Fixed-point data of one (eps, t) state, as emitted by the ``reduce`` command."""
    problem = make_problem(config) if problem is None else problem
    state = problem.state(eps, t)
    state.solve_phi()
    d = state.diagnostics
    out = {
        "eps": float(eps), "t": float(t), "delta": state.delta,
        "norm_R": d["norm_R"], "norm_phi": d["norm_phi"], "iterations": d["iterations"],
        "gram_cond": d["gram_cond"], "constraint_violation": d["constraint_violation"],
        "contraction": [float(x) for x in d.get("contraction", [])],
        "equation_residual": state.equation_residual(),
        "invertibility": state.invertibility(),
        "dim": d["dim"],
    }
    if seed is not None:
        try:
            out["restart_distance"] = state.uniqueness_probe(seed=seed)
        except ReductionError as err:
            out["restart_distance"] = None
            out["restart_failure"] = str(err)
    return out


def landscape_rows(config: RunConfig, eps_list=None, t_grid=None,
                   problem: ReductionProblem | None = None) -> list[dict]:
    """Rows (eps, t, I_eps, J_no_phi, D, G_pred, misfit) of the reduced-energy landscape."""
    eps_list = config.eps if eps_list is None else eps_list
    t_grid = config.t_grid if t_grid is None else t_grid
    report = config.report()
    if config.mode == SEMI:
        rows = []
        for eps in eps_list:
            ts = sorted(set(float(t) for t in t_grid) | {1.0})
            pred = [float(g_reduced(report, t) - g_reduced(report, 1.0)) for t in ts]
            for t, p in zip(ts, pred):
                I = eps * float(g_reduced(report, t))
                rows.append({"eps": eps, "t": t, "I_eps": I, "J_no_phi": I, "D": p, "G_pred": p, "misfit": 0.0})
        return rows
    problem = make_problem(config) if problem is None else problem
    return verify_expansion(problem, eps_list, t_grid, report, fd_step=None)["rows"]


# -- sweep ----------------------------------------------------------------------------

SWEEP_COLUMNS = ["eps", "status", "t_star", "t0", "t_error", "delta_star", "I_star", "residual_norm",
                 "residual_ratio", "u_min", "u_max", "depth", "multiplier", "certificate", "norm_R",
                 "norm_phi", "iterations", "restart_distance", "landscape_misfit", "reason"]


def _sweep_row(config: RunConfig, eps: float, index: int) -> dict:
    row: dict = {"eps": float(eps), "status": "ok", "reason": ""}
    try:
        report = config.report()
        row["t0"] = report.t0
        if config.mode == SEMI:
            cp = find_critical_point(config, eps, report=report)
            row.update(t_star=cp.t, t_error=abs(cp.t - report.t0) / report.t0, I_star=cp.I,
                       certificate=cp.certificate)
            return row
        problem = make_problem(config)
        red = reduce_diagnostics(config, eps, 1.0, problem, seed=config.seed() + index)
        row.update(norm_R=red["norm_R"], norm_phi=red["norm_phi"], iterations=red["iterations"],
                   restart_distance=red["restart_distance"])
        if config.landscape:
            rows = landscape_rows(config, [eps], problem=problem)
            row["landscape_misfit"] = max(r["misfit"] for r in rows)
        cp = find_critical_point(config, eps, problem, report)
        rec, _ = assemble_solution(config, eps, cp.t, cp.xi, problem)
        row.update(t_star=cp.t, t_error=abs(cp.t - report.t0) / report.t0, delta_star=rec.delta_star,
                   I_star=rec.I_star, residual_norm=rec.residual_norm, residual_ratio=rec.residual_ratio,
                   u_min=rec.u_min, u_max=rec.u_max, depth=rec.depth, multiplier=rec.multiplier,
                   certificate=cp.certificate)
    except (ArithmeticError, ValueError) as err:
        row["status"] = "error"
        row["reason"] = f"{type(err).__name__}: {err}"
    return row


def thread_cap(default: int | None = None) -> int:
    """Worker count from PR_THREADS (at least 1)."""
    raw = os.environ.get("PR_THREADS")
    if raw is None or not raw.strip():
        return default or min(4, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError as err:
        raise ConfigError(f"PR_THREADS must be an integer, got {raw!r}") from err


def sweep(config: RunConfig, threads: int | None = None) -> dict:
    """Run every eps of the configuration through reduce, landscape and solve.

    Rows run concurrently (at most ``threads``, default PR_THREADS) and are
    reported in the order of the eps list, so the report does not depend on
    scheduling.
    """
    workers = thread_cap() if threads is None else max(1, threads)
    eps_list = list(config.eps)
    if eps_list and workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(eps_list))) as pool:
            rows = list(pool.map(lambda item: _sweep_row(config, item[1], item[0]), enumerate(eps_list)))
    else:
        rows = [_sweep_row(config, e, i) for i, e in enumerate(eps_list)]
    failed = sum(r["status"] != "ok" for r in rows)
    return {
        "config": config.as_dict(),
        "config_hash": config_hash(config),
        "rows": [{k: r.get(k) for k in SWEEP_COLUMNS} for r in rows],
        "failed": failed,
        "all_failed": bool(rows) and failed == len(rows),
    }


# -- writers ------------------------------------------------------------------------------

def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def to_json(payload) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else _clean(row.get(k))) for k in columns})
    return buf.getvalue()


def write_text(path: str, text: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def constants_rows(kind: str, dims) -> list[dict]:
    """(n, a_P, b, c, Q_g, omega_n, alpha_n, K_n, C_n) for the Einstein model of each dimension."""
    from .energy import cn_constant, sobolev_kn
    from .geometry import sphere_volume
    from .operator import einstein_coefficients

    rows = []
    for n in dims:
        model = ManifoldModel(kind, n, 8)
        b, c = einstein_coefficients(n, model.ricci_constant)
        rows.append({"n": n, "a_P": paneitz_tensor(model)[0], "b": b, "c": c, "Q_g": q_curvature(model),
                     "omega_n": sphere_volume(n), "alpha_n": alpha_n(n), "K_n": sobolev_kn(n)[0],
                     "C_n": cn_constant(n, "derived")})
    return rows


def regime_label(config: RunConfig) -> str:
    law = config.law()
    return f"{law.variant}/{'sqrt' if law.regime == SQRT else 'power'}"


__all__ = [
    "FULL", "SEMI", "PRESETS", "ConfigError", "CriticalPointError", "RunConfig", "CriticalPoint",
    "SolutionRecord", "parse_config_text", "build_config", "load_config", "make_problem",
    "find_critical_point", "assemble_solution", "lagrange_multipliers", "multiplier_tolerance",
    "reduce_diagnostics", "landscape_rows", "sweep", "thread_cap", "to_json", "to_csv", "write_text",
    "constants_rows", "config_hash",
]
