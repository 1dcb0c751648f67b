"""Built-in experiments and the named signals and fields used by configs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .averaging import AveragingProblem, AveragingReport, averaging_sweep
from .errors import ConfigError, ValidationError
from .function_space import GridFunction, read_csv, time_average
from .green_solver import (
    LipschitzField,
    SolveConfig,
    green_apply_semiaxis,
    ode_residual,
    solve_semilinear,
)
from .spectral import OperatorSpec, split

SQRT2 = math.sqrt(2.0)


@dataclass
class ExperimentResult:
    """What a run produces: one grid function, an optional sweep report and summary data."""

    name: str
    solution: GridFunction
    report: AveragingReport | None = None
    summary: dict = field(default_factory=dict)
    telemetry: dict = field(default_factory=dict)


# named scalar signals in slow time, with their exact means


def decaying_mix(t):
    return (np.sin(t) + np.cos(SQRT2 * t) + np.exp(-t)) / 3.0


SIGNALS: dict[str, tuple[Callable, Callable]] = {
    # name -> (builder(params) -> scalar function of t, mean(params))
    "sine": (
        lambda p: (lambda t: p.get("amplitude", 1.0) * np.sin(p.get("frequency", 1.0) * t)),
        lambda p: 0.0,
    ),
    "quasi_periodic": (
        lambda p: (lambda t: p.get("amplitude", 1.0)
                   * (np.sin(p.get("frequency", 1.0) * t) + np.sin(SQRT2 * p.get("frequency", 1.0) * t))),
        lambda p: 0.0,
    ),
    "constant": (
        lambda p: (lambda t: p.get("value", 1.0) * np.ones_like(t)),
        lambda p: p.get("value", 1.0),
    ),
    "decaying_mix": (
        lambda p: (lambda t: p.get("amplitude", 1.0) * decaying_mix(t)),
        lambda p: 0.0,
    ),
}


def first_mode(op: OperatorSpec) -> np.ndarray:
    if op.kind == "dirichlet_laplacian_1d":
        return np.sin(np.pi * op.grid())
    v = np.zeros(op.dim)
    v[0] = 1.0
    return v


def _direction(op: OperatorSpec, direction) -> np.ndarray:
    if direction is None or direction == "ones":
        return np.ones(op.dim)
    if direction == "first_mode":
        return first_mode(op)
    d = np.asarray(direction, dtype=float)
    if d.shape != (op.dim,):
        raise ConfigError(f"forcing direction has shape {d.shape}, operator dimension is {op.dim}")
    return d


def make_forcing(op: OperatorSpec, params: dict, t_end: float, base_dir=None):
    """Slow-time forcing on ``[0, t_end]`` and its mean.

    CSV forcing takes its mean from a declared ``mean`` entry or from
    :func:`time_average` over half of the file's domain.
    """
    params = dict(params)
    signal = params.get("signal")
    if signal == "csv":
        from pathlib import Path

        path = Path(params["path"]) if "path" in params else None
        if path is None:
            raise ConfigError("csv forcing needs a path")
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ConfigError(f"forcing file {path} does not exist")
        f = read_csv(path)
        if f.dim != op.dim:
            raise ConfigError(f"forcing file has {f.dim} columns, operator dimension is {op.dim}")
        if "mean" in params:
            mean = np.asarray(params["mean"], dtype=float)
        else:
            mean = time_average(f, [f.length / 2]).mean
        return f, mean
    if signal not in SIGNALS:
        raise ConfigError(f"unknown forcing signal {signal!r}; choose from {sorted(SIGNALS) + ['csv']}")
    build, mean_of = SIGNALS[signal]
    scalar = build(params)
    d = _direction(op, params.get("direction"))
    step = float(params.get("step", 2 * math.pi / 400 / max(1.0, float(params.get("frequency", 1.0)))))
    if not step > 0:
        raise ConfigError("forcing step must be positive")
    f = GridFunction.sample(lambda t: np.outer(scalar(t), d), 0.0, t_end, step)
    return f, mean_of(params) * d


def make_field(params: dict | None, dim: int):
    """Named nonlinearity, possibly with ``L(eps) = L eps**eps_power``.

    * ``sin_scaled``: ``L m(t) sin(scale x) / scale`` with modulation ``none``
      or ``decaying_mix``; Lipschitz constant ``L`` since ``|m| <= 1``.
    * ``cubic``: ``-scale clip(x, c)**3`` with ``c`` chosen so that ``3 scale c**2 = L``.
    """
    if not params:
        return None
    name = params.get("name")
    L = float(params.get("L", 0.1))
    scale = float(params.get("scale", 1.0))
    power = float(params.get("eps_power", 0.0))
    if not (L >= 0 and scale > 0):
        raise ConfigError("field needs L >= 0 and scale > 0")

    def build(Le: float) -> LipschitzField:
        if name == "sin_scaled":
            modulation = params.get("modulation", "none")
            if modulation == "none":
                return LipschitzField(lambda t, x: Le * np.sin(scale * x) / scale, Le,
                                      averaged=lambda x: Le * np.sin(scale * x) / scale, name=name)
            if modulation == "decaying_mix":
                return LipschitzField(lambda t, x: Le * decaying_mix(t)[:, None] * np.sin(scale * x) / scale,
                                      Le, averaged=lambda x: np.zeros_like(x), name=name)
            raise ConfigError(f"unknown modulation {modulation!r}")
        if name == "cubic":
            c = math.sqrt(Le / (3 * scale)) if Le > 0 else 0.0
            g = lambda x: -scale * np.clip(x, -c, c) ** 3
            return LipschitzField(lambda t, x: g(x), Le, averaged=g, name=name)
        raise ConfigError(f"unknown field {name!r}; choose from ['cubic', 'sin_scaled']")

    if power == 0.0:
        return build(L)
    build(L)  # validate names eagerly
    return lambda eps: build(L * eps**power)


def sweep_experiment(name, op, f, f_bar, F, eps_list, cfg, t_min=None) -> ExperimentResult:
    p = AveragingProblem(op, f, f_bar, F)
    report = averaging_sweep(p, eps_list, cfg, t_min, keep_solutions=True)
    s = p.splitting
    solution = report.solutions[report.rows[-1].eps]
    report.solutions = {}
    return ExperimentResult(
        name,
        solution,
        report,
        summary={"eps_final": report.rows[-1].eps},
        telemetry={"N": s.N, "nu": s.nu, "gap": s.gap, "n_stable": s.n_stable, "n_unstable": s.n_unstable},
    )


def _slow_horizon(eps_list, cfg: SolveConfig) -> float:
    return cfg.T / min(eps_list) + 1.0


# registry


def diag2(seed: int = 0, **_) -> ExperimentResult:
    op = OperatorSpec("dense_matrix", matrix=np.diag([-1.0, 2.0]))
    s = split(op)
    cfg = SolveConfig(h=1e-3, T=30.0)
    f = GridFunction.constant([1.0, 1.0], 0.0, cfg.T, cfg.h)
    phi = green_apply_semiaxis(s, f, cfg)
    t = phi.times
    exact = np.column_stack([1 - np.exp(-t), np.full_like(t, -0.5)])
    return ExperimentResult(
        "diag2",
        phi,
        summary={
            "max_error": float(np.linalg.norm(phi.values - exact, axis=1).max()),
            "stable_part_at_zero": float(np.linalg.norm(s.P_minus @ phi.values[0])),
            "residual": ode_residual(s, f, None, phi),
        },
        telemetry={"N": s.N, "nu": s.nu, "gap": s.gap},
    )


def scalar_lin_avg(seed: int = 0, eps_list=(0.2, 0.1, 0.05, 0.025), solve=None, **_) -> ExperimentResult:
    cfg = solve or SolveConfig(h=1e-3, T=20.0)
    op = OperatorSpec("dense_matrix", matrix=np.array([[-1.0]]))
    f, f_bar = make_forcing(op, {"signal": "sine"}, _slow_horizon(eps_list, cfg))
    res = sweep_experiment("scalar_lin_avg", op, f, f_bar, None, eps_list, cfg)
    res.summary["closed_form"] = [e / math.sqrt(1 + e * e) for e in eps_list]
    return res


def cubic_branch(eps: float, t):
    """Positive nonzero bounded solution of ``x' = x - eps x**3`` vanishing nowhere on ``t > 0``."""
    return (eps * (1.0 - np.exp(-2.0 * t))) ** -0.5


def excub(seed: int = 0, eps_list=(0.5,), solve=None, **_) -> ExperimentResult:
    """``x' = x - eps x**3``: zero and ``+-q_eps`` are all bounded with ``P_minus x(0) = 0``."""
    eps = float(eps_list[0])
    if not eps > 0:
        raise ValidationError("eps must be positive")
    op = OperatorSpec("dense_matrix", matrix=np.array([[1.0]]))
    s = split(op)
    h = 1e-5
    cubic = LipschitzField(lambda t, x: -eps * x**3, math.inf, name="cubic")
    q = GridFunction.sample(lambda t: cubic_branch(eps, t), 0.1 - h, 20.0 + h, h)
    zero = q.with_values(np.zeros_like(q.values))
    residuals = {
        "zero": ode_residual(s, None, cubic, zero),
        "plus": ode_residual(s, None, cubic, q),
        "minus": ode_residual(s, None, cubic, -q),
    }

    # a globally Lipschitz truncation inside the contraction regime has only the zero solution
    cfg = solve or SolveConfig(h=1e-3, T=20.0)
    c = math.sqrt(0.8 * s.contraction_limit / (3 * eps))
    L = 3 * eps * c * c
    trunc = LipschitzField(lambda t, x: -eps * np.clip(x, -c, c) ** 3, L, name="cubic_truncated")
    f0 = GridFunction.constant([0.0], 0.0, cfg.T, cfg.h)
    rng = np.random.default_rng(seed)
    psi0 = rng.normal(size=(len(f0), 1))
    sol = solve_semilinear(s, f0, trunc, cfg, psi0=psi0)

    coarse = q.times[:: 1000]
    table = GridFunction(0.1 - h, 1000 * h, np.column_stack([
        np.zeros_like(coarse), cubic_branch(eps, coarse), -cubic_branch(eps, coarse)]))
    return ExperimentResult(
        "excub",
        table,
        summary={
            "eps": eps,
            "residuals": residuals,
            "truncation_level": c,
            "truncated_L": L,
            "contraction_solution_sup": sol.phi.sup_norm(),
            "iterations": sol.iterations,
        },
        telemetry={"N": s.N, "nu": s.nu, "residual_step": h},
    )


def heat31(seed: int = 0, eps_list=(0.2, 0.1, 0.05, 0.025), solve=None, points: int = 31, **_) -> ExperimentResult:
    """Heat equation on ``[0, 1]`` with Dirichlet walls, 31 interior points.

    Additive forcing and field coefficient are both ``decaying_mix(t/eps)``,
    which has mean zero, so the averaged problem has the zero equilibrium.
    """
    cfg = solve or SolveConfig(h=1e-3, T=20.0)
    op = OperatorSpec("dirichlet_laplacian_1d", points=points)
    f, f_bar = make_forcing(op, {"signal": "decaying_mix", "direction": "first_mode"},
                            _slow_horizon(eps_list, cfg))
    F = make_field({"name": "sin_scaled", "L": 1.0, "modulation": "decaying_mix"}, op.dim)
    return sweep_experiment("heat31", op, f, f_bar, F, eps_list, cfg)


def semilinear_scalar(seed: int = 0, solve=None, **_) -> ExperimentResult:
    """``x' = -x + 1 + 0.1 sin x``: contraction ratios, radius and independence of the start."""
    op = OperatorSpec("dense_matrix", matrix=np.array([[-1.0]]))
    s = split(op)
    cfg = solve or SolveConfig(h=1e-3, T=30.0)
    f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
    F = LipschitzField(lambda t, x: 0.1 * np.sin(x), 0.1, name="sin")
    sol = solve_semilinear(s, f, F, cfg)
    rng = np.random.default_rng(seed)
    other = solve_semilinear(s, f, F, cfg, psi0=rng.normal(scale=3.0, size=(cfg.steps + 1, 1)))
    return ExperimentResult(
        "semilinear_scalar",
        sol.phi,
        summary={
            "alpha": sol.alpha,
            "radius": sol.radius,
            "iterations": sol.iterations,
            "max_ratio": float(np.max(sol.ratios)) if len(sol.ratios) else 0.0,
            "distance_from_linear": (sol.phi - sol.phi0).sup_norm(),
            "start_independence": (sol.phi - other.phi).sup_norm(),
        },
        telemetry={"N": s.N, "nu": s.nu},
    )


REGISTRY: dict[str, tuple[Callable[..., ExperimentResult], str]] = {
    "diag2": (diag2, "diag(-1, 2) with constant forcing (1, 1), closed-form bounded solution"),
    "scalar_lin_avg": (scalar_lin_avg, "x' = eps(-x + sin t), sweep against eps/sqrt(1 + eps^2)"),
    "excub": (excub, "x' = x - eps x^3: three bounded solutions and the truncated contraction"),
    "heat31": (heat31, "heat equation, 31 points, oscillating forcing and field, zero average"),
    "semilinear_scalar": (semilinear_scalar, "x' = -x + 1 + 0.1 sin x, contraction diagnostics"),
}
