"""Averaging on the half line: rescaled solves, averaged equilibria and eps-sweeps.

The fast-time problem for a given ``eps`` is

    x' = A x + f(t/eps) + F(t/eps, x),     P_minus x(0) = 0,

and its bounded solution ``psi_eps`` is compared with the equilibrium
``psi_bar`` of ``x' = A x + f_bar + F_bar(x)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    ContractionViolated,
    DomainTooShort,
    NumericalFailure,
    OmegaTableTooCoarse,
    StationaryContractionViolated,
    ValidationError,
)
from .function_space import AverageProfile, GridFunction
from .green_solver import (
    LipschitzField,
    SolveConfig,
    convolve,
    green_apply_semiaxis,
    solve_semilinear,
)
from .spectral import HyperbolicSplitting, OperatorSpec, split

FieldFamily = Union[LipschitzField, Callable[[float], LipschitzField]]


def rescale_forcing(f: GridFunction, eps: float, T_fast: float, h_fast: float | None = None) -> GridFunction:
    """``g(t) = f(t/eps)`` on ``[0, T_fast]``.

    The default fast step ``eps * f.h`` makes every lookup land on the slow
    grid; other steps fall back to linear interpolation.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    h_fast = eps * f.h if h_fast is None else float(h_fast)
    m = int(round(T_fast / h_fast))
    slow = (h_fast * np.arange(m + 1)) / eps
    if slow[-1] > f.t_end * (1 + 1e-12) + 1e-12 or f.t0 > 1e-12:
        raise DomainTooShort(f"slow forcing covers [{f.t0:g}, {f.t_end:g}], need [0, {slow[-1]:g}]")
    pos = (slow - f.t0) / f.h
    idx = np.rint(pos)
    on_grid = np.abs(pos - idx) <= 1e-9
    out = np.empty((m + 1, f.dim))
    ii = np.clip(idx[on_grid].astype(int), 0, len(f) - 1)
    out[on_grid] = f.values[ii]
    if not np.all(on_grid):
        j = np.clip(np.floor(pos[~on_grid]).astype(int), 0, len(f) - 2)
        w = (pos[~on_grid] - j)[:, None]
        out[~on_grid] = (1 - w) * f.values[j] + w * f.values[j + 1]
    return GridFunction(0.0, h_fast, out)


def stationary_solution(
    s: HyperbolicSplitting,
    f_bar,
    F_bar: Callable | LipschitzField | None = None,
    lipschitz: float | None = None,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Equilibrium of ``x' = A x + f_bar + F_bar(x)``.

    Linear: ``-A^-1 f_bar``.  Otherwise the fixed point of
    ``x -> -A^-1 (f_bar + F_bar(x))``, which needs ``|A^-1| L < 1``.
    """
    f_bar = np.atleast_1d(np.asarray(f_bar, dtype=float))
    A = s.A
    x = -np.linalg.solve(A, f_bar)
    if F_bar is None:
        return x
    if isinstance(F_bar, LipschitzField):
        lipschitz = F_bar.L if lipschitz is None else lipschitz
        F_bar = F_bar.averaged if F_bar.averaged is not None else F_bar
    if lipschitz is None:
        raise ValidationError("a Lipschitz constant is required for the averaged field")
    q = np.linalg.norm(np.linalg.inv(A), 2) * lipschitz
    if q >= 1:
        raise StationaryContractionViolated(f"|A^-1| L = {q:g} >= 1")
    for _ in range(max_iter):
        new = -np.linalg.solve(A, f_bar + np.asarray(F_bar(x), dtype=float))
        done = np.linalg.norm(new - x) <= tol * max(1.0, np.linalg.norm(new))
        x = new
        if done:
            break
    res = np.linalg.norm(A @ x + f_bar + np.asarray(F_bar(x), dtype=float))
    if res > 1e-10 * max(1.0, np.linalg.norm(f_bar)):
        raise NumericalFailure(f"equilibrium residual {res:.3g} above 1e-10")
    return x


@dataclass
class AveragingProblem:
    """Slow-time data for ``x' = eps (A x + f(t) + F(t, x))``.

    ``F`` is either a :class:`LipschitzField` or a map ``eps -> LipschitzField``
    for fields whose Lipschitz constant depends on ``eps``.
    """

    op: OperatorSpec
    f: GridFunction
    f_bar: np.ndarray
    F: FieldFamily | None = None
    omega: AverageProfile | None = None
    nu_fraction: float = 0.9

    def __post_init__(self):
        self.f_bar = np.atleast_1d(np.asarray(self.f_bar, dtype=float))
        if self.f.dim != self.op.dim or self.f_bar.size != self.op.dim:
            raise ValidationError("forcing, mean and operator dimensions disagree")

    @cached_property
    def splitting(self) -> HyperbolicSplitting:
        return split(self.op, nu_fraction=self.nu_fraction)

    def field_for(self, eps: float) -> LipschitzField | None:
        if self.F is None or isinstance(self.F, LipschitzField):
            return self.F
        return self.F(eps)

    def averaged_field(self, eps: float | None = None):
        F = self.field_for(eps if eps is not None else 1.0)
        return None if F is None else F.averaged

    @property
    def field_depends_on_eps(self) -> bool:
        return self.F is not None and not isinstance(self.F, LipschitzField)

    @cached_property
    def psi_bar(self) -> np.ndarray:
        """Equilibrium of the averaged problem (for a fixed field)."""
        if self.field_depends_on_eps:
            raise ValidationError("the averaged equilibrium depends on eps; use psi_bar_for(eps)")
        return self._equilibrium(self.F)

    def psi_bar_for(self, eps: float) -> np.ndarray:
        """Equilibrium of the averaged problem built from the field at this ``eps``."""
        if not self.field_depends_on_eps:
            return self.psi_bar
        return self._equilibrium(self.field_for(eps))

    def _equilibrium(self, F: LipschitzField | None) -> np.ndarray:
        if F is None:
            return stationary_solution(self.splitting, self.f_bar)
        if F.averaged is None:
            raise ValidationError("semi-linear averaging needs the averaged field F_bar")
        return stationary_solution(self.splitting, self.f_bar, F.averaged, F.L)


def fast_step(p: AveragingProblem, eps: float, cfg: SolveConfig) -> float:
    """Largest step ``<= cfg.h`` that divides ``eps * f.h``, so samples of ``f`` are hit exactly."""
    base = eps * p.f.h
    return base / max(1, math.ceil(base / cfg.h * (1 - 1e-12)))


def _fast_config(p: AveragingProblem, eps: float, cfg: SolveConfig) -> SolveConfig:
    h = fast_step(p, eps, cfg)
    T = h * round(cfg.T / h)
    return replace(cfg, h=h, T=T)


def solve_rescaled(p: AveragingProblem, eps: float, cfg: SolveConfig):
    """``psi_eps``: bounded solution of the fast-time problem on ``[0, T]``."""
    return _solve_rescaled(p, eps, cfg)[0]


def _solve_rescaled(p: AveragingProblem, eps: float, cfg: SolveConfig):
    fcfg = _fast_config(p, eps, cfg)
    g = rescale_forcing(p.f, eps, fcfg.T, fcfg.h)
    F = p.field_for(eps)
    s = p.splitting
    if F is None:
        return green_apply_semiaxis(s, g, fcfg), g, None, fcfg
    if not F.L < s.contraction_limit:
        raise ContractionViolated(
            f"eps={eps:g}: Lipschitz constant {F.L:g} is not below nu/(2N) = {s.contraction_limit:g}"
        )
    Fe = F.rescaled(eps)
    return solve_semilinear(s, g, Fe, fcfg).phi, g, Fe, fcfg


@dataclass(frozen=True)
class AveragingRow:
    eps: float
    sup_dev: float
    sup_dev_full: float
    bound: float | None
    lipschitz: float
    samples: int


@dataclass
class AveragingReport:
    psi_bar: np.ndarray
    rows: list = field(default_factory=list)
    slope: float = math.nan
    t_min: float = 0.0
    solutions: dict = field(default_factory=dict, repr=False)

    def cumulative_slopes(self) -> list[float]:
        return [loglog_slope(self.rows[: i + 1]) for i in range(len(self.rows))]

    def to_dict(self) -> dict:
        return {
            "psi_bar": [float(v) for v in self.psi_bar],
            "t_min": self.t_min,
            "slope": _json_float(self.slope),
            "rows": [
                {
                    "eps": r.eps,
                    "sup_dev": r.sup_dev,
                    "sup_dev_full": r.sup_dev_full,
                    "bound": _json_float(r.bound),
                    "lipschitz": r.lipschitz,
                    "samples": r.samples,
                }
                for r in self.rows
            ],
        }


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def loglog_slope(rows) -> float:
    pts = [(math.log(r.eps), math.log(r.sup_dev)) for r in rows if r.sup_dev > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _sweep_row(p: AveragingProblem, eps: float, cfg: SolveConfig, t_min: float, with_bound: bool):
    s = p.splitting
    psi, g, Fe, fcfg = _solve_rescaled(p, eps, cfg)
    psi_bar = p.psi_bar_for(eps)
    dev = psi - psi_bar
    sup_full = dev.sup_norm()
    sup_dev = dev.restrict(t_min, None).sup_norm()

    bound = None
    L = 0.0 if Fe is None else Fe.L
    if with_bound and (Fe is None or Fe.averaged is not None):
        # B(eps) from the two oscillating remainders, G applied on the same grid
        gT = g.restrict(0.0, fcfg.T)
        B = np.linalg.norm(convolve(s, gT.values - p.f_bar, fcfg.h)[: len(psi)], axis=1).max()
        if Fe is not None:
            t = gT.times
            xbar = np.tile(psi_bar, (len(gT), 1))
            Fhat = Fe(t, xbar) - np.asarray(Fe.averaged(psi_bar), dtype=float)
            B += np.linalg.norm(convolve(s, Fhat, fcfg.h)[: len(psi)], axis=1).max()
        bound = float(s.nu * B / (s.nu - 2 * s.N * L))
    return AveragingRow(float(eps), float(sup_dev), float(sup_full), bound, float(L), len(psi)), psi


def averaging_sweep(
    p: AveragingProblem,
    eps_list: Sequence[float],
    cfg: SolveConfig,
    t_min: float | None = None,
    *,
    with_bound: bool = True,
    max_workers: int | None = None,
    keep_solutions: bool = False,
) -> AveragingReport:
    """Measure ``sup_{t >= t_min} |psi_eps(t) - psi_bar|`` for each ``eps``.

    ``t_min`` defaults to ``5/nu`` which skips the boundary layer created by
    ``P_minus psi(0) = 0``.  For a field family ``eps -> F_eps`` each row is
    compared with the equilibrium of its own averaged field.  The bound column is ``nu B(eps) / (nu - 2 N L)``
    with ``B`` the sup of the Green's operator applied to ``f_eps - f_bar``
    plus the one applied to ``F_eps(., psi_bar) - F_bar(psi_bar)``.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValidationError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list must be strictly decreasing")
    s = p.splitting
    t_min = 5.0 / s.nu if t_min is None else float(t_min)
    if t_min < 0:
        raise ValidationError("t_min must be nonnegative")
    for eps in eps_list:
        F = p.field_for(eps)
        if F is not None and not F.L < s.contraction_limit:
            raise ContractionViolated(
                f"eps={eps:g}: Lipschitz constant {F.L:g} is not below nu/(2N) = {s.contraction_limit:g}"
            )
    # the reported equilibrium is the one of the smallest eps, the limit being approached
    psi_bar = p.psi_bar_for(eps_list[-1])

    def run(eps):
        return _sweep_row(p, eps, cfg, t_min, with_bound)

    if max_workers == 1 or len(eps_list) == 1:
        results = [run(e) for e in eps_list]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, eps_list))

    rows = [r for r, _ in results]
    report = AveragingReport(psi_bar, rows, loglog_slope(rows), t_min)
    if keep_solutions:
        report.solutions = {r.eps: psi for r, psi in results}
    return report


# bound terms for the oscillation integrals


@dataclass(frozen=True)
class BoundTerms:
    t_term: float
    int_term: float
    tail_term: float

    def as_tuple(self):
        return (self.t_term, self.int_term, self.tail_term)


def omega_function(omega: AverageProfile, extrapolate: bool = False) -> Callable[[float], float]:
    """Piecewise-linear ``omega`` from its table.

    ``omega(0)`` is capped at the value of the smallest tabulated window.
    Outside the table this raises unless ``extrapolate`` is set, in which
    case values are held constant at both ends.
    """
    T = omega.windows
    d = omega.deviations
    if T.size == 0:
        raise OmegaTableTooCoarse("empty omega table")

    def w(x: float) -> float:
        if x == 0:
            return float(d[0])
        if not extrapolate and (x < T[0] * (1 - 1e-12) or x > T[-1] * (1 + 1e-12)):
            raise OmegaTableTooCoarse(f"omega evaluated at {x:g}, table covers [{T[0]:g}, {T[-1]:g}]")
        return float(np.interp(x, T, d))

    return w


def bound_terms(omega: AverageProfile, N: float, nu: float, eps: float, mu: float = 0.5) -> BoundTerms:
    """Three upper bounds used for the oscillation integrals.

    With ``xi = eps**mu`` and ``w1 = omega(eps**(mu - 1))``:

    * ``t_term``   bounds ``sup_t e^{-nu t} t omega(t/eps)`` by
      ``omega(0) xi + w1 max(1, 1/(nu e))``;
    * ``int_term`` bounds ``sup_t int_0^t e^{-nu s} s omega(s/eps) ds`` by
      ``omega(0)/nu (1/nu - e^{-nu xi}(xi + 1/nu)) + w1 e^{-nu xi}/nu (xi + 1/nu)``;
    * ``tail_term`` bounds ``int_0^inf e^{-nu s} s omega(s/eps) ds`` by
      ``omega(0)(1/nu^2 - e^{-nu xi}(xi + 1/nu)/nu) + w1 e^{nu xi}/nu (xi + 1/nu)``.

    The terms vanish as ``eps -> 0`` only for ``0 < mu < 1``: then
    ``eps**(mu - 1) -> inf`` and ``w1 -> 0``.  ``N`` does not enter these
    expressions; it is validated and kept in the signature so callers can
    pass the dichotomy pair together.
    """
    if not N >= 1:
        raise ValidationError("dichotomy constant N must be at least 1")
    if not mu > 0:
        raise ValidationError("mu must be positive")
    if not (nu > 0 and eps > 0):
        raise ValidationError("nu and eps must be positive")
    w = omega_function(omega)
    w0 = w(0.0)
    w1 = w(eps ** (mu - 1.0))
    xi = eps**mu
    head = (1.0 / nu - math.exp(-nu * xi) * (xi + 1.0 / nu)) / nu
    t_term = w0 * xi + w1 * max(1.0, 1.0 / (nu * math.e))
    int_term = w0 * head + w1 * math.exp(-nu * xi) / nu * (xi + 1.0 / nu)
    tail_term = w0 * head + w1 * math.exp(nu * xi) / nu * (xi + 1.0 / nu)
    return BoundTerms(t_term, int_term, tail_term)


def empirical_t_sup(omega: AverageProfile, nu: float, eps: float, t_max: float | None = None,
                    samples: int = 20001) -> float:
    """Sampled ``sup_t e^{-nu t} t omega(t/eps)`` with ``omega`` held flat outside its table."""
    t_max = 50.0 / nu if t_max is None else t_max
    t = np.linspace(0.0, t_max, samples)
    T, d = omega.windows, omega.deviations
    vals = np.interp(t / eps, T, d, left=d[0], right=d[-1])
    return float(np.max(np.exp(-nu * t) * t * vals))
