"""Green's operator for ``x' = A x + f(t)`` and the contraction solver for the semi-linear case.

Quadrature.  On each grid cell the forcing is replaced by its linear
interpolant and the exponential kernel is integrated exactly, which gives
the two-term recursion (per spectral block, ``Z = B h``)

    y_{j+1} = e^Z y_j + h (phi1(Z) - phi2(Z)) g_j + h phi2(Z) g_{j+1}

with ``phi1(Z) = Z^-1 (e^Z - I)``, ``phi2(Z) = Z^-2 (e^Z - I - Z)``.  For
``|Z| -> 0`` this is the composite trapezoid rule; unlike the plain
trapezoid rule it stays accurate for stiff modes with ``|lambda| h >> 1``.
The unstable part is the same recursion run backwards in time with the
block ``-A_+``.  Cost is O(n^2) per grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.signal import lfilter

from .errors import (
    ContractionViolated,
    GridMismatch,
    HorizonTooShort,
    MaxIterExceeded,
    ValidationError,
)
from .function_space import GridFunction
from .spectral import HyperbolicSplitting


@dataclass(frozen=True)
class LipschitzField:
    """Nonlinearity ``F(t, x)`` with a global Lipschitz constant ``L`` in ``x``.

    ``func(t, x)`` must broadcast: ``t`` of shape ``(m,)`` with ``x`` of
    shape ``(m, n)`` returns ``(m, n)``.  ``averaged`` is the time average
    ``x -> F_bar(x)`` when known.  Use ``L = inf`` for fields that are only
    locally Lipschitz; the contraction solver rejects them.
    """

    func: Callable
    L: float
    averaged: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if not self.L >= 0:
            raise ValidationError("Lipschitz constant must be nonnegative")

    def __call__(self, t, x):
        return np.asarray(self.func(np.asarray(t, dtype=float), np.asarray(x, dtype=float)), dtype=float)

    def rescaled(self, eps: float) -> "LipschitzField":
        """The fast-time field ``(t, x) -> F(t/eps, x)``."""
        func = self.func
        return LipschitzField(lambda t, x: func(t / eps, x), self.L, self.averaged, self.name)

    def scaled(self, c: float) -> "LipschitzField":
        func, avg = self.func, self.averaged
        return LipschitzField(
            lambda t, x: c * np.asarray(func(t, x)),
            abs(c) * self.L,
            None if avg is None else (lambda x: c * np.asarray(avg(x))),
            self.name,
        )

    def spot_check(self, dim: int, rng: np.random.Generator, samples: int = 256,
                   radius: float = 5.0, t_max: float = 100.0) -> float:
        """Largest observed ratio ``|F(t,x1) - F(t,x2)| / (L |x1 - x2|)`` on random pairs."""
        t = rng.uniform(0.0, t_max, samples)
        x1 = rng.uniform(-radius, radius, (samples, dim))
        x2 = x1 + rng.normal(scale=rng.uniform(1e-3, radius, (samples, 1)), size=(samples, dim))
        num = np.linalg.norm(self(t, x1) - self(t, x2), axis=1)
        den = np.linalg.norm(x1 - x2, axis=1)
        if self.L == 0:
            return 0.0 if np.all(num == 0) else math.inf
        return float(np.max(num / (self.L * den)))

    def vanishes_at_zero(self, dim: int, ts) -> bool:
        ts = np.asarray(ts, dtype=float)
        return bool(np.all(self(ts, np.zeros((ts.size, dim))) == 0))


@dataclass(frozen=True)
class SolveConfig:
    """Grid step ``h``, truncation horizon ``T`` and solver tolerances.

    The truncation check needs ``N``, ``nu`` and the forcing norm, so it is
    made by :meth:`output_horizon` when a solve starts.
    """

    h: float = 1e-3
    T: float = 30.0
    tail_tol: float = 1e-8
    fp_tol: float = 1e-10
    max_iter: int = 500
    t_eval: float | None = None

    def __post_init__(self):
        if not (self.h > 0 and self.T > 0):
            raise ValidationError("h and T must be positive")
        if self.T < self.h:
            raise ValidationError("horizon T is shorter than one grid step")
        if not (self.tail_tol > 0 and self.fp_tol > 0):
            raise ValidationError("tolerances must be positive")
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))

    def tail_margin(self, s: HyperbolicSplitting, fnorm: float) -> float:
        """Distance from a truncation end beyond which the neglected tail is below ``tail_tol``."""
        if fnorm == 0:
            return 0.0
        return max(0.0, math.log(s.N * fnorm / (s.nu * self.tail_tol)) / s.nu)

    def output_horizon(self, s: HyperbolicSplitting, fnorm: float) -> float:
        """Last time at which a semi-axis solution on ``[0, T]`` is within ``tail_tol``."""
        t_max = self.T - (self.tail_margin(s, fnorm) if s.n_unstable else 0.0)
        if self.t_eval is not None:
            if self.t_eval > t_max + 1e-12 * self.T:
                raise HorizonTooShort(
                    f"tail bound at t={self.t_eval:g} exceeds {self.tail_tol:g}; need T >= "
                    f"{self.t_eval + self.T - t_max:g}"
                )
            return float(self.t_eval)
        if t_max < 0:
            raise HorizonTooShort(f"T={self.T:g} is shorter than the tail margin {self.T - t_max:g}")
        return t_max


# quadrature


@dataclass(frozen=True)
class _Step:
    E: np.ndarray
    W_start: np.ndarray
    W_end: np.ndarray
    diagonal: bool


def _phi_functions(Z: np.ndarray):
    m = Z.shape[0]
    aug = np.zeros((3 * m, 3 * m))
    aug[:m, :m] = Z
    aug[:m, m : 2 * m] = np.eye(m)
    aug[m : 2 * m, 2 * m :] = np.eye(m)
    X = sla.expm(aug)
    return X[:m, :m], X[:m, m : 2 * m], X[:m, 2 * m :]


def _make_step(block: np.ndarray, h: float) -> _Step:
    m = block.shape[0]
    diagonal = m > 0 and np.count_nonzero(block - np.diag(np.diag(block))) == 0
    if diagonal:
        parts = [_phi_functions(np.array([[z * h]])) for z in np.diag(block)]
        E, p1, p2 = (np.diag([p[i][0, 0] for p in parts]) for i in range(3))
    else:
        E, p1, p2 = _phi_functions(block * h)
    return _Step(E, h * (p1 - p2), h * p2, diagonal)


def _recursion(step: _Step, g: np.ndarray) -> np.ndarray:
    """``y_0 = 0``, ``y_{j+1} = E y_j + W_start g_j + W_end g_{j+1}``."""
    M, m = g.shape
    y = np.zeros((M, m))
    if m == 0 or M == 1:
        return y
    b = g[:-1] @ step.W_start.T + g[1:] @ step.W_end.T
    if step.diagonal:
        x = np.vstack([np.zeros((1, m)), b])
        for i, e in enumerate(np.diag(step.E)):
            y[:, i] = lfilter([1.0], [1.0, -e], x[:, i])
        return y
    E = step.E
    for j in range(M - 1):
        y[j + 1] = E @ y[j] + b[j]
    return y


def _steps(s: HyperbolicSplitting, h: float):
    key = ("steps", float(h))
    if key not in s._cache:
        s._cache[key] = (_make_step(s.stable_block, h), _make_step(-s.unstable_block, h))
    return s._cache[key]


def convolve(s: HyperbolicSplitting, values: np.ndarray, h: float) -> np.ndarray:
    """``int G(t - tau) f(tau) dtau`` over the sampled interval, at every grid point.

    The stable part integrates forward from the first sample, the unstable
    part backward from the last one: the truncated Green's operator.
    """
    values = np.asarray(values, dtype=float)
    k = s.n_stable
    g = values @ s.basis_inv.T
    stable, unstable = _steps(s, h)
    out = np.zeros_like(values)
    if k:
        out += _recursion(stable, g[:, :k]) @ s.basis[:, :k].T
    if s.n_unstable:
        z = _recursion(unstable, g[::-1, k:])[::-1]
        out -= z @ s.basis[:, k:].T
    return out


def _semiaxis_data(f: GridFunction, cfg: SolveConfig) -> GridFunction:
    if abs(f.h - cfg.h) > 1e-12 * cfg.h:
        raise GridMismatch(f"forcing step {f.h!r} differs from solver step {cfg.h!r}")
    if abs(f.t0) > 1e-12 * max(1.0, cfg.T):
        raise ValidationError(f"semi-axis forcing must start at t=0, got t0={f.t0!r}")
    if f.t_end < cfg.T - 1e-9 * cfg.h:
        raise HorizonTooShort(f"forcing ends at {f.t_end:g} < T={cfg.T:g}; data are never padded")
    return f.restrict(0.0, cfg.T)


def green_apply_semiaxis(s: HyperbolicSplitting, f: GridFunction, cfg: SolveConfig) -> GridFunction:
    """Bounded solution of ``x' = A x + f`` on ``[0, inf)`` with ``P_minus x(0) = 0``.

    Returned on ``[0, t_eval]`` where the truncation of the unstable tail at
    ``T`` costs at most ``tail_tol``.
    """
    fT = _semiaxis_data(f, cfg)
    phi = GridFunction(0.0, cfg.h, convolve(s, fT.values, cfg.h))
    return phi.restrict(0.0, cfg.output_horizon(s, fT.sup_norm()))


def green_apply_axis(s: HyperbolicSplitting, f: GridFunction, cfg: SolveConfig) -> GridFunction:
    """Bounded solution on the whole axis from forcing sampled on ``[-T, T]``.

    Returned on the interior where both truncated tails are below ``tail_tol``.
    """
    if abs(f.h - cfg.h) > 1e-12 * cfg.h:
        raise GridMismatch(f"forcing step {f.h!r} differs from solver step {cfg.h!r}")
    if f.t0 > -cfg.T + 1e-9 * cfg.h or f.t_end < cfg.T - 1e-9 * cfg.h:
        raise HorizonTooShort(f"forcing must cover [-{cfg.T:g}, {cfg.T:g}]")
    fT = f.restrict(-cfg.T, cfg.T)
    phi = GridFunction(fT.t0, cfg.h, convolve(s, fT.values, cfg.h))
    margin = cfg.tail_margin(s, fT.sup_norm())
    lo = fT.t0 + (margin if s.n_stable else 0.0)
    hi = fT.t_end - (margin if s.n_unstable else 0.0)
    if lo > hi:
        raise HorizonTooShort(f"T={cfg.T:g} leaves no interior; tail margin is {margin:g}")
    return phi.restrict(lo, hi)


@dataclass
class SemilinearSolution:
    phi: GridFunction
    phi0: GridFunction
    iterations: int
    alpha: float
    steps: list = field(default_factory=list)
    radius: float = math.nan

    @property
    def ratios(self) -> np.ndarray:
        """Successive step ratios ``|psi_{k+1} - psi_k| / |psi_k - psi_{k-1}|``."""
        st = np.asarray(self.steps)
        with np.errstate(divide="ignore", invalid="ignore"):
            return st[1:] / st[:-1]


def solve_semilinear(
    s: HyperbolicSplitting,
    f: GridFunction,
    F: LipschitzField,
    cfg: SolveConfig,
    psi0: np.ndarray | GridFunction | None = None,
) -> SemilinearSolution:
    """Bounded solution of ``x' = A x + f + F(t, x)`` with ``P_minus x(0) = 0``.

    Picard iteration ``psi <- G(F(., psi + phi0))`` around the linear
    solution ``phi0``; stops once the a-posteriori error bound
    ``alpha/(1-alpha) |psi_{k+1} - psi_k|`` drops below ``fp_tol``.
    """
    limit = s.contraction_limit
    if not F.L < limit:
        raise ContractionViolated(f"Lipschitz constant {F.L:g} is not below nu/(2N) = {limit:g}")
    fT = _semiaxis_data(f, cfg)
    t = fT.times
    phi0 = convolve(s, fT.values, cfg.h)
    alpha = 2.0 * s.N * F.L / s.nu
    stop = math.inf if alpha == 0 else cfg.fp_tol * (1.0 - alpha) / alpha

    if psi0 is None:
        psi = np.zeros_like(phi0)
    else:
        psi = np.array(psi0.values if isinstance(psi0, GridFunction) else psi0, dtype=float)
        if psi.shape != phi0.shape:
            raise GridMismatch(f"initial guess has shape {psi.shape}, expected {phi0.shape}")

    steps = []
    for it in range(1, int(cfg.max_iter) + 1):
        new = convolve(s, F(t, psi + phi0), cfg.h)
        steps.append(float(np.linalg.norm(new - psi, axis=1).max()))
        psi = new
        if steps[-1] <= stop:
            break
    else:
        raise MaxIterExceeded(
            f"no convergence in {cfg.max_iter} iterations (last step {steps[-1]:.3g}); "
            "is the Lipschitz constant right?"
        )

    phi = phi0 + psi
    forcing = fT.values + F(t, phi)
    t_hi = cfg.output_horizon(s, float(np.linalg.norm(forcing, axis=1).max()))
    N, nu, L = s.N, s.nu, F.L
    radius = 4 * N**2 * L * fT.sup_norm() / (nu * (nu - 2 * N * L)) + cfg.fp_tol
    return SemilinearSolution(
        GridFunction(0.0, cfg.h, phi).restrict(0.0, t_hi),
        GridFunction(0.0, cfg.h, phi0).restrict(0.0, t_hi),
        it,
        alpha,
        steps,
        radius,
    )


def ode_residual(
    s: HyperbolicSplitting,
    f: GridFunction | None,
    F: LipschitzField | None,
    phi: GridFunction,
) -> float:
    """``max |D_h phi - A phi - f - F(t, phi)|`` over interior points, ``D_h`` centred."""
    if len(phi) < 3:
        raise ValidationError("need at least three samples for a centred difference")
    if phi.dim != s.dim:
        raise GridMismatch(f"solution dimension {phi.dim} differs from operator dimension {s.dim}")
    v = phi.values
    t = phi.times[1:-1]
    res = (v[2:] - v[:-2]) / (2 * phi.h) - v[1:-1] @ s.A.T
    if f is not None:
        fa = f.restrict(phi.t0, phi.t_end)
        if abs(f.h - phi.h) > 1e-12 * phi.h or len(fa) != len(phi) or fa.dim != phi.dim:
            raise GridMismatch("forcing is not sampled on the solution grid")
        if abs(fa.t0 - phi.t0) > 1e-9 * phi.h:
            raise GridMismatch("forcing grid is offset from the solution grid")
        res -= fa.values[1:-1]
    if F is not None:
        res -= F(t, v[1:-1])
    return float(np.linalg.norm(res, axis=1).max())
