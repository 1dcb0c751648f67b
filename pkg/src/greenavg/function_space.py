"""Uniformly sampled functions of time and the metric/averaging tools on them.

A :class:`GridFunction` stands in for a continuous map ``T -> R^n`` where
``T`` is either the real line or the half line.  All sup-norms are grid
maxima of the Euclidean norm; integrals are composite trapezoid sums.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (
    EmptyOverlap,
    GridMismatch,
    NonCommensurateShift,
    ValidationError,
    WindowTooLong,
)

_REL_GRID_TOL = 1e-12


def _as_index(x: float, *, what: str = "offset") -> int:
    """Round ``x`` to an integer, raising if it is not one to 1e-12 relative."""
    k = round(x)
    if abs(x - k) > _REL_GRID_TOL * max(1.0, abs(x)):
        raise NonCommensurateShift(f"{what} {x!r} is not an integer number of grid steps")
    return int(k)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``values[k] = f(t0 + k*h)`` of a vector valued function."""

    t0: float
    h: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] == 0 or vals.shape[1] == 0:
            raise ValidationError("values must be a nonempty (samples, dim) array")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValidationError(f"grid step must be positive, got {self.h!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, func: Callable, t0: float, t1: float, h: float) -> "GridFunction":
        """Sample ``func`` on ``t0, t0+h, ..., t1``; ``func`` takes an array of times."""
        m = int(round((t1 - t0) / h))
        t = t0 + h * np.arange(m + 1)
        return cls(t0, h, np.asarray(func(t), dtype=float).reshape(m + 1, -1))

    @classmethod
    def constant(cls, value, t0: float, t1: float, h: float) -> "GridFunction":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        m = int(round((t1 - t0) / h))
        return cls(t0, h, np.tile(value, (m + 1, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(len(self))

    @property
    def t_end(self) -> float:
        return self.t0 + self.h * (len(self) - 1)

    @property
    def length(self) -> float:
        return self.h * (len(self) - 1)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def sup_norm(self) -> float:
        return float(self.norms().max())

    def index_of(self, t: float) -> int:
        return _as_index((t - self.t0) / self.h, what="time")

    def restrict(self, t_start: float | None = None, t_stop: float | None = None) -> "GridFunction":
        """Restriction to the grid points inside ``[t_start, t_stop]``."""
        eps = _REL_GRID_TOL * max(1.0, abs(self.t0), abs(self.t_end))
        i0 = 0 if t_start is None else max(0, math.ceil((t_start - self.t0 - eps) / self.h))
        i1 = len(self) - 1 if t_stop is None else min(
            len(self) - 1, math.floor((t_stop - self.t0 + eps) / self.h)
        )
        if i1 < i0:
            raise EmptyOverlap(f"no samples in [{t_start}, {t_stop}]")
        return GridFunction(self.t0 + i0 * self.h, self.h, self.values[i0 : i1 + 1])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.t0, self.h, values)

    def _aligned(self, other: "GridFunction"):
        """Index ranges of the common domain of two aligned grids."""
        check_compatible(self, other)
        off = _as_index((other.t0 - self.t0) / self.h, what="grid offset")
        lo = max(0, off)
        hi = min(len(self), off + len(other))
        if hi <= lo:
            raise EmptyOverlap("grid functions have disjoint domains")
        return slice(lo, hi), slice(lo - off, hi - off), self.t0 + lo * self.h

    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            a, b, t0 = self._aligned(other)
            return GridFunction(t0, self.h, op(self.values[a], other.values[b]))
        return self.with_values(op(self.values, np.asarray(other, dtype=float)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self) -> str:
        return f"GridFunction(t0={self.t0:g}, h={self.h:g}, samples={len(self)}, dim={self.dim})"


def check_compatible(f: GridFunction, g: GridFunction) -> None:
    if abs(f.h - g.h) > _REL_GRID_TOL * f.h:
        raise GridMismatch(f"grid steps differ: {f.h!r} vs {g.h!r}")
    if f.dim != g.dim:
        raise GridMismatch(f"dimensions differ: {f.dim} vs {g.dim}")


def max_deviation(f: GridFunction, g: GridFunction) -> float:
    """Sup of ``|f - g|`` over the common grid."""
    return (f - g).sup_norm()


# translations


def translate(f: GridFunction, tau: float) -> GridFunction:
    """The shift ``t -> f(t + tau)`` on the overlap of both domains.

    ``tau`` must be a whole number of grid steps.
    """
    k = _as_index(tau / f.h, what="shift")
    m = len(f)
    if abs(k) >= m:
        raise EmptyOverlap(f"shift {tau!r} leaves no samples")
    if k >= 0:
        return GridFunction(f.t0, f.h, f.values[k:])
    return GridFunction(f.t0 - k * f.h, f.h, f.values[: m + k])


# Bebutov metric


@dataclass(frozen=True)
class BebutovDistance:
    value: float
    window: float
    residual: float
    lower_bound: bool

    def __float__(self) -> float:
        return self.value


class _WindowMax:
    """``L -> max_{|t| <= L} |f(t) - g(t)|`` for the piecewise-linear interpolants.

    The interpolated endpoint values make the map continuous in ``L``, so the
    Bebutov fixed-point equation has an exact root rather than a jump.
    """

    def __init__(self, diff: GridFunction):
        self.t = diff.times
        self.d = diff.values
        self.rho = diff.norms()
        self.a, self.b = self.t[0], self.t[-1]
        self.semi_axis = self.a >= -_REL_GRID_TOL * diff.h

    def _interp_norm(self, s: float) -> float:
        if len(self.t) == 1:
            return float(self.rho[0])
        j = int(np.clip(np.searchsorted(self.t, s) - 1, 0, len(self.t) - 2))
        w = (s - self.t[j]) / (self.t[j + 1] - self.t[j])
        return float(np.linalg.norm((1 - w) * self.d[j] + w * self.d[j + 1]))

    def __call__(self, L: float) -> float:
        lo, hi = max(self.a, -L), min(self.b, L)
        if lo > hi:
            return 0.0
        best = max(self._interp_norm(lo), self._interp_norm(hi))
        i0 = int(np.searchsorted(self.t, lo, side="left"))
        i1 = int(np.searchsorted(self.t, hi, side="right"))
        if i1 > i0:
            best = max(best, float(self.rho[i0:i1].max()))
        return best

    def covers(self, L: float) -> bool:
        """Whether the data domain contains the whole window ``[-L, L]`` (or ``[0, L]``)."""
        tol = _REL_GRID_TOL * max(1.0, abs(self.a), abs(self.b))
        if L > self.b + tol:
            return False
        if self.semi_axis:
            return self.a <= tol
        return -L >= self.a - tol


def bebutov(f: GridFunction, g: GridFunction, tol: float = 1e-10) -> BebutovDistance:
    """Compact-open distance via the fixed-point form ``max_{|t|<=1/eps} |f-g| = eps``.

    The crossing is found by bisection on ``eps -> m(1/eps) - eps`` which is
    strictly decreasing.  When the data do not reach ``|t| = 1/eps`` the
    window maximum is taken over what is available and the result is marked
    as a lower bound.
    """
    diff = f - g
    wmax = _WindowMax(diff)
    rho_sup = float(wmax.rho.max())
    if rho_sup == 0.0:
        return BebutovDistance(0.0, math.inf, 0.0, False)

    def gap(eps: float) -> float:
        return wmax(1.0 / eps) - eps

    lo = 0.0
    hi = max(rho_sup, 1.0 / max(diff.length, diff.h))
    while gap(hi) > 0:  # only possible through rounding
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = gap(mid) if mid > 0 else math.inf
        if gm > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * tol * hi and abs(gap(hi)) <= tol:
            break
    cands = [e for e in (lo, hi) if e > 0]
    eps = min(cands, key=lambda e: abs(gap(e)))
    return BebutovDistance(eps, 1.0 / eps, abs(gap(eps)), not wmax.covers(1.0 / eps))


def bebutov_distance(f: GridFunction, g: GridFunction) -> float:
    return bebutov(f, g).value


# almost periods


def almost_periods(f: GridFunction, eps: float, tau_max: float) -> list[float]:
    """Grid shifts ``tau`` in ``(0, tau_max]`` with ``sup_t |f(t+tau) - f(t)| < eps``."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if tau_max > 0.5 * f.length * (1 + _REL_GRID_TOL):
        raise ValidationError("tau_max exceeds half of the domain length")
    kmax = int(math.floor(tau_max / f.h * (1 + _REL_GRID_TOL)))
    v = f.values
    stride = max(1, len(f) // 512)
    found = []
    for k in range(1, kmax + 1):
        # a strided subsample bounds the deviation from below, so most shifts fail cheaply
        d = v[k::stride] - v[: len(f) - k : stride]
        if np.sqrt(np.einsum("ij,ij->i", d, d)).max() >= eps:
            continue
        if shift_deviation(f, k) < eps:
            found.append(k * f.h)
    return found


def shift_deviation(f: GridFunction, k: int) -> float:
    """``max_i |f_{i+k} - f_i|`` for a shift of ``k`` grid steps."""
    v = f.values
    d = v[k:] - v[:-k] if k > 0 else np.zeros_like(v)
    if d.shape[1] == 1:
        return float(np.abs(d).max())
    return float(np.sqrt(np.einsum("ij,ij->i", d, d)).max())


# time averages


@dataclass(frozen=True)
class AverageProfile:
    """Estimated mean and the table ``T -> omega(T)`` of averaging deviations."""

    mean: np.ndarray
    omega: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        table = tuple((float(T), float(d)) for T, d in self.omega)
        if any(d < 0 for _, d in table):
            raise ValidationError("omega deviations must be nonnegative")
        if any(b[0] <= a[0] for a, b in zip(table, table[1:])):
            raise ValidationError("omega windows must be increasing")
        object.__setattr__(self, "omega", table)

    @property
    def windows(self) -> np.ndarray:
        return np.array([T for T, _ in self.omega])

    @property
    def deviations(self) -> np.ndarray:
        return np.array([d for _, d in self.omega])


def time_average(f: GridFunction, windows: Sequence[float]) -> AverageProfile:
    """Mean of ``f`` and ``omega(T) = sup_t |(1/T) int_t^{t+T} (f - mean)|``.

    The mean is the average of the window means over all admissible starts
    for the largest window.
    """
    windows = [float(T) for T in windows]
    if not windows:
        raise ValidationError("at least one window is required")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ValidationError("windows must be increasing")
    if windows[0] <= 0:
        raise ValidationError("windows must be positive")
    steps = [max(1, int(round(T / f.h))) for T in windows]
    if steps[-1] > len(f) - 1:
        raise WindowTooLong(f"window {windows[-1]} exceeds domain length {f.length}")

    cum = cumulative_trapezoid(f.values, dx=f.h, axis=0, initial=0.0)

    def window_integrals(k):
        return cum[k:] - cum[:-k]

    k_big = steps[-1]
    mean = window_integrals(k_big).mean(axis=0) / (k_big * f.h)
    table = []
    for T, k in zip(windows, steps):
        dev = window_integrals(k) / (k * f.h) - mean
        table.append((T, float(np.linalg.norm(dev, axis=1).max())))
    return AverageProfile(mean, tuple(table))


# CSV


def write_csv(f: GridFunction, path) -> None:
    """Header ``t,x0,...``; floats at 17 significant digits."""
    path = Path(path)
    header = ",".join(["t"] + [f"x{i}" for i in range(f.dim)])
    data = np.column_stack([f.times, f.values])
    with path.open("w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")


def read_csv(path) -> GridFunction:
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh))
        expected = ["t"] + [f"x{i}" for i in range(len(header) - 1)]
        if [c.strip() for c in header] != expected or len(header) < 2:
            raise ValidationError(f"{path}: header must be t,x0,...,x{{n-1}}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] == 0:
        raise ValidationError(f"{path}: no samples")
    t = data[:, 0]
    if len(t) == 1:
        return GridFunction(t[0], 1.0, data[:, 1:])
    k = np.arange(len(t))
    spacing = (t[-1] - t[0]) / (len(t) - 1)
    # the writer computed t0 + h*k, so look for the shortest decimal h that reproduces every time
    candidates = [float(f"{spacing:.{p}g}") for p in range(1, 18)] + [spacing, t[1] - t[0]]
    ulp = np.spacing(spacing)
    candidates += [spacing + j * ulp for j in range(-64, 65) if j]
    for h in candidates:
        if h > 0 and t[0] + h * k[-1] == t[-1] and np.array_equal(t[0] + h * k, t):
            break
    else:
        h = (t[-1] - t[0]) / (len(t) - 1)
        if np.max(np.abs(t[0] + h * k - t)) > 1e-9 * max(1.0, np.abs(t).max()):
            raise ValidationError(f"{path}: samples are not equispaced")
    return GridFunction(t[0], h, data[:, 1:])
