"""Stable/unstable splitting of a hyperbolic matrix and its Green's function.

The projections come from an ordered real Schur form: the stable block
is moved to the top left, the coupling block is removed with a Sylvester
solve, and the resulting block-diagonalising similarity ``V`` gives

    P_minus = V diag(I, 0) V^-1,      P_plus = V diag(0, I) V^-1.

The same factorisation is kept on the splitting so that the kernel
``G(t)`` only ever needs exponentials of the two diagonal blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import NotHyperbolic, NumericalFailure, ValidationError

GAP_TOL = 1e-8
SAFETY = 1.05


@dataclass(frozen=True)
class OperatorSpec:
    """A finite-dimensional generator: a dense matrix or a 1-D Dirichlet Laplacian."""

    kind: str
    matrix: np.ndarray | None = None
    points: int | None = None

    def __post_init__(self):
        if self.kind == "dense_matrix":
            if self.matrix is None:
                raise ValidationError("dense_matrix operator needs a matrix")
            a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValidationError(f"matrix must be square, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValidationError("matrix entries must be finite")
            a.setflags(write=False)
            object.__setattr__(self, "matrix", a)
        elif self.kind == "dirichlet_laplacian_1d":
            if self.points is None or int(self.points) < 1:
                raise ValidationError("dirichlet_laplacian_1d needs points >= 1")
            object.__setattr__(self, "points", int(self.points))
        else:
            raise ValidationError(f"unknown operator kind {self.kind!r}")

    @classmethod
    def dense(cls, matrix) -> "OperatorSpec":
        return cls("dense_matrix", matrix=matrix)

    @classmethod
    def laplacian(cls, points: int) -> "OperatorSpec":
        return cls("dirichlet_laplacian_1d", points=points)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] if self.kind == "dense_matrix" else self.points

    def to_matrix(self) -> np.ndarray:
        if self.kind == "dense_matrix":
            return np.array(self.matrix)
        n = self.points
        a = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
        return a * (n + 1) ** 2

    def grid(self) -> np.ndarray:
        """Interior nodes of the Laplacian discretisation of [0, 1]."""
        if self.kind != "dirichlet_laplacian_1d":
            raise ValidationError("only the Laplacian operator has a spatial grid")
        return np.arange(1, self.points + 1) / (self.points + 1)


def laplacian_eigenvalues(points: int) -> np.ndarray:
    k = np.arange(1, points + 1)
    return -4.0 * (points + 1) ** 2 * np.sin(k * np.pi / (2 * (points + 1))) ** 2


@dataclass(frozen=True, eq=False)
class HyperbolicSplitting:
    """Projections, gap and dichotomy constants ``(N, nu)`` of a hyperbolic matrix.

    ``basis`` and ``basis_inv`` block-diagonalise ``A`` into ``stable_block``
    (first ``n_stable`` coordinates) and ``unstable_block``.
    """

    A: np.ndarray
    P_minus: np.ndarray
    P_plus: np.ndarray
    gap: float
    N: float
    nu: float
    basis: np.ndarray
    basis_inv: np.ndarray
    stable_block: np.ndarray
    unstable_block: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("A", "P_minus", "P_plus", "basis", "basis_inv", "stable_block", "unstable_block"):
            getattr(self, name).setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def n_stable(self) -> int:
        return self.stable_block.shape[0]

    @property
    def n_unstable(self) -> int:
        return self.unstable_block.shape[0]

    @property
    def contraction_limit(self) -> float:
        """Largest admissible Lipschitz constant ``nu / (2 N)``."""
        return self.nu / (2.0 * self.N)

    def scaled(self, c: float) -> "HyperbolicSplitting":
        """Splitting of ``c * A`` for ``c > 0`` (same projections, rates times ``c``)."""
        if c <= 0:
            raise ValidationError("scale factor must be positive")
        return HyperbolicSplitting(
            self.A * c, self.P_minus, self.P_plus, self.gap * c, self.N, self.nu * c,
            self.basis, self.basis_inv, self.stable_block * c, self.unstable_block * c,
        )


def _schur_blocks(A: np.ndarray, n_stable: int):
    """Block-diagonalising similarity from the ordered real Schur form."""
    n = A.shape[0]
    T, Z, sdim = sla.schur(A, output="real", sort="lhp")
    if sdim != n_stable:
        raise NumericalFailure(
            f"Schur reordering found {sdim} stable eigenvalues, expected {n_stable}"
        )
    k = n_stable
    if k in (0, n):
        return Z, Z.T.copy(), T[:k, :k], T[k:, k:]
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    # T11 X - X T22 = -T12 removes the coupling block
    X = sla.solve_sylvester(T11, -T22, -T12)
    S = np.eye(n)
    S[:k, k:] = X
    S_inv = np.eye(n)
    S_inv[:k, k:] = -X
    return Z @ S, S_inv @ Z.T, T11, T22


def _eigh_blocks(A: np.ndarray, n_stable: int):
    """Symmetric case: orthonormal eigenvectors, exactly diagonal blocks."""
    w, Q = np.linalg.eigh(A)  # ascending, so the stable eigenvalues come first
    k = n_stable
    return Q, Q.T.copy(), np.diag(w[:k]), np.diag(w[k:])


def matrix_sign(A: np.ndarray, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Newton iteration ``S <- (S + S^-1)/2`` with determinant scaling."""
    S = np.array(A, dtype=float)
    n = S.shape[0]
    for _ in range(max_iter):
        S_inv = np.linalg.inv(S)
        mu = abs(np.linalg.det(S_inv)) ** (1.0 / n) if n else 1.0
        if not np.isfinite(mu) or mu == 0:
            mu = 1.0
        S_new = 0.5 * (mu * S + S_inv / mu)
        if np.linalg.norm(S_new - S, 1) <= tol * np.linalg.norm(S_new, 1):
            return S_new
        S = S_new
    raise NumericalFailure("matrix sign iteration did not converge")


def _sign_blocks(A: np.ndarray, n_stable: int):
    n = A.shape[0]
    P_minus = 0.5 * (np.eye(n) - matrix_sign(A))
    U, s, _ = np.linalg.svd(P_minus)
    W, s2, _ = np.linalg.svd(np.eye(n) - P_minus)
    V = np.hstack([U[:, :n_stable], W[:, : n - n_stable]])
    V_inv = np.linalg.inv(V)
    B = V_inv @ A @ V
    k = n_stable
    return V, V_inv, B[:k, :k], B[k:, k:]


def _check_projector(P_minus, P_plus, A, tol=1e-8):
    n = A.shape[0]
    scale = max(1.0, np.abs(P_minus).max(), np.abs(P_plus).max())
    errs = [
        np.abs(P_minus + P_plus - np.eye(n)).max(),
        np.abs(P_minus @ P_minus - P_minus).max(),
        np.abs(P_minus @ P_plus).max(),
    ]
    comm = np.abs(A @ P_minus - P_minus @ A).max() / max(1.0, np.abs(A).max())
    return max(errs) <= tol * scale**2 and comm <= tol * scale


def split(
    op,
    *,
    gap_tol: float = GAP_TOL,
    nu_fraction: float = 0.9,
    horizon: float | None = None,
    samples: int = 2001,
) -> HyperbolicSplitting:
    """Split ``op`` (an :class:`OperatorSpec` or a square array) into stable and unstable parts.

    Raises :class:`NotHyperbolic` if some eigenvalue has ``|Re| < gap_tol``.
    The dichotomy constants are filled in by :func:`estimate_dichotomy`.
    """
    A = op.to_matrix() if isinstance(op, OperatorSpec) else OperatorSpec.dense(op).to_matrix()
    eig = np.linalg.eigvals(A)
    re = eig.real
    if np.any(np.abs(re) < gap_tol):
        bad = eig[np.argmin(np.abs(re))]
        raise NotHyperbolic(f"eigenvalue {bad:.6g} lies within {gap_tol:g} of the imaginary axis")
    gap = float(np.abs(re).min())
    n_stable = int(np.sum(re < 0))

    blocks = None
    try:
        blocks = _eigh_blocks(A, n_stable) if np.array_equal(A, A.T) else _schur_blocks(A, n_stable)
        V, V_inv, T11, T22 = blocks
        k = n_stable
        P_minus = V[:, :k] @ V_inv[:k, :]
        P_plus = V[:, k:] @ V_inv[k:, :]
        if not _check_projector(P_minus, P_plus, A):
            blocks = None
    except (np.linalg.LinAlgError, sla.LinAlgError, NumericalFailure, ValueError):
        blocks = None
    if blocks is None:
        V, V_inv, T11, T22 = _sign_blocks(A, n_stable)
        k = n_stable
        P_minus = V[:, :k] @ V_inv[:k, :]
        P_plus = V[:, k:] @ V_inv[k:, :]
        if not _check_projector(P_minus, P_plus, A, tol=1e-6):
            raise NumericalFailure("could not compute the spectral projections")

    provisional = HyperbolicSplitting(
        A, P_minus, P_plus, gap, 1.0, nu_fraction * gap, V, V_inv, T11.copy(), T22.copy()
    )
    N, nu = estimate_dichotomy(provisional, nu_fraction, horizon, samples)
    return replace(provisional, N=N, nu=nu, _cache={})


def _envelope(s: HyperbolicSplitting, nu: float, t: float) -> float:
    k = s.n_stable
    val = 0.0
    if k:
        M = s.basis[:, :k] @ sla.expm(s.stable_block * t) @ s.basis_inv[:k, :]
        val = max(val, np.linalg.norm(M, 2))
    if s.n_unstable:
        M = s.basis[:, k:] @ sla.expm(-s.unstable_block * t) @ s.basis_inv[k:, :]
        val = max(val, np.linalg.norm(M, 2))
    return val * math.exp(nu * t)


def estimate_dichotomy(
    s: HyperbolicSplitting,
    nu_fraction: float = 0.9,
    horizon: float | None = None,
    samples: int = 2001,
) -> tuple[float, float]:
    """Dichotomy constants ``(N, nu)`` with ``nu = nu_fraction * gap``.

    ``N`` is the sampled maximum over ``[0, horizon]`` of
    ``max(|e^{At} P_minus|, |e^{-At} P_plus|) e^{nu t}``, refined locally
    around the best sample, floored at 1 and multiplied by 1.05.
    """
    if not 0 < nu_fraction < 1:
        raise ValidationError("nu_fraction must lie in (0, 1)")
    nu = nu_fraction * s.gap
    horizon = 50.0 / s.gap if horizon is None else float(horizon)
    samples = max(int(samples), 3)
    dt = horizon / (samples - 1)
    k = s.n_stable
    env = np.zeros(samples)
    weights = np.exp(nu * dt * np.arange(samples))
    for block, left, right in (
        (s.stable_block, s.basis[:, :k], s.basis_inv[:k, :]),
        (-s.unstable_block, s.basis[:, k:], s.basis_inv[k:, :]),
    ):
        if block.shape[0] == 0:
            continue
        step = sla.expm(block * dt)
        powers = np.empty((samples,) + block.shape)
        powers[0] = np.eye(block.shape[0])
        for j in range(1, samples):
            powers[j] = powers[j - 1] @ step
        stack = left @ powers @ right
        env = np.maximum(env, np.linalg.norm(stack, 2, axis=(1, 2)) * weights)
    j = int(np.argmax(env))
    peak = float(env[j])
    a, b = max(0.0, (j - 1) * dt), min(horizon, (j + 1) * dt)
    if b > a:
        res = minimize_scalar(lambda t: -_envelope(s, nu, t), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, b)})
        peak = max(peak, -float(res.fun))
    return SAFETY * max(1.0, peak), nu


def green_eval(s: HyperbolicSplitting, t: float) -> np.ndarray:
    """Kernel ``G(t) = e^{At} P_minus`` for ``t >= 0`` and ``-e^{At} P_plus`` for ``t < 0``."""
    k = s.n_stable
    n = s.dim
    if t >= 0:
        if k == 0:
            return np.zeros((n, n))
        return s.basis[:, :k] @ sla.expm(s.stable_block * t) @ s.basis_inv[:k, :]
    if s.n_unstable == 0:
        return np.zeros((n, n))
    return -(s.basis[:, k:] @ sla.expm(s.unstable_block * t) @ s.basis_inv[k:, :])


def green_norms(s: HyperbolicSplitting, ts) -> np.ndarray:
    """Operator 2-norms ``|G(t)|`` on an array of times.

    Increasing equispaced times are handled by stepping with one matrix
    exponential per sign of ``t``; anything else is evaluated pointwise.
    """
    ts = np.ravel(np.asarray(ts, dtype=float))
    dt = np.diff(ts)
    if ts.size < 3 or not (dt[0] > 0 and np.allclose(dt, dt[0], rtol=1e-9, atol=0)):
        return np.array([np.linalg.norm(green_eval(s, float(t)), 2) for t in ts])
    out = np.zeros(ts.size)
    k = s.n_stable
    neg = ts < 0
    # step away from t = 0 on both sides, the direction in which the kernel decays
    for idx, block, left, right in (
        (np.flatnonzero(~neg), s.stable_block, s.basis[:, :k], s.basis_inv[:k, :]),
        (np.flatnonzero(neg)[::-1], s.unstable_block, s.basis[:, k:], s.basis_inv[k:, :]),
    ):
        if idx.size == 0 or block.shape[0] == 0:
            continue
        step = sla.expm(block * (ts[idx[1]] - ts[idx[0]]) if idx.size > 1 else block * 0.0)
        powers = np.empty((idx.size,) + block.shape)
        powers[0] = sla.expm(block * ts[idx[0]])
        for j in range(1, idx.size):
            powers[j] = powers[j - 1] @ step
        out[idx] = np.linalg.norm(left @ powers @ right, 2, axis=(1, 2))
    return out
