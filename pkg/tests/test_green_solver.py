import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from greenavg import (
    GridFunction,
    LipschitzField,
    SolveConfig,
    green_apply_axis,
    green_apply_semiaxis,
    ode_residual,
    solve_semilinear,
    split,
)
from greenavg.errors import (
    ContractionViolated,
    GridMismatch,
    HorizonTooShort,
    MaxIterExceeded,
    ValidationError,
)
from greenavg.green_solver import convolve

from conftest import random_hyperbolic


@pytest.fixture(scope="module")
def stable():
    return split(np.array([[-1.0]]))


@pytest.fixture(scope="module")
def saddle():
    return split(np.diag([-1.0, 2.0]))


class TestLipschitzField:
    def test_spot_check_of_sine(self):
        F = LipschitzField(lambda t, x: 0.3 * np.sin(x), 0.3)
        ratio = F.spot_check(2, np.random.default_rng(0))
        assert 0.5 < ratio <= 1.0 + 1e-12
        assert F.vanishes_at_zero(2, np.linspace(0, 5, 11))

    def test_understated_constant_is_caught(self):
        F = LipschitzField(lambda t, x: 2.0 * x, 1.0)
        assert F.spot_check(1, np.random.default_rng(0)) == pytest.approx(2.0)

    def test_rescaled_and_scaled(self):
        F = LipschitzField(lambda t, x: np.sin(t)[:, None] * x, 1.0)
        t = np.array([0.5])
        x = np.array([[2.0]])
        assert F.rescaled(0.25)(t, x)[0, 0] == pytest.approx(math.sin(2.0) * 2.0)
        G = F.scaled(3.0)
        assert G.L == 3.0 and G(t, x)[0, 0] == pytest.approx(3 * math.sin(0.5) * 2.0)

    def test_negative_constant(self):
        with pytest.raises(ValidationError):
            LipschitzField(lambda t, x: x, -1.0)


class TestSolveConfig:
    @pytest.mark.parametrize("kwargs", [{"h": 0.0}, {"T": -1.0}, {"h": 2.0, "T": 1.0},
                                        {"tail_tol": 0.0}, {"fp_tol": -1.0}, {"max_iter": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SolveConfig(**kwargs)

    def test_tail_margin(self, stable, saddle):
        cfg = SolveConfig(tail_tol=1e-8)
        # the margin is only spent where a tail is actually cut off
        assert cfg.output_horizon(stable, 1.0) == cfg.T
        assert cfg.tail_margin(stable, 0.0) == 0.0
        expected = math.log(saddle.N * 2.0 / (saddle.nu * 1e-8)) / saddle.nu
        assert cfg.tail_margin(saddle, 2.0) == pytest.approx(expected)

    def test_horizon_too_short(self, saddle):
        cfg = SolveConfig(h=1e-2, T=10.0)
        f = GridFunction.constant([1.0, 1.0], 0.0, cfg.T, cfg.h)
        with pytest.raises(HorizonTooShort):
            green_apply_semiaxis(saddle, f, cfg)


class TestSemiAxis:
    def test_stable_relaxation(self, stable):
        cfg = SolveConfig(h=1e-3, T=10.0)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        phi = green_apply_semiaxis(stable, f, cfg)
        # no unstable part, nothing truncated: the whole horizon is returned
        assert phi.t_end == pytest.approx(10.0)
        np.testing.assert_allclose(phi.values[:, 0], 1 - np.exp(-phi.times), atol=1e-13)

    def test_unstable_part_is_constant(self):
        s = split(np.array([[2.0]]))
        cfg = SolveConfig(h=1e-2, T=30.0)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        phi = green_apply_semiaxis(s, f, cfg)
        np.testing.assert_allclose(phi.values, -0.5, atol=1e-8)

    def test_second_order_convergence(self, stable):
        errs = []
        for h in (0.02, 0.01):
            cfg = SolveConfig(h=h, T=20.0)
            phi = green_apply_semiaxis(stable, GridFunction.sample(np.sin, 0.0, cfg.T, h), cfg)
            t = phi.times
            exact = (np.sin(t) - np.cos(t) + np.exp(-t)) / 2
            errs.append(np.abs(phi.values[:, 0] - exact).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)

    def test_requires_data_from_zero(self, stable):
        cfg = SolveConfig(h=0.1, T=5.0)
        with pytest.raises(ValidationError):
            green_apply_semiaxis(stable, GridFunction.constant([1.0], 1.0, 6.0, 0.1), cfg)
        with pytest.raises(GridMismatch):
            green_apply_semiaxis(stable, GridFunction.constant([1.0], 0.0, 5.0, 0.05), cfg)
        with pytest.raises(HorizonTooShort):
            green_apply_semiaxis(stable, GridFunction.constant([1.0], 0.0, 3.0, 0.1), cfg)

    def test_residual_is_small(self, saddle):
        cfg = SolveConfig(h=1e-3, T=30.0)
        f = GridFunction.sample(lambda t: np.column_stack([np.sin(t), np.cos(2 * t)]), 0.0, cfg.T, cfg.h)
        phi = green_apply_semiaxis(saddle, f, cfg)
        assert ode_residual(saddle, f, None, phi) < 1e-5

    @given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        s = split(random_hyperbolic(rng, 3))
        u = rng.normal(size=(200, 3))
        v = rng.normal(size=(200, 3))
        lhs = convolve(s, a * u + b * v, 0.05)
        rhs = a * convolve(s, u, 0.05) + b * convolve(s, v, 0.05)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)))

    @given(st.integers(0, 10_000))
    def test_integral_bound(self, seed):
        rng = np.random.default_rng(seed)
        s = split(random_hyperbolic(rng, 3))
        g = rng.uniform(-1, 1, size=(400, 3))
        g /= np.linalg.norm(g, axis=1).max()
        out = convolve(s, g, 0.05)
        assert np.linalg.norm(out, axis=1).max() <= 2 * s.N / s.nu + 1e-9


class TestWholeAxis:
    def test_stable_sine(self, stable):
        cfg = SolveConfig(h=1e-3, T=40.0)
        f = GridFunction.sample(np.sin, -cfg.T, cfg.T, cfg.h)
        u = green_apply_axis(stable, f, cfg)
        exact = (np.sin(u.times) - np.cos(u.times)) / 2
        assert np.abs(u.values[:, 0] - exact).max() <= 1e-6

    def test_unstable_sine(self):
        s = split(np.array([[2.0]]))
        cfg = SolveConfig(h=1e-3, T=30.0)
        f = GridFunction.sample(np.sin, -cfg.T, cfg.T, cfg.h)
        u = green_apply_axis(s, f, cfg)
        exact = -(2 * np.sin(u.times) + np.cos(u.times)) / 5
        assert np.abs(u.values[:, 0] - exact).max() <= 1e-6

    def test_interior_is_centered(self, saddle):
        cfg = SolveConfig(h=1e-2, T=60.0)
        f = GridFunction.constant([1.0, 1.0], -cfg.T, cfg.T, cfg.h)
        u = green_apply_axis(saddle, f, cfg)
        assert u.t0 == pytest.approx(-u.t_end, abs=cfg.h)
        np.testing.assert_allclose(u.values, np.tile([1.0, -0.5], (len(u), 1)), atol=1e-7)


class TestSemilinear:
    def test_scalar_contraction(self, stable):
        cfg = SolveConfig(h=1e-3, T=30.0)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        F = LipschitzField(lambda t, x: 0.1 * np.sin(x), 0.1)
        sol = solve_semilinear(stable, f, F, cfg)
        assert sol.alpha == pytest.approx(2 * 1.05 * 0.1 / 0.9)
        assert np.all(sol.ratios <= sol.alpha + 0.05)
        assert (sol.phi - sol.phi0).sup_norm() <= sol.radius
        assert ode_residual(stable, f, F, sol.phi) < 1e-5
        # far from the boundary layer the solution sits at the equilibrium x = 1 + 0.1 sin x
        x = 1.0
        for _ in range(100):
            x = 1 + 0.1 * math.sin(x)
        assert sol.phi.values[-1, 0] == pytest.approx(x, abs=1e-8)

    def test_zero_field_returns_linear_solution(self, saddle):
        cfg = SolveConfig(h=1e-2, T=30.0)
        f = GridFunction.constant([1.0, 1.0], 0.0, cfg.T, cfg.h)
        sol = solve_semilinear(saddle, f, LipschitzField(lambda t, x: np.zeros_like(x), 0.0), cfg)
        np.testing.assert_array_equal(sol.phi.values, sol.phi0.values)
        assert sol.iterations == 1

    def test_contraction_violated(self, stable):
        cfg = SolveConfig(h=1e-2, T=5.0)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        with pytest.raises(ContractionViolated):
            solve_semilinear(stable, f, LipschitzField(lambda t, x: 0.5 * np.sin(x), 0.5), cfg)

    def test_iteration_budget(self, stable):
        cfg = SolveConfig(h=1e-2, T=5.0, max_iter=2)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        with pytest.raises(MaxIterExceeded):
            solve_semilinear(stable, f, LipschitzField(lambda t, x: 0.4 * np.sin(x), 0.4), cfg)

    def test_initial_guess_shape(self, stable):
        cfg = SolveConfig(h=1e-2, T=5.0)
        f = GridFunction.constant([1.0], 0.0, cfg.T, cfg.h)
        with pytest.raises(GridMismatch):
            solve_semilinear(stable, f, LipschitzField(lambda t, x: 0.1 * x, 0.1), cfg, psi0=np.zeros((3, 1)))

    @given(st.integers(0, 10_000))
    def test_start_independence(self, seed):
        s = split(np.diag([-1.0, 2.0]))
        cfg = SolveConfig(h=1e-2, T=30.0)
        f = GridFunction.sample(lambda t: np.column_stack([np.sin(t), np.ones_like(t)]), 0.0, cfg.T, cfg.h)
        F = LipschitzField(lambda t, x: 0.2 * np.cos(x), 0.2)
        a = solve_semilinear(s, f, F, cfg)
        psi0 = np.random.default_rng(seed).normal(scale=5.0, size=(cfg.steps + 1, 2))
        b = solve_semilinear(s, f, F, cfg, psi0=psi0)
        assert (a.phi - b.phi).sup_norm() <= 2 * cfg.fp_tol


def test_residual_grid_checks(stable):
    phi = GridFunction.constant([0.0], 0.0, 1.0, 0.1)
    with pytest.raises(GridMismatch):
        ode_residual(stable, GridFunction.constant([0.0], 0.0, 1.0, 0.05), None, phi)
    with pytest.raises(GridMismatch):
        ode_residual(stable, None, None, GridFunction.constant([0.0, 0.0], 0.0, 1.0, 0.1))
