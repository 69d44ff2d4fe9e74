import math

import numpy as np
import pytest
from scipy.linalg import expm

from stochgrowth.errors import (
    ClosureBreakdownError,
    CoverageError,
    NormalizationError,
    ParseError,
    StepSizeError,
    UnsupportedOrderError,
    ValidationError,
)
from stochgrowth.grids import GridDensity
from stochgrowth.kinetics import (
    JumpMoments,
    MeanFieldState,
    TransitionKernel,
    gamma_domain_max,
    generator_moments,
    integrate_master,
    integrate_mean_field,
    jump_moments,
    mean_field_to_csv,
    moments_from_grid,
    stationary_residual,
)
from stochgrowth.law_lab import GammaLaw


def decay(x):
    return -x


def gamma_grid(alpha, beta, dx, hi=None):
    hi = hi or gamma_domain_max(alpha, beta)
    x = np.arange(0.0, hi + dx / 2, dx)
    return GridDensity(x, GammaLaw(alpha, beta).pdf(x))


def l1(p, q_values):
    return float(np.dot(p.weights, np.abs(p.values - q_values)))


# --- jump moments -----------------------------------------------------------


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_exponential_jump_moments(beta):
    jm = jump_moments(TransitionKernel.exponential(beta))
    y = np.linspace(0, 5, 7)
    np.testing.assert_allclose(jm.a1(y), 1 / beta, rtol=1e-12)
    np.testing.assert_allclose(jm.a2(y), 2 / beta**2, rtol=1e-12)


def test_delta_kernel_moments_are_zero():
    jm = jump_moments(TransitionKernel.delta())
    assert jm.a1(1.0) == 0.0 and jm.a2(1.0) == 0.0


def test_grid_kernel_moments_match_exponential_quadrature():
    beta = 2.0
    x = np.arange(0.0, 12.0 + 0.005, 0.01)
    u = x[:, None] - x[None, :]
    mat = np.where(u >= 0, beta * np.exp(-beta * np.clip(u, 0, None)), 0.0)
    jm = jump_moments(TransitionKernel.from_matrix(x, mat))
    # far from the right edge the truncated kernel behaves like the exponential one
    assert jm.a1(1.0) == pytest.approx(1 / beta, rel=1e-3)
    assert jm.a2(1.0) == pytest.approx(2 / beta**2, rel=1e-3)


def test_jump_moment_order_limits():
    with pytest.raises(UnsupportedOrderError):
        jump_moments(TransitionKernel.exponential(1.0), r=3)
    assert jump_moments(TransitionKernel.exponential(1.0), r=1).a2 is None


def test_kernel_validation():
    with pytest.raises(ValidationError):
        TransitionKernel.exponential(0.0)
    with pytest.raises(ValidationError):
        TransitionKernel.from_matrix(np.arange(3.0), -np.ones((3, 3)))


def test_kernel_csv_round_trip():
    x = np.linspace(0, 1, 4)
    mat = np.arange(16.0).reshape(4, 4)
    k = TransitionKernel.from_matrix(x, mat)
    again = TransitionKernel.from_csv(k.to_csv())
    np.testing.assert_array_equal(again.values, mat)
    np.testing.assert_array_equal(again.grid, x)
    with pytest.raises(ParseError):
        TransitionKernel.from_csv("a,b,c\n0,0,1\n")


# --- master equation --------------------------------------------------------


def test_no_dynamics_leaves_density_unchanged():
    p0 = gamma_grid(2.0, 1.0, 0.05, hi=20.0)
    snaps = integrate_master(p0, TransitionKernel.exponential(1.0), 0.0, 0.0, 0.01, 1.0)
    for s in snaps:
        np.testing.assert_allclose(s.values, p0.values, rtol=1e-14, atol=0)


def test_delta_kernel_is_a_fixed_point():
    p0 = gamma_grid(2.0, 1.0, 0.05, hi=20.0)
    snaps = integrate_master(p0, TransitionKernel.delta(), 5.0, 0.0, 0.01, 2.0)
    np.testing.assert_allclose(snaps[-1].values, p0.values, rtol=1e-14, atol=0)
    assert snaps[-1].t == pytest.approx(2.0)


def test_mass_plus_outflow_is_conserved():
    p0 = gamma_grid(3.0, 1.0, 0.05, hi=10.0)
    snaps = integrate_master(p0, TransitionKernel.exponential(1.0), 1.0, 0.5, 0.02, 5.0)
    for s in snaps:
        assert s.mass + s.outflow == pytest.approx(p0.mass, abs=1e-6 * (1 + s.t))
    assert snaps[-1].outflow > 0
    assert all(np.all(s.values >= 0) for s in snaps)


def test_cfl_violation_suggests_step():
    p0 = gamma_grid(2.0, 1.0, 0.05, hi=20.0)
    with pytest.raises(StepSizeError) as err:
        integrate_master(p0, TransitionKernel.exponential(1.0), 1.0, 1.0, 0.1, 1.0)
    assert err.value.suggested_dt == pytest.approx(0.05)


def test_jump_rate_step_limit():
    p0 = gamma_grid(2.0, 1.0, 0.05, hi=20.0)
    with pytest.raises(StepSizeError):
        integrate_master(p0, TransitionKernel.exponential(1.0), 200.0, 0.0, 0.01, 1.0)


def test_decay_plus_jumps_converges_to_gamma():
    dx = 0.01
    p0 = gamma_grid(3.0, 1.0, dx, hi=25.0)
    final = integrate_master(p0, TransitionKernel.exponential(1.0), 1.0, decay, dx / 25, 20.0)[-1]
    assert l1(final, GammaLaw(1.0, 1.0).pdf(final.grid)) < 0.01


def test_single_step_matches_generator_exponential():
    """Chapman-Kolmogorov check: one explicit step agrees with exp(Q h) to O(h^2)."""
    dx = 0.1
    x = np.arange(0.0, 6.0 + dx / 2, dx)
    kernel = TransitionKernel.exponential(1.5)
    eye = np.eye(x.size)

    def step(vals, h):
        return integrate_master(GridDensity(x, vals), kernel, 1.0, decay, h, h)[-1].values

    h0 = 1e-3
    q = np.column_stack([(step(eye[j], h0) - eye[j]) / h0 for j in range(x.size)])
    p0 = np.exp(-((x - 2.0) ** 2))
    errs = [np.abs(step(p0, h) - expm(q * h) @ p0).max() for h in (0.01, 0.005, 0.0025)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 < coarse / fine < 4.5


# --- stationary residual ----------------------------------------------------


def test_gamma_residual_below_five_dx():
    for dx in (0.02, 0.01):
        p = gamma_grid(2.0, 1.0, dx, hi=25.0)
        assert stationary_residual(p, TransitionKernel.exponential(1.0), 2.0) < 5 * dx


def test_gamma_residual_first_order_refinement():
    res = [
        stationary_residual(gamma_grid(2.0, 1.0, dx, hi=25.0), TransitionKernel.exponential(1.0), 2.0)
        for dx in (0.02, 0.01, 0.005)
    ]
    for coarse, fine in zip(res, res[1:]):
        assert 1.7 <= coarse / fine <= 2.3


def test_exponential_density_residual_is_roundoff():
    p = gamma_grid(1.0, 1.0, 0.01, hi=30.0)
    assert stationary_residual(p, TransitionKernel.exponential(1.0), 1.0) < 1e-12


def test_uniform_density_rejected():
    x = np.arange(0.0, 25.0 + 0.005, 0.01)
    p = GridDensity(x, np.where(x <= 2.0, 0.5, 0.0))
    assert stationary_residual(p, TransitionKernel.exponential(1.0), 2.0) > 0.2


def test_literal_form_does_not_vanish_on_gamma():
    p = gamma_grid(2.0, 1.0, 0.01, hi=25.0)
    r = stationary_residual(p, TransitionKernel.exponential(1.0), 2.0, form="literal")
    assert r > 0.1


def test_zero_density_residual_and_coverage():
    x = np.linspace(0.0, 5.0, 101)
    assert stationary_residual(GridDensity(x, np.zeros_like(x)), TransitionKernel.exponential(1.0), 2.0) == 0.0
    short = gamma_grid(2.0, 1.0, 0.01, hi=5.0)
    with pytest.raises(CoverageError):
        stationary_residual(short, TransitionKernel.exponential(1.0), 2.0)


def test_grid_kernel_residual_agrees_with_exponential():
    dx = 0.02
    p = gamma_grid(2.0, 1.0, dx, hi=25.0)
    u = p.grid[:, None] - p.grid[None, :]
    mat = np.where(u > 0, np.exp(-np.clip(u, 0, None)), 0.0)
    r_grid = stationary_residual(p, TransitionKernel.from_matrix(p.grid, mat), 2.0)
    assert r_grid < 5 * dx


# --- mean field -------------------------------------------------------------


def test_mean_field_zero_moments_constant():
    zero = JumpMoments(lambda y: 0.0 * y, lambda y: 0.0 * y)
    states = integrate_mean_field(MeanFieldState(3.0, 0.5), zero, 0.1, 2.0)
    assert all(s.m == 3.0 and s.sigma2 == 0.5 for s in states)


@pytest.mark.parametrize("lam", [-1.0, 0.5, 1.0])
def test_mean_field_linear_exact(lam):
    lin = JumpMoments(lambda y: lam * y, lambda y: 0.0 * y)
    final = integrate_mean_field(MeanFieldState(2.0, 0.0), lin, 0.01, 1.0)[-1]
    assert final.m == pytest.approx(2.0 * math.exp(lam), rel=1e-6)
    assert final.t == pytest.approx(1.0)


def test_mean_field_literal_flag_differs_for_nonlinear_drift():
    mom = JumpMoments(lambda y: -y + 0.5 * y**2, lambda y: 0.0 * y + 1.0)
    proof = integrate_mean_field(MeanFieldState(1.0, 0.5), mom, 0.01, 0.5)[-1]
    stated = integrate_mean_field(MeanFieldState(1.0, 0.5), mom, 0.01, 0.5, literal=True)[-1]
    # a1'' = 1 here, so the two mean equations coincide
    assert proof.m == pytest.approx(stated.m, rel=1e-6)
    mom3 = JumpMoments(lambda y: -y + y**2, lambda y: 0.0 * y + 1.0)
    a = integrate_mean_field(MeanFieldState(0.5, 0.5), mom3, 0.01, 0.5)[-1]
    b = integrate_mean_field(MeanFieldState(0.5, 0.5), mom3, 0.01, 0.5, literal=True)[-1]
    assert a.m != pytest.approx(b.m, rel=1e-3)


def test_mean_field_negative_variance_is_reported():
    mom = JumpMoments(lambda y: 0.0 * y, lambda y: 0.0 * y - 1.0)
    with pytest.raises(ClosureBreakdownError):
        integrate_mean_field(MeanFieldState(1.0, 0.1), mom, 0.05, 1.0)


def test_weakly_nonlinear_master_agrees_with_mean_field():
    dx = 0.005
    kernel = TransitionKernel.exponential(2.0)

    def v(y):
        return -y + 0.01 * y**2

    p0 = gamma_grid(4.0, 4.0, dx, hi=10.0)
    final = integrate_master(p0, kernel, 1.0, v, dx / 12, 1.0)[-1]
    grid_mom = moments_from_grid(final.normalized())
    mf = integrate_mean_field(MeanFieldState(1.0, 0.25), generator_moments(kernel, 1.0, v), 0.01, 1.0)[-1]
    assert grid_mom["mean"] == pytest.approx(mf.m, rel=0.02)
    assert grid_mom["variance"] == pytest.approx(mf.sigma2, rel=0.02)


def test_mean_field_csv():
    text = mean_field_to_csv([MeanFieldState(1.0, 0.0, 0.0), MeanFieldState(2.0, 0.5, 1.0)])
    assert text.splitlines() == ["t,m,sigma2", "0.0,1.0,0.0", "1.0,2.0,0.5"]


# --- moments ----------------------------------------------------------------


def test_triangle_mean():
    x = np.linspace(0.0, 2.0, 201)
    p = GridDensity(x, 1.0 - np.abs(x - 1.0))
    assert moments_from_grid(p)["mean"] == pytest.approx(1.0, abs=1e-12)


def test_gamma_grid_moments():
    mom = moments_from_grid(gamma_grid(2.0, 1.0, 0.01, hi=40.0))
    assert mom["mean"] == pytest.approx(2.0, abs=1e-4)
    assert mom["variance"] == pytest.approx(2.0, abs=1e-3)


def test_narrow_gaussian_variance_small():
    x = np.linspace(-1.0, 1.0, 4001)
    s = 0.005
    p = GridDensity(x, np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi)))
    assert moments_from_grid(p)["variance"] < 1e-4


def test_unnormalised_input():
    x = np.linspace(0.0, 1.0, 11)
    with pytest.raises(NormalizationError):
        moments_from_grid(GridDensity(x, 2 * np.ones_like(x)))
