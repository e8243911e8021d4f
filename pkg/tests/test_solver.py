import numpy as np
import pytest

from sdsr.degradation import BlurOperator
from sdsr.framelet import CoefficientPyramid, FrameletSystem
from sdsr.image_core import ShapeMismatchError, cameraman
from sdsr.solver import (
    SolverConfig, SolverDivergedError, default_rho, l1_solve, lambda_grid, mdal_solve,
    normal_equation_residual, sdsr_run, select_lambda, selective_hard_threshold, soft_threshold,
    u_step,
)
from sdsr.support import SupportMask


def small_problem(seed=0, shape=(32, 32), kind="uniform_9", sigma=1.0):
    rng = np.random.default_rng(seed)
    truth = cameraman()[96:96 + shape[0], 96:96 + shape[1]]
    op = BlurOperator.from_kind(kind, shape)
    f = op.apply(truth) + sigma * rng.normal(size=shape)
    return truth, op, f


# -- selective hard threshold --------------------------------------------------

def test_threshold_worked_example():
    x = np.array([[[0.9, 1.1, 0.9]], [[0.0, 0.0, 0.0]]])
    mask = np.array([[[False, False, True]], [[True, True, True]]])
    out = selective_hard_threshold(x, np.zeros_like(x), mask, lam=0.5, mu=1.0, gamma=0.0)
    np.testing.assert_array_equal(out[0, 0], [0.0, 1.1, 0.9])


def test_threshold_lambda_zero_is_weighted_average():
    rng = np.random.default_rng(0)
    x = CoefficientPyramid(rng.normal(size=(9, 4, 4)), 1)
    y = CoefficientPyramid(rng.normal(size=(9, 4, 4)), 1)
    out = selective_hard_threshold(x, y, SupportMask.empty(1, (4, 4)), 0.0, 0.01, 0.003)
    np.testing.assert_allclose(out.data, (0.01 * x.data + 0.003 * y.data) / 0.013)


def test_full_mask_ignores_lambda():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(2, 9, 4, 4))
    a = selective_hard_threshold(x, y, SupportMask.full(1, (4, 4)), 0.0, 1.0, 1.0)
    b = selective_hard_threshold(x, y, SupportMask.full(1, (4, 4)), 1e6, 1.0, 1.0)
    np.testing.assert_array_equal(a, b)


def test_threshold_never_touches_lowpass():
    x = np.full((9, 3, 3), 1e-3)
    out = selective_hard_threshold(x, x, SupportMask.empty(1, (3, 3)), 10.0, 1.0, 1.0)
    assert not out[:-1].any()
    np.testing.assert_array_equal(out[-1], x[-1])


def test_threshold_idempotent():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(9, 5, 5))
    mask = SupportMask(rng.random((9, 5, 5)) < 0.3, 1)
    once = selective_hard_threshold(x, x, mask, 0.2, 0.01, 0.003)
    twice = selective_hard_threshold(once, once, mask, 0.2, 0.01, 0.003)
    np.testing.assert_allclose(twice, once, atol=1e-15)


def test_threshold_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        selective_hard_threshold(np.zeros((9, 2, 2)), np.zeros((9, 2, 3)), np.zeros((9, 2, 2), bool), 1, 1, 0)


def test_soft_threshold_values():
    np.testing.assert_array_equal(soft_threshold(np.array([3.0, -0.5, -4.0]), 1.0), [2.0, 0.0, -3.0])


# -- u-step ----------------------------------------------------------------------

def test_u_step_identity_blur_halves():
    f = np.random.default_rng(3).normal(size=(8, 8))
    zero = CoefficientPyramid.zeros(1, f.shape)
    u = u_step(f, BlurOperator.identity(f.shape), zero, zero, np.zeros_like(f), mu=0.6, gamma=0.4)
    np.testing.assert_allclose(u, f / 2, atol=1e-13)


def test_u_step_fixed_point():
    truth, op, _ = small_problem(sigma=0.0)
    sys = FrameletSystem(2)
    u = u_step(op.apply(truth), op, sys.analyze(truth), CoefficientPyramid.zeros(2, truth.shape), truth, 0.01, 0.003)
    np.testing.assert_allclose(u, truth, atol=1e-8)


@pytest.mark.parametrize("kind", ["inverse_quadratic_15", "gaussian_25_sigma1p6", "motion_15_angle30"])
def test_u_step_normal_equation_residual(kind):
    rng = np.random.default_rng(4)
    shape = (24, 20)
    op = BlurOperator.from_kind(kind, shape)
    sys = FrameletSystem(2)
    f, u_prev = rng.normal(size=(2,) + shape)
    alpha = CoefficientPyramid(rng.normal(size=(17,) + shape), 2)
    b = CoefficientPyramid(rng.normal(size=(17,) + shape), 2)
    u = u_step(f, op, alpha, b, u_prev, 0.01, 0.003, sys)
    assert normal_equation_residual(u, f, op, alpha, b, u_prev, 0.01, 0.003, sys) <= 1e-8


# -- full solves -------------------------------------------------------------------

def test_identity_problem_converges_quickly():
    truth, _, _ = small_problem()
    op = BlurOperator.identity(truth.shape)
    cfg = SolverConfig(lam=0.0, stop_on="iterate")
    u, rep, state = mdal_solve(truth, op, None, cfg, np.zeros_like(truth), return_state=True)
    assert rep.iterations < 10
    assert rep.stop_reason == "residual"
    assert np.linalg.norm(state.u - truth) / np.linalg.norm(truth) < cfg.tol
    # the running mean still carries the zero start with weight 1/(k+1)
    u, rep = mdal_solve(truth, op, None, cfg.with_(stop_on="mean"), np.zeros_like(truth))
    assert np.linalg.norm(u - truth) / np.linalg.norm(truth) < 0.05


@pytest.mark.parametrize("window", [1, 2, 5])
def test_stop_window_compares_against_older_mean(window):
    truth, op, f = small_problem()
    means = [f]
    cfg = SolverConfig(lam=0.5, stop_window=window, tol=2e-3)
    u, rep = mdal_solve(f, op, None, cfg, f, callback=lambda k, m: means.append(m))
    k = rep.iterations
    assert rep.stop_reason == "relative_change"

    def change(j):
        return np.linalg.norm(means[j] - means[j - window]) / np.linalg.norm(means[j])

    assert change(k) < cfg.tol
    assert all(change(j) >= cfg.tol for j in range(window, k))


def test_l1_and_l0_agree_at_lambda_zero():
    truth, op, f = small_problem()
    cfg = SolverConfig(lam=0.0, max_inner_iters=15, tol=1e-12)
    a, ra = mdal_solve(f, op, None, cfg.with_(regularizer="plain_l0"), f, truth=truth)
    b, rb = l1_solve(f, op, cfg.with_(regularizer="l1"), f, truth=truth)
    np.testing.assert_allclose(a, b, atol=1e-10)
    np.testing.assert_allclose(ra.psnr, rb.psnr)


def test_report_trajectories_match_iterations():
    truth, op, f = small_problem()
    u, rep = mdal_solve(f, op, None, SolverConfig(lam=0.05, max_inner_iters=12, tol=1e-12), f, truth=truth)
    assert rep.iterations == 12 == len(rep.psnr) == len(rep.ssim)
    assert rep.stop_reason == "max_iters"
    assert rep.final_psnr == rep.psnr[-1]


def test_mean_includes_initial_iterate():
    truth, op, f = small_problem()
    cfg = SolverConfig(lam=0.05, max_inner_iters=5, tol=1e-12)
    u, _, state = mdal_solve(f, op, None, cfg, f, return_state=True)
    assert state.iter == 5
    np.testing.assert_allclose(u, state.u_mean)
    # u_mean = (u0 + u1 + ... + u5) / 6, so the last iterate alone differs
    assert not np.allclose(u, state.u)


def test_data_fidelity_not_worse_than_start():
    truth, op, f = small_problem()
    u, _ = mdal_solve(f, op, None, SolverConfig(lam=0.1), f)
    assert np.linalg.norm(op.apply(u) - f) <= np.linalg.norm(op.apply(f) - f)


def test_debug_mode_checks_residual():
    truth, op, f = small_problem()
    mdal_solve(f, op, None, SolverConfig(lam=0.1, max_inner_iters=20, debug=True, tol=1e-12), f)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    truth, op, f = small_problem()
    f = f.copy()
    f[:2] = 1e308  # finite, but the transforms overflow
    with pytest.raises(SolverDivergedError) as err:
        mdal_solve(f, op, None, SolverConfig(lam=0.1), np.zeros_like(f))
    assert err.value.iteration >= 1


def test_bit_identical_reruns():
    truth, op, f = small_problem()
    cfg = SolverConfig(lam=0.1, levels=2, max_inner_iters=30)
    a, _ = mdal_solve(f, op, None, cfg, f)
    b, _ = mdal_solve(f, op, None, cfg, f)
    assert np.array_equal(a, b)


def test_mask_levels_must_match():
    truth, op, f = small_problem()
    with pytest.raises(ShapeMismatchError):
        mdal_solve(f, op, SupportMask.empty(2, f.shape), SolverConfig(lam=0.1, levels=1), f)


def test_sdsr_stages_and_accuracy():
    truth, op, f = small_problem()
    cfg = SolverConfig(lam=0.2, levels=1, stages=2, max_inner_iters=40)
    u, reports = sdsr_run(f, op, cfg, f, truth=truth)
    assert [r.stage for r in reports] == [1, 2]
    assert all(0.0 <= r.accuracy <= 1.0 for r in reports)
    u_o, rep_o = sdsr_run(f, op, cfg.with_(stages=1), f, truth=truth, oracle=True)
    assert rep_o[0].accuracy == 1.0


def test_oracle_needs_truth():
    truth, op, f = small_problem()
    with pytest.raises(ValueError):
        sdsr_run(f, op, SolverConfig(), f, oracle=True)


# -- configuration and lambda selection ---------------------------------------------

def test_config_validation():
    for bad in (dict(mu=0.0), dict(gamma=-1.0), dict(tol=0.0), dict(stages=0), dict(lam=-1.0),
                dict(regularizer="tv"), dict(rho=0.5), dict(stop_on="never"),
                dict(stop_window=0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_default_rho():
    assert default_rho(1) == 200.0
    assert default_rho(4) == 250.0
    assert SolverConfig(levels=4).effective_rho == 250.0
    assert SolverConfig(levels=4, rho=30).effective_rho == 30.0


def test_lambda_grid():
    grid = lambda_grid(2.0)
    assert len(grid) == 9
    assert grid[0] == pytest.approx(4e-4)
    assert grid[-1] == pytest.approx(4e-4 * 4 ** 8)


def test_select_lambda_picks_best():
    truth = np.zeros((12, 12))

    def solve(lam):
        return np.full_like(truth, abs(lam - 2.0)), None

    best_lam, best_u, _, scores = select_lambda(solve, [0.5, 2.0, 8.0], truth)
    assert best_lam == 2.0
    assert len(scores) == 3
