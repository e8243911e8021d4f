"""Acceptance gate: nine end-to-end criteria on the bundled Cameraman image.

Each test prints a one-line verdict (also repeated in the terminal summary).
Expensive solves are cached at module level and shared between criteria.
The whole module takes about 45 minutes on one core.
"""

import csv
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import record
from sdsr import harness
from sdsr.degradation import PSF_KINDS, BlurOperator, degrade, get_scenario, make_psf
from sdsr.framelet import CoefficientPyramid, FrameletSystem, pyramid_inner
from sdsr.image_core import cameraman
from sdsr.metrics import psnr, ssim
from sdsr.solver import (
    SolverConfig, lambda_grid, mdal_solve, normal_equation_residual, sdsr_run, select_lambda, u_step,
)
from sdsr.support import detect_support

pytestmark = pytest.mark.slow

SEED = 0
GRID = slice(4, 9)  # weights below j=4 are far from optimal on every scenario (see the notes)
RUNS = []  # every (label, StageReport) produced here, for the stability criterion


@lru_cache(maxsize=None)
def truth():
    return cameraman()


@lru_cache(maxsize=None)
def problem(sid):
    sc = get_scenario(sid)
    u = truth()
    return degrade(u, sc, SEED), BlurOperator.from_kind(sc.psf_kind, u.shape), sc.sigma


def _keep(label):
    def wrap(solve):
        def inner(lam):
            u, rep = solve(lam)
            reps = rep if isinstance(rep, list) else [rep]
            RUNS.extend((f"{label} lam={lam:.4g} stage={r.stage}", r) for r in reps)
            return u, rep
        return inner
    return wrap


@lru_cache(maxsize=None)
def plain_l0(sid, grid=slice(0, 9)):
    """Plain l0 restoration at L=1 with the weight picked from the grid by PSNR."""
    f, op, sigma = problem(sid)
    cfg = SolverConfig(levels=1, regularizer="plain_l0", track_ssim=False)

    @_keep(f"plain-l0 s{sid}")
    def solve(lam):
        return mdal_solve(f, op, None, cfg.with_(lam=lam), f, truth=truth())

    t0 = time.perf_counter()
    lam, u, rep, scores = select_lambda(solve, lambda_grid(sigma)[grid], truth())
    return lam, u, rep, scores, time.perf_counter() - t0


def reference(sid):
    """The internal plain-l0 reference used by the practical (non-oracle) runs."""
    return plain_l0(sid)[1]


# -- 1 ----------------------------------------------------------------------------

def test_criterion_1_tight_frame():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(100):
        levels = (1, 4)[n % 2]
        h, w = rng.integers(1, 65, size=2)
        u = rng.uniform(0, 255, size=(h, w))
        sys = FrameletSystem(levels)
        worst = max(worst, float(np.max(np.abs(sys.synthesize(sys.analyze(u)) - u))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    record(1, ok, f"max |W^T W u - u| = {worst:.2e} over 100 images (gate 1e-10), {elapsed:.1f}s (< 10s)")
    assert ok


# -- 2 ----------------------------------------------------------------------------

def _circular(u, k):
    H, W = u.shape
    kh, kw = k.shape
    out = np.zeros_like(u)
    for r in range(kh):
        for c in range(kw):
            out += k[r, c] * np.roll(u, (r - kh // 2, c - kw // 2), axis=(0, 1))
    return out


def test_criterion_2_operator_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    blur_err = 0.0
    for kind in PSF_KINDS:
        u = rng.uniform(0, 255, (8, 8))
        psf = make_psf(kind)
        blur_err = max(blur_err, float(np.max(np.abs(BlurOperator(psf, u.shape).apply(u) - _circular(u, psf.kernel)))))
    adj_err = 0.0
    for levels in (1, 2, 4):
        for shape in ((16, 16), (23, 37)):
            sys = FrameletSystem(levels)
            u = rng.normal(size=shape)
            c = CoefficientPyramid(rng.normal(size=(8 * levels + 1,) + shape), levels)
            lhs = pyramid_inner(sys.analyze(u), c)
            rhs = float(np.sum(u * sys.synthesize(c)))
            adj_err = max(adj_err, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    res = 0.0
    for kind in PSF_KINDS:
        shape = (64, 48)
        op = BlurOperator.from_kind(kind, shape)
        sys = FrameletSystem(2)
        f, u_prev = rng.normal(size=(2,) + shape) * 50
        alpha = CoefficientPyramid(rng.normal(size=(17,) + shape), 2)
        b = CoefficientPyramid(rng.normal(size=(17,) + shape), 2)
        u = u_step(f, op, alpha, b, u_prev, 0.01, 0.003, sys)
        res = max(res, normal_equation_residual(u, f, op, alpha, b, u_prev, 0.01, 0.003, sys))
    elapsed = time.perf_counter() - t0
    ok = blur_err <= 1e-10 and adj_err <= 1e-8 and res <= 1e-8 and elapsed < 30
    record(2, ok, f"blur vs brute force {blur_err:.1e}, framelet adjoint {adj_err:.1e}, "
                  f"u-step residual {res:.1e}, {elapsed:.1f}s")
    assert ok


# -- 3 ----------------------------------------------------------------------------

def test_criterion_3_plain_l0_baseline():
    lam, u, rep, scores, elapsed = plain_l0(3)
    p, s = psnr(u, truth()), ssim(u, truth())
    slowest = max(r.seconds for label, r in RUNS if label.startswith("plain-l0 s3 "))
    ok = abs(p - 27.64) <= 0.5 and abs(s - 0.8545) <= 0.02 and slowest <= 120
    record(3, ok, f"plain l0 L=1 scenario 3: {p:.2f} dB / {s:.4f} at lam={lam:.4g} "
                  f"(target 27.64 +-0.5 / 0.8545 +-0.02), slowest run {slowest:.0f}s, "
                  f"grid of {len(scores)} in {elapsed:.0f}s")
    assert ok


# -- 4 ----------------------------------------------------------------------------

def test_criterion_4_oracle_gain():
    f, op, sigma = problem(3)
    cfg = SolverConfig(levels=4, stages=1, track_ssim=False)
    ref = reference(3)
    t0 = time.perf_counter()

    # support from the truth, warm start from the practical reference
    @_keep("oracle L=4 s3")
    def solve(lam):
        return sdsr_run(f, op, cfg.with_(lam=lam), ref, truth=truth(), oracle=True)

    lam, u, reps, _ = select_lambda(solve, lambda_grid(sigma)[GRID], truth())
    elapsed = time.perf_counter() - t0
    p = psnr(u, truth())
    base = psnr(reference(3), truth())
    ok = p >= 34.0 and p - base >= 5.0 and elapsed <= 180
    record(4, ok, f"oracle L=4 scenario 3: {p:.2f} dB / {ssim(u, truth()):.4f} at lam={lam:.4g} "
                  f"(gate 34.0), gain over plain l0 {p - base:+.2f} dB (gate +5), {elapsed:.0f}s")
    assert ok


# -- 5 ----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def truncated_vs_plain(sid):
    f, op, sigma = problem(sid)
    ref = reference(sid)
    out = {}
    for rho in (1.0, 250.0):
        cfg = SolverConfig(levels=4, rho=rho, track_ssim=False)

        @_keep(f"rho={rho:g} L=4 s{sid}")
        def solve(lam):
            return sdsr_run(f, op, cfg.with_(lam=lam), ref, truth=truth())

        lam, u, reps, _ = select_lambda(solve, lambda_grid(sigma)[GRID], truth())
        out[rho] = (psnr(u, truth()), lam)
    return out


def test_criterion_5_truncation_benefit():
    parts, ok = [], True
    for sid in (3, 5):
        r = truncated_vs_plain(sid)
        gain = r[250.0][0] - r[1.0][0]
        ok &= gain >= 0.4
        parts.append(f"s{sid}: rho=1 {r[1.0][0]:.2f} dB, rho=250 {r[250.0][0]:.2f} dB, gain {gain:+.2f}")
    record(5, ok, "; ".join(parts) + " (gate +0.40 dB in both)")
    assert ok


# -- 6 ----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def eight_scenarios(out_dir):
    cfg = harness.load_config(None, {
        "images": "cameraman", "scenarios": "1 2 3 4 5 6 7 8", "levels": "1", "stages": "2",
        "lam_grid_start": "4", "lam_grid_size": "5", "seed": str(SEED), "output_dir": out_dir})
    return harness.cmd_deblur(cfg, workers=harness.worker_count())


def test_criterion_6_multistage(tmp_path_factory):
    out = tmp_path_factory.mktemp("eight")
    rows = eight_scenarios(str(out))
    failures, parts = [], []
    for sid in range(1, 9):
        st = {r["stage"]: r for r in rows if r["scenario"] == sid and r["method"] == "sdsr"}
        d_psnr = st[2]["psnr"] - st[1]["psnr"]
        d_ar = st[2]["ar"] - st[1]["ar"]
        if d_psnr < -0.05 or d_ar < 0:
            failures.append(sid)
        parts.append(f"s{sid} {d_psnr:+.3f}dB/{100 * d_ar:+.2f}%")
    # trajectories of the converged runs feed the stability check
    for r in rows:
        if r["method"] != "sdsr" or r["stop_reason"] == "max_iters":
            continue
        tag = f"cameraman_s{r['scenario']}_L{r['levels']}_{r['method']}_stage{r['stage']}"
        with open(out / "trajectories" / f"{tag}.csv") as fh:
            RUNS.append((tag, [float(t["psnr"]) for t in csv.DictReader(fh)]))
    ok = not failures
    record(6, ok, "stage2 - stage1 (PSNR/AR): " + ", ".join(parts)
           + (f"; failing scenarios {failures}" if failures else ""))
    assert ok


# -- 7 ----------------------------------------------------------------------------

def test_criterion_7_rho_robustness(tmp_path):
    cfg = harness.load_config(None, {
        "images": "cameraman", "scenarios": "3", "levels": "1", "stages": "2",
        "rho_grid": "50 100 200 400 800", "lam_grid_start": "4", "lam_grid_size": "5",
        "seed": str(SEED), "output_dir": str(tmp_path)})
    series = harness.cmd_sweep_rho(cfg, workers=harness.worker_count())
    values = [s["psnr"] for s in series]
    spread = max(values) - min(values)
    ok = spread <= 0.5
    record(7, ok, "PSNR over rho " + ", ".join(f"{s['rho']:g}:{s['psnr']:.2f}" for s in series)
           + f"; spread {spread:.2f} dB (gate 0.5)")
    assert ok


# -- 8 ----------------------------------------------------------------------------

def test_criterion_8_stability():
    # make sure the solver runs exist even when this test is selected on its own
    plain_l0(3)
    truncated_vs_plain(3)
    spans = []
    for label, rep in RUNS:
        if isinstance(rep, list):
            traj, converged = rep, True
        else:
            traj, converged = rep.psnr, rep.stop_reason != "max_iters"
        if converged and len(traj) >= 10:
            tail = traj[-10:]
            spans.append((max(tail) - min(tail), label))
    worst, where = max(spans)
    ok = worst <= 0.05
    record(8, ok, f"{len(spans)} converged runs; largest PSNR spread over the last 10 iterations "
                  f"{worst:.4f} dB ({where}) (gate 0.05)")
    assert ok


# -- 9 ----------------------------------------------------------------------------

def test_criterion_9_metric_units():
    u = truth()
    checks = {
        "psnr(u,u)=inf": psnr(u, u) == math.inf,
        "unit offset 48.1308": abs(psnr(u - 1.0, u) - 48.1308) <= 1e-4,
        "full-scale offset 0 dB": abs(psnr(np.zeros((16, 16)), np.full((16, 16), 255.0))) <= 1e-12,
        "ssim(u,u)=1": abs(ssim(u, u) - 1.0) <= 1e-12,
        "inverted < 0.2": ssim(255.0 - u, u) < 0.2,
        "offset < 1": ssim(u + 10.0, u) < 1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record(9, ok, f"{len(checks) - len(failed)}/{len(checks)} analytic cases" + (f"; failed {failed}" if failed else ""))
    assert ok


def test_reference_support_accuracy_in_expected_band():
    """Support from the plain-l0 restoration agrees with the true support 70-90% of the time."""
    from sdsr.support import accuracy_rate

    sys = FrameletSystem(1)
    ar = accuracy_rate(detect_support(reference(3), sys, 200.0), detect_support(truth(), sys, 200.0))
    assert 0.70 <= ar <= 0.90
