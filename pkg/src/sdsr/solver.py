"""Mean doubly augmented Lagrangian (MDAL) deblurring with framelet sparsity.

Solves ``min_u 1/2 ||A u - f||^2 + lam * ||(W u)_T||_0`` where ``T`` is the
complement of a detected support set, by the splitting::

    u     <- argmin 1/2||Au - f||^2 + mu/2 ||Wu - alpha + b||^2 + gamma/2 ||u - u_k||^2
    alpha <- argmin lam ||alpha_T||_0 + mu/2 ||alpha - (Wu + b)||^2 + gamma/2 ||alpha - alpha_k||^2
    b     <- b + Wu - alpha

and returns the arithmetic means of the ``u`` and ``alpha`` iterates. The
plain l0 model is the special case of an empty support set, and the l1
variant swaps the hard threshold for a soft one.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .degradation import BlurOperator
from .framelet import CoefficientPyramid, FrameletSystem
from .image_core import ShapeMismatchError, as_image
from .metrics import psnr, ssim
from .support import SupportMask, accuracy_rate, detect_support

log = logging.getLogger(__name__)

REGULARIZERS = ("trunc_l0", "plain_l0", "l1")


class SolverDivergedError(RuntimeError):
    """A non-finite value appeared in the iterates."""

    def __init__(self, iteration: int, what: str = "u"):
        super().__init__(f"non-finite values in {what} at iteration {iteration}")
        self.iteration = iteration


def default_rho(levels: int) -> float:
    return 200.0 if levels == 1 else 250.0


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one deblurring run.

    ``rho=None`` picks 200 for a single level and 250 otherwise.
    ``stop_on`` selects whether the stopping test watches the running mean
    (the returned image) or the raw iterates; hard thresholding keeps the raw
    iterates oscillating, so only the mean settles below small tolerances.
    ``stop_window`` measures that change against the image ``w`` iterations
    back; a running mean moves by roughly ``1/k`` per step regardless of
    convergence, so a one-step difference fires while it is still drifting.
    ``track_ssim`` records an SSIM value per iteration when ground truth is
    supplied; it costs one SSIM evaluation per step.
    ``lowpass_in_threshold`` lets the low-pass residual take part in the
    maximum that scales the support threshold (the coefficients themselves
    are never thresholded in that band).
    """

    lam: float = 0.0
    mu: float = 0.01
    gamma: float = 0.003
    rho: float | None = None
    levels: int = 1
    stages: int = 2
    max_inner_iters: int = 300
    tol: float = 5e-4
    regularizer: str = "trunc_l0"
    stop_on: str = "mean"
    stop_window: int = 10
    track_ssim: bool = True
    lowpass_in_threshold: bool = True
    debug: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}")
        if self.stop_on not in ("mean", "iterate"):
            raise ValueError("stop_on must be 'mean' or 'iterate'")
        if self.stop_window < 1:
            raise ValueError("stop_window must be >= 1")
        if self.rho is not None and self.rho < 1:
            raise ValueError("rho must be >= 1")

    @property
    def effective_rho(self) -> float:
        return default_rho(self.levels) if self.rho is None else float(self.rho)

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class StageReport:
    """Per-run diagnostics. Trajectories are measured on the running mean."""

    stage: int = 1
    lam: float = 0.0
    psnr: list = field(default_factory=list)
    ssim: list = field(default_factory=list)
    accuracy: float | None = None
    seconds: float = 0.0
    iterations: int = 0
    stop_reason: str = ""
    support_size: int = 0
    final_psnr: float | None = None
    final_ssim: float | None = None


@dataclass
class SolverState:
    u: np.ndarray
    alpha: np.ndarray
    b: np.ndarray
    u_mean: np.ndarray
    alpha_mean: np.ndarray
    iter: int = 0


# -- proximal steps ----------------------------------------------------------

def _data(p):
    return p.data if isinstance(p, CoefficientPyramid) else np.asarray(p, dtype=np.float64)


def _mask_data(mask):
    return mask.data if isinstance(mask, SupportMask) else np.asarray(mask, dtype=bool)


def selective_hard_threshold(x, y, mask, lam: float, mu: float, gamma: float):
    """Proximal map of ``lam * ||alpha_T||_0`` with two quadratic anchors.

    Forms ``z = (mu x + gamma y) / (mu + gamma)`` and zeroes entries outside
    the support whose magnitude is strictly below ``sqrt(2 lam / (mu + gamma))``.
    Accepts pyramids or raw arrays; returns the same kind as ``x``.
    """
    xd, yd, md = _data(x), _data(y), _mask_data(mask)
    if xd.shape != yd.shape or xd.shape != md.shape:
        raise ShapeMismatchError("threshold operands are not congruent")
    s = mu + gamma
    if s <= 0:
        raise ValueError("mu + gamma must be positive")
    free = ~md
    if md.ndim == 3:
        free[-1] = False  # low-pass residual is never penalized
    z = _hard_prox(xd.copy(), yd, free, lam, mu, gamma)
    if isinstance(x, CoefficientPyramid):
        return CoefficientPyramid(z, x.levels)
    return z


def _hard_prox(xd, yd, free, lam, mu, gamma, protected=None):
    """In-place core of the selective hard threshold; overwrites and returns ``xd``."""
    s = mu + gamma
    z = np.multiply(xd, mu / s, out=xd)
    if gamma:
        z += (gamma / s) * yd
    if lam > 0:
        # multiplying by the keep mask is much faster than putmask on scattered entries
        keep = np.abs(z) >= math.sqrt(2.0 * lam / s)
        keep |= ~free if protected is None else protected
        z *= keep
    return z


def soft_threshold(z, t: float):
    """``sign(z) * max(|z| - t, 0)``."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _l1_prox(xd, yd, lam, mu, gamma):
    s = mu + gamma
    z = (mu * xd + gamma * yd) / s
    out = soft_threshold(z, lam / s)
    out[-1] = z[-1]
    return out


class _NormalEquation:
    """Solves ``(A^T A + (mu + gamma) I) u = rhs`` by diagonalization in Fourier space."""

    def __init__(self, op: BlurOperator, mu: float, gamma: float):
        self.op = op
        self.shift = mu + gamma
        self.denom = np.abs(op.otf) ** 2 + self.shift

    def solve_hat(self, rhs_hat):
        return np.real(np.fft.ifft2(rhs_hat / self.denom))

    def apply(self, u):
        return self.op.adjoint(self.op.apply(u)) + self.shift * u


def u_step(f, op: BlurOperator, alpha, b, u_prev, mu: float, gamma: float,
           sys: FrameletSystem | None = None) -> np.ndarray:
    """Solve ``(A^T A + (mu+gamma) I) u = A^T f + gamma u_prev + mu W^T(alpha - b)``."""
    f = as_image(f)
    if isinstance(alpha, CoefficientPyramid):
        sys = sys or FrameletSystem(alpha.levels)
        diff = alpha - b
    else:
        diff = None
    if np.shape(u_prev) != f.shape:
        raise ShapeMismatchError("u_prev does not match f")
    rhs = op.adjoint(f) + gamma * np.asarray(u_prev, dtype=np.float64)
    if diff is not None:
        rhs = rhs + mu * sys.synthesize(diff)
    return _NormalEquation(op, mu, gamma).solve_hat(np.fft.fft2(rhs))


def normal_equation_residual(u, f, op, alpha, b, u_prev, mu, gamma, sys) -> float:
    """Relative residual of the u-step normal equation, evaluated spatially."""
    rhs = op.adjoint(f) + gamma * u_prev + mu * sys.synthesize(alpha - b)
    lhs = op.adjoint(op.apply(u)) + (mu + gamma) * u
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))


# -- inner loop --------------------------------------------------------------

def _run_mdal(f, op, mask_data, cfg: SolverConfig, u0, truth, prox, stage=1, callback=None):
    f = as_image(f)
    u0 = as_image(u0)
    if f.shape != u0.shape or tuple(op.shape) != f.shape:
        raise ShapeMismatchError("f, u0 and the blur operator must share one shape")
    if truth is not None and np.shape(truth) != f.shape:
        raise ShapeMismatchError("ground truth does not match f")
    sys = FrameletSystem(cfg.levels)
    mu, gamma = cfg.mu, cfg.gamma
    shape = f.shape
    otf = op.otf_half
    denom = np.abs(otf) ** 2 + (mu + gamma)
    atf_hat = np.conj(otf) * np.fft.rfft2(f)
    f_norm = np.linalg.norm(f)
    on_mean = cfg.stop_on == "mean"

    t0 = time.perf_counter()
    u = u0.copy()
    alpha = sys.analyze(u).data
    b = np.zeros_like(alpha)
    u_sum = u.copy()
    alpha_sum = alpha.copy()
    au_sum = op.apply(u)
    history = deque([u.copy()], maxlen=cfg.stop_window)
    report = StageReport(stage=stage, lam=cfg.lam)
    if mask_data is not None:
        report.support_size = int(np.count_nonzero(mask_data[:-1]))

    stop = "max_iters"
    k = 0
    for k in range(1, cfg.max_inner_iters + 1):
        rhs = gamma * u + mu * sys.synthesize(CoefficientPyramid(alpha - b, cfg.levels))
        u_hat = (atf_hat + np.fft.rfft2(rhs)) / denom
        u_new = np.fft.irfft2(u_hat, s=shape)
        au_new = np.fft.irfft2(otf * u_hat, s=shape)
        if not np.all(np.isfinite(u_new)):
            raise SolverDivergedError(k)
        if cfg.debug and k % 10 == 0:
            res = normal_equation_residual(
                u_new, f, op, CoefficientPyramid(alpha, cfg.levels),
                CoefficientPyramid(b, cfg.levels), u, mu, gamma, sys)
            log.debug("iteration %d: normal-equation residual %.3e", k, res)
            if res > 1e-8:
                raise AssertionError(f"u-step residual {res:.3e} at iteration {k}")

        wu = sys.analyze(u_new).data
        alpha = prox(wu + b, alpha)
        if not math.isfinite(float(alpha.sum())):  # one pass; any inf or nan poisons the sum
            raise SolverDivergedError(k, "alpha")
        b += wu
        b -= alpha

        u_sum += u_new
        alpha_sum += alpha
        au_sum += au_new
        mean = u_sum / (k + 1)
        if callback is not None:
            callback(k, mean)
        if truth is not None:
            report.psnr.append(psnr(mean, truth))
            if cfg.track_ssim:
                report.ssim.append(ssim(mean, truth))

        if on_mean:
            cur, a_cur = mean, au_sum / (k + 1)
        else:
            cur, a_cur = u_new, au_new
        prev = history[0]
        norm = np.linalg.norm(cur)
        if k < cfg.stop_window:
            change = math.inf
        else:
            change = np.linalg.norm(cur - prev) / norm if norm > 0 else math.inf
        misfit = np.linalg.norm(a_cur - f) / f_norm if f_norm > 0 else math.inf
        u = u_new
        history.append(cur)
        if min(change, misfit) < cfg.tol:
            stop = "relative_change" if change <= misfit else "residual"
            break

    n = k + 1
    u_mean = u_sum / n
    report.iterations = k
    report.stop_reason = stop
    report.seconds = time.perf_counter() - t0
    if truth is not None:
        report.final_psnr = report.psnr[-1]
        report.final_ssim = report.ssim[-1] if report.ssim else ssim(u_mean, truth)
    state = SolverState(u=u, alpha=CoefficientPyramid(alpha, cfg.levels), b=CoefficientPyramid(b, cfg.levels),
                        u_mean=u_mean, alpha_mean=CoefficientPyramid(alpha_sum / n, cfg.levels), iter=k)
    return u_mean, report, state


def mdal_solve(f, op: BlurOperator, mask: SupportMask | None, cfg: SolverConfig, u0,
               truth=None, stage: int = 1, return_state: bool = False, callback=None):
    """Run MDAL on the truncated (or plain) l0 model.

    Parameters
    ----------
    f : ndarray
        Observed image.
    op : BlurOperator
        Known blur.
    mask : SupportMask or None
        Detected support; ``None`` or an empty mask gives the plain l0 model.
        Ignored when ``cfg.regularizer == "plain_l0"``.
    cfg : SolverConfig
    u0 : ndarray
        Warm start; ``alpha`` starts at ``W u0`` and ``b`` at zero.
    truth : ndarray, optional
        Ground truth used only to record PSNR/SSIM trajectories.
    callback : callable, optional
        Called as ``callback(k, u_mean)`` after every iteration.

    Returns
    -------
    u_mean : ndarray
        Mean of the iterates ``u^0 .. u^k``.
    report : StageReport
    state : SolverState
        Only when ``return_state`` is set.
    """
    if cfg.regularizer == "l1":
        return l1_solve(f, op, cfg, u0, truth=truth, stage=stage, return_state=return_state,
                        callback=callback)
    shape = (8 * cfg.levels + 1,) + np.shape(f)
    if mask is None or cfg.regularizer == "plain_l0":
        mask_data = np.zeros(shape, dtype=bool)
        mask_data[-1] = True
    else:
        if mask.levels != cfg.levels or mask.data.shape != shape:
            raise ShapeMismatchError("support mask does not match the configured pyramid")
        mask_data = mask.data
    lam, mu, gamma = cfg.lam, cfg.mu, cfg.gamma

    free = ~mask_data
    free[-1] = False
    protected = ~free

    def prox(x, y):
        return _hard_prox(x, y, free, lam, mu, gamma, protected)

    u, report, state = _run_mdal(f, op, mask_data, cfg, u0, truth, prox, stage, callback)
    return (u, report, state) if return_state else (u, report)


def l1_solve(f, op: BlurOperator, cfg: SolverConfig, u0, truth=None, stage: int = 1,
             return_state: bool = False, callback=None):
    """Same splitting with the anisotropic l1 penalty (soft thresholding)."""
    lam, mu, gamma = cfg.lam, cfg.mu, cfg.gamma

    def prox(x, y):
        return _l1_prox(x, y, lam, mu, gamma)

    u, report, state = _run_mdal(f, op, None, cfg, u0, truth, prox, stage, callback)
    return (u, report, state) if return_state else (u, report)


# -- outer loop ----------------------------------------------------------------

def sdsr_run(f, op: BlurOperator, cfg: SolverConfig, init_ref, truth=None, oracle: bool = False,
             callback=None, stage_hook=None):
    """Multi-stage support-driven deblurring.

    Each stage detects the support on the current reference image, solves
    the truncated l0 model warm-started at that reference, and hands the
    result on as the next reference. In oracle mode the support always
    comes from ``truth``. When ``truth`` is given each report carries the
    accuracy of the detected support against the truth's support.

    ``callback(stage, k, u_mean)`` is forwarded to every inner solve and
    ``stage_hook(stage, mask, u)`` runs after each stage.

    Returns the final image and one :class:`StageReport` per stage.
    """
    if oracle and truth is None:
        raise ValueError("oracle mode needs the true image")
    sys = FrameletSystem(cfg.levels)
    rho = cfg.effective_rho
    incl = cfg.lowpass_in_threshold
    truth_mask = detect_support(truth, sys, rho, incl) if truth is not None else None
    reference = as_image(init_ref)
    reports = []
    u = reference
    for s in range(1, cfg.stages + 1):
        mask = truth_mask if oracle else detect_support(reference, sys, rho, incl)
        hook = None if callback is None else (lambda k, m, _s=s: callback(_s, k, m))
        u, report = mdal_solve(f, op, mask, cfg.with_(regularizer="trunc_l0"), reference,
                               truth=truth, stage=s, callback=hook)
        if truth_mask is not None:
            report.accuracy = accuracy_rate(mask, truth_mask)
        log.info("stage %d: %d iterations (%s), psnr=%s", s, report.iterations,
                 report.stop_reason, report.final_psnr)
        reports.append(report)
        if stage_hook is not None:
            stage_hook(s, mask, u)
        reference = u
    return u, reports


# -- regularization weight selection -------------------------------------------

def lambda_grid(sigma: float, n: int = 9) -> list[float]:
    """Logarithmic grid ``1e-4 * 4**j * sigma**2`` for ``j = 0 .. n-1``."""
    return [1e-4 * 4.0 ** j * sigma ** 2 for j in range(n)]


def select_lambda(solve, grid, truth, metric=psnr):
    """Evaluate ``solve(lam) -> (u, report)`` over ``grid`` and keep the best.

    Returns ``(best_lam, best_u, best_report, scores)`` where ``scores``
    maps each tried weight to its metric value.
    """
    best = None
    scores = {}
    for lam in grid:
        u, report = solve(lam)
        score = metric(u, truth)
        scores[lam] = score
        if best is None or score > best[0]:
            best = (score, lam, u, report)
    return best[1], best[2], best[3], scores
