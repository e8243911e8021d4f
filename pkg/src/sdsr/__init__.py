"""Support-driven sparse regularization for non-blind image deblurring.

Framelet transform, blur simulation, support detection, the MDAL solver,
image-quality metrics and an experiment harness.
"""

from .degradation import (
    PSF_KINDS, SCENARIOS, BlurOperator, Psf, Scenario, apply_blur, apply_blur_adjoint, degrade,
    get_scenario, make_psf,
)
from .framelet import CoefficientPyramid, FrameletSystem, pyramid_linf
from .image_core import ImageIOError, ShapeMismatchError, cameraman, load_image, save_image
from .metrics import psnr, quality, ssim
from .solver import (
    SolverConfig, SolverDivergedError, StageReport, l1_solve, lambda_grid, mdal_solve, sdsr_run,
    select_lambda, selective_hard_threshold, u_step,
)
from .support import (
    SupportMask, accuracy_rate, back_projection, detect_support, support_map, support_map_image,
)

__version__ = "0.1.0"

__all__ = [
    "PSF_KINDS", "SCENARIOS", "BlurOperator", "Psf", "Scenario", "apply_blur", "apply_blur_adjoint",
    "degrade", "get_scenario", "make_psf", "CoefficientPyramid", "FrameletSystem", "pyramid_linf",
    "ImageIOError", "ShapeMismatchError", "cameraman", "load_image", "save_image", "psnr", "quality",
    "ssim", "SolverConfig", "SolverDivergedError", "StageReport", "l1_solve", "lambda_grid",
    "mdal_solve", "sdsr_run", "select_lambda", "selective_hard_threshold", "u_step", "SupportMask",
    "accuracy_rate", "back_projection", "detect_support", "support_map", "support_map_image",
]
