"""Support detection on framelet coefficients.

A support mask marks the coefficients believed to be nonzero in the true
image (the set ``I``); everything else (``T``) stays in the sparsity
penalty. The low-pass residual is always in ``I``.
"""

from __future__ import annotations

import numpy as np

from .framelet import CoefficientPyramid, FrameletSystem, pyramid_linf
from .image_core import ShapeMismatchError, as_image


class SupportMask:
    """Boolean pyramid, ``True`` where a coefficient is in the support set."""

    __slots__ = ("data", "levels")

    def __init__(self, data: np.ndarray, levels: int):
        data = np.asarray(data, dtype=bool)
        if data.ndim != 3 or data.shape[0] != 8 * levels + 1:
            raise ShapeMismatchError(f"mask of shape {data.shape} does not fit {levels} levels")
        data = data.copy()
        data[-1] = True
        self.data = data
        self.levels = levels

    @classmethod
    def empty(cls, levels: int, shape) -> "SupportMask":
        """No detected support: every high-pass coefficient is penalized."""
        return cls(np.zeros((8 * levels + 1,) + tuple(shape), dtype=bool), levels)

    @classmethod
    def full(cls, levels: int, shape) -> "SupportMask":
        return cls(np.ones((8 * levels + 1,) + tuple(shape), dtype=bool), levels)

    @property
    def highpass(self) -> np.ndarray:
        return self.data[:-1]

    @property
    def support_size(self) -> int:
        """Number of high-pass coefficients in the support set."""
        return int(np.count_nonzero(self.highpass))

    def complement(self) -> "SupportMask":
        """Swap ``I`` and ``T`` on the high-pass bands."""
        return SupportMask(~self.data, self.levels)

    def __eq__(self, other):
        return isinstance(other, SupportMask) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"SupportMask(levels={self.levels}, |I|={self.support_size}, shape={self.data.shape[1:]})"


def support_from_pyramid(c: CoefficientPyramid, rho: float, include_lowpass: bool = True) -> SupportMask:
    """Threshold a pyramid at ``max|coefficient| / rho`` (strict inequality)."""
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    eps = pyramid_linf(c, include_lowpass=include_lowpass) / rho
    mask = np.abs(c.data) > eps
    return SupportMask(mask, c.levels)


def detect_support(ref_img: np.ndarray, sys: FrameletSystem, rho: float,
                   include_lowpass: bool = True) -> SupportMask:
    """Detect the support set of ``ref_img``'s framelet coefficients.

    High-pass coefficients whose magnitude exceeds ``max|coefficient| / rho``
    are marked as support; ties at the threshold go to the penalized set.
    By default the maximum runs over the whole pyramid, low-pass residual
    included, which makes the threshold track the image's intensity scale.
    Pass ``include_lowpass=False`` to take it over the high-pass bands only;
    that threshold is several times smaller and admits far more
    coefficients (the oracle restoration of a blurred Cameraman loses about
    3 dB with it).
    """
    return support_from_pyramid(sys.analyze(as_image(ref_img)), rho, include_lowpass)


def accuracy_rate(detected: SupportMask, oracle: SupportMask) -> float:
    """Fraction of high-pass coefficients classified the same way by both masks."""
    if detected.data.shape != oracle.data.shape:
        raise ShapeMismatchError("support masks are not congruent")
    agree = np.count_nonzero(detected.highpass == oracle.highpass)
    return agree / oracle.highpass.size


def _mask_pyramid(mask: SupportMask) -> CoefficientPyramid:
    data = mask.data.astype(np.float64)
    data[-1] = 0.0
    return CoefficientPyramid(data, mask.levels)


def support_map(mask: SupportMask, sys: FrameletSystem) -> np.ndarray:
    """Synthesize the 0/1 indicator of the support (low-pass set to 0)."""
    if mask.levels != sys.levels:
        raise ShapeMismatchError("mask levels do not match the framelet system")
    return sys.synthesize(_mask_pyramid(mask))


def support_map_image(mask: SupportMask, sys: FrameletSystem) -> np.ndarray:
    """Support map linearly rescaled to span [0, 255] for display.

    A map that is constant (e.g. an empty support) is returned as zeros.
    """
    m = support_map(mask, sys)
    lo, hi = float(m.min()), float(m.max())
    if hi - lo <= 0:
        return np.zeros_like(m)
    return (m - lo) * (255.0 / (hi - lo))


def back_projection(true_img: np.ndarray, mask: SupportMask, sys: FrameletSystem) -> np.ndarray:
    """Keep the true image's coefficients on the support only, then synthesize."""
    c = sys.analyze(as_image(true_img))
    if mask.data.shape != c.data.shape:
        raise ShapeMismatchError("mask does not match the image's coefficient pyramid")
    return sys.synthesize(CoefficientPyramid(np.where(mask.data, c.data, 0.0), c.levels))


__all__ = [
    "SupportMask", "detect_support", "support_from_pyramid", "accuracy_rate",
    "support_map", "support_map_image", "back_projection",
]
