"""Blur kernels, the periodic blur operator and the eight test scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .image_core import ShapeMismatchError, as_image

PSF_KINDS = ("inverse_quadratic_15", "uniform_9", "gaussian_25_sigma1p6", "motion_15_angle30")


@dataclass(frozen=True)
class Psf:
    """A normalized point spread function with odd dimensions."""

    kernel: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"PSF must be 2-D with odd dimensions, got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ValueError("PSF contains non-finite values")
        object.__setattr__(self, "kernel", k)

    @property
    def shape(self):
        return self.kernel.shape

    def to_text(self) -> str:
        """Row-major decimal grid, one kernel row per line."""
        return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in self.kernel) + "\n"


def _normalized(kernel):
    return kernel / kernel.sum()


def _inverse_quadratic(half=7):
    z = np.arange(-half, half + 1, dtype=np.float64)
    r2 = z[:, None] ** 2 + z[None, :] ** 2
    r2[half, half] = 1.0  # the centre weight is set to 1
    return 1.0 / r2


def _gaussian(size=25, sigma=1.6):
    half = (size - 1) / 2
    z = np.arange(-half, half + 1)
    k = np.exp(-(z[:, None] ** 2 + z[None, :] ** 2) / (2.0 * sigma ** 2))
    k[k < np.finfo(float).eps * k.max()] = 0.0
    return k


def _motion(length=15, angle=30.0):
    """Anti-aliased line segment of ``length`` pixels at ``angle`` degrees.

    Pixels within one pixel of the ideal centre line receive weight
    ``1 - distance``; the two end pixels are attenuated by their distance
    past the segment end. Built on one quadrant and mirrored.
    """
    eps = np.finfo(float).eps
    length = max(1, length)
    half = (length - 1) / 2.0
    phi = math.radians(angle % 180.0)
    cosphi, sinphi = math.cos(phi), math.sin(phi)
    xsign = 1.0 if cosphi > 0 else (-1.0 if cosphi < 0 else 0.0)
    linewidth = 1.0

    sx = math.trunc(half * cosphi + linewidth * xsign - length * eps)
    sy = math.trunc(half * sinphi + linewidth - length * eps)
    xs = np.arange(0, sx + xsign, xsign) if xsign != 0 else np.array([0.0])
    ys = np.arange(0, sy + 1)
    x, y = np.meshgrid(xs, ys)
    dist = y * cosphi - x * sinphi
    rad = np.sqrt(x ** 2 + y ** 2)

    last = (rad >= half) & (np.abs(dist) <= linewidth)
    if cosphi != 0:
        past_end = half - np.abs((x[last] + dist[last] * sinphi) / cosphi)
    else:
        past_end = half - np.abs(y[last])
    dist[last] = np.sqrt(dist[last] ** 2 + past_end ** 2)
    dist = linewidth + eps - np.abs(dist)
    dist[dist < 0] = 0.0

    quadrant = dist
    rows, cols = quadrant.shape
    h = np.zeros((2 * rows - 1, 2 * cols - 1))
    h[:rows, :cols] = np.rot90(quadrant, 2)
    h[rows - 1:, cols - 1:] = quadrant
    if cosphi > 0:
        h = np.flipud(h)
    return h


def make_psf(kind: str) -> Psf:
    """Build one of the four test kernels, normalized to unit sum."""
    if kind == "inverse_quadratic_15":
        k = _inverse_quadratic(7)
    elif kind == "uniform_9":
        k = np.ones((9, 9))
    elif kind == "gaussian_25_sigma1p6":
        k = _gaussian(25, 1.6)
    elif kind == "motion_15_angle30":
        k = _motion(15, 30.0)
    else:
        raise ValueError(f"unknown PSF kind {kind!r}; expected one of {PSF_KINDS}")
    return Psf(_normalized(k), kind)


def psf_to_otf(kernel: np.ndarray, shape) -> np.ndarray:
    """DFT of the kernel zero-padded to ``shape`` with its centre moved to (0, 0)."""
    kh, kw = kernel.shape
    H, W = shape
    padded = np.zeros((H, W))
    # wrap kernels larger than the image around the torus
    for r in range(kh):
        for c in range(kw):
            padded[(r - kh // 2) % H, (c - kw // 2) % W] += kernel[r, c]
    return np.fft.fft2(padded)


@dataclass(frozen=True)
class BlurOperator:
    """Circular convolution with a PSF, applied in the frequency domain."""

    psf: Psf
    shape: tuple
    otf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "otf", psf_to_otf(self.psf.kernel, self.shape))

    @property
    def otf_half(self) -> np.ndarray:
        """The OTF restricted to the non-negative column frequencies used by ``rfft2``."""
        return self.otf[:, : self.shape[1] // 2 + 1]

    @classmethod
    def from_kind(cls, kind: str, shape) -> "BlurOperator":
        return cls(make_psf(kind), shape)

    @classmethod
    def identity(cls, shape) -> "BlurOperator":
        return cls(Psf(np.ones((1, 1)), "delta"), shape)

    def _check(self, u):
        if np.shape(u) != self.shape:
            raise ShapeMismatchError(f"image shape {np.shape(u)} does not match operator shape {self.shape}")

    def apply(self, u: np.ndarray) -> np.ndarray:
        self._check(u)
        return np.fft.irfft2(self.otf_half * np.fft.rfft2(u), s=self.shape)

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        self._check(v)
        return np.fft.irfft2(np.conj(self.otf_half) * np.fft.rfft2(v), s=self.shape)


def apply_blur(op: BlurOperator, u: np.ndarray) -> np.ndarray:
    return op.apply(u)


def apply_blur_adjoint(op: BlurOperator, v: np.ndarray) -> np.ndarray:
    return op.adjoint(v)


# -- scenarios -------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    id: int
    psf_kind: str
    sigma: float


SCENARIOS = {
    1: Scenario(1, "inverse_quadratic_15", math.sqrt(2.0)),
    2: Scenario(2, "inverse_quadratic_15", 2.0),
    3: Scenario(3, "uniform_9", math.sqrt(2.0)),
    4: Scenario(4, "uniform_9", 2.0),
    5: Scenario(5, "gaussian_25_sigma1p6", math.sqrt(2.0)),
    6: Scenario(6, "gaussian_25_sigma1p6", 2.0),
    7: Scenario(7, "motion_15_angle30", math.sqrt(2.0)),
    8: Scenario(8, "motion_15_angle30", 2.0),
}


def get_scenario(sid: int) -> Scenario:
    try:
        return SCENARIOS[int(sid)]
    except (KeyError, ValueError):
        raise ValueError(f"scenario id must be in 1..8, got {sid!r}") from None


def gaussian_noise(shape, sigma: float, seed: int) -> np.ndarray:
    """I.i.d. N(0, sigma^2) samples, bit-reproducible for a given seed.

    Uniforms come from numpy's PCG64 bit generator (``Generator.random``,
    53-bit doubles); normals are formed with the Box-Muller transform, so
    the stream never depends on numpy's ziggurat sampler.
    """
    n = int(np.prod(shape))
    m = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((2, m))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u lies in (0, 1]
    theta = 2.0 * np.pi * u[1]
    z = np.empty(2 * m)
    z[0::2] = radius * np.cos(theta)
    z[1::2] = radius * np.sin(theta)
    return sigma * z[:n].reshape(shape)


def degrade(u: np.ndarray, sc: Scenario, seed: int, sigma: float | None = None) -> np.ndarray:
    """Simulate ``f = A u + noise`` for a scenario.

    ``sigma`` overrides the scenario's noise level when given.
    """
    u = as_image(u)
    op = BlurOperator(make_psf(sc.psf_kind), u.shape)
    s = sc.sigma if sigma is None else sigma
    f = op.apply(u)
    if s != 0:
        f = f + gaussian_noise(u.shape, s, seed)
    return f
