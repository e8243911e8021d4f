"""Undecimated linear B-spline framelet transform.

The analysis operator ``W`` maps an ``(H, W)`` image to ``8 * levels + 1``
coefficient bands of the same size; the synthesis operator is its exact
adjoint and satisfies ``W^T W = I``.

Coefficients are computed with the a-trous cascade: at level ``l`` the
1-D masks are dilated by ``2**l`` and applied separably (mask ``h_i`` down
the rows, mask ``h_j`` along the columns for band ``(i, j)``) to the
low-pass output of the previous level. The boundary is the symmetric
half-sample extension, i.e. a Neumann condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .image_core import ShapeMismatchError, as_image

MASKS = (
    np.array([1.0, 2.0, 1.0]) / 4.0,
    np.array([1.0, 0.0, -1.0]) * np.sqrt(2.0) / 4.0,
    np.array([-1.0, 2.0, -1.0]) / 4.0,
)

#: (i, j) index pairs of the eight high-pass bands of one level, in storage order.
HIGHPASS_BANDS = tuple((i, j) for i in range(3) for j in range(3) if (i, j) != (0, 0))


# -- 1-D dilated filtering along one axis ---------------------------------

def _slab(x, axis, start, stop):
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return x[tuple(index)]


def _pad_index(n, d):
    return np.pad(np.arange(n), d, mode="symmetric")


def filter_axis(x: np.ndarray, h: np.ndarray, dilation: int, axis: int) -> np.ndarray:
    """Correlate ``x`` with the 3-tap mask ``h`` dilated by ``dilation``.

    ``out[n] = h[0] x[n - d] + h[1] x[n] + h[2] x[n + d]`` with symmetric
    extension beyond the edges.
    """
    n = x.shape[axis]
    d = dilation
    if d <= n:
        pad = [(0, 0)] * x.ndim
        pad[axis] = (d, d)
        xp = np.pad(x, pad, mode="symmetric")
    else:
        xp = np.take(x, _pad_index(n, d), axis=axis)
    out = h[1] * _slab(xp, axis, d, d + n)
    if h[0] != 0.0:
        out = out + h[0] * _slab(xp, axis, 0, n)
    if h[2] != 0.0:
        out = out + h[2] * _slab(xp, axis, 2 * d, 2 * d + n)
    return out


def filter_axis_adjoint(y: np.ndarray, h: np.ndarray, dilation: int, axis: int) -> np.ndarray:
    """Exact adjoint of :func:`filter_axis`."""
    n = y.shape[axis]
    d = dilation
    shape = list(y.shape)
    shape[axis] = n + 2 * d
    z = np.zeros(shape)
    for k in range(3):
        if h[k] != 0.0:
            _slab(z, axis, k * d, k * d + n)[...] += h[k] * y
    if d <= n:
        out = _slab(z, axis, d, d + n).copy()
        _slab(out, axis, 0, d)[...] += np.flip(_slab(z, axis, 0, d), axis=axis)
        _slab(out, axis, n - d, n)[...] += np.flip(_slab(z, axis, n + d, n + 2 * d), axis=axis)
        return out
    # fold the extension back onto the source samples it was copied from
    zt = np.moveaxis(z, axis, 0)
    out = np.zeros((n,) + zt.shape[1:])
    np.add.at(out, _pad_index(n, d), zt)
    return np.moveaxis(out, 0, axis)


# -- coefficient container -------------------------------------------------

class CoefficientPyramid:
    """Framelet coefficients stored as one ``(8 * levels + 1, H, W)`` array.

    Bands are ordered level by level, each level holding its eight high-pass
    bands in lexicographic ``(i, j)`` order; the low-pass residual of the
    deepest level comes last. Arithmetic operators act elementwise and
    return new pyramids.
    """

    __slots__ = ("data", "levels")

    def __init__(self, data: np.ndarray, levels: int):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != 8 * levels + 1:
            raise ShapeMismatchError(
                f"expected {8 * levels + 1} bands for {levels} levels, got array of shape {data.shape}")
        self.data = data
        self.levels = levels

    @classmethod
    def zeros(cls, levels: int, shape) -> "CoefficientPyramid":
        return cls(np.zeros((8 * levels + 1,) + tuple(shape)), levels)

    @property
    def image_shape(self):
        return self.data.shape[1:]

    @property
    def highpass(self) -> np.ndarray:
        """View of all high-pass bands, shape ``(8 * levels, H, W)``."""
        return self.data[:-1]

    @property
    def lowpass(self) -> np.ndarray:
        return self.data[-1]

    @staticmethod
    def band_index(level: int, i: int, j: int) -> int:
        return 8 * level + HIGHPASS_BANDS.index((i, j))

    def band(self, level: int, i: int, j: int) -> np.ndarray:
        if (i, j) == (0, 0):
            if level != self.levels - 1:
                raise KeyError("the (0, 0) band is only retained at the deepest level")
            return self.lowpass
        return self.data[self.band_index(level, i, j)]

    def bands(self) -> Iterator[tuple[int, int, int, np.ndarray]]:
        """Yield ``(level, i, j, band)`` in storage order."""
        for level in range(self.levels):
            for k, (i, j) in enumerate(HIGHPASS_BANDS):
                yield level, i, j, self.data[8 * level + k]
        yield self.levels - 1, 0, 0, self.lowpass

    def _check(self, other):
        if not isinstance(other, CoefficientPyramid) or other.data.shape != self.data.shape:
            raise ShapeMismatchError("pyramids are not congruent")

    def __add__(self, other):
        self._check(other)
        return CoefficientPyramid(self.data + other.data, self.levels)

    def __sub__(self, other):
        self._check(other)
        return CoefficientPyramid(self.data - other.data, self.levels)

    def __mul__(self, alpha):
        return CoefficientPyramid(alpha * self.data, self.levels)

    __rmul__ = __mul__

    def __neg__(self):
        return CoefficientPyramid(-self.data, self.levels)

    def copy(self):
        return CoefficientPyramid(self.data.copy(), self.levels)

    def __repr__(self):
        return f"CoefficientPyramid(levels={self.levels}, image_shape={self.image_shape})"


def linear_combination(weights, pyramids) -> CoefficientPyramid:
    """Return ``sum(w * p)`` over congruent pyramids."""
    pyramids = list(pyramids)
    out = np.zeros_like(pyramids[0].data)
    for w, p in zip(weights, pyramids):
        pyramids[0]._check(p)
        out += w * p.data
    return CoefficientPyramid(out, pyramids[0].levels)


def pyramid_inner(a: CoefficientPyramid, b: CoefficientPyramid) -> float:
    a._check(b)
    return float(np.vdot(a.data.ravel(), b.data.ravel()))


def pyramid_linf(c: CoefficientPyramid, include_lowpass: bool = False) -> float:
    """Largest coefficient magnitude over the high-pass bands.

    The low-pass residual only takes part when ``include_lowpass`` is set.
    """
    block = c.data if include_lowpass else c.highpass
    if block.size == 0:
        return 0.0
    return float(np.max(np.abs(block)))


# -- fused three-mask filtering ---------------------------------------------
#
# All three masks are combinations of the same two neighbours, so one pass
# yields every band:  h0 -> (l + r)/4 + x/2,  h1 -> sqrt(2)/4 (l - r),
# h2 -> x/2 - (l + r)/4.

_S2 = np.sqrt(2.0) / 4.0


def _neighbours(x, d, axis):
    """Samples at offsets -d and +d along ``axis`` under symmetric extension."""
    n = x.shape[axis]
    if d <= n:
        left = np.concatenate([np.flip(_slab(x, axis, 0, d), axis=axis), _slab(x, axis, 0, n - d)], axis=axis)
        right = np.concatenate([_slab(x, axis, d, n), np.flip(_slab(x, axis, n - d, n), axis=axis)], axis=axis)
        return left, right
    idx = _pad_index(n, d)
    return np.take(x, idx[:n], axis=axis), np.take(x, idx[2 * d:], axis=axis)


def _split(x, d, axis):
    left, right = _neighbours(x, d, axis)
    s = left + right
    s *= 0.25
    half = 0.5 * x
    y0 = half + s
    y2 = half - s
    y1 = left - right
    y1 *= _S2
    return y0, y1, y2


def _merge(y0, y1, y2, d, axis):
    """Adjoint of :func:`_split`: ``sum_j F_j^T y_j``."""
    n = y0.shape[axis]
    center = y0 + y2
    center *= 0.5
    p = y0 - y2
    p *= 0.25
    q = _S2 * y1
    left = p + q   # weight carried by the sample at offset -d
    right = p - q  # weight carried by the sample at offset +d
    if d > n:
        zt_shape = list(center.shape)
        zt_shape[axis] = n + 2 * d
        z = np.zeros(zt_shape)
        _slab(z, axis, 0, n)[...] += left
        _slab(z, axis, d, d + n)[...] += center
        _slab(z, axis, 2 * d, 2 * d + n)[...] += right
        zt = np.moveaxis(z, axis, 0)
        out = np.zeros((n,) + zt.shape[1:])
        np.add.at(out, _pad_index(n, d), zt)
        return np.moveaxis(out, 0, axis)
    out = center
    _slab(out, axis, 0, n - d)[...] += _slab(left, axis, d, n)
    _slab(out, axis, 0, d)[...] += np.flip(_slab(left, axis, 0, d), axis=axis)
    _slab(out, axis, d, n)[...] += _slab(right, axis, 0, n - d)
    _slab(out, axis, n - d, n)[...] += np.flip(_slab(right, axis, n - d, n), axis=axis)
    return out


# -- the transform -----------------------------------------------------------

@dataclass(frozen=True)
class FrameletSystem:
    """Linear B-spline tight frame with ``levels`` decomposition levels."""

    levels: int = 1

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"levels must be a positive integer, got {self.levels!r}")

    @property
    def masks_1d(self):
        return MASKS

    @property
    def n_bands(self) -> int:
        return 8 * self.levels + 1

    def analyze(self, u: np.ndarray) -> CoefficientPyramid:
        """Analysis operator ``W``: image -> coefficient pyramid."""
        low = as_image(u)
        out = np.empty((self.n_bands,) + low.shape)
        for level in range(self.levels):
            d = 2 ** level
            rows = np.stack(_split(low, d, axis=0))       # (i, H, W)
            bands = _split(rows, d, axis=2)               # j -> (i, H, W)
            k = 8 * level
            for i in range(3):
                for j in range(3):
                    if (i, j) == (0, 0):
                        low = bands[0][0]
                    else:
                        out[k] = bands[j][i]
                        k += 1
        out[-1] = low
        return CoefficientPyramid(out, self.levels)

    def synthesize(self, c: CoefficientPyramid) -> np.ndarray:
        """Synthesis operator ``W^T``, the exact adjoint of :meth:`analyze`."""
        if not isinstance(c, CoefficientPyramid) or c.levels != self.levels:
            raise ShapeMismatchError(
                f"pyramid with {getattr(c, 'levels', None)} levels does not match a {self.levels}-level system")
        data = c.data
        low = data[-1]
        for level in reversed(range(self.levels)):
            d = 2 ** level
            k = 8 * level
            # bands of this level laid out as [j][i]
            by_j = [np.empty((3,) + low.shape) for _ in range(3)]
            for i in range(3):
                for j in range(3):
                    if (i, j) == (0, 0):
                        by_j[0][0] = low
                    else:
                        by_j[j][i] = data[k]
                        k += 1
            rows = _merge(by_j[0], by_j[1], by_j[2], d, axis=2)
            low = _merge(rows[0], rows[1], rows[2], d, axis=0)
        return low
