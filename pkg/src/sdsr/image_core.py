"""Grayscale image values, pixel arithmetic and PGM/PNG I/O.

Images are plain 2-D ``float64`` numpy arrays holding intensities on the
nominal [0, 255] scale. Nothing here rescales to [0, 1]; clamping happens
only when an image is written to disk.
"""

from __future__ import annotations

import os
import re

import numpy as np


class ImageIOError(OSError):
    """Raised when an image file cannot be read or written."""


class ShapeMismatchError(ValueError):
    """Raised when two arrays that must be congruent are not."""


def as_image(x, copy=False) -> np.ndarray:
    """Validate ``x`` as an image and return it as a float64 array.

    Raises ``ValueError`` for non 2-D input, empty dimensions or non-finite
    values.
    """
    img = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("image has zero dimensions")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ShapeMismatchError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


# -- arithmetic -------------------------------------------------------------

def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``alpha * x + y`` as a new array."""
    check_same_shape(x, y)
    return alpha * np.asarray(x, dtype=np.float64) + np.asarray(y, dtype=np.float64)


def add(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    check_same_shape(x, y)
    return np.asarray(x, dtype=np.float64) + y


def sub(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    check_same_shape(x, y)
    return np.asarray(x, dtype=np.float64) - y


def scale(alpha: float, x: np.ndarray) -> np.ndarray:
    return alpha * np.asarray(x, dtype=np.float64)


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Standard Euclidean inner product of two congruent arrays."""
    check_same_shape(x, y)
    return float(np.vdot(np.ravel(x), np.ravel(y)).real)


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to ``uint8``."""
    clamped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 255.0)
    # values are non-negative here, so floor(x + 0.5) rounds half away from zero
    return np.floor(clamped + 0.5).astype(np.uint8)


# -- file I/O ---------------------------------------------------------------

_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_pgm(raw: bytes, path) -> np.ndarray:
    if raw[:2] != b"P5":
        raise ImageIOError(f"unreadable file {path}: not a binary PGM (P5)")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PNM_TOKEN.match(raw, pos)
        if m is None:
            raise ImageIOError(f"unreadable file {path}: truncated header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise ImageIOError(f"unreadable file {path}: malformed header") from None
        pos = m.end()
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ImageIOError(f"unreadable file {path}: zero dimensions")
    if maxval != 255:
        raise ImageIOError(f"unsupported bit depth in {path}: maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    payload = raw[pos:pos + width * height]
    if len(payload) != width * height:
        raise ImageIOError(f"unreadable file {path}: truncated pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _read_png(path) -> np.ndarray:
    from PIL import Image as PILImage

    try:
        with PILImage.open(path) as im:
            if im.mode != "L":
                raise ImageIOError(f"unsupported bit depth in {path}: mode {im.mode}")
            arr = np.asarray(im, dtype=np.float64)
    except ImageIOError:
        raise
    except Exception as exc:
        raise ImageIOError(f"unreadable file {path}: {exc}") from exc
    if arr.size == 0:
        raise ImageIOError(f"unreadable file {path}: zero dimensions")
    return arr


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5) or PNG file.

    Byte value ``v`` maps to the real intensity ``v``.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ImageIOError(f"unreadable file {path}: {exc}") from exc
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    return _parse_pgm(raw, path)


def save_image(img: np.ndarray, path) -> None:
    """Write ``img`` as a binary PGM after clamping and rounding to 8 bits."""
    img = as_image(img)
    data = quantize(img)
    header = b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0])
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(data.tobytes())
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def cameraman() -> np.ndarray:
    """The 256x256 Cameraman test image bundled with the package."""
    return load_image(os.path.join(os.path.dirname(__file__), "data", "cameraman.pgm"))
