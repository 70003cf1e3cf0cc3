"""Micrograph loading, Otsu thresholding and two-phase segmentation.

Pore phase is the dark phase: a pixel is PORE when its gray value is at or
below the threshold. Masks are stored as boolean arrays with ``True`` for
PORE and written to disk as PGM with PORE=0, FIBER=255.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DegenerateHistogram, FileUnreadable, InvalidScale, UnsupportedFormat

PORE_VALUE = 0
FIBER_VALUE = 255


def check_scale(scale: float) -> float:
    try:
        scale = float(scale)
    except (TypeError, ValueError):
        raise InvalidScale(f"scale must be a number, got {scale!r}") from None
    if not math.isfinite(scale) or scale <= 0:
        raise InvalidScale(f"scale must be positive and finite, got {scale!r}")
    return scale


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Micrograph:
    """Grayscale image with its physical calibration (micrometres per pixel)."""

    intensities: np.ndarray  # (height, width) uint8
    scale: float

    def __post_init__(self):
        a = np.asarray(self.intensities)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"intensities must be a non-empty 2-D grid, got shape {a.shape}")
        if a.dtype != np.uint8:
            if a.size and (a.min() < 0 or a.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            a = a.astype(np.uint8)
        object.__setattr__(self, "intensities", _frozen(a))
        object.__setattr__(self, "scale", check_scale(self.scale))

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """Two-phase image; ``pore[y, x]`` is True for PORE, False for FIBER."""

    pore: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pore, dtype=bool)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D grid, got shape {a.shape}")
        object.__setattr__(self, "pore", _frozen(a))

    @property
    def width(self) -> int:
        return self.pore.shape[1]

    @property
    def height(self) -> int:
        return self.pore.shape[0]

    def to_gray(self) -> np.ndarray:
        return np.where(self.pore, PORE_VALUE, FIBER_VALUE).astype(np.uint8)


# --- PGM / PNG io -----------------------------------------------------------

def _pgm_tokens(data: bytes, count: int):
    """Return the first ``count`` header tokens and the offset after them."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise UnsupportedFormat("truncated PGM header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def decode_pgm(data: bytes) -> np.ndarray:
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise UnsupportedFormat(f"only binary PGM (P5) is supported, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise UnsupportedFormat("malformed PGM header") from None
    if width < 1 or height < 1:
        raise UnsupportedFormat("PGM dimensions must be positive")
    if maxval > 255 or maxval < 1:
        raise UnsupportedFormat(f"only 8-bit PGM is supported (maxval={maxval})")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise UnsupportedFormat("PGM raster is shorter than its header declares")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(gray: np.ndarray) -> bytes:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    h, w = gray.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(gray, dtype=np.uint8).tobytes()


def _decode_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.array(im, dtype=np.uint8)
            if mode == "1":
                return np.array(im.convert("L"), dtype=np.uint8)
            raise UnsupportedFormat(f"{path}: only 8-bit grayscale PNG is accepted (mode {mode})")
    except UnidentifiedImageError:
        raise UnsupportedFormat(f"{path}: not a PGM or PNG image") from None


def read_gray(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc.strerror or exc}") from None
    if data[:2] == b"P5" or data[:1] == b"P":
        return decode_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(path)
    raise UnsupportedFormat(f"{path}: not a PGM or PNG image")


def load_micrograph(path, scale: float) -> Micrograph:
    scale = check_scale(scale)
    return Micrograph(read_gray(path), scale)


def write_pgm(path, gray: np.ndarray) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(encode_pgm(gray))
    os.replace(tmp, path)


def load_mask(path) -> BinaryMask:
    """Read a mask PGM/PNG; dark pixels (< 128) are PORE."""
    return BinaryMask(read_gray(path) < 128)


# --- thresholding -------------------------------------------------------------

def otsu_threshold(m: Micrograph) -> int:
    """Gray level maximising between-class variance; ties go to the lowest level.

    Class variances are compared as exact rationals over the integer histogram,
    so ties are detected exactly rather than up to float noise.
    """
    hist = np.bincount(m.intensities.ravel(), minlength=256).astype(object)
    levels = np.arange(256, dtype=object)
    total_n = int(hist.sum())
    total_s = int((hist * levels).sum())
    best_t, best = None, None
    n0 = s0 = 0
    for t in range(255):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        # N^2 * sigma_b^2 = (N*s0 - n0*S)^2 / (n0*n1)
        score = Fraction((total_n * s0 - n0 * total_s) ** 2, n0 * n1)
        if best is None or score > best:
            best, best_t = score, t
    if best_t is None:
        raise DegenerateHistogram("image has a single gray level; no threshold separates it")
    return best_t


def segment(m: Micrograph, t: int) -> BinaryMask:
    t = int(t)
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return BinaryMask(m.intensities <= t)
