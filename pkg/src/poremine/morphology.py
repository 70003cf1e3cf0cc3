"""Pore extraction (8-connected dark components) and per-pore shape descriptors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .errors import DegeneratePore
from .imaging import BinaryMask, check_scale

FEATURE_NAMES = (
    "area",
    "perimeter",
    "major",
    "minor",
    "angle",
    "circularity",
    "aspect_ratio",
    "roundness",
    "solidity",
)

EIGHT = np.ones((3, 3), dtype=bool)

# Neighbour offsets in counterclockwise order as seen on screen (y grows down),
# starting from west.
_DIRS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}
_SQRT2 = math.sqrt(2.0)
_STEP = tuple(1.0 if d % 2 == 0 else _SQRT2 for d in range(8))


def _back_after(d: int) -> int:
    # after stepping in direction d, the last background probe lies this way from the new pixel
    (px, py), (qx, qy) = _DIRS[(d - 1) & 7], _DIRS[d]
    return _DIR_INDEX[(px - qx, py - qy)]


_BACK_AFTER = tuple(_back_after(d) for d in range(8))
# _FIRST_HIT[code * 8 + back]: first direction after ``back`` (counterclockwise)
# whose bit is set in the 8-neighbour code, or -1 for an isolated pixel
_FIRST_HIT = [
    next((d for d in ((back + i) & 7 for i in range(1, 9)) if code >> d & 1), -1)
    for code in range(256)
    for back in range(8)
]


@dataclass(frozen=True, eq=False)
class Pore:
    id: int
    pixels: np.ndarray  # (n, 2) int (x, y), raster order
    centroid: tuple[float, float]
    boundary: tuple[tuple[int, int], ...]  # closed: first == last
    perimeter_px: float

    @property
    def pixel_count(self) -> int:
        return len(self.pixels)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1), inclusive."""
        x0, y0 = self.pixels.min(axis=0)
        x1, y1 = self.pixels.max(axis=0)
        return int(x0), int(y0), int(x1), int(y1)

    def touches_border(self, width: int, height: int) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 == 0 or y0 == 0 or x1 == width - 1 or y1 == height - 1


@dataclass(frozen=True)
class PoreFeatures:
    area: float  # um^2
    perimeter: float  # um
    major: float  # um
    minor: float  # um
    angle: float  # degrees in [0, 180)
    circularity: float
    aspect_ratio: float
    roundness: float
    solidity: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


def _trace_local(local: np.ndarray) -> tuple[list[int], float]:
    """Moore-neighbour trace of the single component in ``local``.

    ``local`` must have a one-pixel FIBER margin on every side. Returns the
    closed path as flat indices into ``local`` and its length with
    unit/sqrt(2) steps.
    """
    h, w = local.shape
    code = np.zeros((h, w), dtype=np.int64)
    inner = code[1:-1, 1:-1]
    for k, (dx, dy) in enumerate(_DIRS):
        inner |= local[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx].astype(np.int64) << k
    codes = code.ravel().tolist()
    offs = [dx + dy * w for dx, dy in _DIRS]
    start = int(np.argmax(local))
    path = [start]
    p = start
    back = 0  # west of the first raster pixel is always background
    first_move = None
    length = 0.0
    hit, step, back_after = _FIRST_HIT, _STEP, _BACK_AFTER
    while True:
        d = hit[codes[p] * 8 + back]
        if d < 0:
            return [start], 4.0
        q = p + offs[d]
        if first_move is None:
            first_move = q
        elif p == start and q == first_move:
            break
        length += step[d]
        back = back_after[d]
        p = q
        path.append(q)
    return path, length


def trace_boundary(pixels: np.ndarray) -> tuple[tuple[tuple[int, int], ...], float]:
    """Closed boundary path of an 8-connected pixel set and its perimeter in pixels.

    The trace starts at the top-left pixel and runs counterclockwise on screen.
    A lone pixel is given perimeter 4 (unit-square convention).
    """
    pixels = np.asarray(pixels)
    x0, y0 = pixels.min(axis=0)
    x1, y1 = pixels.max(axis=0)
    local = np.zeros((y1 - y0 + 3, x1 - x0 + 3), dtype=bool)
    local[pixels[:, 1] - y0 + 1, pixels[:, 0] - x0 + 1] = True
    flat, length = _trace_local(local)
    idx = np.asarray(flat)
    w = local.shape[1]
    xs = (idx % w + (x0 - 1)).tolist()
    ys = (idx // w + (y0 - 1)).tolist()
    return tuple(zip(xs, ys)), length


def extract_pores(mask: BinaryMask, min_pixels: int = 10) -> list[Pore]:
    """All 8-connected PORE components with at least ``min_pixels`` pixels.

    Ids run from 1 in raster order of each component's first pixel.
    """
    if min_pixels < 1:
        raise ValueError("min_pixels must be >= 1")
    labels, n = ndimage.label(mask.pore, structure=EIGHT)
    if n == 0:
        return []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    flat = labels.ravel()
    nz = np.flatnonzero(flat)
    # first raster index of each label
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[nz], nz)
    keep = [lab for lab in range(1, n + 1) if counts[lab] >= min_pixels]
    keep.sort(key=lambda lab: first[lab])
    slices = ndimage.find_objects(labels)
    pores = []
    for pid, lab in enumerate(keep, start=1):
        sl = slices[lab - 1]
        ys, xs = np.nonzero(labels[sl] == lab)
        xs = xs + sl[1].start
        ys = ys + sl[0].start
        pixels = np.column_stack([xs, ys]).astype(np.int64)
        boundary, perim = trace_boundary(pixels)
        pores.append(
            Pore(
                id=pid,
                pixels=pixels,
                centroid=(float(xs.mean()), float(ys.mean())),
                boundary=boundary,
                perimeter_px=perim,
            )
        )
    return pores


def pore_area_um2(p: Pore, scale: float) -> float:
    scale = check_scale(scale)
    return p.pixel_count * scale * scale


def fit_ellipse(pixels: np.ndarray) -> tuple[float, float, float]:
    """Moment-equivalent ellipse: (major_px, minor_px, angle_deg).

    Second central moments of pixel centres get +1/12 per axis for the pixel
    area; axes are 4*sqrt(eigenvalue). The angle is counterclockwise from +x
    with y pointing up, in [0, 180).
    """
    pixels = np.asarray(pixels, dtype=float)
    if len(pixels) < 2:
        raise DegeneratePore(f"ellipse fit needs at least 2 pixels, got {len(pixels)}")
    d = pixels - pixels.mean(axis=0)
    a = float(np.mean(d[:, 0] ** 2)) + 1.0 / 12.0
    c = float(np.mean(d[:, 1] ** 2)) + 1.0 / 12.0
    b = float(np.mean(d[:, 0] * d[:, 1]))
    mid = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    lam1 = mid + rad
    lam2 = max(mid - rad, 0.0)
    theta = 0.5 * math.degrees(math.atan2(2.0 * b, a - c))  # y-down frame
    angle = (-theta) % 180.0
    if angle >= 180.0:
        angle = 0.0
    return 4.0 * math.sqrt(lam1), 4.0 * math.sqrt(lam2), angle


def shoelace(poly) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def convex_hull_area(p: Pore) -> float:
    """Area in px^2 of the convex hull of the pore's pixel squares."""
    px = p.pixels
    # only the leftmost and rightmost square of each row can touch the hull
    order = np.lexsort((px[:, 0], px[:, 1]))
    xs, ys = px[order, 0], px[order, 1]
    starts = np.flatnonzero(np.r_[True, ys[1:] != ys[:-1]])
    lo = xs[starts]
    hi = np.maximum.reduceat(xs, starts) + 1
    row = ys[starts]
    corners = np.concatenate(
        [np.column_stack(c) for c in ((lo, row), (hi, row), (lo, row + 1), (hi, row + 1))]
    )
    # qhull picks the vertices; the area is summed exactly from integer corners
    hull = ConvexHull(corners)
    return shoelace(corners[hull.vertices].tolist())


def compute_features(p: Pore, scale: float) -> PoreFeatures:
    scale = check_scale(scale)
    major_px, minor_px, angle = fit_ellipse(p.pixels)
    area = p.pixel_count * scale * scale
    perimeter = p.perimeter_px * scale
    major = major_px * scale
    minor = minor_px * scale
    circularity = min(1.0, 4.0 * math.pi * area / (perimeter * perimeter))
    return PoreFeatures(
        area=area,
        perimeter=perimeter,
        major=major,
        minor=minor,
        angle=angle,
        circularity=circularity,
        aspect_ratio=major_px / minor_px,
        roundness=4.0 * area / (math.pi * major * major),
        solidity=p.pixel_count / convex_hull_area(p),
    )


def pore_from_pixels(pixels, pore_id: int = 1) -> Pore:
    """Build a Pore from an explicit (x, y) pixel list (no connectivity check)."""
    pixels = np.asarray(sorted({(int(x), int(y)) for x, y in pixels}, key=lambda t: (t[1], t[0])))
    boundary, perim = trace_boundary(pixels)
    return Pore(
        id=pore_id,
        pixels=pixels,
        centroid=(float(pixels[:, 0].mean()), float(pixels[:, 1].mean())),
        boundary=boundary,
        perimeter_px=perim,
    )
