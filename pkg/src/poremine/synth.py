"""Synthetic fibrous micrographs and feature datasets with known ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .analytics import FeatureMatrix
from .errors import BadSeparation, SpecError
from .filtering import Label, PoreRecord
from .imaging import BinaryMask, Micrograph
from .morphology import FEATURE_NAMES, Pore, PoreFeatures, extract_pores

CLUSTER_FEATURES = tuple(n for n in FEATURE_NAMES if n != "angle")


@dataclass(frozen=True)
class SynthSpec:
    width: int
    height: int
    fiber_count: int = 12
    fiber_width_min: float = 3.0
    fiber_width_max: float = 8.0
    fiber_mean: float = 200.0
    fiber_sd: float = 5.0
    background_mean: float = 40.0
    background_sd: float = 5.0
    seed: int = 0
    scale: float = 0.0447
    min_pixels: int = 10

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SpecError("width and height must be positive")
        if self.fiber_count < 0:
            raise SpecError("fiber_count must be >= 0")
        if not 0 < self.fiber_width_min <= self.fiber_width_max:
            raise SpecError("need 0 < fiber_width_min <= fiber_width_max")
        if self.fiber_sd < 0 or self.background_sd < 0:
            raise SpecError("gray-level sd must be >= 0")
        if self.fiber_mean <= self.background_mean + 3 * (self.fiber_sd + self.background_sd):
            raise SpecError("fiber and background gray levels are not separable (need 3 sd margin)")
        if self.background_mean < 0 or self.fiber_mean > 255:
            raise SpecError("gray means must lie in [0, 255]")
        if self.scale <= 0:
            raise SpecError("scale must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthSpec":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        for required in ("width", "height"):
            if required not in values:
                raise SpecError(f"spec is missing {required!r}")
        kwargs = {}
        for key, raw in values.items():
            conv = int if known[key] == "int" else float
            try:
                kwargs[key] = conv(raw)
            except ValueError:
                raise SpecError(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)


def parse_spec_text(text: str) -> SynthSpec:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val.strip("\"'")
    return SynthSpec.from_mapping(values)


def draw_fibers(width: int, height: int, segments) -> np.ndarray:
    """Boolean fiber mask: pixel centres within width/2 of any segment (x0, y0, x1, y1, w)."""
    fiber = np.zeros((height, width), dtype=bool)
    for x0, y0, x1, y1, w in segments:
        r = w / 2.0
        # only the segment's bounding box (grown by r) can be covered
        bx0 = max(0, int(math.floor(min(x0, x1) - r)))
        bx1 = min(width, int(math.ceil(max(x0, x1) + r)) + 1)
        by0 = max(0, int(math.floor(min(y0, y1) - r)))
        by1 = min(height, int(math.ceil(max(y0, y1) + r)) + 1)
        if bx0 >= bx1 or by0 >= by1:
            continue
        yy, xx = np.mgrid[by0:by1, bx0:bx1].astype(float)
        dx, dy = x1 - x0, y1 - y0
        ll = dx * dx + dy * dy
        if ll == 0:
            t = np.zeros_like(xx)
        else:
            t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / ll, 0.0, 1.0)
        px = x0 + t * dx - xx
        py = y0 + t * dy - yy
        fiber[by0:by1, bx0:bx1] |= px * px + py * py <= r * r
    return fiber


def random_segments(spec: SynthSpec, rng: np.random.Generator):
    span = max(spec.width, spec.height)
    segs = []
    for _ in range(spec.fiber_count):
        cx = rng.uniform(0, spec.width)
        cy = rng.uniform(0, spec.height)
        theta = rng.uniform(0, math.pi)
        half = 0.5 * rng.uniform(0.5, 1.5) * span
        w = rng.uniform(spec.fiber_width_min, spec.fiber_width_max)
        segs.append(
            (
                cx - half * math.cos(theta),
                cy - half * math.sin(theta),
                cx + half * math.cos(theta),
                cy + half * math.sin(theta),
                w,
            )
        )
    return segs


def paint(fiber: np.ndarray, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    img = np.where(fiber, spec.fiber_mean, spec.background_mean).astype(float)
    noise = rng.standard_normal(fiber.shape)
    img += np.where(fiber, spec.fiber_sd, spec.background_sd) * noise
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate(spec: SynthSpec) -> tuple[Micrograph, BinaryMask, list[Pore]]:
    """Noisy micrograph, its noise-free mask and the ground-truth pores."""
    rng = np.random.default_rng(spec.seed)
    fiber = draw_fibers(spec.width, spec.height, random_segments(spec, rng))
    img = paint(fiber, spec, rng)
    truth = BinaryMask(~fiber)
    return Micrograph(img, spec.scale), truth, extract_pores(truth, spec.min_pixels)


# --- feature-space generators --------------------------------------------------

def simplex_centers(k: int, dim: int, separation: float) -> np.ndarray:
    """``k <= dim`` points in ``dim`` dimensions, all pairwise distances = separation."""
    if k > dim:
        raise ValueError("need k <= dim")
    return np.eye(k, dim) * (separation / math.sqrt(2))


def generate_feature_blobs(n_per_cluster, centers, spread: float, seed: int = 0):
    """Isotropic Gaussian blobs; returns (FeatureMatrix, planted labels)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    k, dim = centers.shape
    for i in range(k):
        for j in range(i + 1, k):
            if np.linalg.norm(centers[i] - centers[j]) < 6 * spread - 1e-12:
                raise BadSeparation(f"centers {i} and {j} are closer than 6 * spread")
    if np.isscalar(n_per_cluster):
        n_per_cluster = [int(n_per_cluster)] * k
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for lab, (c, n) in enumerate(zip(centers, n_per_cluster)):
        rows.append(c + spread * rng.standard_normal((n, dim)))
        labels.extend([lab] * n)
    cols = CLUSTER_FEATURES if dim == len(CLUSTER_FEATURES) else tuple(f"x{i}" for i in range(dim))
    x = np.vstack(rows)
    if len(x) < 2:
        x = np.vstack([x, x])
        labels = labels * 2
    return FeatureMatrix(x, cols), np.array(labels)


def ellipse_features(area, aspect, roughness, concavity, angle) -> PoreFeatures:
    """Descriptors of an ellipse-like pore of given area (um^2) and axis ratio.

    ``roughness`` inflates the Ramanujan perimeter; ``concavity`` is the hull
    excess, so solidity = 1 / (1 + concavity).
    """
    a = math.sqrt(area * aspect / math.pi)
    b = math.sqrt(area / (math.pi * aspect))
    h = ((a - b) / (a + b)) ** 2
    perim = math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h))) * roughness
    return PoreFeatures(
        area=area,
        perimeter=perim,
        major=2 * a,
        minor=2 * b,
        angle=angle % 180.0,
        circularity=min(1.0, 4 * math.pi * area / perim**2),
        aspect_ratio=aspect,
        roundness=b / a,
        solidity=1.0 / (1.0 + concavity),
    )


# name, count, log10 area mean/sd, log aspect mean/sd
POPULATION_PROFILE = (
    ("small", 130, math.log10(0.7), 0.12, math.log(1.5), 0.15),
    ("elongated", 60, math.log10(3.0), 0.2, math.log(5.0), 0.15),
    ("large", 8, math.log10(40.0), 0.1, math.log(1.6), 0.15),
)


def generate_pore_population(
    seed: int = 0,
    profile=POPULATION_PROFILE,
    artifacts: dict | None = None,
    image_id: str = "synth",
    scale: float = 0.0447,
) -> tuple[list[PoreRecord], np.ndarray]:
    """Feature records shaped like the reference pore population.

    Three sub-populations (many small round pores, elongated medium pores and a
    handful of large pores). ``artifacts`` maps a population name to the number
    of its pores labelled as artifacts (alternating shade/overlap); the rest
    are labelled real. Returns the records and each record's population index.
    """
    artifacts = {"small": 25, "elongated": 5} if artifacts is None else artifacts
    rng = np.random.default_rng(seed)
    records, planted = [], []
    pid = 1
    for pop, (name, count, la_mu, la_sd, lr_mu, lr_sd) in enumerate(profile):
        n_art = artifacts.get(name, 0)
        if n_art > count:
            raise ValueError(f"more artifacts than pores in population {name!r}")
        art_idx = set(rng.choice(count, size=n_art, replace=False).tolist())
        for i in range(count):
            area = 10 ** rng.normal(la_mu, la_sd)
            aspect = max(1.0, math.exp(rng.normal(lr_mu, lr_sd)))
            roughness = 1.0 + abs(rng.normal(0.04 * aspect, 0.03))
            concavity = abs(rng.normal(0.02 * aspect, 0.02))
            angle = rng.uniform(0, 180)
            if i in art_idx:
                label = Label.SHADE if i % 2 == 0 else Label.OVERLAP
            else:
                label = Label.REAL
            records.append(
                PoreRecord(
                    image_id=image_id,
                    pore_id=pid,
                    features=ellipse_features(area, aspect, roughness, concavity, angle),
                    area_px=int(round(area / scale**2)),
                    label=label,
                )
            )
            planted.append(pop)
            pid += 1
    return records, np.array(planted)
