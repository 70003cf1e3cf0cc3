"""End-to-end pipeline: pores -> cutoff -> labels -> clustering -> PCA -> artifact report."""
from __future__ import annotations

import os
import shutil
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analytics, render
from .errors import DegenerateError, LengthMismatch, StageError
from .filtering import (
    DEFAULT_CUTOFF_UM2,
    LABEL_ORDER,
    Label,
    PoreDataset,
    PoreRecord,
    apply_lower_cutoff,
    join_labels,
    records_from_pores,
)
from .imaging import BinaryMask, Micrograph, encode_pgm, load_micrograph, otsu_threshold, segment
from .morphology import FEATURE_NAMES, Pore, extract_pores
from .tables import features_csv, render_csv


@dataclass(frozen=True)
class MiningConfig:
    cutoff: float = DEFAULT_CUTOFF_UM2
    upper_cutoff: float | None = None
    k: int | None = None  # None selects k from the elbow
    k_max: int = 10
    seed: int = 0
    restarts: int = 20
    drop: tuple[str, ...] = ("angle",)
    threshold: int | None = None  # None -> Otsu per image
    min_pixels: int = 10
    exclude_border: bool = False
    threads: int | None = None


@dataclass(frozen=True)
class ClusterSummary:
    cluster: int
    count: int
    mean_area: float
    mean_log10_area: float
    median_log10_area: float
    mean_roundness: float
    area_grid: np.ndarray | None = field(default=None, repr=False)
    area_density: np.ndarray | None = field(default=None, repr=False)
    log_area_grid: np.ndarray | None = field(default=None, repr=False)
    log_area_density: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class MiningReport:
    k: int
    k_fixed: bool
    cluster_sizes: tuple[int, ...]
    crosstab: dict  # cluster -> {Label: count}
    pc_variance: float
    summaries: tuple[ClusterSummary, ...]
    artifact_cluster: int | None
    artifact_concentration: float | None
    kept: int
    dropped: int
    cutoff: float


@dataclass(frozen=True)
class MiningResult:
    dataset: PoreDataset
    matrix: analytics.FeatureMatrix
    corr: np.ndarray
    corr_order: list
    model: analytics.ClusterModel
    elbow: analytics.Elbow | None
    pca_model: analytics.PCAModel
    projection: np.ndarray
    report: MiningReport
    cluster_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class ImageResult:
    image_id: str
    micrograph: Micrograph
    threshold: int
    mask: BinaryMask
    pores: list[Pore]
    records: list[PoreRecord]


def feature_matrix(records) -> analytics.FeatureMatrix:
    return analytics.FeatureMatrix(
        np.array([r.features.as_tuple() for r in records], dtype=float), FEATURE_NAMES
    )


def crosstab(assignments, labels) -> dict:
    """Cluster -> {label: count} with clusters ascending and all four labels present."""
    assignments = list(assignments)
    labels = list(labels)
    if len(assignments) != len(labels):
        raise LengthMismatch(f"{len(assignments)} assignments vs {len(labels)} labels")
    counts = Counter(zip((int(a) for a in assignments), labels))
    return {
        c: {lab: counts.get((c, lab), 0) for lab in LABEL_ORDER}
        for c in sorted(set(int(a) for a in assignments))
    }


def artifact_concentration(table: dict) -> tuple[int | None, float | None]:
    """(modal artifact cluster, its share of all SHADE + OVERLAP pores)."""
    per = {c: row[Label.SHADE] + row[Label.OVERLAP] for c, row in table.items()}
    total = sum(per.values())
    if total == 0:
        return None, None
    best = max(per, key=lambda c: (per[c], -c))
    return best, per[best] / total


def _density(values):
    try:
        grid = analytics.density_grid(values)
        return grid, analytics.kde_density(values, grid)
    except DegenerateError:
        return None, None


def cluster_summaries(areas, roundness, assignments) -> list[ClusterSummary]:
    areas = np.asarray(areas, dtype=float)
    roundness = np.asarray(roundness, dtype=float)
    assignments = np.asarray(assignments)
    out = []
    for c in sorted(set(int(a) for a in assignments)):
        sel = assignments == c
        a = areas[sel]
        la = np.log10(a)
        g, d = _density(a)
        lg, ld = _density(la)
        out.append(
            ClusterSummary(
                cluster=c,
                count=int(sel.sum()),
                mean_area=float(a.mean()),
                mean_log10_area=float(la.mean()),
                median_log10_area=float(np.median(la)),
                mean_roundness=float(roundness[sel].mean()),
                area_grid=g,
                area_density=d,
                log_area_grid=lg,
                log_area_density=ld,
            )
        )
    return out


def order_by_area(model: analytics.ClusterModel, areas) -> analytics.ClusterModel:
    """Relabel clusters so index 0 has the smallest mean area (ties by old index)."""
    areas = np.asarray(areas, dtype=float)
    means = [areas[model.assignments == j].mean() for j in range(model.k)]
    order = sorted(range(model.k), key=lambda j: (means[j], j))
    new_index = np.empty(model.k, dtype=int)
    new_index[order] = np.arange(model.k)
    return replace(model, centroids=model.centroids[order], assignments=new_index[model.assignments])


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with stage name
        raise StageError(name, exc) from exc


def mine(records, config: MiningConfig = MiningConfig(), labels=None, known_keys=None) -> MiningResult:
    """Analysis half of the pipeline, starting from per-pore feature records."""
    ds = _stage("filter", apply_lower_cutoff, records, config.cutoff, config.upper_cutoff)
    if labels is not None:
        if known_keys is None:
            known_keys = [r.key for r in records]
        ds = _stage("labels", join_labels, ds, labels, known_keys)
    full = _stage("features", feature_matrix, ds.records)
    corr = _stage("correlation", analytics.pearson_matrix, full)
    order = analytics.correlogram_order(corr)
    reduced = full
    for name in config.drop:
        reduced = _stage("features", analytics.drop_feature, reduced, name)
    z = _stage("standardize", analytics.standardize, reduced)
    elbow = None
    if config.k is None:
        k_max = min(config.k_max, z.n_rows)
        elbow = _stage("select_k", analytics.select_k, z, k_max, config.seed, config.restarts)
        model = elbow.models[elbow.k - 1]
    else:
        model = _stage("kmeans", analytics.kmeans, z, config.k, config.seed, config.restarts)
    areas = full.values[:, FEATURE_NAMES.index("area")]
    model = order_by_area(model, areas)
    pca_model, proj = _stage("pca", analytics.pca, z, min(2, z.n_cols))
    labs = [r.label for r in ds.records]
    table = crosstab(model.assignments, labs)
    art_cluster, conc = artifact_concentration(table)
    summaries = cluster_summaries(areas, full.values[:, FEATURE_NAMES.index("roundness")], model.assignments)
    report = MiningReport(
        k=model.k,
        k_fixed=config.k is not None,
        cluster_sizes=tuple(int((model.assignments == c).sum()) for c in range(model.k)),
        crosstab=table,
        pc_variance=float(pca_model.explained_fraction[:2].sum()),
        summaries=tuple(summaries),
        artifact_cluster=art_cluster,
        artifact_concentration=conc,
        kept=len(ds),
        dropped=ds.dropped,
        cutoff=config.cutoff,
    )
    return MiningResult(ds, full, corr, order, model, elbow, pca_model, proj, report, reduced.columns)


def process_image(image_id: str, source, scale: float, config: MiningConfig) -> ImageResult:
    m = source if isinstance(source, Micrograph) else _stage("load", load_micrograph, source, scale)
    t = config.threshold if config.threshold is not None else _stage("threshold", otsu_threshold, m)
    mask = _stage("segment", segment, m, t)
    pores = _stage("extract", extract_pores, mask, config.min_pixels)
    if config.exclude_border:
        pores = [p for p in pores if not p.touches_border(mask.width, mask.height)]
    records = _stage("features", records_from_pores, image_id, pores, m.scale)
    return ImageResult(image_id, m, t, mask, pores, records)


def run_pipeline(images, scale: float, config: MiningConfig = MiningConfig(), labels=None):
    """Segment, extract and describe every image, then mine the pooled dataset.

    ``images`` is a sequence of (image_id, path or Micrograph). Per-image work
    runs on a thread pool; results are collected in input order.
    """
    images = list(images)
    if not images:
        raise StageError("load", ValueError("no images given"))
    workers = config.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(images)))) as pool:
        per_image = list(pool.map(lambda it: process_image(it[0], it[1], scale, config), images))
    records = [r for im in per_image for r in im.records]
    return per_image, mine(records, config, labels)


# --- persistence --------------------------------------------------------------

def report_text(rep: MiningReport) -> str:
    lines = [
        f"pores kept: {rep.kept}",
        f"pores dropped (area < {rep.cutoff:g} um^2): {rep.dropped}",
        f"k = {rep.k} ({'fixed' if rep.k_fixed else 'elbow'})",
        f"PC1+PC2 explained variance: {100 * rep.pc_variance:.1f}%",
    ]
    if rep.artifact_concentration is None:
        lines.append("artifact concentration: n/a (no labelled artifacts)")
    else:
        lines.append(
            f"artifact concentration: {rep.artifact_concentration:.3f} in cluster {rep.artifact_cluster + 1}"
        )
    lines.append("")
    lines.append("cluster  size  mean_area_um2  mean_log10_area  mean_roundness  " + "  ".join(l.value for l in LABEL_ORDER))
    for s in rep.summaries:
        row = rep.crosstab[s.cluster]
        lines.append(
            f"{s.cluster + 1:>7}  {s.count:>4}  {s.mean_area:>13.4g}  {s.mean_log10_area:>15.4f}  "
            f"{s.mean_roundness:>14.4f}  " + "  ".join(f"{row[l]:>{len(l.value)}}" for l in LABEL_ORDER)
        )
    return "\n".join(lines) + "\n"


def result_files(res: MiningResult, per_image=None) -> dict[str, str | bytes]:
    """Every output file of a mining run, keyed by file name."""
    rep = res.report
    files: dict[str, str | bytes] = {}
    recs = res.dataset.records
    files["features_filtered.csv"] = features_csv(recs)
    files["clusters.csv"] = render_csv(
        ("image_id", "pore_id", "cluster", "label", "area_um2", "roundness"),
        (
            (r.image_id, r.pore_id, int(a) + 1, r.label.value, r.features.area, r.features.roundness)
            for r, a in zip(recs, res.model.assignments)
        ),
    )
    files["crosstab.csv"] = render_csv(
        ("cluster",) + tuple(l.value for l in LABEL_ORDER) + ("total",),
        (
            (c + 1, *(row[l] for l in LABEL_ORDER), sum(row.values()))
            for c, row in rep.crosstab.items()
        ),
    )
    if res.elbow is not None:
        files["wss_curve.csv"] = render_csv(
            ("k", "wss", "chosen"),
            ((i + 1, w, int(i + 1 == res.elbow.k)) for i, w in enumerate(res.elbow.wss)),
        )
        files["elbow.svg"] = render.render_elbow(res.elbow.wss, res.elbow.k)
    files["pca_projection.csv"] = render_csv(
        ("image_id", "pore_id", "cluster", "pc1", "pc2"),
        ((r.image_id, r.pore_id, int(a) + 1, *p) for r, a, p in zip(recs, res.model.assignments, res.projection)),
    )
    files["pca_components.csv"] = render_csv(
        ("component", "explained_fraction") + res.cluster_columns,
        (
            (f"PC{i + 1}", f, *v)
            for i, (f, v) in enumerate(zip(res.pca_model.explained_fraction, res.pca_model.components))
        ),
    )
    files["cluster_summary.csv"] = render_csv(
        ("cluster", "count", "mean_area_um2", "mean_log10_area", "median_log10_area", "mean_roundness"),
        (
            (s.cluster + 1, s.count, s.mean_area, s.mean_log10_area, s.median_log10_area, s.mean_roundness)
            for s in rep.summaries
        ),
    )
    names = list(res.matrix.columns)
    files["correlation.csv"] = render_csv(
        ("feature",) + tuple(names[i] for i in res.corr_order),
        ((names[i], *(res.corr[i, j] for j in res.corr_order)) for i in res.corr_order),
    )
    files["heatmap.svg"] = render.render_heatmap(res.corr, res.corr_order, names)
    files["pca.svg"] = render.render_pca_scatter(res.projection, res.model.assignments, res.pca_model.explained_fraction)
    curves = [(s.cluster, s.area_grid, s.area_density) for s in rep.summaries if s.area_grid is not None]
    log_curves = [
        (s.cluster, s.log_area_grid, s.log_area_density) for s in rep.summaries if s.log_area_grid is not None
    ]
    files["density.svg"] = render.render_densities(curves, rep.cutoff)
    files["density_log.svg"] = render.render_densities(log_curves, rep.cutoff, log_x=True)
    files["report.txt"] = report_text(rep)
    if per_image:
        cluster_of = {r.key: int(a) for r, a in zip(recs, res.model.assignments)}
        label_of = {r.key: r.label for r in recs}
        for im in per_image:
            keys = [(im.image_id, p.id) for p in im.pores]
            files[f"{im.image_id}_mask.pgm"] = encode_pgm(im.mask.to_gray())
            files[f"{im.image_id}_features.csv"] = features_csv(im.records)
            files[f"{im.image_id}_poremap.svg"] = render.render_pore_map(
                im.mask,
                im.pores,
                [cluster_of.get(k) for k in keys],
                [label_of.get(k, Label.UNLABELED) for k in keys],
                scale=im.micrograph.scale,
                title=im.image_id,
            )
    return files


def write_files(out_dir, files: dict) -> None:
    """Write all files or none: stage in a temp dir beside ``out_dir``, then move in."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for name, content in sorted(files.items()):
            target = staging / name
            if isinstance(content, bytes):
                target.write_bytes(content)
            else:
                target.write_text(content)
        out.mkdir(exist_ok=True)
        for name in sorted(files):
            os.replace(staging / name, out / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
