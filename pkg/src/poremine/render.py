"""SVG figures built as plain text: pore map, correlogram, elbow, PCA scatter, densities.

Output is deterministic (fixed number formatting, no ids or timestamps), so
figures can be diffed byte-for-byte.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import DimensionMismatch
from .filtering import Label

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#17becf",
)
NEUTRAL = "#9e9e9e"
NEG_COLOR = (33, 102, 172)
MID_COLOR = (255, 255, 255)
POS_COLOR = (178, 24, 43)

FONT = 'font-family="sans-serif"'


def cluster_color(c) -> str:
    return NEUTRAL if c is None else PALETTE[int(c) % len(PALETTE)]


def num(v: float) -> str:
    s = f"{float(v):.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _attrs(**kw) -> str:
    parts = []
    for k, v in kw.items():
        if v is None:
            continue
        k = k.rstrip("_").replace("_", "-")
        if isinstance(v, float):
            v = num(v)
        parts.append(f"{k}={quoteattr(str(v))}")
    return " ".join(parts)


def el(tag: str, text: str | None = None, **kw) -> str:
    a = _attrs(**kw)
    head = f"<{tag} {a}" if a else f"<{tag}"
    if text is None:
        return head + "/>"
    return f"{head}>{escape(text)}</{tag}>"


def document(width: float, height: float, body: list[str], title: str = "") -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{num(width)}" '
        f'height="{num(height)}" viewBox="0 0 {num(width)} {num(height)}">',
    ]
    if title:
        lines.append(el("title", title))
    lines.append(el("rect", x=0.0, y=0.0, width=float(width), height=float(height), fill="#ffffff"))
    lines.extend(body)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def diverging_color(v: float) -> str:
    """-1 -> blue, 0 -> white, +1 -> red, linear in between."""
    v = max(-1.0, min(1.0, float(v)))
    end = POS_COLOR if v >= 0 else NEG_COLOR
    t = abs(v)
    rgb = [round(m + (e - m) * t) for m, e in zip(MID_COLOR, end)]
    return "#%02x%02x%02x" % tuple(rgb)


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


class Axes:
    """Linear data-to-pixel mapping for a rectangular plot area."""

    def __init__(self, xlim, ylim, left=70.0, top=30.0, width=480.0, height=320.0):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        self.left, self.top, self.width, self.height = left, top, width, height

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.width

    def py(self, y: float) -> float:
        return self.top + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.height

    def inv_px(self, sx: float) -> float:
        return self.x0 + (sx - self.left) / self.width * (self.x1 - self.x0)

    def frame(self, xlabel: str, ylabel: str, xticks=None, yticks=None) -> list[str]:
        out = [
            el(
                "rect",
                class_="frame",
                x=self.left,
                y=self.top,
                width=self.width,
                height=self.height,
                fill="none",
                stroke="#000000",
            )
        ]
        bottom = self.top + self.height
        for t in nice_ticks(self.x0, self.x1) if xticks is None else xticks:
            x = self.px(t)
            out.append(el("line", x1=x, y1=bottom, x2=x, y2=bottom + 5, stroke="#000000"))
            out.append(el("text", f"{t:g}", x=x, y=bottom + 18, text_anchor="middle", font_size=11))
        for t in nice_ticks(self.y0, self.y1) if yticks is None else yticks:
            y = self.py(t)
            out.append(el("line", x1=self.left - 5, y1=y, x2=self.left, y2=y, stroke="#000000"))
            out.append(el("text", f"{t:g}", x=self.left - 8, y=y + 4, text_anchor="end", font_size=11))
        out.append(
            el("text", xlabel, class_="xlabel", x=self.left + self.width / 2, y=bottom + 38, text_anchor="middle", font_size=13)
        )
        cy = self.top + self.height / 2
        out.append(
            el(
                "text",
                ylabel,
                class_="ylabel",
                x=18.0,
                y=cy,
                text_anchor="middle",
                font_size=13,
                transform=f"rotate(-90 18 {num(cy)})",
            )
        )
        return out


def _pad(lo, hi, frac=0.05):
    span = hi - lo
    if span == 0:
        span = abs(lo) or 1.0
    return lo - frac * span, hi + frac * span


def legend(entries, x: float, y: float) -> list[str]:
    """entries: (label, color, extra style dict) triples."""
    out = []
    for i, (text, color, style) in enumerate(entries):
        yy = y + 18 * i
        out.append(el("rect", class_="legend-swatch", x=x, y=yy, width=12.0, height=12.0, fill=color, **style))
        out.append(el("text", text, class_="legend-entry", x=x + 18, y=yy + 10, font_size=12))
    return out


# --- figures ------------------------------------------------------------------

LABEL_STROKE = {
    Label.REAL: dict(stroke="#424242", stroke_width=0.5),
    Label.UNLABELED: dict(stroke="#424242", stroke_width=0.5),
    Label.SHADE: dict(stroke="#000000", stroke_width=1.5, stroke_dasharray="4 2"),
    Label.OVERLAP: dict(stroke="#ff00ff", stroke_width=2.0),
}


def render_pore_map(mask, pores, assignments=None, labels=None, scale: float | None = None, title: str = "") -> str:
    """Pore outlines over the mask, filled by cluster and stroked by expert label.

    ``assignments`` and ``labels`` are aligned with ``pores``; a ``None``
    assignment marks a pore outside the clustered dataset (e.g. below cutoff).
    """
    n = len(pores)
    assignments = [None] * n if assignments is None else list(assignments)
    labels = [Label.UNLABELED] * n if labels is None else list(labels)
    w, h = mask.width, mask.height
    legend_h = 30 + 18 * (len({a for a in assignments if a is not None}) + 4)
    body = [el("rect", class_="fiber-phase", x=0.0, y=0.0, width=float(w), height=float(h), fill="#eeeeee")]
    for p, a, lab in zip(pores, assignments, labels):
        pts = " ".join(f"{num(x + 0.5)},{num(y + 0.5)}" for x, y in p.boundary)
        style = LABEL_STROKE[lab]
        body.append(
            el(
                "polygon",
                class_="pore",
                points=pts,
                fill=cluster_color(a),
                fill_opacity="0.6",
                **style,
            )
        )
    for p in pores:
        cx, cy = p.centroid
        body.append(
            el("text", str(p.id), class_="pore-id", x=cx + 0.5, y=cy + 0.5, font_size=8, text_anchor="middle")
        )
    entries = [
        (f"cluster {c + 1}", cluster_color(c), {})
        for c in sorted({a for a in assignments if a is not None})
    ]
    entries += [
        (lab.value, "#ffffff", {k: v for k, v in LABEL_STROKE[lab].items()})
        for lab in (Label.REAL, Label.SHADE, Label.OVERLAP)
    ]
    body += legend(entries, 10.0, h + 12.0)
    if scale:
        bar_px = _scale_bar_length(w, scale)
        y = h + 16.0
        x1 = w - 10.0
        body.append(el("line", class_="scale-bar", x1=x1 - bar_px[0], y1=y, x2=x1, y2=y, stroke="#000000", stroke_width=3))
        body.append(el("text", f"{bar_px[1]:g} µm", x=x1 - bar_px[0] / 2, y=y + 16, text_anchor="middle", font_size=12))
    return document(w, h + legend_h, body, title)


def _scale_bar_length(width_px: int, scale: float) -> tuple[float, float]:
    """(length in px, length in um) for a round bar about a fifth of the width."""
    target = width_px * scale / 5
    mag = 10 ** math.floor(math.log10(target))
    um = max(m * mag for m in (1, 2, 5) if m * mag <= target)
    return um / scale, um


def render_heatmap(corr, order, names, cell: float = 40.0) -> str:
    corr = np.asarray(corr, dtype=float)
    order = list(order)
    n = len(order)
    label_w = 110.0
    body = []
    for i, r in enumerate(order):
        for j, c in enumerate(order):
            v = corr[r, c]
            body.append(
                el(
                    "rect",
                    class_="cell",
                    x=label_w + j * cell,
                    y=label_w + i * cell,
                    width=cell,
                    height=cell,
                    fill=diverging_color(v),
                    data_value=f"{v:.4f}",
                )
            )
    for i, r in enumerate(order):
        body.append(
            el("text", names[r], class_="row-name", x=label_w - 6, y=label_w + (i + 0.5) * cell + 4, text_anchor="end", font_size=12)
        )
        x = label_w + (i + 0.5) * cell
        body.append(
            el(
                "text",
                names[r],
                class_="col-name",
                x=x,
                y=label_w - 6,
                font_size=12,
                transform=f"rotate(-60 {num(x)} {num(label_w - 6)})",
            )
        )
    # colour scale
    sx = label_w + n * cell + 30
    steps = 20
    for s in range(steps):
        v = 1 - 2 * (s + 0.5) / steps
        body.append(
            el("rect", class_="scale", x=sx, y=label_w + s * 10.0, width=16.0, height=10.0, fill=diverging_color(v))
        )
    for v, yy in ((1, 0), (0, steps * 5), (-1, steps * 10)):
        body.append(el("text", f"{v:g}", x=sx + 22, y=label_w + yy + 4, font_size=11))
    width = sx + 60
    height = max(label_w + n * cell, label_w + steps * 10.0) + 20
    return document(width, height, body, "feature correlation")


def render_elbow(wss, chosen_k: int) -> str:
    ks = np.arange(1, len(wss) + 1)
    ax = Axes(_pad(1, len(wss)), _pad(min(wss), max(wss)))
    pts = " ".join(f"{num(ax.px(k))},{num(ax.py(v))}" for k, v in zip(ks, wss))
    body = ax.frame("number of clusters k", "total within-cluster sum of squares", xticks=list(ks))
    body.append(el("polyline", class_="wss", points=pts, fill="none", stroke=PALETTE[0], stroke_width=2))
    for k, v in zip(ks, wss):
        body.append(el("circle", class_="wss-point", cx=ax.px(k), cy=ax.py(v), r=3.0, fill=PALETTE[0]))
    if chosen_k is not None:
        v = wss[chosen_k - 1]
        body.append(
            el(
                "circle",
                class_="chosen-k",
                cx=ax.px(chosen_k),
                cy=ax.py(v),
                r=7.0,
                fill="none",
                stroke=PALETTE[3],
                stroke_width=2,
                data_k=str(chosen_k),
            )
        )
    return document(600, 400, body, "elbow")


def render_pca_scatter(projection, assignments, explained) -> str:
    proj = np.asarray(projection, dtype=float)
    if proj.ndim != 2 or proj.shape[1] != 2:
        raise DimensionMismatch(f"PCA scatter needs 2 columns, got shape {proj.shape}")
    assignments = np.asarray(assignments)
    if len(assignments) != len(proj):
        raise DimensionMismatch("projection and assignments differ in length")
    ax = Axes(_pad(proj[:, 0].min(), proj[:, 0].max()), _pad(proj[:, 1].min(), proj[:, 1].max()))
    body = ax.frame(
        f"PC1 ({100 * explained[0]:.1f}%)",
        f"PC2 ({100 * explained[1]:.1f}%)",
    )
    for (x, y), a in zip(proj, assignments):
        body.append(el("circle", class_="point", cx=ax.px(x), cy=ax.py(y), r=3.0, fill=cluster_color(a), fill_opacity="0.8"))
    clusters = sorted(set(int(a) for a in assignments))
    body += legend([(f"cluster {c + 1}", cluster_color(c), {}) for c in clusters], ax.left + ax.width + 15, ax.top)
    return document(680, 400, body, "principal components")


def render_densities(curves, cutoff: float | None = 0.4, log_x: bool = False) -> str:
    """Overlaid density curves.

    ``curves``: sequence of (cluster, grid, density). With ``log_x`` the grids
    are log10(area) values and the cutoff rule is drawn at log10(cutoff).
    """
    curves = [(c, np.asarray(g, dtype=float), np.asarray(d, dtype=float)) for c, g, d in curves]
    xs = [g for _, g, _ in curves]
    ys = [d for _, _, d in curves]
    cut_x = None
    if cutoff is not None and cutoff > 0:
        cut_x = math.log10(cutoff) if log_x else cutoff
    lo = min([g.min() for g in xs] + ([cut_x] if cut_x is not None else []), default=0.0)
    hi = max([g.max() for g in xs] + ([cut_x] if cut_x is not None else []), default=1.0)
    top = max([d.max() for d in ys], default=1.0)
    ax = Axes((lo, hi), (0.0, top * 1.05 if top > 0 else 1.0))
    body = ax.frame("log10 pore area (µm²)" if log_x else "pore area (µm²)", "density")
    for c, g, d in curves:
        pts = " ".join(f"{num(ax.px(x))},{num(ax.py(y))}" for x, y in zip(g, d))
        body.append(el("polyline", class_="density", points=pts, fill="none", stroke=cluster_color(c), stroke_width=2))
    if cut_x is not None:
        x = ax.px(cut_x)
        body.append(
            el(
                "line",
                class_="cutoff",
                x1=x,
                y1=ax.top,
                x2=x,
                y2=ax.top + ax.height,
                stroke="#000000",
                stroke_dasharray="5 3",
                data_value=f"{cutoff:g}",
            )
        )
    body += legend([(f"cluster {c + 1}", cluster_color(c), {}) for c, _, _ in curves], ax.left + ax.width + 15, ax.top)
    return document(680, 400, body, "pore area density")
