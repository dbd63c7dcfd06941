"""Static SVG figures: boxplots, ECDFs, distance heatmaps and scatters.

Documents are self-contained (no scripts, no external references). Plotted
data values stay recoverable: series carry ``data-*`` attributes and every
annotation uses :func:`fmt_value`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ..dist_stats import BoxplotSummary, EmpiricalDistribution
from ..embed import EmbeddingResult
from ..metrics import DistanceMatrix, ScatterCoordinates

ANNOTATION_DECIMALS = 2
WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 150, 40, 60

# synthetic datasets in warm tones, real-world in blues
WARM = ("#d95f02", "#e7298a", "#a6261d", "#ff7f00", "#b15928")
COOL = ("#1f78b4", "#6baed6", "#08519c", "#4292c6", "#2171b5")
NEUTRAL = ("#1b9e77", "#7570b3", "#66a61e", "#e6ab02", "#a6761d", "#666666")


class RenderError(ValueError):
    pass


def fmt_value(v: float, decimals: int = ANNOTATION_DECIMALS) -> str:
    return f"{v:.{decimals}f}"


def _num(v: float) -> str:
    """Compact coordinate formatting."""
    return f"{v:.2f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


@dataclass(frozen=True)
class Axis:
    """Maps data values onto a pixel interval, optionally on a log10 scale."""

    lo: float
    hi: float
    pix_lo: float
    pix_hi: float
    log: bool = False

    @classmethod
    def fit(cls, values, pix_lo, pix_hi, log=False, include_zero=False, pad=0.05) -> "Axis":
        vals = np.asarray(values, dtype=np.float64)
        if log:
            vals = vals[vals > 0]
            if vals.size == 0:
                raise RenderError("log axis needs positive values")
            lo, hi = math.log10(vals.min()), math.log10(vals.max())
        else:
            lo, hi = float(vals.min()), float(vals.max())
            if include_zero:
                lo, hi = min(lo, 0.0), max(hi, 0.0)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        span = hi - lo
        if not include_zero or log:
            lo -= pad * span
        hi += pad * span
        if log:
            return cls(10**lo, 10**hi, pix_lo, pix_hi, True)
        return cls(lo, hi, pix_lo, pix_hi, False)

    def _t(self, v):
        return math.log10(v) if self.log else v

    def __call__(self, v: float) -> float:
        a, b = self._t(self.lo), self._t(self.hi)
        return self.pix_lo + (self._t(v) - a) / (b - a) * (self.pix_hi - self.pix_lo)

    def invert(self, p: float) -> float:
        a, b = self._t(self.lo), self._t(self.hi)
        t = a + (p - self.pix_lo) / (self.pix_hi - self.pix_lo) * (b - a)
        return 10**t if self.log else t

    def ticks(self, n: int = 5) -> list[float]:
        if self.log:
            first, last = math.ceil(math.log10(self.lo)), math.floor(math.log10(self.hi))
            return [10.0**e for e in range(first, last + 1)]
        step = _nice_step((self.hi - self.lo) / n)
        start = math.ceil(self.lo / step) * step
        out = []
        v = start
        while v <= self.hi + 1e-12 * step:
            out.append(0.0 if abs(v) < 1e-12 * step else v)
            v += step
        return out


def _nice_step(raw: float) -> float:
    exp = math.floor(math.log10(raw))
    frac = raw / 10**exp
    nice = 1 if frac <= 1 else 2 if frac <= 2 else 5 if frac <= 5 else 10
    return nice * 10**exp


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(math.log10(v)))}"
    return f"{v:.6g}"


class _Doc:
    def __init__(self, title: str, width: int = WIDTH, height: int = HEIGHT):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f"<title>{escape(title)}</title>",
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def add(self, s: str):
        self.parts.append(s)

    def text(self, x, y, s, anchor="start", cls=None, extra=""):
        c = f' class="{cls}"' if cls else ""
        self.add(f'<text{c} x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}"{extra}>{escape(s)}</text>')

    def axes(self, xa: Optional[Axis], ya: Optional[Axis], xlabel: str, ylabel: str):
        """Draw the frame; ``xa=None`` gives a bare baseline (categorical x)."""
        x0, x1 = (xa.pix_lo, xa.pix_hi) if xa else (MARGIN_LEFT, self.width - MARGIN_RIGHT)
        y0 = self.height - MARGIN_BOTTOM
        self.add(f'<line x1="{_num(x0)}" y1="{y0}" x2="{_num(x1)}" y2="{y0}" stroke="black"/>')
        for t in xa.ticks() if xa else ():
            px = xa(t)
            self.add(f'<line x1="{_num(px)}" y1="{y0}" x2="{_num(px)}" y2="{y0 + 4}" stroke="black"/>')
            self.text(px, y0 + 16, _tick_label(t, xa.log), "middle", "tick")
        self.text((x0 + x1) / 2, self.height - 15, xlabel, "middle")
        if ya is not None:
            self.add(f'<line x1="{_num(x0)}" y1="{_num(ya.pix_lo)}" x2="{_num(x0)}" y2="{_num(ya.pix_hi)}" stroke="black"/>')
            for t in ya.ticks():
                py = ya(t)
                self.add(f'<line x1="{_num(x0 - 4)}" y1="{_num(py)}" x2="{_num(x0)}" y2="{_num(py)}" stroke="black"/>')
                self.text(x0 - 7, py + 4, _tick_label(t, ya.log), "end", "tick")
        ymid = (MARGIN_TOP + y0) / 2
        self.add(f'<text x="18" y="{_num(ymid)}" text-anchor="middle" transform="rotate(-90 18 {_num(ymid)})">{escape(ylabel)}</text>')

    def legend(self, entries: Sequence[tuple[str, str]]):
        x = self.width - MARGIN_RIGHT + 15
        for i, (name, color) in enumerate(entries):
            y = MARGIN_TOP + 10 + 16 * i
            self.add(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
            self.text(x + 15, y, name, cls="legend")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def palette(names: Sequence[str], kinds: Mapping[str, str] | None = None) -> dict[str, str]:
    """Colour per dataset; real-world datasets get blues when kinds are given."""
    out, warm, cool = {}, 0, 0
    for i, name in enumerate(names):
        kind = (kinds or {}).get(name)
        if kind == "real_world":
            out[name] = COOL[cool % len(COOL)]
            cool += 1
        elif kind == "synthetic":
            out[name] = WARM[warm % len(WARM)]
            warm += 1
        else:
            out[name] = NEUTRAL[i % len(NEUTRAL)]
    return out


def _frame():
    return (MARGIN_LEFT, WIDTH - MARGIN_RIGHT, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)


def render_boxplots(
    feature: str, summaries: Mapping[str, BoxplotSummary], unit: str = "", log: bool = False, kinds=None
) -> str:
    """One box per dataset, left to right in mapping order. Whiskers follow
    the 1.5 IQR rule; a cross marks the mean."""
    if not summaries:
        raise RenderError("no summaries to render")
    names = list(summaries)
    x_lo, x_hi, y_lo, y_hi = _frame()
    values = [v for s in summaries.values() for v in (s.whisker_low, s.whisker_high, s.mean)]
    ya = Axis.fit(values, y_lo, y_hi, log=log)
    colors = palette(names, kinds)
    doc = _Doc(f"{feature} by dataset")
    doc.axes(None, ya, "", f"{feature} ({unit})" if unit else feature)
    slot = (x_hi - x_lo) / len(names)

    def y(v):
        return ya(v) if not log or v > 0 else y_lo

    for i, name in enumerate(names):
        s = summaries[name]
        cx = x_lo + slot * (i + 0.5)
        half = slot * 0.3
        c = colors[name]
        doc.add(
            f'<g class="box" data-dataset={quoteattr(name)} data-q1="{s.q1!r}" data-median="{s.median!r}" '
            f'data-q3="{s.q3!r}" data-whisker-low="{s.whisker_low!r}" data-whisker-high="{s.whisker_high!r}">'
        )
        doc.add(f'<line x1="{_num(cx)}" y1="{_num(y(s.whisker_low))}" x2="{_num(cx)}" y2="{_num(y(s.q1))}" stroke="{c}"/>')
        doc.add(f'<line x1="{_num(cx)}" y1="{_num(y(s.q3))}" x2="{_num(cx)}" y2="{_num(y(s.whisker_high))}" stroke="{c}"/>')
        for w in (s.whisker_low, s.whisker_high):
            doc.add(f'<line x1="{_num(cx - half / 2)}" y1="{_num(y(w))}" x2="{_num(cx + half / 2)}" y2="{_num(y(w))}" stroke="{c}"/>')
        top, bottom = y(s.q3), y(s.q1)
        doc.add(
            f'<rect x="{_num(cx - half)}" y="{_num(top)}" width="{_num(2 * half)}" '
            f'height="{_num(max(bottom - top, 0.5))}" fill="{c}" fill-opacity="0.35" stroke="{c}"/>'
        )
        doc.add(f'<line x1="{_num(cx - half)}" y1="{_num(y(s.median))}" x2="{_num(cx + half)}" y2="{_num(y(s.median))}" stroke="black" stroke-width="2"/>')
        my = y(s.mean)
        doc.add(f'<path d="M{_num(cx - 4)},{_num(my - 4)}L{_num(cx + 4)},{_num(my + 4)}M{_num(cx - 4)},{_num(my + 4)}L{_num(cx + 4)},{_num(my - 4)}" stroke="red"/>')
        doc.add("</g>")
        doc.text(cx, y_lo + 16, name, "middle", "dataset")
    return doc.render()


def ecdf_step_points(dist: EmpiricalDistribution) -> list[tuple[float, float]]:
    """Corner points (value, cumulative mass) of the ECDF staircase."""
    return list(zip(dist.support.tolist(), dist.cumulative.tolist()))


def render_ecdfs(feature: str, dists: Mapping[str, EmpiricalDistribution], log_x: bool = False, kinds=None) -> str:
    """Overlaid ECDF staircases. With ``log_x`` non-positive support points
    are not drawn (the curve starts at the first positive value)."""
    if not dists:
        raise RenderError("no distributions to render")
    x_lo, x_hi, y_lo, y_hi = _frame()
    all_x = np.concatenate([d.support for d in dists.values()])
    xa = Axis.fit(all_x, x_lo, x_hi, log=log_x)
    ya = Axis(0.0, 1.0, y_lo, y_hi)
    colors = palette(list(dists), kinds)
    doc = _Doc(f"ECDF of {feature}")
    doc.axes(xa, ya, feature + (" (log scale)" if log_x else ""), "cumulative fraction")
    for name, dist in dists.items():
        pts = ecdf_step_points(dist)
        base = 0.0
        if log_x:
            skipped = int(np.sum(dist.support <= 0))
            base = float(dist.cumulative[skipped - 1]) if skipped else 0.0
            pts = pts[skipped:]
        if not pts:
            continue
        px = [xa(x) for x, _ in pts]
        py = [ya(c) for _, c in pts]
        start_level = ya(base)
        d = [f"M{_num(px[0])},{_num(start_level)}", f"L{_num(px[0])},{_num(py[0])}"]
        for i in range(1, len(pts)):
            d.append(f"L{_num(px[i])},{_num(py[i - 1])}")
            d.append(f"L{_num(px[i])},{_num(py[i])}")
        d.append(f"L{_num(x_hi)},{_num(py[-1])}")
        doc.add(
            f'<path class="ecdf" data-dataset={quoteattr(name)} fill="none" stroke="{colors[name]}" '
            f'stroke-width="1.5" d="{"".join(d)}"/>'
        )
    doc.legend([(n, colors[n]) for n in dists])
    return doc.render()


def _heat_color(t: float) -> str:
    # light yellow (0) to dark purple (1)
    a = np.array([255, 250, 205])
    b = np.array([63, 0, 125])
    r, g, bl = (a + (b - a) * min(max(t, 0.0), 1.0)).round().astype(int)
    return f"#{r:02x}{g:02x}{bl:02x}"


def render_heatmap(matrix: DistanceMatrix, title: str | None = None) -> str:
    """Colour-coded matrix with each cell annotated to two decimals."""
    k = len(matrix.labels)
    if k == 0:
        raise RenderError("empty matrix")
    cell = min(60, 360 // k)
    left, top = 120, 50
    width = left + cell * k + 40
    height = top + cell * k + 100
    doc = _Doc(title or f"Wasserstein distance: {matrix.feature}", width, height)
    vmax = float(matrix.entries.max()) or 1.0
    for i, row_label in enumerate(matrix.labels):
        doc.text(left - 6, top + cell * (i + 0.5) + 4, row_label, "end", "row-label")
        for j in range(k):
            v = float(matrix.entries[i, j])
            x, y = left + cell * j, top + cell * i
            t = v / vmax
            doc.add(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_heat_color(t)}" stroke="white"/>')
            ink = "white" if t > 0.55 else "black"
            doc.text(x + cell / 2, y + cell / 2 + 4, fmt_value(v), "middle", "value", f' fill="{ink}"')
    for j, col_label in enumerate(matrix.labels):
        cx, cy = left + cell * (j + 0.5), top + cell * k + 12
        doc.add(
            f'<text class="col-label" x="{_num(cx)}" y="{_num(cy)}" text-anchor="end" '
            f'transform="rotate(-45 {_num(cx)} {_num(cy)})">{escape(col_label)}</text>'
        )
    return doc.render()


def _scatter_doc(title, xs, ys, names, xlabel, ylabel, colors, include_zero):
    x_lo, x_hi, y_lo, y_hi = _frame()
    xa = Axis.fit(xs, x_lo, x_hi, include_zero=include_zero)
    ya = Axis.fit(ys, y_lo, y_hi, include_zero=include_zero)
    doc = _Doc(title)
    doc.axes(xa, ya, xlabel, ylabel)
    return doc, xa, ya


def render_scatter(scatter: ScatterCoordinates, kinds=None) -> str:
    """Datasets placed by their distances to two references. Axes start at
    zero, so the references sit on the axes."""
    if not scatter.points:
        raise RenderError("no scatter points")
    names = list(scatter.points)
    xs = [p[0] for p in scatter.points.values()]
    ys = [p[1] for p in scatter.points.values()]
    colors = palette(names, kinds)
    doc, xa, ya = _scatter_doc(
        "Averaged distance to reference datasets", xs, ys, names,
        f"distance to {scatter.ref1}", f"distance to {scatter.ref2}", colors, True,
    )
    for name, (x, y) in scatter.points.items():
        px, py = xa(x), ya(y)
        doc.add(
            f'<circle class="point" data-dataset={quoteattr(name)} data-x="{x!r}" data-y="{y!r}" '
            f'cx="{_num(px)}" cy="{_num(py)}" r="6" fill="{colors[name]}"/>'
        )
        doc.text(px + 8, py - 8, f"{name} ({fmt_value(x)}, {fmt_value(y)})", cls="point-label")
    return doc.render()


def render_embedding(result: EmbeddingResult, kinds=None) -> str:
    if len(result.labels) == 0:
        raise RenderError("empty embedding")
    names = list(dict.fromkeys(result.labels))
    colors = palette(names, kinds)
    xs, ys = result.points[:, 0], result.points[:, 1]
    doc, xa, ya = _scatter_doc(
        f"{result.method.upper()} embedding", xs, ys, names, "first embedded component",
        "second embedded component", colors, False,
    )
    for name in names:
        mask = np.array([l == name for l in result.labels])
        doc.add(f'<g class="series" data-dataset={quoteattr(name)} fill="{colors[name]}" fill-opacity="0.6">')
        for x, y in zip(xs[mask].tolist(), ys[mask].tolist()):
            doc.add(f'<circle cx="{_num(xa(x))}" cy="{_num(ya(y))}" r="2"/>')
        doc.add("</g>")
    doc.legend([(n, colors[n]) for n in names])
    return doc.render()
