"""CSV, JSON and SVG writers with fixed formatting for reproducible output."""
from __future__ import annotations

import csv
import json
import math
import os
from xml.sax.saxutils import escape

__all__ = ["fmt", "Table", "write_svg"]


def fmt(v) -> str:
    """17 significant digits for floats; everything else through ``str``."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if hasattr(v, "item"):  # numpy scalar
        return fmt(v.item())
    return str(v)


def _jsonable(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    return v


class Table:
    """Rows with a header and a trailing ``# key=value`` metadata block."""

    def __init__(self, columns, meta=None):
        self.columns = list(columns)
        self.rows = []
        self.meta = dict(meta or {})

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(list(values))

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def write(self, path, json_mirror: bool = False):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([fmt(v) for v in r])
            for k in sorted(self.meta):
                fh.write(f"# {k}={fmt(self.meta[k])}\n")
        if json_mirror:
            base = os.path.splitext(path)[0]
            doc = {"columns": self.columns,
                   "rows": [[_jsonable(v) for v in r] for r in self.rows],
                   "meta": {k: _jsonable(self.meta[k]) for k in sorted(self.meta)}}
            with open(base + ".json", "w", encoding="utf-8", newline="\n") as fh:
                json.dump(doc, fh, indent=1, sort_keys=False)
                fh.write("\n")
        return path

    def display(self) -> str:
        """Plain text view with 6 significant digits."""
        def cell(v):
            return format(v, ".6g") if isinstance(v, float) else fmt(v)
        body = [self.columns] + [[cell(v) for v in r] for r in self.rows]
        widths = [max(len(r[i]) for r in body) for i in range(len(self.columns))]
        return "\n".join("  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in body)


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def write_svg(path, series, xlabel="", ylabel="", title="", logy=False, width=640, height=400):
    """Line chart: ``series`` is a list of ``(label, xs, ys)``. Written by hand."""
    pts = []
    for label, xs, ys in series:
        keep = [(float(x), float(y)) for x, y in zip(xs, ys)
                if math.isfinite(float(y)) and (not logy or float(y) > 0)]
        if logy:
            keep = [(x, math.log10(y)) for x, y in keep]
        pts.append((label, keep))
    allp = [p for _, s in pts for p in s]
    if not allp:
        allp = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        ylab = f"1e{yv:.3g}" if logy else f"{yv:.4g}"
        out.append(f'<text x="{X(xv):.2f}" y="{mt + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{ml - 6}" y="{Y(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{escape(ylab)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" font-size="13" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="18" font-size="14" '
                   f'text-anchor="middle">{escape(title)}</text>')
    for i, (label, s) in enumerate(pts):
        color = _COLORS[i % len(_COLORS)]
        if s:
            coords = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in s)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{mt + 14 * (i + 1)}" font-size="11" fill="{color}" '
                   f'text-anchor="end">{escape(str(label))}</text>')
    out.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path
