"""CSV error tables, JSON run manifests and static SVG plots."""

from __future__ import annotations

import json
import math
import os
import platform
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .norms import ErrorReport, ErrorRow, convergence_rate, energy_h, l2_h, linf_h

__all__ = [
    "CSV_HEADER",
    "OutputError",
    "baseline_report",
    "format_csv",
    "manifest",
    "solution_svg",
    "write_csv",
    "write_manifest",
    "write_svg",
    "write_text",
]

CSV_HEADER = "example,eps,N,linf,rate_linf,l2,rate_l2,energy,rate_energy,dual_mode,N1"


class OutputError(OSError):
    """Destination could not be written; the message names the path."""


def _float(v: float) -> str:
    return format(float(v), ".17g")


def _rate(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.2f}"


def _row(r: ErrorRow) -> str:
    return ",".join([
        r.example,
        repr(float(r.eps)),
        str(int(r.n)),
        _float(r.linf), _rate(r.rate_linf),
        _float(r.l2), _rate(r.rate_l2),
        _float(r.energy), _rate(r.rate_energy),
        r.dual_mode,
        "" if r.n1 is None else str(int(r.n1)),
    ])


def format_csv(reports: Sequence[ErrorReport]) -> str:
    """CSV text for one or more reports, rows ordered by (example, mode, -eps, N)."""
    if isinstance(reports, ErrorReport):
        reports = [reports]
    rows = [r for rep in reports for r in rep.rows]
    if not rows:
        raise ValueError("no rows to write")
    rows.sort(key=lambda r: (r.example, r.dual_mode, -r.eps, r.n))
    return "\n".join([CSV_HEADER] + [_row(r) for r in rows]) + "\n"


def write_text(path: str, text: str) -> str:
    """Write ``text`` to ``path``, creating parent directories."""
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_csv(path: str, reports) -> str:
    return write_text(path, format_csv(reports))


def baseline_report(result) -> ErrorReport:
    """Error rows for the upwind/Shishkin runs of a benchmark result."""
    rows = []
    spec = result.spec
    for eps in spec.eps_list:
        prev = None
        for n in spec.n_list:
            sol = result.baselines.get((eps, n))
            if sol is None:
                continue
            ref = result.references.get(eps)
            if ref is None:
                continue
            if isinstance(ref, str):
                exact = spec.problem(eps).exact
                target = exact(sol.nodes)
            else:
                target = ref.interpolate(sol.nodes)
            err = sol.values - target
            part = sol.partition
            e = (linf_h(err, part), l2_h(err, part), energy_h(err, part, eps))
            rates = (None, None, None)
            if prev is not None:
                rates = tuple(convergence_rate(a, b, prev[1], part.h_max) for a, b in zip(prev[0], e))
            prev = (e, part.h_max)
            rows.append(ErrorRow(spec.identifier, eps, n, *e, *rates, sol.method, None))
    return ErrorReport(tuple(rows))


# ---------------------------------------------------------------------------
# manifest


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "tpgfem": __version__}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def manifest(results: Sequence, outputs: Sequence[str] = (), command: Optional[str] = None) -> dict:
    """Run manifest: configuration, versions, failures and timings.

    Everything except the ``timings`` block is a function of the
    configuration alone.
    """
    runs = []
    timings = {}
    for res in results:
        key = f"{res.spec.identifier}:{res.options.get('mode')}"
        runs.append({
            "example": res.spec.describe(),
            "options": _plain(res.options),
            "references": {repr(float(e)): ("closed-form" if isinstance(r, str) else f"pgfem-exact N={r.n}")
                           for e, r in res.references.items()},
            "cells": len(res.solutions),
            "errors": [{"eps": float(e), "N": int(n), "stage": s, "message": m}
                       for e, n, s, m in res.errors],
            "notes": list(res.notes),
        })
        timings[key] = _plain(res.timings)
    return {
        "command": command,
        "runs": runs,
        "outputs": [os.path.basename(o) for o in outputs],
        "versions": _versions(),
        "timings": timings,
    }


def write_manifest(path: str, data: dict) -> str:
    return write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# SVG

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_PANEL_W, _PANEL_H = 420.0, 300.0
_MARGIN = dict(left=62.0, right=16.0, top=30.0, bottom=42.0)


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _tick_text(v: float) -> str:
    return format(v, ".6g")


def _panel(x0, y0, title, series, xlim, show_legend):
    """SVG fragment for one panel with one polyline per series."""
    ml, mr, mt, mb = (_MARGIN[k] for k in ("left", "right", "top", "bottom"))
    w = _PANEL_W - ml - mr
    h = _PANEL_H - mt - mb
    lo, hi = xlim
    ys = []
    clipped = []
    for label, xs, vs in series:
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        sel = (xs >= lo) & (xs <= hi)
        # keep one point either side so lines reach the frame
        idx = np.flatnonzero(sel)
        if idx.size:
            a, b = max(idx[0] - 1, 0), min(idx[-1] + 1, xs.size - 1)
            xs, vs = xs[a:b + 1], vs[a:b + 1]
        else:
            xs, vs = xs[:0], vs[:0]
        clipped.append((label, xs, vs))
        inside = (xs >= lo) & (xs <= hi)
        ys.extend(vs[inside].tolist())
    ymin, ymax = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if ymax - ymin < 1e-12 * max(1.0, abs(ymax)):
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sx(v):
        return x0 + ml + (np.asarray(v) - lo) / (hi - lo) * w

    def sy(v):
        return y0 + mt + (ymax - np.asarray(v)) / (ymax - ymin) * h

    clip_id = f"clip{int(x0)}_{int(y0)}"
    out = [f'<g class="panel">',
           f'<clipPath id="{clip_id}"><rect x="{x0 + ml:.2f}" y="{y0 + mt:.2f}" '
           f'width="{w:.2f}" height="{h:.2f}"/></clipPath>',
           f'<rect x="{x0 + ml:.2f}" y="{y0 + mt:.2f}" width="{w:.2f}" height="{h:.2f}" '
           'fill="none" stroke="#000" stroke-width="1"/>',
           f'<text x="{x0 + ml + w / 2:.2f}" y="{y0 + mt - 10:.2f}" text-anchor="middle" '
           f'font-size="13">{escape(title)}</text>']
    for t in _ticks(lo, hi):
        px = float(sx(t))
        out.append(f'<line x1="{px:.2f}" y1="{y0 + mt + h:.2f}" x2="{px:.2f}" '
                   f'y2="{y0 + mt + h + 5:.2f}" stroke="#000"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + mt + h + 18:.2f}" text-anchor="middle" '
                   f'font-size="11">{_tick_text(t)}</text>')
    for t in _ticks(ymin, ymax):
        py = float(sy(t))
        out.append(f'<line x1="{x0 + ml - 5:.2f}" y1="{py:.2f}" x2="{x0 + ml:.2f}" '
                   f'y2="{py:.2f}" stroke="#000"/>')
        out.append(f'<text x="{x0 + ml - 8:.2f}" y="{py + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{_tick_text(t)}</text>')
    out.append(f'<text x="{x0 + ml + w / 2:.2f}" y="{y0 + _PANEL_H - 6:.2f}" '
               'text-anchor="middle" font-size="12">x</text>')
    for k, (label, xs, vs) in enumerate(clipped):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(xs), sy(vs)))
        dash = ' stroke-dasharray="6,3"' if k % 2 else ""
        out.append(f'<polyline class="series" data-label="{escape(label)}" points="{pts}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                   f'clip-path="url(#{clip_id})"/>')
        if show_legend:
            ly = y0 + mt + 14 + 16 * k
            lx = x0 + ml + 10
            out.append(f'<line x1="{lx:.2f}" y1="{ly - 4:.2f}" x2="{lx + 22:.2f}" y2="{ly - 4:.2f}" '
                       f'stroke="{color}" stroke-width="1.5"{dash}/>')
            out.append(f'<text x="{lx + 28:.2f}" y="{ly:.2f}" font-size="11">{escape(label)}</text>')
    out.append("</g>")
    return out


def solution_svg(series: Sequence[tuple], domain: tuple, magnify: Sequence[tuple] = (),
                 title: str = "") -> str:
    """SVG 1.1 document: a full-interval panel plus one panel per window.

    ``series`` holds ``(label, x, u)`` triples; ``magnify`` holds
    ``(center, half_width)`` pairs, each drawn as a horizontally magnified
    panel clipped to the domain.
    """
    if not series:
        raise ValueError("nothing to plot")
    panels = [(f"{title}" if title else "solution", tuple(float(v) for v in domain))]
    for c, hw in magnify:
        lo = max(float(domain[0]), c - hw)
        hi = min(float(domain[1]), c + hw)
        if hi > lo:
            panels.append((f"magnification near x = {_tick_text(c)}", (lo, hi)))
    cols = min(len(panels), 2)
    rows = math.ceil(len(panels) / cols)
    width, height = cols * _PANEL_W, rows * _PANEL_H
    body = []
    for k, (name, xlim) in enumerate(panels):
        x0 = (k % cols) * _PANEL_W
        y0 = (k // cols) * _PANEL_H
        body.extend(_panel(x0, y0, name, series, xlim, show_legend=(k == 0)))
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" '
            f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>'] + body + ["</svg>"]) + "\n"


def write_svg(path: str, series, domain, magnify=(), title: str = "") -> str:
    return write_text(path, solution_svg(series, domain, magnify, title))
