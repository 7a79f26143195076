"""Minimal SVG line plots and scatter panels (fixed viewBox, no timestamps)."""

import math

import numpy as np

WIDTH, HEIGHT, PAD = 400, 300, 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _fmt(v):
    return f"{v:.2f}"


def _bounds(values):
    vals = np.asarray([v for v in values if math.isfinite(v)], dtype=np.float64)
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{title}</text>',
        f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" '
        'fill="none" stroke="#888"/>',
    ]


def _axis_labels(xlo, xhi, ylo, yhi, xlabel="", ylabel=""):
    return [
        f'<text x="{PAD}" y="{HEIGHT - PAD + 14}" font-family="sans-serif" font-size="10">{xlo:.3g}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 14}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{xhi:.3g}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ylo:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 8}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{yhi:.3g}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11">{xlabel}</text>',
        f'<text x="12" y="{HEIGHT / 2}" transform="rotate(-90 12 {HEIGHT / 2})" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{ylabel}</text>',
    ]


def _mapper(xlo, xhi, ylo, yhi):
    sx = (WIDTH - 2 * PAD) / (xhi - xlo)
    sy = (HEIGHT - 2 * PAD) / (yhi - ylo)
    return lambda x, y: (PAD + (x - xlo) * sx, HEIGHT - PAD - (y - ylo) * sy)


def line_plot(series, title="", xlabel="iteration", ylabel="", logy=False):
    """``series`` maps a legend name to ``(xs, ys)``. Non-finite points break the line."""
    prepared = {}
    for name, (xs, ys) in series.items():
        ys = np.asarray(ys, dtype=np.float64)
        if logy:
            with np.errstate(divide="ignore", invalid="ignore"):
                ys = np.where(ys > 0, np.log10(ys), np.nan)
        prepared[name] = (np.asarray(xs, dtype=np.float64), ys)
    xlo, xhi = _bounds(np.concatenate([p[0] for p in prepared.values()]))
    ylo, yhi = _bounds(np.concatenate([p[1] for p in prepared.values()]))
    to = _mapper(xlo, xhi, ylo, yhi)
    out = _header(title) + _axis_labels(xlo, xhi, ylo, yhi, xlabel, ("log10 " if logy else "") + ylabel)
    for k, (name, (xs, ys)) in enumerate(prepared.items()):
        color = PALETTE[k % len(PALETTE)]
        parts, pen_down = [], False
        for x, y in zip(xs, ys):
            if not (math.isfinite(x) and math.isfinite(y)):
                pen_down = False
                continue
            px, py = to(x, y)
            parts.append(f"{'L' if pen_down else 'M'}{_fmt(px)} {_fmt(py)}")
            pen_down = True
        out.append(f'<path d="{" ".join(parts)}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        out.append(f'<text x="{WIDTH - PAD - 4}" y="{PAD + 14 + 12 * k}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_plot(groups, title=""):
    """``groups`` maps a name to ``(points, style)`` with style in {"circle", "square", "cross"}."""
    finite = [np.asarray(p)[np.all(np.isfinite(p), axis=1)] for p, _ in groups.values()]
    allpts = np.vstack([f for f in finite if f.size]) if any(f.size for f in finite) else np.zeros((1, 2))
    xlo, xhi = _bounds(allpts[:, 0])
    ylo, yhi = _bounds(allpts[:, 1])
    # equal aspect so shapes are not distorted
    span = max(xhi - xlo, yhi - ylo) * 1.05
    cx, cy = (xlo + xhi) / 2, (ylo + yhi) / 2
    xlo, xhi, ylo, yhi = cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2
    to = _mapper(xlo, xhi, ylo, yhi)
    out = _header(title) + _axis_labels(xlo, xhi, ylo, yhi)
    for k, (name, (pts, style)) in enumerate(groups.items()):
        color = PALETTE[k % len(PALETTE)]
        for x, y in np.asarray(pts)[:, :2]:
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            px, py = to(x, y)
            if style == "square":
                out.append(f'<rect x="{_fmt(px - 2)}" y="{_fmt(py - 2)}" width="4" height="4" fill="{color}"/>')
            elif style == "cross":
                out.append(f'<path d="M{_fmt(px - 2.5)} {_fmt(py - 2.5)}L{_fmt(px + 2.5)} {_fmt(py + 2.5)}'
                           f'M{_fmt(px - 2.5)} {_fmt(py + 2.5)}L{_fmt(px + 2.5)} {_fmt(py - 2.5)}" '
                           f'stroke="{color}" stroke-width="1"/>')
            else:
                out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2" fill="{color}" fill-opacity="0.7"/>')
        out.append(f'<text x="{WIDTH - PAD - 4}" y="{PAD + 14 + 12 * k}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def path_plot(xy, title=""):
    """Trajectory in the plane (used for the saddle spiral)."""
    xy = np.asarray(xy, dtype=np.float64)
    return line_plot({"trajectory": (xy[:, 0], xy[:, 1])}, title, xlabel="x", ylabel="y")
