"""Deterministic CSV/JSON/SVG writers.

Every float is printed with 12 significant digits through :func:`fmt`, so
identical inputs give byte-identical files regardless of platform locale.
"""
import csv
import io
import json
import math
import platform

import numpy as np
import scipy

from . import __version__

SIG_DIGITS = 12

# colorblind-friendly palette, cycled for labels beyond its length
PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377",
           "#bbbbbb", "#ee8866", "#44bb99", "#99ddff")
MARKER_COLORS = {"Critical": "#000000", "Failed": "#ffffff"}


def fmt(x):
    """Float to text with 12 significant digits; ints and strings unchanged."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            return "0"
        return format(x, f".{SIG_DIGITS}g")
    return str(x)


def rounded(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return 0.0 if x == 0 else float(format(x, f".{SIG_DIGITS}g"))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": rounded(obj.real), "im": rounded(obj.imag)}
    return obj


def dumps(obj):
    return json.dumps(rounded(obj), sort_keys=True, indent=2) + "\n"


def run_metadata(spec=None, **options):
    meta = {
        "epclass": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "options": options,
    }
    if spec is not None:
        meta["model"] = spec.name
        meta["model_hash"] = spec.digest()
    return meta


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def color_for(label, labels):
    """Stable color: markers fixed, other labels by sorted position."""
    if label in MARKER_COLORS:
        return MARKER_COLORS[label]
    plain = sorted(x for x in labels if x not in MARKER_COLORS)
    return PALETTE[plain.index(label) % len(PALETTE)]


def svg_document(width, height, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f"<!-- epclass {__version__} -->\n"
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n')
    return head + "".join(body) + "</svg>\n"


def svg_text(x, y, text, size=12, anchor="start"):
    safe = (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
    return (f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}">{safe}</text>\n')


def scatter_svg(series, xlabel, ylabel, title="", width=480, height=360):
    """Minimal scatter plot. ``series`` is a list of (xs, ys, color, radius)."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 45
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    body = [f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" '
            f'stroke="#000000"/>\n']
    for sx, sy, color, rad in series:
        for x, y in zip(sx, sy):
            body.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="{rad}" fill="{color}"/>\n')
    body.append(svg_text(pad_l + pw / 2, height - 10, xlabel, anchor="middle"))
    body.append(svg_text(14, pad_t + ph / 2, ylabel, anchor="middle"))
    body.append(svg_text(pad_l, height - pad_b + 16, fmt(round(x0, 6))))
    body.append(svg_text(pad_l + pw, height - pad_b + 16, fmt(round(x1, 6)), anchor="end"))
    body.append(svg_text(pad_l - 4, pad_t + ph, fmt(round(y0, 6)), anchor="end"))
    body.append(svg_text(pad_l - 4, pad_t + 10, fmt(round(y1, 6)), anchor="end"))
    if title:
        body.append(svg_text(width / 2, 18, title, size=14, anchor="middle"))
    return svg_document(width, height, body)
