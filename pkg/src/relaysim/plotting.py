"""SVG line charts drawn straight from the result CSVs.

Plots never recompute statistics: they read the tables the harness wrote.
"""

import csv
import math
from collections import OrderedDict
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 50


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / n
    return [lo + i * step for i in range(n + 1)]


def line_chart(series, title, xlabel, ylabel, logy=False):
    """Render ``{label: [(x, y), ...]}`` as an SVG document string.

    Each series becomes exactly one polyline. With ``logy`` non-positive
    values are dropped from the line.
    """
    def ty(v):
        return math.log10(v) if logy else v

    pts = {k: [(x, y) for x, y in v if not logy or y > 0] for k, v in series.items()}
    xs = [x for v in pts.values() for x, _ in v] or [0.0, 1.0]
    ys = [ty(y) for v in pts.values() for _, y in v] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + ph - (ty(y) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        x = LEFT + (t - x0) / (x1 - x0) * pw
        out.append(f'<text x="{x:.1f}" y="{TOP + ph + 16}" text-anchor="middle" font-size="11">{t:g}</text>')
    for t in _ticks(y0, y1):
        y = TOP + ph - (t - y0) / (y1 - y0) * ph
        lab = f"{10 ** t:.2g}" if logy else f"{t:.3g}"
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{lab}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, v) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in sorted(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{coords}"/>')
        ly = TOP + 14 + 18 * i
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly - 4}" x2="{W - RIGHT + 32}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 38}" y="{ly}" font-size="11">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ser_chart(csv_path):
    """SER against SNR, one line per (detector, L); the L suffix is dropped when only one L is present."""
    rows = _read(csv_path)
    Ls = sorted({int(r["L"]) for r in rows})
    series = OrderedDict()
    for r in rows:
        key = r["detector"] if len(Ls) == 1 else f'{r["detector"]} L={r["L"]}'
        series.setdefault(key, []).append((float(r["snr_db"]), float(r["ser"])))
    return line_chart(series, "Symbol error rate", "SNR (dB)", "SER", logy=True)


def acf_chart(csv_path, weighting="sd", metric="mahalanobis"):
    """ACF against lag, one line per tolerance."""
    series = OrderedDict()
    for r in _read(csv_path):
        if r["weighting"] == weighting and r["metric"] == metric:
            series.setdefault(f'eps={float(r["epsilon"]):g}', []).append((int(r["lag"]), float(r["acf"])))
    return line_chart(series, f"ACF of Re(g1), {weighting.upper()} + {metric}", "lag", "ACF")


def edf_error_chart(csv_path):
    """Mean max-EDF error against tolerance, one line per weighting/metric pair."""
    series = OrderedDict()
    for r in _read(csv_path):
        series.setdefault(f'{r["weighting"].upper()}+{r["metric"]}', []).append(
            (float(r["epsilon"]), float(r["mean_max_edf_error"])))
    return line_chart(series, "Max EDF error vs tolerance", "epsilon", "mean max EDF error")
