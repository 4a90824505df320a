"""CSV, text-table and SVG emission for command outputs."""
from __future__ import annotations

import math

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, complex):
        return repr(x)
    return str(x)


def write_csv(path, header, rows) -> None:
    """Comma separated, ``.`` decimals, LF line endings, header row."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(x) for x in r) + "\n")


def text_table(header, rows) -> str:
    cells = [list(header)] + [[fmt(x) if not isinstance(x, float) else f"{x:.6g}" for x in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = []
    for k, r in enumerate(cells):
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def loglog_svg(n, log_env, ref_slope: float, window, title: str, width: int = 640,
               height: int = 420) -> str:
    """
    Log-log plot of ``exp(log_env)`` against ``n`` with a reference line of
    slope ``ref_slope`` anchored at the start of the regression window.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(log_env, dtype=float) / math.log(10)
    ok = (n >= 1) & np.isfinite(y)
    x, y = np.log10(n[ok]), y[ok]
    if len(x) < 2:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
                f'<text x="20" y="40">{title}: no data</text></svg>\n')
    ml, mr, mt, mb = 70, 20, 40, 50
    x0, x1 = math.floor(x.min()), math.ceil(x.max())
    y0, y1 = math.floor(y.min()), math.ceil(y.max())
    x1 = max(x1, x0 + 1)
    y1 = max(y1, y0 + 1)

    def px(a):
        return ml + (a - x0) / (x1 - x0) * (width - ml - mr)

    def py(b):
        return height - mb - (b - y0) / (y1 - y0) * (height - mt - mb)

    def poly(xs, ys, color, dash=""):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{pts}"/>'

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect x="{ml}" y="{mt}" width="{width - ml - mr}" height="{height - mt - mb}" '
             f'fill="none" stroke="black"/>',
             f'<text x="{width / 2:.0f}" y="22" text-anchor="middle">{title}</text>']
    for d in range(x0, x1 + 1):
        parts.append(f'<line x1="{px(d):.2f}" y1="{height - mb}" x2="{px(d):.2f}" y2="{height - mb + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(d):.2f}" y="{height - mb + 18}" text-anchor="middle">1e{d}</text>')
    step = max(1, (y1 - y0) // 8)
    for d in range(y0, y1 + 1, step):
        parts.append(f'<line x1="{ml - 5}" y1="{py(d):.2f}" x2="{ml}" y2="{py(d):.2f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{py(d) + 4:.2f}" text-anchor="end">1e{d}</text>')
    parts.append(f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle">n</text>')
    # thin the envelope to at most ~800 vertices
    stride = max(1, len(x) // 800)
    parts.append(poly(x[::stride], y[::stride], "#1f4e9c"))
    a = math.log10(max(window[0], 1))
    b = math.log10(max(window[1], 1))
    ya = float(np.interp(a, x, y))
    parts.append(poly([a, b], [ya, ya + ref_slope * (b - a)], "#c0392b", "6,4"))
    parts.append(f'<text x="{width - mr - 6}" y="{mt + 16}" text-anchor="end" fill="#c0392b">'
                 f'reference slope {ref_slope:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
