"""Minimal static SVG charts: scatter, line and bar.

Output depends only on the data, so reruns give identical files.
"""

import math
from xml.sax.saxutils import escape

W, H = 480, 360
PAD = 48
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(v):
    return f"{v:.2f}"


def _range(vals):
    vals = [v for v in vals if math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-300:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


class _Axes:
    def __init__(self, xs, ys, title, xlabel, ylabel, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = _range([self._tx(v) for v in xs])
        self.y0, self.y1 = _range([self._ty(v) for v in ys])
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
            'fill="none" stroke="black"/>',
        ]
        for v, anchor in ((self.x0, "start"), (self.x1, "end")):
            lab = 10 ** v if logx else v
            self.parts.append(f'<text x="{_fmt(self.px(v))}" y="{H - PAD + 14}" text-anchor="{anchor}" '
                              f'font-size="10">{lab:.3g}</text>')
        for v in (self.y0, self.y1):
            lab = 10 ** v if logy else v
            self.parts.append(f'<text x="{PAD - 4}" y="{_fmt(self.py(v))}" text-anchor="end" '
                              f'font-size="10">{lab:.3g}</text>')

    def _tx(self, v):
        return math.log10(v) if self.logx and v > 0 else (v if not self.logx else float("nan"))

    def _ty(self, v):
        return math.log10(v) if self.logy and v > 0 else (v if not self.logy else float("nan"))

    def px(self, v):
        return PAD + (v - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, v):
        return H - PAD - (v - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def point(self, x, y):
        return self.px(self._tx(x)), self.py(self._ty(y))

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def scatter(xs, ys, colors=None, title="", xlabel="x", ylabel="y", radius=1.5, overlay=()):
    """Scatter plot; ``colors`` are palette indices, ``overlay`` extra ``(x, y)`` markers."""
    ax = _Axes(list(xs) + [p[0] for p in overlay], list(ys) + [p[1] for p in overlay],
               title, xlabel, ylabel)
    for i, (x, y) in enumerate(zip(xs, ys)):
        c = PALETTE[(colors[i] if colors is not None else 0) % len(PALETTE)]
        px, py = ax.point(x, y)
        ax.parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{radius}" fill="{c}"/>')
    for x, y in overlay:
        px, py = ax.point(x, y)
        ax.parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="4" fill="none" stroke="black"/>')
    return ax.render()


def heat(xs, ys, values, title="", xlabel="x", ylabel="y"):
    """Scatter coloured on a blue-red ramp by ``values`` (nan drawn grey)."""
    ax = _Axes(xs, ys, title, xlabel, ylabel)
    lo, hi = _range(values)
    for x, y, v in zip(xs, ys, values):
        if math.isfinite(v):
            t = (v - lo) / (hi - lo)
            c = f"rgb({int(255 * t)},0,{int(255 * (1 - t))})"
        else:
            c = "#bbbbbb"
        px, py = ax.point(x, y)
        ax.parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{c}"/>')
    return ax.render()


def line(xs, ys, title="", xlabel="x", ylabel="y", logx=False, logy=False):
    ax = _Axes(xs, ys, title, xlabel, ylabel, logx, logy)
    pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (ax.point(x, y) for x, y in zip(xs, ys)))
    ax.parts.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="1.5"/>')
    for x, y in zip(xs, ys):
        px, py = ax.point(x, y)
        ax.parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{PALETTE[0]}"/>')
    return ax.render()


def bar(labels, values, title="", xlabel="", ylabel=""):
    n = max(1, len(values))
    ax = _Axes([0, n], [0.0] + list(values), title, xlabel, ylabel)
    width = (W - 2 * PAD) / n
    base = ax.py(max(ax.y0, 0.0))
    for i, (lab, v) in enumerate(zip(labels, values)):
        top = ax.py(v)
        x = PAD + i * width
        ax.parts.append(f'<rect x="{_fmt(x + 0.1 * width)}" y="{_fmt(min(top, base))}" '
                        f'width="{_fmt(0.8 * width)}" height="{_fmt(abs(base - top))}" fill="{PALETTE[0]}"/>')
        if n <= 30:
            ax.parts.append(f'<text x="{_fmt(x + width / 2)}" y="{H - PAD + 26}" text-anchor="middle" '
                            f'font-size="8">{escape(str(lab))}</text>')
    return ax.render()
