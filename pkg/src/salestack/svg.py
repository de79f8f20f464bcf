"""Minimal standalone SVG line and bar charts (fixed 800x600 canvas)."""
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=50, bottom=70)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def _frame(title, xlabel, ylabel):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="28" text-anchor="middle" font-size="17">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="20" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 20 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def draw(self, xticks=True):
        out = [f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
               f'height="{self.bottom - self.top}" fill="none" stroke="black"/>']
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{self.left - 5}" y1="{y:.1f}" x2="{self.right}" y2="{y:.1f}" '
                       f'stroke="#ddd"/>')
            out.append(f'<text x="{self.left - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
        if xticks:
            for t in _ticks(self.x0, self.x1):
                x = self.px(t)
                out.append(f'<line x1="{x:.1f}" y1="{self.bottom}" x2="{x:.1f}" '
                           f'y2="{self.bottom + 5}" stroke="black"/>')
                out.append(f'<text x="{x:.1f}" y="{self.bottom + 20}" '
                           f'text-anchor="middle">{_fmt(t)}</text>')
        return out


def line_chart(series, title="", xlabel="", ylabel="", xlim=None, ylim=None, baseline=None):
    """Render ``series`` (list of ``(label, xs, ys)``) as an SVG document string.

    ``baseline`` is an optional ``(xs, ys)`` pair drawn dashed in grey.
    """
    xs_all = [float(v) for _, xs, _ in series for v in xs]
    ys_all = [float(v) for _, _, ys in series for v in ys]
    if baseline is not None:
        xs_all += [float(v) for v in baseline[0]]
        ys_all += [float(v) for v in baseline[1]]
    xlim = xlim or (min(xs_all, default=0.0), max(xs_all, default=1.0))
    ylim = ylim or (min(ys_all, default=0.0), max(ys_all, default=1.0))
    ax = _Axes(xlim, ylim)
    out = _frame(title, xlabel, ylabel) + ax.draw()
    if baseline is not None:
        pts = " ".join(f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(*baseline))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#888" stroke-dasharray="6,4"/>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{ax.px(float(x)):.2f},{ax.py(float(y)):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = ax.top + 20 + 18 * i
        out.append(f'<line x1="{ax.right - 150}" y1="{ly}" x2="{ax.right - 125}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ax.right - 120}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(labels, values, title="", ylabel=""):
    """Vertical bars in the given order with rotated category labels."""
    values = [float(v) for v in values]
    ax = _Axes((0.0, float(max(len(values), 1))), (0.0, max(values, default=1.0) or 1.0))
    out = _frame(title, "", ylabel) + ax.draw(xticks=False)
    width = (ax.right - ax.left) / max(len(values), 1)
    for i, (lab, v) in enumerate(zip(labels, values)):
        x = ax.left + i * width
        y = ax.py(v)
        out.append(f'<rect x="{x + 0.1 * width:.2f}" y="{y:.2f}" width="{0.8 * width:.2f}" '
                   f'height="{ax.bottom - y:.2f}" fill="{PALETTE[0]}"/>')
        cx = x + 0.5 * width
        out.append(f'<text x="{cx:.2f}" y="{ax.bottom + 12}" font-size="10" text-anchor="end" '
                   f'transform="rotate(-60 {cx:.2f} {ax.bottom + 12})">{escape(str(lab))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
