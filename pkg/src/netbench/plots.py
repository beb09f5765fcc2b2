"""Static SVG figures: log-log scatter, speedup bars and box plots.

The SVG is assembled by hand so the output is deterministic and has no
plotting dependency. Every mark carries a ``class`` (``mark``, ``bar``,
``median``, ``outlier``, ``gm``, ...) so figures can be inspected
programmatically. Colours are blue and orange, and series also differ in
shape so the figures stay readable in grey-scale.

Box-plot quartiles use linear interpolation between order statistics
(``numpy.quantile`` default, "type 7"). Whiskers end at the most extreme
values within 1.5 IQR of the box, or at the box edge if no such value lies
beyond it; anything further out is drawn as an individual outlier mark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .collect import geometric_mean

__all__ = [
    "PlotSeries",
    "BoxStats",
    "scatter_svg",
    "speedup_bars_svg",
    "box_plot_svg",
    "box_stats",
    "relative_deviation",
    "log_axis_position",
    "figure_filename",
]

BLUE = "#1f77b4"
ORANGE = "#ff7f0e"
GREY = "#bbbbbb"
PALETTE = (BLUE, ORANGE, "#2ca02c", "#7f7f7f")
MARKS = ("circle", "cross", "square")

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 72, "right": 24, "top": 28, "bottom": 64}
MARK_SIZE = 4.0


@dataclass
class PlotSeries:
    """Points drawn with one mark shape.

    ``annotations`` maps point indices to a text label; those points are
    drawn as squares regardless of the series mark.
    """

    label: str
    points: list
    mark: str = "circle"
    annotations: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mark not in MARKS:
            raise ValueError(f"mark must be one of {MARKS}, got {self.mark!r}")
        self.points = [(float(x), float(y)) for x, y in self.points]


def figure_filename(figure: str, experiment: str) -> str:
    return f"{figure}_{experiment}.svg"


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def log_axis_position(value: float, lo: float, hi: float, length: float) -> float:
    """Offset of ``value`` along an axis of ``length`` pixels spanning ``[lo, hi]`` in log10."""
    if value <= 0 or lo <= 0 or hi <= lo:
        raise ValueError("log axis needs positive values and lo < hi")
    return (math.log10(value) - math.log10(lo)) / (math.log10(hi) - math.log10(lo)) * length


class _Axis:
    def __init__(self, lo: float, hi: float, log: bool, start: float, end: float):
        if hi <= lo:
            hi = lo + (abs(lo) if lo else 1.0) if not log else lo * 10
        self.lo, self.hi, self.log, self.start, self.end = lo, hi, log, start, end

    def __call__(self, v: float) -> float:
        if self.log:
            frac = log_axis_position(v, self.lo, self.hi, 1.0)
        else:
            frac = (v - self.lo) / (self.hi - self.lo)
        return self.start + frac * (self.end - self.start)

    def ticks(self) -> list[float]:
        if self.log:
            a = math.floor(math.log10(self.lo) + 1e-9)
            b = math.ceil(math.log10(self.hi) - 1e-9)
            return [10.0 ** k for k in range(a, b + 1) if self.lo <= 10.0 ** k <= self.hi * (1 + 1e-9)]
        step = _nice_step((self.hi - self.lo) / 6)
        first = math.ceil(self.lo / step) * step
        return [float(t) for t in np.arange(first, self.hi + step * 1e-6, step)]


def _nice_step(raw: float) -> float:
    if raw <= 0:
        return 1.0
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 2.5, 5, 10):
        if m * mag >= raw:
            return m * mag
    return 10 * mag


def _decade_limits(values) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return 10.0 ** a, 10.0 ** b


def _tick_label(v: float, log: bool) -> str:
    if log:
        k = round(math.log10(v))
        return f"1e{k}" if abs(k) > 3 else _fmt(v)
    return f"{v:g}"


class _Canvas:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def add(self, tag: str, text: str | None = None, **attrs) -> None:
        attr = " ".join(f"{k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}"
                        for k, v in attrs.items())
        if text is None:
            self.parts.append(f"<{tag} {attr}/>")
        else:
            self.parts.append(f"<{tag} {attr}>{escape(text)}</{tag}>")

    def render(self, title: str | None = None) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="12">')
        body = [head]
        if title:
            body.append(f"<title>{escape(title)}</title>")
        body.append(f'<rect class="background" x="0" y="0" width="{self.width}" '
                    f'height="{self.height}" fill="white"/>')
        body.extend(self.parts)
        body.append("</svg>")
        return "\n".join(body) + "\n"


def _frame(c: _Canvas, xa: _Axis | None, ya: _Axis, xlabel: str, ylabel: str) -> None:
    left, right = MARGIN["left"], c.width - MARGIN["right"]
    top, bottom = MARGIN["top"], c.height - MARGIN["bottom"]
    for t in ya.ticks():
        y = ya(t)
        c.add("line", class_="grid", x1=left, x2=right, y1=_fmt(y), y2=_fmt(y),
              stroke=GREY, stroke_width=0.5)
        c.add("text", _tick_label(t, ya.log), x=left - 6, y=_fmt(y + 4), text_anchor="end")
    if xa is not None:
        for t in xa.ticks():
            x = xa(t)
            c.add("line", class_="grid", x1=_fmt(x), x2=_fmt(x), y1=top, y2=bottom,
                  stroke=GREY, stroke_width=0.5)
            c.add("text", _tick_label(t, xa.log), x=_fmt(x), y=bottom + 16, text_anchor="middle")
    c.add("rect", class_="plot-area", x=left, y=top, width=right - left, height=bottom - top,
          fill="none", stroke="black")
    c.add("text", xlabel, class_="xlabel", x=_fmt((left + right) / 2), y=c.height - 16,
          text_anchor="middle")
    c.add("text", ylabel, class_="ylabel", x=16, y=_fmt((top + bottom) / 2),
          text_anchor="middle", transform=f"rotate(-90 16 {_fmt((top + bottom) / 2)})")


def _mark(c: _Canvas, shape: str, x: float, y: float, colour: str, cls: str) -> None:
    r = MARK_SIZE
    if shape == "circle":
        c.add("circle", class_=cls, cx=_fmt(x), cy=_fmt(y), r=r, fill="none",
              stroke=colour, stroke_width=1.5)
    elif shape == "square":
        c.add("rect", class_=cls, x=_fmt(x - r), y=_fmt(y - r), width=2 * r, height=2 * r,
              fill="none", stroke=colour, stroke_width=1.5)
    else:
        d = (f"M{_fmt(x - r)},{_fmt(y - r)} L{_fmt(x + r)},{_fmt(y + r)} "
             f"M{_fmt(x - r)},{_fmt(y + r)} L{_fmt(x + r)},{_fmt(y - r)}")
        c.add("path", class_=cls, d=d, stroke=colour, stroke_width=1.5, fill="none")


def scatter_svg(series: list[PlotSeries], xlabel: str = "", ylabel: str = "", *,
                xlog: bool = True, ylog: bool = True, xlim=None, ylim=None,
                title: str | None = None) -> str:
    """Scatter plot, log-log by default, one mark shape per series.

    Log-axis limits default to the enclosing decades of the data.
    """
    if not series:
        raise ValueError("scatter plot needs at least one series")
    labels = [s.label for s in series]
    if len(set(labels)) != len(labels):
        raise ValueError("series labels must be unique")
    xs, ys = [], []
    for s in series:
        if not s.points:
            raise ValueError(f"series {s.label!r} has no points")
        for i, (x, y) in enumerate(s.points):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"series {s.label!r} point {i} ({x}, {y}) is not finite")
            if (xlog and x <= 0) or (ylog and y <= 0):
                raise ValueError(f"series {s.label!r} point {i} ({x}, {y}) is not positive "
                                 "on a log axis")
            xs.append(x)
            ys.append(y)

    def limits(values, log, given):
        if given is not None:
            return given
        if log:
            return _decade_limits(values)
        lo, hi = min(values), max(values)
        pad = (hi - lo) * 0.05 or 1.0
        return lo - pad, hi + pad

    c = _Canvas()
    xa = _Axis(*limits(xs, xlog, xlim), xlog, MARGIN["left"], c.width - MARGIN["right"])
    ya = _Axis(*limits(ys, ylog, ylim), ylog, c.height - MARGIN["bottom"], MARGIN["top"])
    _frame(c, xa, ya, xlabel, ylabel)
    for k, s in enumerate(series):
        colour = PALETTE[k % len(PALETTE)]
        for i, (x, y) in enumerate(s.points):
            if i in s.annotations:
                _mark(c, "square", xa(x), ya(y), colour, f"mark annotated series-{k}")
                c.add("text", s.annotations[i], class_="annotation", x=_fmt(xa(x) + 7),
                      y=_fmt(ya(y) - 7))
            else:
                _mark(c, s.mark, xa(x), ya(y), colour, f"mark series-{k}")
        ly = MARGIN["top"] + 14 + 16 * k
        lx = MARGIN["left"] + 14
        _mark(c, s.mark, lx, ly - 4, colour, f"legend-mark series-{k}")
        c.add("text", s.label, class_="legend", x=lx + 10, y=ly)
    return c.render(title)


def speedup_bars_svg(labels: list[str], ratios, ylabel: str = "speedup", *,
                     title: str | None = None) -> str:
    """One bar per instance, in the given order, on a log y-axis.

    Bars start at the unity line, so a slowdown points downwards; a dashed
    line marks the geometric mean of the ratios.
    """
    ratios = [float(r) for r in ratios]
    if len(labels) != len(ratios):
        raise ValueError("labels and ratios differ in length")
    if not ratios:
        raise ValueError("no ratios to plot")
    for lab, r in zip(labels, ratios):
        if not (r > 0 and math.isfinite(r)):
            raise ValueError(f"ratio for {lab!r} must be positive, got {r}")
    c = _Canvas(width=max(WIDTH, MARGIN["left"] + MARGIN["right"] + 28 * len(ratios)))
    ya = _Axis(*_decade_limits(ratios + [1.0]), True, c.height - MARGIN["bottom"],
               MARGIN["top"])
    _frame(c, None, ya, "", ylabel)
    left, right = MARGIN["left"], c.width - MARGIN["right"]
    slot = (right - left) / len(ratios)
    base = ya(1.0)
    for i, (lab, r) in enumerate(zip(labels, ratios)):
        y = ya(r)
        x = left + i * slot + slot * 0.15
        c.add("rect", class_="bar", x=_fmt(x), y=_fmt(min(y, base)), width=_fmt(slot * 0.7),
              height=_fmt(abs(base - y)), fill=BLUE)
        cx = left + (i + 0.5) * slot
        by = c.height - MARGIN["bottom"] + 10
        c.add("text", lab, class_="bar-label", x=_fmt(cx), y=by, text_anchor="end",
              font_size=9, transform=f"rotate(-45 {_fmt(cx)} {by})")
    c.add("line", class_="unity", x1=left, x2=right, y1=_fmt(base), y2=_fmt(base),
          stroke="black")
    gm = geometric_mean(ratios)
    gy = ya(gm)
    c.add("line", class_="gm", x1=left, x2=right, y1=_fmt(gy), y2=_fmt(gy), stroke=ORANGE,
          stroke_dasharray="6 3", stroke_width=1.5)
    c.add("text", f"GM {gm:.3g}", class_="gm-label", x=right - 4, y=_fmt(gy - 4),
          text_anchor="end", fill=ORANGE)
    return c.render(title)


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple


def box_stats(values) -> BoxStats:
    """Quartiles (linear interpolation), Tukey whiskers and outliers of one group."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("box plot group is empty")
    q1, med, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = tuple(sorted(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)]))
    # an interpolated quartile can lie beyond every non-outlier; whiskers never enter the box
    return BoxStats(q1, med, q3, min(float(inside.min()), q1), max(float(inside.max()), q3),
                    outliers)


def box_plot_svg(groups, ylabel: str = "relative deviation", *,
                 title: str | None = None) -> str:
    """Box plot per group; ``groups`` is a mapping or a list of ``(label, values)``."""
    items = list(groups.items()) if isinstance(groups, dict) else list(groups)
    if not items:
        raise ValueError("no groups to plot")
    stats = []
    for label, values in items:
        if len(values) == 0:
            raise ValueError(f"group {label!r} is empty")
        stats.append((str(label), box_stats(values)))
    everything = np.concatenate([np.asarray(v, dtype=float) for _, v in items])
    lo, hi = float(everything.min()), float(everything.max())
    pad = (hi - lo) * 0.08 or max(abs(lo) * 0.1, 0.1)
    c = _Canvas(width=max(WIDTH, MARGIN["left"] + MARGIN["right"] + 40 * len(stats)))
    ya = _Axis(lo - pad, hi + pad, False, c.height - MARGIN["bottom"], MARGIN["top"])
    _frame(c, None, ya, "", ylabel)
    left, right = MARGIN["left"], c.width - MARGIN["right"]
    slot = (right - left) / len(stats)
    for i, (label, s) in enumerate(stats):
        cx = left + (i + 0.5) * slot
        half = min(slot * 0.3, 24)
        c.add("line", class_="whisker", x1=_fmt(cx), x2=_fmt(cx), y1=_fmt(ya(s.whisker_low)),
              y2=_fmt(ya(s.q1)), stroke="black")
        c.add("line", class_="whisker", x1=_fmt(cx), x2=_fmt(cx), y1=_fmt(ya(s.q3)),
              y2=_fmt(ya(s.whisker_high)), stroke="black")
        for w in (s.whisker_low, s.whisker_high):
            c.add("line", class_="whisker-cap", x1=_fmt(cx - half / 2), x2=_fmt(cx + half / 2),
                  y1=_fmt(ya(w)), y2=_fmt(ya(w)), stroke="black")
        c.add("rect", class_="box", x=_fmt(cx - half), y=_fmt(ya(s.q3)), width=_fmt(2 * half),
              height=_fmt(ya(s.q1) - ya(s.q3)), fill="none", stroke=BLUE, stroke_width=1.5)
        c.add("line", class_="median", x1=_fmt(cx - half), x2=_fmt(cx + half),
              y1=_fmt(ya(s.median)), y2=_fmt(ya(s.median)), stroke=ORANGE, stroke_width=2)
        for v in s.outliers:
            _mark(c, "circle", cx, ya(v), BLUE, "outlier")
        by = c.height - MARGIN["bottom"] + 10
        c.add("text", label, class_="box-label", x=_fmt(cx), y=by, text_anchor="end",
              font_size=9, transform=f"rotate(-45 {_fmt(cx)} {by})")
    return c.render(title)


def relative_deviation(values) -> np.ndarray:
    """``(v - mean) / mean`` for each value."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("relative deviation needs at least two values")
    mean = arr.mean()
    if mean == 0:
        raise ValueError("relative deviation is undefined for zero mean")
    return (arr - mean) / mean
