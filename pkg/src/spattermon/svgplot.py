"""Tiny deterministic SVG emitter for report plots.

Hand-rolled on purpose: report outputs must be byte-identical for identical
inputs, so no plotting library (whose output embeds versions or timestamps)
is used. All coordinates are formatted with two decimals.
"""

from __future__ import annotations

from dataclasses import dataclass


def _f(v: float) -> str:
    return f"{v:.2f}"


@dataclass
class Axes:
    width: int = 640
    height: int = 420
    margin: int = 56
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def x(self, v: float) -> float:
        span = self.x_max - self.x_min or 1.0
        return self.margin + (v - self.x_min) / span * (self.width - 2 * self.margin)

    def y(self, v: float) -> float:
        span = self.y_max - self.y_min or 1.0
        return self.height - self.margin - (v - self.y_min) / span * (self.height - 2 * self.margin)


class SvgPlot:
    def __init__(self, axes: Axes, title: str, x_label: str, y_label: str):
        self.axes = axes
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{axes.width}" '
            f'height="{axes.height}" viewBox="0 0 {axes.width} {axes.height}">',
            f'<rect width="{axes.width}" height="{axes.height}" fill="white"/>',
            f'<text x="{axes.width // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>',
            f'<text x="{axes.width // 2}" y="{axes.height - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{x_label}</text>',
            f'<text x="16" y="{axes.height // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {axes.height // 2})">{y_label}</text>',
        ]
        a = axes
        self.parts.append(
            f'<path d="M {_f(a.x(a.x_min))} {_f(a.y(a.y_max))} L {_f(a.x(a.x_min))} '
            f'{_f(a.y(a.y_min))} L {_f(a.x(a.x_max))} {_f(a.y(a.y_min))}" '
            'fill="none" stroke="black" stroke-width="1"/>'
        )
        self._tick(a.x_min, a.y_min, first=True)
        self._tick(a.x_max, a.y_max, first=False)

    def _tick(self, xv: float, yv: float, first: bool) -> None:
        a = self.axes
        anchor_y = a.y(a.y_min)
        self.parts.append(
            f'<text x="{_f(a.x(xv))}" y="{_f(anchor_y + 16)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{xv:g}</text>'
        )
        self.parts.append(
            f'<text x="{_f(a.x(a.x_min) - 6)}" y="{_f(a.y(yv) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{yv:g}</text>'
        )

    def scatter(self, xs, ys, radius: float = 3.0, color: str = "#1f77b4") -> None:
        a = self.axes
        for xv, yv in zip(xs, ys):
            self.parts.append(
                f'<circle cx="{_f(a.x(xv))}" cy="{_f(a.y(yv))}" r="{_f(radius)}" '
                f'fill="{color}" fill-opacity="0.85"/>'
            )

    def line(self, xs, ys, color: str = "#d62728", width: float = 1.5) -> None:
        a = self.axes
        pts = " ".join(f"{_f(a.x(xv))},{_f(a.y(yv))}" for xv, yv in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{_f(width)}"/>'
        )

    def error_bars(self, xs, ys, errs, color: str = "#1f77b4") -> None:
        a = self.axes
        for xv, yv, ev in zip(xs, ys, errs):
            self.parts.append(
                f'<line x1="{_f(a.x(xv))}" y1="{_f(a.y(yv - ev))}" '
                f'x2="{_f(a.x(xv))}" y2="{_f(a.y(yv + ev))}" '
                f'stroke="{color}" stroke-width="1"/>'
            )

    def bars(self, edges, counts, color: str = "#2ca02c") -> None:
        a = self.axes
        for i, count in enumerate(counts):
            x0, x1 = a.x(edges[i]), a.x(edges[i + 1])
            y0, y1 = a.y(0.0), a.y(count)
            self.parts.append(
                f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" '
                f'height="{_f(y0 - y1)}" fill="{color}" stroke="black" '
                'stroke-width="0.5"/>'
            )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def make_axes(xs, ys, pad: float = 0.06) -> Axes:
    xs = list(xs) or [0.0, 1.0]
    ys = list(ys) or [0.0, 1.0]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if x_min == x_max:
        x_min, x_max = x_min - 1.0, x_max + 1.0
    if y_min == y_max:
        y_min, y_max = y_min - 1.0, y_max + 1.0
    dx = (x_max - x_min) * pad
    dy = (y_max - y_min) * pad
    return Axes(x_min=x_min - dx, x_max=x_max + dx, y_min=y_min - dy, y_max=y_max + dy)
