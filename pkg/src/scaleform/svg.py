"""Static SVG plots: agent paths with yaw glyphs and error norms on a log axis."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .simulator import Trajectory

WIDTH, HEIGHT, PAD = 720, 540, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, x0: float, x1: float, y0: float, y1: float, equal: bool = False) -> None:
        if x1 <= x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 <= y0:
            y0, y1 = y0 - 1, y1 + 1
        sx = (WIDTH - 2 * PAD) / (x1 - x0)
        sy = (HEIGHT - 2 * PAD) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy = x0, y0, sx, sy

    def px(self, x: float) -> float:
        return PAD + (x - self.x0) * self.sx

    def py(self, y: float) -> float:
        return HEIGHT - PAD - (y - self.y0) * self.sy


def _polyline(ax: _Axes, xs: NDArray, ys: NDArray, color: str, extra: str = "") -> str:
    pts = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2" {extra} points="{pts}"/>'


def _document(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>',
                      f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
                      *body, "</svg>", ""])


def paths_svg(traj: Trajectory, glyphs: int = 8, max_points: int = 600) -> str:
    """Agent paths in the plane; yaw shown as short arrows at evenly spaced times."""
    n = traj.g.shape[1]
    xs, ys = traj.g[:, :, 0], traj.g[:, :, 1]
    span = max(float(np.ptp(xs)), float(np.ptp(ys)), 1e-9)
    ax = _Axes(float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max()), equal=True)
    step = max(1, len(traj) // max_points)
    body = []
    for i in range(n):
        color = PALETTE[i % len(PALETTE)]
        role = "leader" if i < traj.m else "follower"
        body.append(f'<g id="agent-{i + 1}" class="{role}">')
        body.append(_polyline(ax, xs[::step, i], ys[::step, i], color,
                              'stroke-dasharray="5,3"' if i < traj.m else ""))
        arrow = 0.03 * span
        for k in np.linspace(0, len(traj) - 1, glyphs).astype(int):
            x, y, phi = traj.g[k, i]
            x1, y1 = x + arrow * math.cos(phi), y + arrow * math.sin(phi)
            body.append(
                f'<line x1="{_fmt(ax.px(x))}" y1="{_fmt(ax.py(y))}" x2="{_fmt(ax.px(x1))}" '
                f'y2="{_fmt(ax.py(y1))}" stroke="{color}" stroke-width="2"/>'
                f'<circle cx="{_fmt(ax.px(x))}" cy="{_fmt(ax.py(y))}" r="2.5" fill="{color}"/>'
            )
        x, y, _ = traj.g[-1, i]
        body.append(f'<text x="{_fmt(ax.px(x) + 4)}" y="{_fmt(ax.py(y) - 4)}" fill="{color}">{i + 1}</text>')
        body.append("</g>")
    return _document(body, "Agent paths (dashed: leaders)")


def errors_svg(traj: Trajectory, max_points: int = 800) -> str:
    """Leader and follower error norms against time on a log10 axis."""
    step = max(1, len(traj) // max_points)
    t = traj.t[::step]
    series = {"leaders": traj.delta_l_norm[::step], "followers": traj.delta_f_norm[::step]}
    floor, ceiling = 1e-16, 1e300
    logs = {k: np.log10(np.clip(np.nan_to_num(v, nan=ceiling, posinf=ceiling), floor, ceiling))
            for k, v in series.items()}
    lo = math.floor(min(float(v.min()) for v in logs.values()))
    hi = math.ceil(max(float(v.max()) for v in logs.values()))
    ax = _Axes(float(t[0]), float(t[-1]), lo, max(hi, lo + 1))
    body = []
    for dec in range(lo, max(hi, lo + 1) + 1):
        y = _fmt(ax.py(dec))
        body.append(f'<line x1="{PAD}" y1="{y}" x2="{WIDTH - PAD}" y2="{y}" stroke="#ddd"/>'
                    f'<text x="{PAD - 6}" y="{y}" text-anchor="end">1e{dec}</text>')
    for tick in np.linspace(float(t[0]), float(t[-1]), 6):
        body.append(f'<text x="{_fmt(ax.px(tick))}" y="{HEIGHT - PAD + 16}" text-anchor="middle">{tick:.3g}</text>')
    for (name, v), color in zip(logs.items(), ("#d62728", "#1f77b4")):
        body.append(f'<g id="{name}">{_polyline(ax, t, v, color)}</g>')
    body.append(f'<text x="{WIDTH - PAD}" y="40" text-anchor="end"><tspan fill="#d62728">leaders</tspan> '
                f'<tspan fill="#1f77b4">followers</tspan></text>')
    body.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle">t [s]</text>')
    return _document(body, "Tracking error norms")


def write_svg(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path
