"""Deterministic SVG heatmaps of communication matrices.

The renderer is a pure function of (matrix, render spec): identical inputs
produce identical bytes, so golden-file tests work.  Cell intensity is
log10(1 + bytes) normalized to the matrix maximum by default; zero cells sit
exactly on the first color stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .matrix import CommMatrix

#: Five-stop dark-to-bright gradient, positions and sRGB triples.
DEFAULT_STOPS: tuple[tuple[float, tuple[int, int, int]], ...] = (
    (0.00, (13, 8, 135)),
    (0.25, (126, 3, 168)),
    (0.50, (204, 71, 120)),
    (0.75, (248, 149, 64)),
    (1.00, (240, 249, 33)),
)

LOG = "log"
LINEAR = "linear"


@dataclass(frozen=True)
class RenderSpec:
    scale: str = LOG
    stops: tuple[tuple[float, tuple[int, int, int]], ...] = DEFAULT_STOPS
    cell_px: int = 44
    show_labels: bool = True

    def validate(self) -> "RenderSpec":
        if self.scale not in (LOG, LINEAR):
            raise ValueError(f"scale must be {LOG!r} or {LINEAR!r}")
        fracs = [f for f, _ in self.stops]
        if fracs[0] != 0.0 or fracs[-1] != 1.0 or sorted(set(fracs)) != fracs:
            raise ValueError("color stops must increase strictly from 0 to 1")
        if self.cell_px < 4:
            raise ValueError("cell_px too small")
        return self


def _lerp_color(stops, t: float) -> tuple[int, int, int]:
    t = min(1.0, max(0.0, t))
    for (f0, c0), (f1, c1) in zip(stops, stops[1:]):
        if t <= f1:
            u = 0.0 if f1 == f0 else (t - f0) / (f1 - f0)
            return tuple(round(a + (b - a) * u) for a, b in zip(c0, c1))
    return stops[-1][1]


def _intensity(value: int, vmax: int, scale: str) -> float:
    if vmax <= 0 or value <= 0:
        return 0.0
    if scale == LOG:
        return math.log10(1 + value) / math.log10(1 + vmax)
    return value / vmax


def _axis_labels(matrix: CommMatrix) -> list[str]:
    labels = ["0"] + [str(g + 1) for g in range(matrix.d)]
    if matrix.with_aggregator:
        labels.append("net")
    return labels


def render_heatmap(matrix: CommMatrix, spec: RenderSpec = RenderSpec()) -> str:
    """Render the matrix as an SVG document (row = source, column = destination)."""
    spec.validate()
    n = matrix.size
    cp = spec.cell_px
    margin = cp if spec.show_labels else 0
    width = margin + n * cp
    height = margin + n * cp
    vmax = matrix.max_cell
    labels = _axis_labels(matrix)
    font = max(8, cp * 2 // 5)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    cells = matrix.rows()
    for i in range(n):
        for j in range(n):
            r, g, b = _lerp_color(spec.stops, _intensity(cells[i][j], vmax, spec.scale))
            x, y = margin + j * cp, margin + i * cp
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cp}" height="{cp}" '
                f'fill="rgb({r},{g},{b})" stroke="#ffffff" stroke-width="1"/>'
            )
    if spec.show_labels:
        for j, lab in enumerate(labels):
            x = margin + j * cp + cp // 2
            parts.append(
                f'<text x="{x}" y="{margin - font // 2}" font-size="{font}" '
                f'font-family="monospace" text-anchor="middle">{lab}</text>'
            )
        for i, lab in enumerate(labels):
            y = margin + i * cp + cp // 2 + font // 2
            parts.append(
                f'<text x="{margin - font // 2}" y="{y}" font-size="{font}" '
                f'font-family="monospace" text-anchor="end">{lab}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_heatmap(matrix: CommMatrix, path, spec: RenderSpec = RenderSpec()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_heatmap(matrix, spec))
