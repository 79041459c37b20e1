"""Binary PPM rasters of facies and attribute slices, plus an SVG legend.

Slice rows map to image rows and slice columns to image columns, so a time
slice renders with inline running down and crossline running across.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# label 1..8 -> PALETTE[label - 1]; labels above 8 wrap around
PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (0, 130, 200),
    (255, 225, 25),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (128, 128, 128),
)
UNLABELED_RGB = (0, 0, 0)
MISSING_RGB = (255, 0, 255)


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) array, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_ppm(path, rgb: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(rgb))


def read_ppm(path) -> np.ndarray:
    """Parse a P6 file with maxval 255 (comments not supported)."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P6" or parts[3] != b"255":
        raise ValueError(f"{path}: not an 8-bit P6 file")
    w, h = int(parts[1]), int(parts[2])
    pixels = np.frombuffer(data[len(data) - 3 * w * h:], dtype=np.uint8)
    return pixels.reshape(h, w, 3)


def facies_raster(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    table = np.array((UNLABELED_RGB,) + PALETTE, dtype=np.uint8)
    idx = np.where(labels > 0, (labels - 1) % len(PALETTE) + 1, 0)
    return table[idx]


def attribute_raster(values) -> np.ndarray:
    """Linear grayscale over the slice's finite min/max; a flat slice is mid-gray."""
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    rgb = np.empty(values.shape + (3,), dtype=np.uint8)
    rgb[...] = MISSING_RGB
    if not finite.any():
        return rgb
    lo, hi = values[finite].min(), values[finite].max()
    if hi > lo:
        frac = (values[finite] - lo) / (hi - lo)
    else:
        frac = np.full(int(finite.sum()), 0.5)
    gray = np.floor(frac * 255.0 + 0.5).astype(np.uint8)
    rgb[finite] = gray[:, None]
    return rgb


def legend_svg(n_facies: int, title: str = "Facies") -> str:
    row_h = 22
    height = 30 + row_h * n_facies
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="160" height="{height}" viewBox="0 0 160 {height}">',
        f'  <text x="8" y="18" font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for label in range(1, n_facies + 1):
        r, g, b = PALETTE[(label - 1) % len(PALETTE)]
        y = 26 + (label - 1) * row_h
        lines.append(f'  <rect x="8" y="{y}" width="16" height="16" fill="#{r:02x}{g:02x}{b:02x}" stroke="black"/>')
        lines.append(f'  <text x="32" y="{y + 13}" font-family="sans-serif" font-size="12">facies {label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_legend(path, n_facies: int) -> None:
    Path(path).write_text(legend_svg(n_facies))
