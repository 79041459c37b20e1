"""Gray-level co-occurrence matrices and the four texture attributes.

Two routes compute the same numbers. The explicit route builds a
:class:`GLCMatrix` per window and evaluates each statistic on it; it is what
the small unit tests exercise. :func:`batch_attributes` works directly on the
pair codes of many windows at once and is what the volume sweep uses. Contrast,
homogeneity and dissimilarity are averages over pairs of a function of
``|i - j|``, and energy only needs the sum of squared pair counts, which a
per-row sort of the symmetric pair codes delivers exactly in integer arithmetic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .volume_io import SeismicVolume, VolumeHeader

ATTRIBUTES = ("energy", "homogeneity", "contrast", "dissimilarity")
DEFAULT_LEVELS = 64
DEFAULT_WINDOW_HALF = 4
DEFAULT_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
PLANES = ("time", "inline")


@dataclass(frozen=True, eq=False)
class QuantizedWindow:
    cells: np.ndarray
    levels: int = DEFAULT_LEVELS
    bounds: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class GLCMatrix:
    p: np.ndarray

    @property
    def levels(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class TextureVector:
    energy: float
    homogeneity: float
    contrast: float
    dissimilarity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.energy, self.homogeneity, self.contrast, self.dissimilarity])


@dataclass(eq=False)
class AttributeTable:
    """Per-voxel attribute rows in C order of the volume ``(inline, crossline, z)``.

    ``values`` has shape ``(n_voxels, 4)`` with columns in ``ATTRIBUTES``
    order; missing rows hold NaN and are flagged in ``missing``.
    """

    header: VolumeHeader
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.missing = np.asarray(self.missing, dtype=bool)
        n = self.header.n_voxels
        if self.values.shape != (n, len(ATTRIBUTES)):
            raise ValueError(f"values: expected shape {(n, len(ATTRIBUTES))}, got {self.values.shape}")
        if self.missing.shape != (n,):
            raise ValueError(f"missing: expected shape {(n,)}, got {self.missing.shape}")
        if np.isnan(self.values[~self.missing]).any():
            raise ValueError("values: NaN in a row not flagged missing")

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def coordinates(self) -> np.ndarray:
        """Header coordinates (inline, crossline, z-ms) of every row."""
        il, xl, z = self.header.axis_values()
        grid = np.meshgrid(il, xl, z, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def normalized_coordinates(self) -> np.ndarray:
        """Row coordinates scaled per axis to ``[0, 1]`` (a singleton axis maps to 0)."""
        axes = []
        for n in self.header.shape:
            axes.append(np.arange(n) / (n - 1) if n > 1 else np.zeros(1))
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


def quantize(window, levels: int = DEFAULT_LEVELS, bounds=None) -> QuantizedWindow:
    """Bin amplitudes linearly into ``levels`` gray levels.

    Without ``bounds`` the window's own min/max are used; callers sweeping a
    volume pass the global volume range so levels are comparable across
    windows. A degenerate range sends everything to level 0.
    """
    window = np.asarray(window, dtype=np.float64)
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    if not np.isfinite(window).all():
        raise ValueError("window contains non-finite samples")
    if bounds is None:
        bounds = (float(window.min()), float(window.max()))
    return QuantizedWindow(_quantize_array(window, levels, bounds), levels, tuple(bounds))


def _quantize_array(values, levels, bounds):
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.int64)
    with np.errstate(invalid="ignore"):
        q = np.floor((values - lo) / (hi - lo) * levels)
        q = np.clip(q, 0, levels - 1)
    return np.where(np.isnan(q), -1, q).astype(np.int64)


def _pair_slices(shape, offset):
    """Slices selecting the first and second member of every pair in a window."""
    di, dj = offset
    h, w = shape[-2], shape[-1]
    if h - abs(di) < 1 or w - abs(dj) < 1:
        raise ValueError(f"window {h}x{w} too small for offset {offset}")

    def span(n, d):
        return (slice(0, n - d), slice(d, n)) if d >= 0 else (slice(-d, n), slice(0, n + d))

    a_i, b_i = span(h, di)
    a_j, b_j = span(w, dj)
    return (..., a_i, a_j), (..., b_i, b_j)


def cooccurrence(q: QuantizedWindow, offset=(0, 1)) -> GLCMatrix:
    """Symmetric normalized co-occurrence matrix for one pixel offset."""
    if tuple(offset) == (0, 0):
        raise ValueError("offset must be nonzero")
    first, second = _pair_slices(q.cells.shape, offset)
    a = q.cells[first].ravel()
    b = q.cells[second].ravel()
    counts = np.zeros((q.levels, q.levels), dtype=np.float64)
    np.add.at(counts, (a, b), 1.0)
    counts += counts.T
    return GLCMatrix(counts / counts.sum())


def _level_distance(levels):
    i = np.arange(levels)
    return i[:, None] - i[None, :]


def contrast(P: GLCMatrix) -> float:
    d = _level_distance(P.levels)
    return float(np.sum(P.p * d * d))


def energy(P: GLCMatrix) -> float:
    return float(np.sqrt(np.sum(P.p * P.p)))


def homogeneity(P: GLCMatrix) -> float:
    d = _level_distance(P.levels)
    return float(np.sum(P.p / (1.0 + d * d)))


def dissimilarity(P: GLCMatrix) -> float:
    return float(np.sum(P.p * np.abs(_level_distance(P.levels))))


def texture(P: GLCMatrix) -> TextureVector:
    return TextureVector(energy(P), homogeneity(P), contrast(P), dissimilarity(P))


def window_attributes(q: QuantizedWindow, offsets=DEFAULT_OFFSETS) -> TextureVector:
    """Attributes of one window averaged over ``offsets`` via explicit matrices."""
    vecs = np.array([texture(cooccurrence(q, off)).as_array() for off in offsets])
    return TextureVector(*vecs.mean(axis=0))


def batch_attributes(cells, levels: int = DEFAULT_LEVELS, offsets=DEFAULT_OFFSETS) -> np.ndarray:
    """Attributes of a stack of quantized windows, shape ``(n, h, w) -> (n, 4)``.

    Columns follow ``ATTRIBUTES``. Each row depends only on its own window.
    """
    cells = np.asarray(cells, dtype=np.int64)
    n = cells.shape[0]
    total = np.zeros((n, len(ATTRIBUTES)))
    for off in offsets:
        if tuple(off) == (0, 0):
            raise ValueError("offset must be nonzero")
        first, second = _pair_slices(cells.shape, off)
        a = cells[first].reshape(n, -1)
        b = cells[second].reshape(n, -1)
        npairs = a.shape[1]
        d = a - b
        d2 = d * d
        total[:, 2] += d2.sum(axis=1) / npairs
        total[:, 1] += (1.0 / (1.0 + d2)).sum(axis=1) / npairs
        total[:, 3] += np.abs(d).sum(axis=1) / npairs
        total[:, 0] += np.sqrt(_sum_sq_symmetric_counts(a, b, levels)) / (2 * npairs)
    return total / len(offsets)


def _sum_sq_symmetric_counts(a, b, levels):
    """Row-wise sum of squared counts of the symmetrically accumulated matrix.

    An unordered pair seen ``c`` times contributes ``2 c**2`` off the diagonal
    (cells ``(i, j)`` and ``(j, i)`` each hold ``c``) and ``(2 c)**2`` on it.
    A run of length ``c`` in the sorted codes yields ``c**2`` as the sum of
    ``2 r + 1`` over run ranks ``r``.
    """
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    codes = np.sort(lo * levels + hi, axis=1)
    m = codes.shape[1]
    pos = np.broadcast_to(np.arange(m), codes.shape)
    starts = np.ones(codes.shape, dtype=bool)
    starts[:, 1:] = codes[:, 1:] != codes[:, :-1]
    run_start = np.maximum.accumulate(np.where(starts, pos, 0), axis=1)
    rank = pos - run_start
    diag = (codes // levels) == (codes % levels)
    weight = np.where(diag, 4, 2)
    return (weight * (2 * rank + 1)).sum(axis=1)


def compute_attribute_table(
    volume: SeismicVolume,
    window_half: int = DEFAULT_WINDOW_HALF,
    offsets=DEFAULT_OFFSETS,
    levels: int = DEFAULT_LEVELS,
    plane: str = "time",
    bounds=None,
) -> AttributeTable:
    """Sweep a square window over every voxel and average attributes over offsets.

    ``plane="time"`` takes windows in the inline x crossline plane at fixed z,
    ``plane="inline"`` in the crossline x z plane at fixed inline. Rows whose
    window leaves the volume or touches a missing sample are flagged missing.
    """
    if window_half < 1:
        raise ValueError(f"window_half must be >= 1, got {window_half}")
    offsets = tuple(tuple(int(v) for v in off) for off in offsets)
    if not offsets:
        raise ValueError("offsets must be nonempty")
    if plane not in PLANES:
        raise ValueError(f"plane must be one of {PLANES}, got {plane!r}")

    samples = volume.samples.astype(np.float64)
    if bounds is None:
        finite = samples[np.isfinite(samples)]
        bounds = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 0.0)
    q = _quantize_array(samples, levels, bounds)

    # move the window plane to axes (0, 1) and iterate over the remaining axis
    stack = q if plane == "time" else q.transpose(1, 2, 0)
    out = np.full(stack.shape + (len(ATTRIBUTES),), np.nan)
    side = 2 * window_half + 1
    h, w = stack.shape[0], stack.shape[1]
    if h >= side and w >= side:
        for s in range(stack.shape[2]):
            windows = sliding_window_view(stack[:, :, s], (side, side))
            gh, gw = windows.shape[:2]
            flat = windows.reshape(gh * gw, side, side)
            valid = (flat >= 0).all(axis=(1, 2))
            vals = np.full((gh * gw, len(ATTRIBUTES)), np.nan)
            if valid.any():
                vals[valid] = batch_attributes(flat[valid], levels, offsets)
            out[window_half:h - window_half, window_half:w - window_half, s] = vals.reshape(gh, gw, -1)

    if plane == "inline":
        out = out.transpose(2, 0, 1, 3)
    values = out.reshape(-1, len(ATTRIBUTES))
    missing = np.isnan(values).any(axis=1)
    return AttributeTable(volume.header, values, missing)


CSV_COLUMNS = ("inline", "crossline", "z") + ATTRIBUTES + ("missing",)


def header_sidecar(path) -> Path:
    """Geometry sidecar that travels with an attribute CSV (``x.csv`` -> ``x.header.json``)."""
    path = Path(path)
    return path.with_name(path.stem + ".header.json")


def _fmt_number(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def write_attribute_csv(table: AttributeTable, path) -> None:
    """Write ``table`` as CSV plus its geometry sidecar.

    Attribute values use ``repr`` so a read-back is bit-exact; missing rows
    carry empty attribute fields.
    """
    path = Path(path)
    coords = table.coordinates()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for (il, xl, z), vals, miss in zip(coords, table.values, table.missing):
            attrs = [""] * len(ATTRIBUTES) if miss else [repr(float(v)) for v in vals]
            writer.writerow([_fmt_number(il), _fmt_number(xl), _fmt_number(z), *attrs, int(miss)])
    header_sidecar(path).write_text(json.dumps(table.header.to_dict(), indent=2) + "\n")


def read_attribute_csv(path) -> AttributeTable:
    """Read a CSV written by :func:`write_attribute_csv` (sidecar required)."""
    path = Path(path)
    sidecar = header_sidecar(path)
    if not sidecar.exists():
        raise FileNotFoundError(f"{sidecar}: geometry sidecar for {path.name} not found")
    header = VolumeHeader.from_dict(json.loads(sidecar.read_text()))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = tuple(next(reader, ()))
        if columns != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}, got {columns}")
        rows = list(reader)
    if len(rows) != header.n_voxels:
        raise ValueError(f"{path}: {len(rows)} rows, geometry expects {header.n_voxels}")
    values = np.empty((len(rows), len(ATTRIBUTES)))
    missing = np.zeros(len(rows), dtype=bool)
    for i, row in enumerate(rows):
        if row[-1] == "1":
            missing[i] = True
            values[i] = np.nan
        else:
            values[i] = [float(v) for v in row[3:3 + len(ATTRIBUTES)]]
    return AttributeTable(header, values, missing)
