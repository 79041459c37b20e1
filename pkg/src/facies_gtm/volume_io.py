"""Seismic volume containers, on-disk format and synthetic test volumes.

A volume lives on disk as two files sharing a stem: ``<stem>.json`` holds the
survey header and ``<stem>.f32`` the raw little-endian float32 samples in
(inline, crossline, z) order with z varying fastest. Dead or missing samples
are stored as quiet NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER_SUFFIX = ".json"
PAYLOAD_SUFFIX = ".f32"
ORIENTATIONS = ("inline", "crossline", "time")
RECIPES = ("constant", "checkerboard", "white_noise", "linear_gradient")
UNLABELED = 0


class VolumeFormatError(ValueError):
    """Raised for malformed headers, payload size mismatches and bad ranges."""


@dataclass(frozen=True)
class VolumeHeader:
    inline_range: tuple[int, int]
    crossline_range: tuple[int, int]
    z_range: tuple[int, int]
    sample_interval: float = 1.0
    line_spacing: float = 25.0

    def __post_init__(self):
        for name in ("inline_range", "crossline_range", "z_range"):
            rng = getattr(self, name)
            if len(rng) != 2 or int(rng[0]) != rng[0] or int(rng[1]) != rng[1]:
                raise VolumeFormatError(f"{name}: expected an integer pair, got {rng!r}")
            lo, hi = int(rng[0]), int(rng[1])
            if lo > hi:
                raise VolumeFormatError(f"{name}: empty range [{lo}, {hi}]")
            object.__setattr__(self, name, (lo, hi))
        if not (self.sample_interval > 0 and math.isfinite(self.sample_interval)):
            raise VolumeFormatError(f"sample_interval: must be > 0, got {self.sample_interval!r}")
        if not (self.line_spacing > 0 and math.isfinite(self.line_spacing)):
            raise VolumeFormatError(f"line_spacing: must be > 0, got {self.line_spacing!r}")
        steps = (self.z_range[1] - self.z_range[0]) / self.sample_interval
        if abs(steps - round(steps)) > 1e-9:
            raise VolumeFormatError(
                f"z_range: span {self.z_range} is not a multiple of sample_interval {self.sample_interval}"
            )

    @property
    def n_inline(self) -> int:
        return self.inline_range[1] - self.inline_range[0] + 1

    @property
    def n_crossline(self) -> int:
        return self.crossline_range[1] - self.crossline_range[0] + 1

    @property
    def n_samples(self) -> int:
        return int(round((self.z_range[1] - self.z_range[0]) / self.sample_interval)) + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_inline, self.n_crossline, self.n_samples)

    @property
    def n_voxels(self) -> int:
        return self.n_inline * self.n_crossline * self.n_samples

    @classmethod
    def from_shape(cls, shape, sample_interval=1.0, line_spacing=25.0) -> "VolumeHeader":
        """Header with ranges starting at zero for an array of ``shape``."""
        ni, nx, nz = (int(s) for s in shape)
        z_hi = (nz - 1) * sample_interval
        if z_hi != int(z_hi):
            raise VolumeFormatError("z_range: non-integer upper bound for this sample_interval")
        return cls((0, ni - 1), (0, nx - 1), (0, int(z_hi)), sample_interval, line_spacing)

    def axis_values(self):
        """Inline numbers, crossline numbers and z times (ms) along each axis."""
        il = np.arange(self.inline_range[0], self.inline_range[1] + 1)
        xl = np.arange(self.crossline_range[0], self.crossline_range[1] + 1)
        z = self.z_range[0] + self.sample_interval * np.arange(self.n_samples)
        return il, xl, z

    def to_dict(self) -> dict:
        return {
            "inline_range": list(self.inline_range),
            "crossline_range": list(self.crossline_range),
            "z_range": list(self.z_range),
            "sample_interval_ms": self.sample_interval,
            "line_spacing_m": self.line_spacing,
            "byte_order": "LE",
            "sample_format": "f32",
        }

    @classmethod
    def from_dict(cls, obj) -> "VolumeHeader":
        if not isinstance(obj, dict):
            raise VolumeFormatError("header: expected a JSON object")
        for key in ("inline_range", "crossline_range", "z_range", "sample_interval_ms", "line_spacing_m"):
            if key not in obj:
                raise VolumeFormatError(f"{key}: missing from header")
        if obj.get("byte_order", "LE") != "LE":
            raise VolumeFormatError(f"byte_order: unsupported value {obj['byte_order']!r}")
        if obj.get("sample_format", "f32") != "f32":
            raise VolumeFormatError(f"sample_format: unsupported value {obj['sample_format']!r}")
        try:
            return cls(
                tuple(obj["inline_range"]),
                tuple(obj["crossline_range"]),
                tuple(obj["z_range"]),
                float(obj["sample_interval_ms"]),
                float(obj["line_spacing_m"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, VolumeFormatError):
                raise
            raise VolumeFormatError(f"header: {exc}") from exc


@dataclass(frozen=True, eq=False)
class SeismicVolume:
    header: VolumeHeader
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float32)
        if samples.shape != self.header.shape:
            raise VolumeFormatError(
                f"samples: shape {samples.shape} does not match header {self.header.shape}"
            )
        if np.isinf(samples).any():
            raise VolumeFormatError("samples: infinite values are not allowed")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.samples)

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.samples).sum())

    def __eq__(self, other):
        if not isinstance(other, SeismicVolume):
            return NotImplemented
        return self.header == other.header and self.samples.tobytes() == other.samples.tobytes()


@dataclass(frozen=True)
class SliceView:
    orientation: str
    index: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class FaciesMap:
    """Per-voxel facies labels in 1..n_facies; ``UNLABELED`` (0) marks gaps."""

    header: VolumeHeader
    labels: np.ndarray
    n_facies: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != self.header.shape:
            raise VolumeFormatError(f"labels: shape {labels.shape} does not match header {self.header.shape}")
        labels = labels.astype(np.int32)
        if labels.size and (labels.min() < UNLABELED or labels.max() > self.n_facies):
            raise VolumeFormatError(f"labels: values outside [0, {self.n_facies}]")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)


def _pair_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (HEADER_SUFFIX, PAYLOAD_SUFFIX):
        path = path.with_suffix("")
    return path.with_name(path.name + HEADER_SUFFIX), path.with_name(path.name + PAYLOAD_SUFFIX)


def load_volume(path) -> SeismicVolume:
    """Read a volume file pair; ``path`` may name the header, the payload or the stem."""
    header_path, payload_path = _pair_paths(path)
    try:
        text = header_path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read volume header {header_path}: {exc.strerror}") from exc
    try:
        header = VolumeHeader.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"header: invalid JSON in {header_path}: {exc}") from exc
    try:
        raw = payload_path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read volume payload {payload_path}: {exc.strerror}") from exc
    if len(raw) % 4:
        raise VolumeFormatError(f"samples: payload length {len(raw)} is not a multiple of 4 bytes")
    n = len(raw) // 4
    if n != header.n_voxels:
        raise VolumeFormatError(
            f"samples: payload holds {n} samples but header declares "
            f"{header.n_inline}x{header.n_crossline}x{header.n_samples} = {header.n_voxels}"
        )
    samples = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(header.shape)
    return SeismicVolume(header, samples)


def save_volume(volume: SeismicVolume, path) -> None:
    header_path, payload_path = _pair_paths(path)
    # re-validate: a header built with object.__setattr__ tricks must not reach disk
    header = VolumeHeader.from_dict(volume.header.to_dict())
    payload = np.ascontiguousarray(volume.samples, dtype="<f4")
    if payload.shape != header.shape:
        raise VolumeFormatError("samples: shape does not match header")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header.to_dict(), indent=2) + "\n")
    payload_path.write_bytes(payload.tobytes())


def save_facies_volume(facies: FaciesMap, path) -> None:
    """Store labels through the volume format (as float32) for slice rendering."""
    save_volume(SeismicVolume(facies.header, facies.labels.astype(np.float32)), path)


def load_facies_volume(path, n_facies=None) -> FaciesMap:
    vol = load_volume(path)
    labels = vol.samples.astype(np.int32)
    if n_facies is None:
        n_facies = int(labels.max(initial=0))
    return FaciesMap(vol.header, labels, n_facies)


def slice_position(header: VolumeHeader, orientation: str, index) -> int:
    """Array position along the sliced axis for a header-range ``index``."""
    if orientation == "inline":
        lo, hi = header.inline_range
        pos = index - lo
    elif orientation == "crossline":
        lo, hi = header.crossline_range
        pos = index - lo
    elif orientation == "time":
        lo, hi = header.z_range
        pos = (index - lo) / header.sample_interval
        if pos != int(pos):
            raise IndexError(f"time index {index} ms is not on the sample grid")
    else:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    if not lo <= index <= hi:
        raise IndexError(f"{orientation} index {index} outside range [{lo}, {hi}]")
    return int(pos)


def extract_slice(volume, orientation: str, index) -> SliceView:
    """Return a 2-D view of ``volume`` (a SeismicVolume or FaciesMap)."""
    data = volume.samples if isinstance(volume, SeismicVolume) else volume.labels
    pos = slice_position(volume.header, orientation, index)
    if orientation == "inline":
        values = data[pos, :, :]
    elif orientation == "crossline":
        values = data[:, pos, :]
    else:
        values = data[:, :, pos]
    return SliceView(orientation, index, values)


# --------------------------------------------------------------------------
# synthetic volumes


@dataclass(frozen=True)
class Region:
    """Half-open index box ``[lo, hi)`` per axis with a texture recipe.

    ``recipe`` is a dict with a ``kind`` key from ``RECIPES`` plus parameters:
    ``constant(value)``, ``checkerboard(period, low, high)``,
    ``white_noise(sigma, mean=0)`` and ``linear_gradient(start, slope)`` where
    ``slope`` is a 3-vector of per-index increments.
    """

    label: int
    inline: tuple[int, int]
    crossline: tuple[int, int]
    z: tuple[int, int]
    recipe: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SyntheticSpec:
    shape: tuple[int, int, int]
    regions: tuple[Region, ...]
    sample_interval: float = 1.0
    line_spacing: float = 25.0

    @classmethod
    def from_dict(cls, obj) -> "SyntheticSpec":
        regions = tuple(
            Region(
                int(r["label"]),
                tuple(r["inline"]),
                tuple(r["crossline"]),
                tuple(r["z"]),
                dict(r["recipe"]),
            )
            for r in obj["regions"]
        )
        return cls(
            tuple(int(s) for s in obj["shape"]),
            regions,
            float(obj.get("sample_interval", 1.0)),
            float(obj.get("line_spacing", 25.0)),
        )

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "sample_interval": self.sample_interval,
            "line_spacing": self.line_spacing,
            "regions": [
                {
                    "label": r.label,
                    "inline": list(r.inline),
                    "crossline": list(r.crossline),
                    "z": list(r.z),
                    "recipe": r.recipe,
                }
                for r in self.regions
            ],
        }


def four_region_spec(shape=(64, 64, 32)) -> SyntheticSpec:
    """Four lateral quadrants, one texture family each.

    The recipes are chosen so that every attribute separates at least one pair:
    the constant block pins energy and homogeneity to 1, the checkerboard has
    maximal contrast between two levels, noise spreads mass over many cells and
    the gradient produces small but nonzero level steps.
    """
    ni, nx, nz = shape
    hi, hx = ni // 2, nx // 2
    recipes = [
        {"kind": "constant", "value": 0.5},
        {"kind": "checkerboard", "period": 1, "low": -0.6, "high": 0.6},
        {"kind": "white_noise", "sigma": 0.5, "mean": 0.0},
        {"kind": "linear_gradient", "start": -1.0, "slope": [0.0, 0.03, 0.0]},
    ]
    boxes = [((0, hi), (0, hx)), ((0, hi), (hx, nx)), ((hi, ni), (0, hx)), ((hi, ni), (hx, nx))]
    regions = tuple(
        Region(lab + 1, box[0], box[1], (0, nz), recipe)
        for lab, (box, recipe) in enumerate(zip(boxes, recipes))
    )
    return SyntheticSpec(tuple(shape), regions)


def _render_recipe(recipe, idx, rng):
    ii, jj, kk = idx
    kind = recipe.get("kind")
    if kind == "constant":
        return np.full(ii.shape, float(recipe["value"]))
    if kind == "checkerboard":
        period = int(recipe["period"])
        if period < 1:
            raise ValueError("checkerboard period must be >= 1")
        parity = (ii // period + jj // period + kk // period) % 2
        return np.where(parity == 1, float(recipe["high"]), float(recipe["low"]))
    if kind == "white_noise":
        sigma = float(recipe["sigma"])
        return float(recipe.get("mean", 0.0)) + sigma * rng.standard_normal(ii.shape)
    if kind == "linear_gradient":
        si, sj, sk = (float(s) for s in recipe["slope"])
        return float(recipe["start"]) + si * ii + sj * jj + sk * kk
    raise ValueError(f"unknown recipe kind {kind!r}; expected one of {RECIPES}")


def generate_synthetic(spec: SyntheticSpec, seed: int = 0):
    """Build a volume and its ground-truth facies map from a region layout.

    Regions must tile the volume exactly. Noise is drawn from a generator
    seeded with ``seed`` in region order, so the output depends only on
    ``(spec, seed)``.
    """
    shape = tuple(spec.shape)
    labels = np.zeros(shape, dtype=np.int32)
    cover = np.zeros(shape, dtype=np.int32)
    for r in spec.regions:
        for name, (lo, hi), n in zip(("inline", "crossline", "z"), (r.inline, r.crossline, r.z), shape):
            if not 0 <= lo < hi <= n:
                raise ValueError(f"region {r.label}: {name} bounds [{lo}, {hi}) outside [0, {n})")
        if r.label < 1:
            raise ValueError(f"region {r.label}: labels must be >= 1")
        box = np.s_[r.inline[0]:r.inline[1], r.crossline[0]:r.crossline[1], r.z[0]:r.z[1]]
        cover[box] += 1
        labels[box] = r.label
    if (cover > 1).any():
        raise ValueError("synthetic spec: regions overlap")
    if (cover == 0).any():
        raise ValueError("synthetic spec: regions do not cover the volume")

    rng = np.random.default_rng(seed)
    samples = np.empty(shape, dtype=np.float64)
    for r in spec.regions:
        box = np.s_[r.inline[0]:r.inline[1], r.crossline[0]:r.crossline[1], r.z[0]:r.z[1]]
        idx = np.meshgrid(
            np.arange(*r.inline), np.arange(*r.crossline), np.arange(*r.z), indexing="ij"
        )
        samples[box] = _render_recipe(r.recipe, idx, rng)

    header = VolumeHeader.from_shape(shape, spec.sample_interval, spec.line_spacing)
    n_facies = max(r.label for r in spec.regions)
    return SeismicVolume(header, samples.astype(np.float32)), FaciesMap(header, labels, n_facies)
