"""Single-document JSON configuration for the command-line pipeline.

Every section is a frozen dataclass. Unknown keys are rejected at load time
and numeric settings are range-checked here, before any stage runs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .glcm_texture import DEFAULT_LEVELS, DEFAULT_OFFSETS, DEFAULT_WINDOW_HALF, PLANES
from .rbf_interp import RBFConfig
from .volume_io import ORIENTATIONS


class ConfigError(ValueError):
    """Invalid configuration: unknown key, wrong type or out-of-range value."""


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class PathsConfig:
    volume: str = "volume"
    output_dir: str = "out"
    ground_truth: str | None = None


@dataclass(frozen=True)
class GLCMConfig:
    levels: int = DEFAULT_LEVELS
    window_half: int = DEFAULT_WINDOW_HALF
    offsets: tuple = DEFAULT_OFFSETS
    plane: str = "time"

    def validate(self):
        _require(isinstance(self.levels, int) and self.levels >= 2, f"glcm.levels must be an integer >= 2, got {self.levels!r}")
        _require(
            isinstance(self.window_half, int) and self.window_half >= 1,
            f"glcm.window_half must be an integer >= 1, got {self.window_half!r}",
        )
        _require(len(self.offsets) > 0, "glcm.offsets must be nonempty")
        for off in self.offsets:
            _require(
                len(off) == 2 and all(isinstance(v, int) for v in off) and any(off),
                f"glcm.offsets: expected nonzero integer pairs, got {off!r}",
            )
            _require(
                max(abs(v) for v in off) <= 2 * self.window_half,
                f"glcm.offsets: {list(off)} does not fit in a window of half-size {self.window_half}",
            )
        _require(self.plane in PLANES, f"glcm.plane must be one of {PLANES}, got {self.plane!r}")


@dataclass(frozen=True)
class RBFSection:
    width: float | None = None
    regularization: float = 1e-8
    split: float = 0.8
    seed: int = 0
    max_centers: int = 2000
    proximity_scale: float | None = 0.1


@dataclass(frozen=True)
class GTMSection:
    grid: tuple = (30, 30)
    basis: tuple = (15, 15)
    sigma: float | None = None
    sigma_scale: float = 1.0
    tolerance: float = 1e-5
    max_iterations: int = 200
    map_regularization: float = 1e-3
    seed: int = 0
    subsample: int = 50_000

    def validate(self):
        for name in ("grid", "basis"):
            dims = getattr(self, name)
            _require(
                len(dims) == 2 and all(isinstance(v, int) and v >= 1 for v in dims),
                f"gtm.{name} must be two positive integers, got {dims!r}",
            )
        _require(self.sigma is None or self.sigma > 0, f"gtm.sigma must be > 0 or null, got {self.sigma!r}")
        _require(self.sigma_scale > 0, f"gtm.sigma_scale must be > 0, got {self.sigma_scale!r}")
        _require(self.tolerance >= 0, f"gtm.tolerance must be >= 0, got {self.tolerance!r}")
        _require(
            isinstance(self.max_iterations, int) and self.max_iterations >= 1,
            f"gtm.max_iterations must be an integer >= 1, got {self.max_iterations!r}",
        )
        _require(self.map_regularization >= 0, f"gtm.map_regularization must be >= 0, got {self.map_regularization!r}")
        _require(isinstance(self.subsample, int) and self.subsample >= 1, f"gtm.subsample must be >= 1, got {self.subsample!r}")


@dataclass(frozen=True)
class ClassifyConfig:
    n_facies: int = 4
    seed: int = 0
    n_init: int = 10

    def validate(self):
        _require(isinstance(self.n_facies, int) and self.n_facies >= 1, f"classify.n_facies must be >= 1, got {self.n_facies!r}")
        _require(isinstance(self.n_init, int) and self.n_init >= 1, f"classify.n_init must be >= 1, got {self.n_init!r}")


@dataclass(frozen=True)
class RenderConfig:
    orientation: str = "time"
    # null picks the middle slice
    index: int | float | None = None

    def validate(self):
        _require(self.orientation in ORIENTATIONS, f"render.orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")


@dataclass(frozen=True)
class SynthConfig:
    shape: tuple = (64, 64, 32)
    seed: int = 0

    def validate(self):
        _require(
            len(self.shape) == 3 and all(isinstance(v, int) and v >= 2 for v in self.shape),
            f"synth.shape must be three integers >= 2, got {self.shape!r}",
        )


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    glcm: GLCMConfig = field(default_factory=GLCMConfig)
    rbf: RBFSection = field(default_factory=RBFSection)
    gtm: GTMSection = field(default_factory=GTMSection)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    # directory that relative paths resolve against
    base_dir: str = "."

    def resolve(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.paths.output_dir)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        return out


_SECTION_TYPES = {
    "paths": PathsConfig,
    "glcm": GLCMConfig,
    "rbf": RBFSection,
    "gtm": GTMSection,
    "classify": ClassifyConfig,
    "render": RenderConfig,
    "synth": SynthConfig,
}


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


def _build_section(name: str, raw) -> object:
    cls = _SECTION_TYPES[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    try:
        section = cls(**{k: _tupleize(v) for k, v in raw.items()})
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if hasattr(section, "validate"):
        try:
            section.validate()
        except TypeError as exc:
            raise ConfigError(f"{name}: wrong value type ({exc})") from exc
    return section


def _check_rbf(section: RBFSection):
    try:
        RBFConfig(
            width=section.width,
            regularization=section.regularization,
            split=section.split,
            seed=section.seed,
            max_centers=section.max_centers,
            proximity_scale=section.proximity_scale,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(raw: dict, base_dir=".") -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at top level")
    unknown = sorted(set(raw) - set(_SECTION_TYPES))
    if unknown:
        raise ConfigError(f"config: unknown section(s) {', '.join(unknown)}")
    sections = {name: _build_section(name, raw.get(name, {})) for name in _SECTION_TYPES}
    _check_rbf(sections["rbf"])
    return PipelineConfig(**sections, base_dir=str(base_dir))


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    parts = key.strip().split(".")
    if not sep or len(parts) != 2 or not all(parts):
        raise ConfigError(f"override {text!r}: expected section.key=value")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        # bare words are taken as strings so paths need no quoting
        parsed = value
    return parts[0], parts[1], parsed


def apply_overrides(raw: dict, overrides) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for text in overrides or ():
        section, key, value = _parse_override(text)
        out.setdefault(section, {})
        if not isinstance(out[section], dict):
            raise ConfigError(f"override {text!r}: {section} is not an object")
        out[section][key] = value
    return out


def load_config(path, overrides=()) -> PipelineConfig:
    """Read, override and validate a config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: config file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(apply_overrides(raw, overrides), base_dir=path.parent)


def with_section(config: PipelineConfig, name: str, **changes) -> PipelineConfig:
    return replace(config, **{name: replace(getattr(config, name), **changes)})
