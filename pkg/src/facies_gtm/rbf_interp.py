"""Gaussian radial-basis interpolation of attribute columns over voxel coordinates."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from .glcm_texture import ATTRIBUTES, AttributeTable

PREDICT_CHUNK = 8192


class SingularSystemError(np.linalg.LinAlgError):
    """The kernel system cannot be solved (e.g. duplicate centers with no ridge)."""


@dataclass(frozen=True, eq=False)
class RBFModel:
    centers: np.ndarray
    weights: np.ndarray
    kernel_width: float
    regularization: float = 0.0
    target_name: str = ""
    offset: float = 0.0

    def __post_init__(self):
        if len(self.weights) != len(self.centers):
            raise ValueError("weights and centers differ in length")
        if not self.kernel_width > 0:
            raise ValueError(f"kernel_width must be > 0, got {self.kernel_width}")


@dataclass(frozen=True)
class RBFConfig:
    width: float | None = None
    regularization: float = 1e-8
    split: float = 0.8
    seed: int = 0
    max_centers: int = 2000
    width_sample: int = 1000
    width_ladder: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)
    validation: float = 0.1
    center: bool = True
    proximity_scale: float | None = 0.1

    def __post_init__(self):
        if self.width is not None and not self.width > 0:
            raise ValueError(f"rbf.width must be > 0 or null, got {self.width}")
        if not self.regularization >= 0:
            raise ValueError(f"rbf.regularization must be >= 0, got {self.regularization}")
        if not 0 < self.split < 1:
            raise ValueError(f"rbf.split must lie in (0, 1), got {self.split}")
        if self.max_centers < 1:
            raise ValueError(f"rbf.max_centers must be >= 1, got {self.max_centers}")
        if not self.width_ladder or min(self.width_ladder) <= 0:
            raise ValueError("rbf.width_ladder must hold positive factors")
        if self.proximity_scale is not None and not self.proximity_scale > 0:
            raise ValueError(f"rbf.proximity_scale must be > 0 or null, got {self.proximity_scale}")
        if not 0 < self.validation < 1:
            raise ValueError(f"rbf.validation must lie in (0, 1), got {self.validation}")


@dataclass
class AttributeReport:
    attribute: str
    training_rmse: float
    testing_rmse: float
    n_train: int
    n_test: int
    kernel_width: float


@dataclass
class InterpolationReport:
    rows: list[AttributeReport] = field(default_factory=list)
    inputs: str = "normalized (inline, crossline, z) coordinates"

    def __getitem__(self, attribute) -> AttributeReport:
        for row in self.rows:
            if row.attribute == attribute:
                return row
        raise KeyError(attribute)


def gaussian_kernel(a, b, width: float) -> np.ndarray:
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * width * width))


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def fit(
    inputs, targets, kernel_width: float, regularization: float = 0.0, target_name: str = "", center: bool = False
) -> RBFModel:
    """Solve ``(K + lam I) w = y`` for Gaussian-kernel weights.

    With ``regularization == 0`` the interpolant passes through every target,
    which requires pairwise-distinct inputs. ``center=True`` fits the targets
    minus their mean and stores the mean as a constant offset, so predictions
    far from the data relax to the mean instead of zero.
    """
    s = _as_points(inputs)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if s.shape[0] == 0:
        raise ValueError("inputs must be nonempty")
    if s.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: {s.shape[0]} inputs vs {y.shape[0]} targets")
    if not (np.isfinite(s).all() and np.isfinite(y).all()):
        raise ValueError("inputs and targets must be finite")
    if not kernel_width > 0:
        raise ValueError(f"kernel_width must be > 0, got {kernel_width}")
    if regularization < 0:
        raise ValueError(f"regularization must be >= 0, got {regularization}")
    if regularization == 0 and len(np.unique(s, axis=0)) < len(s):
        raise SingularSystemError("duplicate centers make the kernel matrix singular at zero regularization")

    offset = float(y.mean()) if center else 0.0
    K = gaussian_kernel(s, s, kernel_width)
    K[np.diag_indices_from(K)] += regularization
    try:
        w = np.linalg.solve(K, y - offset)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"kernel system is singular: {exc}") from exc
    if not np.isfinite(w).all():
        raise SingularSystemError("kernel system produced non-finite weights")
    return RBFModel(s, w, float(kernel_width), float(regularization), target_name, offset)


def predict(model: RBFModel, query) -> np.ndarray | float:
    """Evaluate the interpolant at one point (returns a float) or a batch of points."""
    q = np.asarray(query, dtype=np.float64)
    dim = model.centers.shape[1]
    # a 1-D query is one point unless the centers themselves are scalars
    single = q.ndim == 0 or (q.ndim == 1 and dim > 1)
    q = q.reshape(1, -1) if single else _as_points(q)
    if q.shape[1] != model.centers.shape[1]:
        raise ValueError(f"dimension mismatch: query has {q.shape[1]} coordinates, centers {model.centers.shape[1]}")
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], PREDICT_CHUNK):
        block = q[start:start + PREDICT_CHUNK]
        out[start:start + PREDICT_CHUNK] = gaussian_kernel(block, model.centers, model.kernel_width) @ model.weights + model.offset
    return float(out[0]) if single else out


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.size} vs {a.size}")
    if p.size == 0:
        raise ValueError("rmse of empty lists")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def default_width(points, seed: int = 0, sample: int = 1000) -> float:
    """Median pairwise distance over a seeded subsample of ``points``."""
    points = _as_points(points)
    if len(points) > sample:
        rng = np.random.default_rng(seed)
        points = points[np.sort(rng.choice(len(points), sample, replace=False))]
    if len(points) < 2:
        return 1.0
    med = float(np.median(pdist(points)))
    return med if med > 0 else 1.0


def select_width(points, targets, config: RBFConfig, seed: int) -> float:
    """Pick a kernel width from a ladder of fractions of the median pairwise distance.

    Each candidate is fitted on a seeded carve of the training rows and scored
    on the remainder; the lowest validation RMSE wins (ties to the wider
    kernel). With fewer than two rows to spare the median width is returned.
    """
    base = default_width(points, seed, config.width_sample)
    if len(config.width_ladder) == 1 or len(points) < 4:
        return base * config.width_ladder[0]
    fit_rows, val_rows = split_rows(np.arange(len(points)), 1.0 - config.validation, seed + 104729)
    if len(val_rows) == 0:
        return base * config.width_ladder[0]
    best_width, best_err = None, np.inf
    for factor in config.width_ladder:
        width = base * factor
        try:
            model = fit(points[fit_rows], targets[fit_rows], width, config.regularization, center=config.center)
        except SingularSystemError:
            continue
        err = rmse(predict(model, points[val_rows]), targets[val_rows])
        if err < best_err:
            best_width, best_err = width, err
    return best_width if best_width is not None else base


def split_rows(rows: np.ndarray, split: float, seed: int):
    """Seeded train/test partition of row indices; train keeps at least one row."""
    rng = np.random.default_rng(seed)
    perm = rows[rng.permutation(len(rows))]
    n_train = min(len(rows), max(1, int(round(split * len(rows)))))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _pick_centers(rows, config: RBFConfig, seed: int, near=None):
    """Seeded subsample of ``max_centers`` training rows.

    With ``near`` (distance of every row to the closest missing row) the draw
    is weighted by ``exp(-near / proximity_scale)`` so centers concentrate
    where predictions will be made.
    """
    rng = np.random.default_rng(seed + 7919)
    p = None
    if near is not None:
        w = np.exp(-near[rows] / config.proximity_scale)
        p = w / w.sum()
    return np.sort(rng.choice(rows, config.max_centers, replace=False, p=p))


def fill_missing(table: AttributeTable, config: RBFConfig | None = None):
    """Fill every missing row of ``table`` by per-attribute RBF interpolation.

    Returns ``(filled_table, report)``. Observed rows are copied unchanged.
    """
    config = config or RBFConfig()
    coords = table.normalized_coordinates()
    values = table.values.copy()
    observed = np.flatnonzero(~table.missing)
    if observed.size == 0:
        raise ValueError("all-missing attribute column: nothing to interpolate from")
    missing = np.flatnonzero(table.missing)
    near = None
    if config.proximity_scale is not None and missing.size:
        near = cKDTree(coords[missing]).query(coords, k=1)[0]
    report = InterpolationReport()

    for col, name in enumerate(ATTRIBUTES):
        # one generator per attribute keeps each column reproducible on its own
        seed = config.seed + col
        train, test = split_rows(observed, config.split, seed)
        if len(train) > config.max_centers:
            train = _pick_centers(train, config, seed, near)
        s_train = coords[train]
        y_train = values[train, col]
        width = config.width or select_width(s_train, y_train, config, seed)
        model = fit(s_train, y_train, width, config.regularization, name, center=config.center)
        train_err = rmse(predict(model, s_train), y_train)
        test_err = rmse(predict(model, coords[test]), values[test, col]) if len(test) else 0.0
        report.rows.append(AttributeReport(name, train_err, test_err, len(train), len(test), width))
        if missing.size:
            values[missing, col] = predict(model, coords[missing])

    filled = AttributeTable(table.header, values, np.zeros_like(table.missing))
    return filled, report


def write_report(report: InterpolationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# rbf inputs: {report.inputs}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["attribute", "training_error", "testing_error", "n_train", "n_test"])
        for row in report.rows:
            writer.writerow([row.attribute, repr(row.training_rmse), repr(row.testing_rmse), row.n_train, row.n_test])


def read_report(path) -> InterpolationReport:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    report = InterpolationReport()
    for rec in csv.DictReader(lines):
        report.rows.append(
            AttributeReport(
                rec["attribute"], float(rec["training_error"]), float(rec["testing_error"]),
                int(rec["n_train"]), int(rec["n_test"]), float("nan"),
            )
        )
    return report
