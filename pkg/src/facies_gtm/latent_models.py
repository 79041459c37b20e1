"""Generative topographic mapping trained by EM, plus the linear PCA baseline.

A square grid of latent nodes in ``[-1, 1]^2`` is pushed into data space by a
generalized linear map ``y(x) = W^T phi(x)`` built from Gaussian basis
functions and a bias term. Each mapped node is the center of an isotropic
Gaussian with precision ``beta``; the data density is the equal-weight mixture
of those Gaussians.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

BETA_MAX = 1e8
LATENT_DIM = 2


class DegenerateDataError(ValueError):
    """Input data (or the basis) cannot support a GTM/PCA fit."""


class SingularNormalEquationsError(np.linalg.LinAlgError):
    pass


def _axis(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)


def _regular_grid(rows: int, cols: int) -> np.ndarray:
    # row-major: node k = r * cols + c sits at (x_c, y_r)
    yy, xx = np.meshgrid(_axis(rows), _axis(cols), indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class LatentGrid:
    rows: int = 30
    cols: int = 30

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.rows}x{self.cols}")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def nodes(self) -> np.ndarray:
        return _regular_grid(self.rows, self.cols)


@dataclass(frozen=True)
class BasisSet:
    """Regular sub-grid of Gaussian centers; ``sigma=None`` means one grid spacing."""

    rows: int = 15
    cols: int = 15
    sigma: float | None = None
    sigma_scale: float = 1.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"basis dimensions must be >= 1, got {self.rows}x{self.cols}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.sigma_scale > 0:
            raise ValueError(f"sigma_scale must be > 0, got {self.sigma_scale}")

    @property
    def n_centers(self) -> int:
        return self.rows * self.cols

    @property
    def centers(self) -> np.ndarray:
        return _regular_grid(self.rows, self.cols)

    @property
    def width(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        n = max(self.rows, self.cols)
        spacing = 2.0 / (n - 1) if n > 1 else 1.0
        return self.sigma_scale * spacing


def build_design(grid: LatentGrid, basis: BasisSet) -> np.ndarray:
    """``K x (M + 1)`` basis activations of every node; last column is the bias."""
    sigma = basis.width
    act = np.exp(-cdist(grid.nodes, basis.centers, "sqeuclidean") / (2.0 * sigma * sigma))
    return np.hstack([act, np.ones((grid.n_nodes, 1))])


@dataclass(eq=False)
class GTMModel:
    grid: LatentGrid
    basis: BasisSet
    phi: np.ndarray
    W: np.ndarray
    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")
        if not np.isfinite(self.W).all():
            raise ValueError("W must be finite")

    @property
    def mapped_centers(self) -> np.ndarray:
        return self.phi @ self.W

    @property
    def data_dim(self) -> int:
        return self.W.shape[1]


@dataclass(eq=False)
class Responsibilities:
    r: np.ndarray
    log_likelihood: float


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 200
    ll_tolerance: float = 1e-5
    map_regularization: float = 1e-3
    seed: int = 0
    subsample: int = 50_000

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.ll_tolerance > 0:
            raise ValueError(f"ll_tolerance must be > 0, got {self.ll_tolerance}")
        if not self.map_regularization >= 0:
            raise ValueError(f"map_regularization must be >= 0, got {self.map_regularization}")
        if self.subsample < 1:
            raise ValueError(f"subsample must be >= 1, got {self.subsample}")


# --------------------------------------------------------------------------
# PCA


@dataclass(frozen=True, eq=False)
class PCAFit:
    mean: np.ndarray
    components: np.ndarray  # (D, D), column j is the j-th principal direction
    eigenvalues: np.ndarray  # descending


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca_fit(data) -> PCAFit:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] <= data.shape[1]:
        raise DegenerateDataError(f"need N > D, got data of shape {data.shape}")
    if not np.isfinite(data).all():
        raise DegenerateDataError("data must be finite")
    mean = data.mean(axis=0)
    X = data - mean
    cov = X.T @ X / data.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    if vals[0] <= 1e-12 * max(1.0, float(np.abs(data).max())) ** 2:
        raise DegenerateDataError("data has zero variance")
    return PCAFit(mean, _orient(vecs[:, order]), vals)


def linear_baseline(data) -> np.ndarray:
    """Project centered data onto its top two principal directions."""
    fit = pca_fit(data)
    return (np.asarray(data, dtype=np.float64) - fit.mean) @ fit.components[:, :LATENT_DIM]


def pca_reconstruction(data) -> np.ndarray:
    """Orthogonal projection of every row onto the best-fitting PCA plane."""
    data = np.asarray(data, dtype=np.float64)
    fit = pca_fit(data)
    V = fit.components[:, :LATENT_DIM]
    return fit.mean + ((data - fit.mean) @ V) @ V.T


# --------------------------------------------------------------------------
# GTM


def pca_init(data, grid: LatentGrid, phi: np.ndarray):
    """Initial ``(W, beta)`` placing the mapped grid on the principal plane.

    Grid coordinates are standardized per latent axis and mapped through the
    top two principal directions scaled by their standard deviations. The
    initial noise variance is the larger of the third covariance eigenvalue
    and half the mean squared nearest-neighbour distance between mapped nodes.
    """
    data = np.asarray(data, dtype=np.float64)
    fit = pca_fit(data)
    if np.linalg.matrix_rank(phi) < phi.shape[1]:
        raise DegenerateDataError(
            "design matrix is rank deficient; adjust sigma or the basis grid"
        )
    Z = grid.nodes
    std = Z.std(axis=0)
    Z = (Z - Z.mean(axis=0)) / np.where(std > 0, std, 1.0)
    A = fit.components[:, :LATENT_DIM] * np.sqrt(fit.eigenvalues[:LATENT_DIM])
    target = Z @ A.T + fit.mean
    W, *_ = np.linalg.lstsq(phi, target, rcond=None)

    Y = phi @ W
    if len(Y) > 1:
        d2 = cdist(Y, Y, "sqeuclidean")
        np.fill_diagonal(d2, np.inf)
        spacing_term = 0.5 * float(d2.min(axis=1).mean())
    else:
        spacing_term = 0.0
    eig_term = float(fit.eigenvalues[LATENT_DIM]) if len(fit.eigenvalues) > LATENT_DIM else 0.0
    beta_inv = max(eig_term, spacing_term)
    beta = BETA_MAX if beta_inv <= 1.0 / BETA_MAX else 1.0 / beta_inv
    return W, beta


def e_step(model: GTMModel, data) -> Responsibilities:
    """Posterior node responsibilities and the data log-likelihood."""
    data = np.asarray(data, dtype=np.float64)
    d2 = cdist(data, model.mapped_centers, "sqeuclidean")
    return _responsibilities(d2, model.beta, data.shape[1])


def _responsibilities(d2, beta, dim) -> Responsibilities:
    """Normalize ``exp(-beta/2 * d2)`` over nodes in place; ``d2`` is consumed."""
    n, k = d2.shape
    d2 *= -0.5 * beta
    shift = d2.max(axis=1)
    d2 -= shift[:, None]
    # exp below ~-708 yields subnormals, which are very slow to produce and consume
    d2[d2 < -700.0] = -np.inf
    np.exp(d2, out=d2)
    total = d2.sum(axis=1)
    d2 /= total[:, None]
    ll = float(np.sum(shift + np.log(total)))
    ll += n * (0.5 * dim * math.log(beta / (2.0 * math.pi)) - math.log(k))
    return Responsibilities(d2, ll)


def m_step(resp: Responsibilities, data, phi, map_regularization: float = 0.0, beta_old: float = 1.0):
    """Updated ``(W, beta)`` from the normal equations and the weighted residual."""
    W, beta, _ = _m_step(resp, np.asarray(data, dtype=np.float64), phi, map_regularization, beta_old)
    return W, beta


def _m_step(resp, data, phi, map_regularization, beta_old):
    r = resp.r
    n, d = data.shape
    g = r.sum(axis=0)
    A = phi.T @ (g[:, None] * phi)
    if map_regularization:
        A[np.diag_indices_from(A)] += map_regularization / beta_old
    B = phi.T @ (r.T @ data)
    try:
        W = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquationsError(
            "M-step normal equations are singular; increase map_regularization"
        ) from exc
    if not np.isfinite(W).all():
        raise SingularNormalEquationsError("M-step produced non-finite weights")
    d2 = cdist(data, phi @ W, "sqeuclidean")
    beta_inv = float(np.einsum("nk,nk->", r, d2)) / (n * d)
    beta = BETA_MAX if beta_inv <= 1.0 / BETA_MAX else 1.0 / beta_inv
    return W, beta, d2


def stratified_subsample(n: int, cap: int, seed: int) -> np.ndarray:
    """One seeded pick from each of ``cap`` contiguous strata of ``range(n)``."""
    if n <= cap:
        return np.arange(n)
    edges = np.linspace(0, n, cap + 1).astype(np.int64)
    rng = np.random.default_rng(seed)
    width = np.diff(edges)
    return edges[:-1] + np.floor(rng.random(cap) * width).astype(np.int64)


def train(data, grid: LatentGrid | None = None, basis: BasisSet | None = None, config: TrainConfig | None = None):
    """Fit a GTM by EM; returns ``(model, trace)``.

    ``trace[i]`` is the log-likelihood after the ``i``-th M-step. Training
    stops once the relative change drops below ``ll_tolerance`` or after
    ``max_iterations`` cycles. Rows beyond ``config.subsample`` are thinned
    by :func:`stratified_subsample`.
    """
    grid = grid or LatentGrid()
    basis = basis or BasisSet()
    config = config or TrainConfig()
    data = np.asarray(data, dtype=np.float64)
    data = data[stratified_subsample(len(data), config.subsample, config.seed)]

    phi = build_design(grid, basis)
    W, beta = pca_init(data, grid, phi)
    model = GTMModel(grid, basis, phi, W, beta)
    resp = e_step(model, data)
    prev = resp.log_likelihood
    trace = []
    for _ in range(config.max_iterations):
        W, beta, d2 = _m_step(resp, data, phi, config.map_regularization, model.beta)
        model = GTMModel(grid, basis, phi, W, beta)
        # the M-step residuals are exactly the distances the next E-step needs
        resp = _responsibilities(d2, beta, data.shape[1])
        ll = resp.log_likelihood
        trace.append(ll)
        if abs(ll - prev) < config.ll_tolerance * abs(prev):
            break
        prev = ll
    return model, np.array(trace)


def project_mean(resp: Responsibilities, grid: LatentGrid) -> np.ndarray:
    return np.clip(resp.r @ grid.nodes, -1.0, 1.0)


def project_mode(resp: Responsibilities, grid: LatentGrid) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the smallest node index
    return grid.nodes[np.argmax(resp.r, axis=1)]


def project_in_chunks(model: GTMModel, data, chunk: int = 20_000) -> np.ndarray:
    """Posterior means for arbitrarily many rows without holding all responsibilities."""
    data = np.asarray(data, dtype=np.float64)
    out = np.empty((len(data), LATENT_DIM))
    for start in range(0, len(data), chunk):
        out[start:start + chunk] = project_mean(e_step(model, data[start:start + chunk]), model.grid)
    return out


def gtm_reconstruction(model: GTMModel, data) -> np.ndarray:
    """Responsibility-weighted mapped center for every data row."""
    return e_step(model, data).r @ model.mapped_centers


# --------------------------------------------------------------------------
# serialization


def model_to_dict(model: GTMModel, config: TrainConfig | None = None, extra: dict | None = None) -> dict:
    obj = {
        "grid": [model.grid.rows, model.grid.cols],
        "basis": [model.basis.rows, model.basis.cols],
        "sigma": model.basis.width,
        "beta": model.beta,
        "data_dim": model.data_dim,
        "W": [float(v) for v in model.W.ravel()],
        "config": asdict(config) if config is not None else None,
    }
    if extra:
        obj.update(extra)
    return obj


def model_from_dict(obj: dict) -> GTMModel:
    grid = LatentGrid(*obj["grid"])
    basis = BasisSet(obj["basis"][0], obj["basis"][1], sigma=float(obj["sigma"]))
    phi = build_design(grid, basis)
    W = np.asarray(obj["W"], dtype=np.float64).reshape(phi.shape[1], int(obj["data_dim"]))
    return GTMModel(grid, basis, phi, W, float(obj["beta"]))


def save_model(model: GTMModel, path, config: TrainConfig | None = None, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, config, extra), fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[GTMModel, dict]:
    with open(path) as fh:
        obj = json.load(fh)
    return model_from_dict(obj), obj


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "log_likelihood"])
        for i, ll in enumerate(trace, start=1):
            writer.writerow([i, repr(float(ll))])


def read_trace(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([float(rec["log_likelihood"]) for rec in csv.DictReader(fh)])
