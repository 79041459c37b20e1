"""Facies labels from latent projections: k-means, map assembly and ARI."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .volume_io import UNLABELED, FaciesMap, VolumeHeader

MAX_LLOYD_ITERATIONS = 100


@dataclass(eq=False)
class ClusterModel:
    centroids: np.ndarray
    seed: int
    inertia: float
    n_iterations: int = 0
    inertia_trace: list = field(default_factory=list)


def _sq_dist(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plusplus_init(points, n_clusters, rng):
    """k-means++ seeding: each new center drawn with probability ~ squared distance."""
    n = len(points)
    chosen = [int(rng.integers(n))]
    dist = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, n_clusters):
        total = dist.sum()
        if total > 0:
            nxt = int(np.searchsorted(np.cumsum(dist), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        else:
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        dist = np.minimum(dist, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _lloyd(points, centroids):
    n, n_clusters = len(points), len(centroids)
    rows = np.arange(n)
    assign = None
    trace = []
    it = 0
    for it in range(1, MAX_LLOYD_ITERATIONS + 1):
        d2 = _sq_dist(points, centroids)
        new_assign = np.argmin(d2, axis=1)
        trace.append(float(d2[rows, new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(n_clusters):
            members = assign == c
            if members.any():
                centroids[c] = points[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point worst served by its centroid
                worst = int(np.argmax(d2[rows, assign]))
                centroids[c] = points[worst]
                assign[worst] = c
    d2 = _sq_dist(points, centroids)
    assign = np.argmin(d2, axis=1)
    return centroids, assign, float(d2[rows, assign].sum()), it, trace


def cluster_latent(projections, n_clusters: int = 4, seed: int = 0, n_init: int = 10):
    """k-means on latent positions; returns ``(ClusterModel, labels)``.

    ``n_init`` seeded k-means++ starts are refined by Lloyd iterations and the
    lowest-inertia solution is kept. Labels are renumbered ``1..C`` in
    decreasing cluster size (ties by the lower original index) so maps are
    comparable between runs.
    """
    points = np.asarray(projections, dtype=np.float64)
    n = len(points)
    if n_clusters < 1:
        raise ValueError(f"number of clusters must be >= 1, got {n_clusters}")
    if n < n_clusters:
        raise ValueError(f"need at least {n_clusters} points, got {n}")
    if not np.isfinite(points).all():
        raise ValueError("projections must be finite")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        result = _lloyd(points, _plusplus_init(points, n_clusters, rng))
        if best is None or result[2] < best[2]:
            best = result
    centroids, assign, inertia, it, trace = best

    sizes = np.bincount(assign, minlength=n_clusters)
    order = sorted(range(n_clusters), key=lambda c: (-sizes[c], c))
    relabel = np.empty(n_clusters, dtype=np.int64)
    relabel[order] = np.arange(1, n_clusters + 1)
    model = ClusterModel(centroids[order], seed, inertia, it, trace)
    return model, relabel[assign].astype(np.int32)


def assemble_map(labels, mask, header: VolumeHeader, n_facies: int | None = None) -> FaciesMap:
    """Scatter labels onto the unmasked voxels (C order); masked voxels stay unlabeled."""
    labels = np.asarray(labels, dtype=np.int32).ravel()
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != header.n_voxels:
        raise ValueError(f"mask has {mask.size} entries, volume has {header.n_voxels} voxels")
    if labels.size != int((~mask).sum()):
        raise ValueError(f"count mismatch: {labels.size} labels for {int((~mask).sum())} unmasked voxels")
    out = np.full(header.n_voxels, UNLABELED, dtype=np.int32)
    out[~mask] = labels
    if n_facies is None:
        n_facies = int(labels.max(initial=0))
    return FaciesMap(header, out.reshape(header.shape), n_facies)


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected Rand index of two labelings of the same items."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("ARI needs at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_cells = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(a.size)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all-in-one or all-singletons): agreement is perfect
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def write_facies_csv(facies: FaciesMap, path) -> None:
    il, xl, z = facies.header.axis_values()
    labels = facies.labels
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["inline", "crossline", "z", "label"])
        for i, inl in enumerate(il):
            for j, xln in enumerate(xl):
                row = labels[i, j]
                for k, zz in enumerate(z):
                    writer.writerow([int(inl), int(xln), _fmt_z(zz), int(row[k])])


def _fmt_z(z) -> str:
    z = float(z)
    return str(int(z)) if z.is_integer() else repr(z)


def read_facies_csv(path, header: VolumeHeader, n_facies: int | None = None) -> FaciesMap:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != header.n_voxels:
        raise ValueError(f"facies CSV has {len(rows)} rows, geometry expects {header.n_voxels}")
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int32).reshape(header.shape)
    if n_facies is None:
        n_facies = int(labels.max(initial=0))
    return FaciesMap(header, labels, n_facies)
