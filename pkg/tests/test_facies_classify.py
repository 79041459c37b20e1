import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from facies_gtm.facies_classify import (
    _lloyd,
    _plusplus_init,
    adjusted_rand_index,
    assemble_map,
    cluster_latent,
    read_facies_csv,
    write_facies_csv,
)
from facies_gtm.volume_io import UNLABELED, VolumeHeader


def blobs(rng, n_per=50, spread=0.05):
    centers = np.array([[-0.6, -0.6], [0.6, -0.6], [-0.6, 0.6], [0.6, 0.6]])
    sizes = [n_per + 10 * i for i in range(4)]
    points = np.vstack([c + spread * rng.normal(size=(s, 2)) for c, s in zip(centers, sizes)])
    truth = np.repeat(np.arange(4), sizes)
    return points, truth


def test_single_cluster_is_mean(rng):
    pts = rng.normal(size=(30, 2))
    model, labels = cluster_latent(pts, 1, seed=0)
    assert np.all(labels == 1)
    np.testing.assert_allclose(model.centroids[0], pts.mean(axis=0), atol=1e-15)


def test_separated_blobs_recovered(rng):
    pts, truth = blobs(rng)
    _, labels = cluster_latent(pts, 4, seed=2)
    assert adjusted_rand_index(labels, truth) == 1.0


def test_labels_ordered_by_size(rng):
    pts, truth = blobs(rng)
    _, labels = cluster_latent(pts, 4, seed=0)
    sizes = np.bincount(labels)[1:]
    assert np.all(np.diff(sizes) <= 0)
    # the largest generating blob is the last one
    assert np.all(labels[truth == 3] == 1)


def test_clustering_deterministic(rng):
    pts = rng.normal(size=(200, 2))
    m1, l1 = cluster_latent(pts, 5, seed=11)
    m2, l2 = cluster_latent(pts, 5, seed=11)
    assert np.array_equal(l1, l2) and np.array_equal(m1.centroids, m2.centroids) and m1.inertia == m2.inertia


def test_too_few_points():
    with pytest.raises(ValueError, match="at least"):
        cluster_latent(np.zeros((2, 2)), 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
def test_lloyd_inertia_never_increases(seed, k):
    r = np.random.default_rng(seed)
    pts = r.normal(size=(80, 2))
    _, _, _, _, trace = _lloyd(pts, _plusplus_init(pts, k, r))
    assert np.all(np.diff(trace) <= 1e-12 * max(trace[0], 1.0))


def test_centroids_distinct(rng):
    pts = rng.normal(size=(100, 2))
    model, _ = cluster_latent(pts, 4, seed=1)
    assert len(np.unique(model.centroids, axis=0)) == 4
    assert np.isfinite(model.inertia) and model.inertia >= 0


# -------------------------------------------------------------------- ARI


def test_ari_identical_and_permuted():
    a = [1, 1, 2, 2, 3, 3, 3]
    assert adjusted_rand_index(a, a) == 1.0
    assert adjusted_rand_index(a, [7, 7, 5, 5, 9, 9, 9]) == 1.0


def test_ari_contingency_hand_value():
    # contingency [[2,1],[0,3]]: sum C(n_ij,2)=4, rows 3+3, cols 1+6, C(6,2)=15
    a = [0, 0, 0, 1, 1, 1]
    b = [0, 0, 1, 1, 1, 1]
    expected = (4 - 6 * 7 / 15) / (0.5 * (6 + 7) - 6 * 7 / 15)
    assert adjusted_rand_index(a, b) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.3243243243243243, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(st.integers(0, 4), min_size=2, max_size=25),
    perm=st.permutations(range(5)),
    seed=st.integers(0, 1000),
)
def test_ari_properties(a, perm, seed):
    b = list(np.random.default_rng(seed).integers(0, 3, len(a)))
    value = adjusted_rand_index(a, b)
    assert value == pytest.approx(oracles.adjusted_rand_index(a, b), abs=1e-12)
    assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12
    assert adjusted_rand_index(a, [perm[v] for v in a]) == pytest.approx(1.0, abs=1e-12)
    assert value == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)


def test_ari_length_checks():
    with pytest.raises(ValueError):
        adjusted_rand_index([1, 2], [1])
    with pytest.raises(ValueError):
        adjusted_rand_index([1], [1])


# ------------------------------------------------------------------- maps


def test_assemble_without_mask():
    header = VolumeHeader.from_shape((2, 3, 2))
    labels = np.arange(12) % 3 + 1
    fm = assemble_map(labels, np.zeros(12, bool), header, 3)
    assert np.array_equal(fm.labels.ravel(), labels)


def test_assemble_all_masked():
    header = VolumeHeader.from_shape((2, 2, 2))
    fm = assemble_map([], np.ones(8, bool), header, 4)
    assert np.all(fm.labels == UNLABELED)


def test_assemble_random_mask_positions(rng):
    header = VolumeHeader.from_shape((4, 3, 5))
    mask = rng.random(60) < 0.4
    labels = rng.integers(1, 5, int((~mask).sum()))
    fm = assemble_map(labels, mask, header, 4)
    j = 0
    for flat in range(60):
        i0, rem = divmod(flat, 15)
        i1, i2 = divmod(rem, 5)
        if mask[flat]:
            assert fm.labels[i0, i1, i2] == UNLABELED
        else:
            assert fm.labels[i0, i1, i2] == labels[j]
            j += 1


def test_assemble_count_mismatch():
    with pytest.raises(ValueError, match="count mismatch"):
        assemble_map([1, 2], np.zeros(8, bool), VolumeHeader.from_shape((2, 2, 2)), 2)


def test_facies_csv_round_trip(tmp_path, rng):
    header = VolumeHeader((5, 6), (1, 3), (0, 8), 4.0)
    labels = rng.integers(0, 4, header.n_voxels)
    fm = assemble_map(labels[labels > 0], labels == 0, header, 3)
    write_facies_csv(fm, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "inline,crossline,z,label"
    assert lines[2] == f"5,1,4,{fm.labels[0, 0, 1]}"
    back = read_facies_csv(tmp_path / "f.csv", header, 3)
    assert np.array_equal(back.labels, fm.labels)
