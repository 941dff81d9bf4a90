import numpy as np
import pytest

from pixelcontrast import stats as st
from pixelcontrast.errors import DimensionError
from pixelcontrast.stats import IGNORE_LABEL, ClassStats


def pooled_oracle(pixels):
    """One-shot mean and population covariance, computed the direct way."""
    mu = pixels.mean(axis=0)
    d = pixels - mu
    return mu, d.T @ d / pixels.shape[0]


def test_downsample_constant_grid():
    grid = np.full((4, 4), 3)
    out = st.downsample_labels(grid, 2, 2)
    np.testing.assert_array_equal(out, np.full((2, 2), 3))


def test_downsample_identity_dims():
    grid = np.arange(12).reshape(3, 4)
    np.testing.assert_array_equal(st.downsample_labels(grid, 3, 4), grid)


def test_downsample_checkerboard_matches_index_oracle():
    grid = (np.add.outer(np.arange(4), np.arange(4)) % 2).astype(np.int64)
    out = st.downsample_labels(grid, 2, 2)
    oracle = np.empty((2, 2), dtype=np.int64)
    for i in range(2):
        for j in range(2):
            oracle[i, j] = grid[(i * 4) // 2, (j * 4) // 2]
    np.testing.assert_array_equal(out, oracle)


def test_downsample_preserves_ignore():
    grid = np.full((4, 4), IGNORE_LABEL)
    out = st.downsample_labels(grid, 2, 2)
    assert np.all(out == IGNORE_LABEL)


def test_downsample_zero_target_errors():
    with pytest.raises(ValueError):
        st.downsample_labels(np.zeros((4, 4), dtype=int), 0, 2)


def test_local_centroids_two_point_mean():
    feat = np.zeros((1, 2, 2))
    feat[0, 0] = [0.0, 0.0]
    feat[0, 1] = [2.0, 0.0]
    mask = np.zeros((1, 2), dtype=np.int64)
    out = st.local_centroids(feat, mask)
    centroid, m = out[0]
    np.testing.assert_allclose(centroid, [1.0, 0.0])
    assert m == 2


def test_local_centroids_all_ignore_empty():
    feat = np.ones((2, 2, 3))
    mask = np.full((2, 2), IGNORE_LABEL)
    assert st.local_centroids(feat, mask) == {}


def test_local_centroids_matches_accumulation_oracle(rng):
    feat = rng.standard_normal((8, 8, 5))
    mask = rng.integers(0, 3, size=(8, 8))
    out = st.local_centroids(feat, mask)
    for k in range(3):
        sel = feat[mask == k]
        if sel.size == 0:
            assert k not in out
            continue
        acc = np.zeros(5)
        for v in sel:
            acc += v
        np.testing.assert_allclose(out[k][0], acc / sel.shape[0], atol=1e-12)
        assert out[k][1] == sel.shape[0]


def test_local_centroids_dim_mismatch():
    with pytest.raises(DimensionError):
        st.local_centroids(np.ones((2, 2, 3)), np.zeros((3, 2), dtype=int))


def test_update_mean_first_batch_equals_batch():
    s = ClassStats(1, 2)
    s.update_mean(0, np.array([1.0, 0.0]), 2)
    np.testing.assert_allclose(s.mean[0], [1.0, 0.0])
    assert s.count[0] == 0  # count commits separately


def test_update_mean_pooled_example():
    # brute-force mean of {(0,0),(2,0),(4,0)} = (2,0)
    s = ClassStats(1, 2)
    s.update_mean(0, np.array([1.0, 0.0]), 2)
    s.commit_count(0, 2)
    s.update_mean(0, np.array([4.0, 0.0]), 1)
    np.testing.assert_allclose(s.mean[0], [2.0, 0.0])


def test_update_mean_fixed_point():
    s = ClassStats(1, 2)
    s.update_mean(0, np.array([0.5, -0.5]), 3)
    s.commit_count(0, 3)
    before = s.mean[0].copy()
    s.update_mean(0, before.copy(), 7)
    np.testing.assert_allclose(s.mean[0], before, atol=1e-15)


def test_update_mean_zero_count_errors():
    with pytest.raises(ValueError):
        ClassStats(1, 2).update_mean(0, np.zeros(2), 0)


def test_update_cov_one_dim_exact():
    # {0,2} then {4}: pooled population covariance of {0,2,4} is 8/3
    s = ClassStats(1, 1)
    s.update_cov(0, np.array([1.0]), np.array([[1.0]]), 2)
    s.update_cov(0, np.array([4.0]), np.array([[0.0]]), 1)
    assert s.cov[0, 0, 0] == 8.0 / 3.0
    assert s.mean[0, 0] == 2.0
    assert s.count[0] == 3


def test_update_cov_first_batch_is_batch_cov(rng):
    batch = rng.standard_normal((10, 3))
    mu, cov = pooled_oracle(batch)
    s = ClassStats(1, 3)
    s.update_cov(0, mu, cov, 10)
    np.testing.assert_allclose(s.cov[0], cov, atol=1e-14)
    np.testing.assert_allclose(s.mean[0], mu, atol=1e-14)


def test_stream_split_invariance(rng):
    pixels = rng.standard_normal((200, 4)) * 1.7 + 0.3
    mu_oracle, cov_oracle = pooled_oracle(pixels)
    for _ in range(10):
        s = ClassStats(1, 4)
        pos = 0
        while pos < 200:
            m = int(rng.integers(1, 50))
            batch = pixels[pos : pos + m]
            pos += batch.shape[0]
            bmu, bcov = pooled_oracle(batch)
            s.update_cov(0, bmu, bcov, batch.shape[0])
        assert np.linalg.norm(s.mean[0] - mu_oracle) / np.linalg.norm(mu_oracle) < 1e-10
        assert np.linalg.norm(s.cov[0] - cov_oracle) / np.linalg.norm(cov_oracle) < 1e-10
        assert s.count[0] == 200


def test_cov_symmetric_psd_after_updates(rng):
    s = ClassStats(2, 5)
    for _ in range(20):
        k = int(rng.integers(0, 2))
        batch = rng.standard_normal((int(rng.integers(2, 12)), 5))
        bmu, bcov = pooled_oracle(batch)
        s.update_cov(k, bmu, bcov, batch.shape[0])
        for c in range(2):
            np.testing.assert_allclose(s.cov[c], s.cov[c].T, atol=1e-10)
            assert np.linalg.eigvalsh(s.cov[c]).min() >= -1e-8


def test_unseen_classes_stay_zero(rng):
    s = ClassStats(3, 4)
    for _ in range(5):
        batch = rng.standard_normal((6, 4))
        bmu, bcov = pooled_oracle(batch)
        s.update_cov(1, bmu, bcov, 6)
    for k in (0, 2):
        assert s.count[k] == 0
        assert np.all(s.mean[k] == 0.0)
        assert np.all(s.cov[k] == 0.0)


def test_batch_permutation_invariance(rng, kernels):
    feat = rng.standard_normal((40, 3))
    lab = rng.integers(0, 3, size=40).astype(np.int64)
    perm = rng.permutation(40)
    c1, m1, v1 = kernels.class_moments(feat, lab, 3)
    c2, m2, v2 = kernels.class_moments(feat[perm], lab[perm], 3)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_allclose(m1, m2, atol=1e-12)
    np.testing.assert_allclose(v1, v2, atol=1e-12)


def test_prototypes_zero_initialized_flagged():
    s = ClassStats(3, 2)
    protos, initialized = s.prototypes()
    assert np.all(protos == 0.0)
    assert not initialized.any()


def test_prototypes_after_one_batch_per_class(rng):
    s = ClassStats(2, 3)
    batches = [rng.standard_normal((5, 3)), rng.standard_normal((7, 3))]
    for k, b in enumerate(batches):
        bmu, bcov = pooled_oracle(b)
        s.update_cov(k, bmu, bcov, b.shape[0])
    protos, initialized = s.prototypes()
    assert initialized.all()
    for k, b in enumerate(batches):
        np.testing.assert_allclose(protos[k], b.mean(axis=0), atol=1e-14)


def test_prototypes_long_stream_matches_pooled(rng):
    pixels = rng.standard_normal((150, 3)) + 2.0
    s = ClassStats(1, 3)
    pos = 0
    while pos < 150:
        m = int(rng.integers(1, 30))
        batch = pixels[pos : pos + m]
        pos += batch.shape[0]
        s.update_mean(0, batch.mean(axis=0), batch.shape[0])
        s.commit_count(0, batch.shape[0])
    protos, _ = s.prototypes()
    np.testing.assert_allclose(protos[0], pixels.mean(axis=0), rtol=1e-10)


def test_snapshot_roundtrip_bit_exact(rng):
    s = ClassStats(3, 4)
    for k in range(3):
        batch = rng.standard_normal((8, 4)) * np.pi
        bmu, bcov = pooled_oracle(batch)
        s.update_cov(k, bmu, bcov, 8)
    restored = ClassStats.loads(s.dumps())
    np.testing.assert_array_equal(restored.count, s.count)
    np.testing.assert_array_equal(restored.mean, s.mean)
    np.testing.assert_array_equal(restored.cov, s.cov)
    assert restored.dumps() == s.dumps()


def test_local_moments_population_convention(rng, kernels):
    feat = rng.standard_normal((6, 6, 3))
    mask = rng.integers(0, 2, size=(6, 6))
    moments = st.local_moments(feat, mask, 2)
    for k, (mu, cov, m) in moments.items():
        sel = feat[mask == k]
        omu, ocov = pooled_oracle(sel)
        np.testing.assert_allclose(mu, omu, atol=1e-12)
        np.testing.assert_allclose(cov, ocov, atol=1e-12)
        assert m == sel.shape[0]
