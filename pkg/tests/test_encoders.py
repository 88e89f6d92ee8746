"""Block-average features and the PCA projection."""

import numpy as np
import pytest

from replan import (
    Video,
    default_pca_k,
    encode_frame,
    encode_video,
    load_projection,
    pca_apply,
    pca_fit,
    save_projection,
)


def test_encode_frame_single_pixel():
    frame = np.zeros((32, 32), dtype=np.float32)
    frame[9, 18] = 1.0
    feats = encode_frame(frame)
    assert feats.shape == (64,)
    # pixel (9, 18) lives in block (2, 4); blocks are row-major
    idx = (9 // 4) * 8 + 18 // 4
    assert feats[idx] == 0.0625
    assert feats.sum() == 0.0625


def test_encode_frame_shape_check():
    with pytest.raises(ValueError):
        encode_frame(np.zeros((16, 16)))


def test_encode_video_concat_order():
    pixels = np.zeros((2, 32, 32), dtype=np.float32)
    pixels[1, 0, 0] = 1.0
    feats = encode_video(Video(pixels))
    assert feats.shape == (128,)
    assert feats[:64].sum() == 0.0
    assert feats[64] == 0.0625

    f0 = encode_frame(pixels[0])
    f1 = encode_frame(pixels[1])
    assert np.array_equal(feats, np.concatenate([f0, f1]))


def test_pca_matches_eigendecomposition():
    rng = np.random.default_rng(21)
    for trial in range(20):
        n, d = int(rng.integers(5, 40)), int(rng.integers(3, 10))
        x = rng.normal(size=(n, d)) @ np.diag(rng.uniform(0.1, 3.0, d))
        k = min(3, d, n - 1)
        proj = pca_fit(x, k)

        cov = np.cov(x, rowvar=False, ddof=1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        expected = evecs[:, order[:k]].T
        for i in range(k):
            # eigenvectors match up to sign; align to the fitted convention
            if np.dot(expected[i], proj.components[i]) < 0:
                expected[i] = -expected[i]
            assert np.allclose(expected[i], proj.components[i], atol=1e-6), trial


def test_pca_orthonormal_and_signed():
    rng = np.random.default_rng(22)
    x = rng.normal(size=(30, 12))
    proj = pca_fit(x, 5)
    gram = proj.components @ proj.components.T
    assert np.allclose(gram, np.eye(5), atol=1e-8)
    for row in proj.components:
        assert row[np.argmax(np.abs(row))] > 0
    refit = pca_fit(x, 5)
    assert np.array_equal(refit.components, proj.components)
    assert np.array_equal(refit.mean, proj.mean)


def test_pca_degenerate_flag():
    # rank-1 data cannot support two informative components
    base = np.outer(np.arange(6, dtype=float), np.array([1.0, 2.0, 3.0]))
    proj = pca_fit(base, 2)
    assert proj.degenerate
    assert not pca_fit(base, 1).degenerate


def test_pca_validation():
    x = np.zeros((3, 4))
    with pytest.raises(ValueError):
        pca_fit(x, 3)  # k > n - 1
    with pytest.raises(ValueError):
        pca_fit(x, 0)
    with pytest.raises(ValueError):
        pca_fit(np.zeros((1, 4)), 1)
    with pytest.raises(ValueError):
        pca_fit(np.zeros(4), 1)
    proj = pca_fit(np.random.default_rng(0).normal(size=(5, 4)), 2)
    with pytest.raises(ValueError):
        pca_apply(proj, np.zeros(5))


def test_pca_apply_batch_and_center():
    rng = np.random.default_rng(23)
    x = rng.normal(size=(15, 8))
    proj = pca_fit(x, 3)
    batch = pca_apply(proj, x)
    assert batch.shape == (15, 3)
    for i in (0, 7, 14):
        assert np.allclose(batch[i], pca_apply(proj, x[i]), atol=1e-12)
    assert np.allclose(pca_apply(proj, proj.mean), 0.0, atol=1e-12)
    # projected training data is centered
    assert np.allclose(batch.mean(axis=0), 0.0, atol=1e-10)


def test_pca_rescale_variance():
    rng = np.random.default_rng(24)
    x = rng.normal(size=(40, 6)) * np.array([5.0, 2.0, 1.0, 0.5, 0.2, 0.1])
    proj = pca_fit(x, 3, rescale_variance=True)
    coords = pca_apply(proj, x)
    assert np.allclose(coords.std(axis=0, ddof=1), 1.0, atol=1e-8)

    raw = pca_apply(pca_fit(x, 3), x)
    assert not np.allclose(raw.std(axis=0, ddof=1), 1.0, atol=1e-2)


def test_default_pca_k():
    assert default_pca_k(100) == 16
    assert default_pca_k(10) == 9
    assert default_pca_k(3) == 2
    assert default_pca_k(2) == 1
    assert default_pca_k(100, dim=4) == 4


def test_projection_roundtrip(tmp_path):
    rng = np.random.default_rng(25)
    x = rng.normal(size=(12, 7))
    for rescale in (False, True):
        proj = pca_fit(x, 3, rescale_variance=rescale)
        path = tmp_path / f"proj-{rescale}.json"
        save_projection(proj, path)
        back = load_projection(path)
        assert np.array_equal(back.mean, proj.mean)
        assert np.array_equal(back.components, proj.components)
        assert back.k == proj.k
        assert back.degenerate == proj.degenerate
        assert back.rescale_variance == rescale
        query = rng.normal(size=7)
        assert np.allclose(pca_apply(back, query), pca_apply(proj, query), atol=1e-12)
