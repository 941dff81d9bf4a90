"""The compiled kernels and the numpy fallback must agree to float precision
on identical inputs (summation order may differ, hence tolerances)."""

import numpy as np
import pytest

from pixelcontrast.backend import available_backends

pytestmark = pytest.mark.skipif(
    "compiled" not in available_backends(), reason="compiled kernels not built")


def backends():
    m = available_backends()
    return m["python"], m["compiled"]


def test_backend_constants():
    py, cy = backends()
    assert py.BACKEND == "python" and cy.BACKEND == "compiled"


def test_class_moments_parity(rng):
    py, cy = backends()
    feat = rng.standard_normal((300, 7))
    lab = rng.integers(-1, 4, size=300).astype(np.int64)
    c1, m1, v1 = py.class_moments(feat, lab, 4)
    c2, m2, v2 = cy.class_moments(feat, lab, 4)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_allclose(m1, m2, atol=1e-13)
    np.testing.assert_allclose(v1, v2, atol=1e-13)


@pytest.mark.parametrize("use_sigma", [False, True])
def test_centroid_contrast_parity(rng, use_sigma):
    py, cy = backends()
    n, k, dim = 40, 5, 6
    q = rng.standard_normal((n, dim))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    lab = rng.integers(0, 3, size=n).astype(np.int64)  # only active classes
    mu = rng.standard_normal((k, dim)) * 0.8
    sigma = None
    if use_sigma:
        g = rng.standard_normal((k, dim, dim))
        sigma = np.einsum("kab,kcb->kac", g, g) * 0.05
    active = np.array([True, True, True, False, True])
    p1, g1 = py.centroid_contrast(q, lab, mu, sigma, 0.2, active)
    p2, g2 = cy.centroid_contrast(q, lab, mu, sigma, 0.2, active)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-12)


def test_bank_contrast_parity(rng):
    py, cy = backends()
    n, k, dim = 25, 4, 5
    q = rng.standard_normal((n, dim))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    lab = rng.integers(0, k, size=n).astype(np.int64)
    sizes = [3, 7, 1, 5]
    entries = rng.standard_normal((sum(sizes), dim)) * 0.7
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    p1, g1 = py.bank_contrast(q, lab, entries, offsets, 0.3)
    p2, g2 = cy.bank_contrast(q, lab, entries, offsets, 0.3)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-12)


def test_bank_contrast_parity_with_empty_negative_queue(rng):
    py, cy = backends()
    q = rng.standard_normal((6, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    lab = np.zeros(6, dtype=np.int64)
    sizes = [4, 0, 3]
    entries = rng.standard_normal((7, 4)) * 0.5
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    p1, g1 = py.bank_contrast(q, lab, entries, offsets, 0.5)
    p2, g2 = cy.bank_contrast(q, lab, entries, offsets, 0.5)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-12)
