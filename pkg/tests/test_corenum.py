import math

import numpy as np
import pytest

from pixelcontrast import corenum
from pixelcontrast.errors import DimensionError


def test_dot_orthogonal():
    assert corenum.dot([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_dot_hand():
    assert corenum.dot([1.0, 2.0], [3.0, 4.0]) == 11.0


def test_dot_matches_naive_loop(rng):
    a = rng.standard_normal(8)
    b = rng.standard_normal(8)
    naive = sum(float(x) * float(y) for x, y in zip(a, b))
    assert abs(corenum.dot(a, b) - naive) < 1e-12


def test_dot_length_mismatch():
    with pytest.raises(DimensionError):
        corenum.dot([1.0, 2.0], [1.0, 2.0, 3.0])


def test_quad_form_identity():
    assert corenum.quad_form([1.0, 0.0], np.eye(2)) == 1.0


def test_quad_form_zero_matrix():
    assert corenum.quad_form([1.0, 1.0], np.zeros((2, 2))) == 0.0


def test_quad_form_matches_double_loop(rng):
    q = rng.standard_normal(4)
    s = rng.standard_normal((4, 4))
    naive = sum(q[i] * s[i, j] * q[j] for i in range(4) for j in range(4))
    assert abs(corenum.quad_form(q, s) - naive) < 1e-12


def test_quad_form_dimension_errors():
    with pytest.raises(DimensionError):
        corenum.quad_form([1.0, 2.0], np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        corenum.quad_form([1.0, 2.0], np.zeros((2, 3)))


def test_quad_form_psd_nonnegative(rng):
    for _ in range(30):
        g = rng.standard_normal((5, 5))
        s = g @ g.T
        q = rng.standard_normal(5)
        assert corenum.quad_form(q, s) >= -1e-12


def test_l2_normalize_345():
    out, degenerate = corenum.l2_normalize([3.0, 4.0])
    assert not degenerate
    np.testing.assert_allclose(out, [0.6, 0.8], atol=1e-15)


def test_l2_normalize_zero_vector_flagged():
    out, degenerate = corenum.l2_normalize([0.0, 0.0])
    assert degenerate
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_l2_normalize_unit_norm(rng):
    for _ in range(20):
        v = rng.standard_normal(6) * rng.uniform(0.1, 50)
        out, degenerate = corenum.l2_normalize(v)
        assert not degenerate
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12


def test_l2_normalize_idempotent(rng):
    v = rng.standard_normal(5) * 7.5
    once, _ = corenum.l2_normalize(v)
    twice, _ = corenum.l2_normalize(once)
    np.testing.assert_allclose(twice, once, atol=1e-12)


def test_log_sum_exp_single_zero():
    assert corenum.log_sum_exp([0.0]) == 0.0


def test_log_sum_exp_no_overflow():
    val = corenum.log_sum_exp([1000.0, 1000.0])
    assert math.isfinite(val)
    assert abs(val - (1000.0 + math.log(2.0))) < 1e-12


def test_log_sum_exp_matches_naive(rng):
    xs = rng.uniform(-5, 5, size=10)
    naive = math.log(sum(math.exp(x) for x in xs))
    assert abs(corenum.log_sum_exp(xs) - naive) < 1e-12


def test_log_sum_exp_shift_invariance(rng):
    xs = rng.uniform(-3, 3, size=7)
    for c in (-100.0, 0.5, 250.0):
        assert abs(corenum.log_sum_exp(xs + c) - (corenum.log_sum_exp(xs) + c)) < 1e-10


def test_log_sum_exp_empty():
    with pytest.raises(ValueError):
        corenum.log_sum_exp([])


@pytest.mark.parametrize("a,b,expected", [
    ([1.0, 0.0], [1.0, 0.0], 1.0),
    ([1.0, 0.0], [0.0, 1.0], 0.0),
    ([1.0, 0.0], [-1.0, 0.0], -1.0),
])
def test_cosine_sim_examples(a, b, expected):
    assert corenum.cosine_sim(a, b) == expected


def test_cosine_sim_degenerate_is_zero():
    assert corenum.cosine_sim([0.0, 0.0], [1.0, 0.0]) == 0.0


def test_cosine_sim_range(rng):
    for _ in range(50):
        a = rng.standard_normal(4) * 10
        b = rng.standard_normal(4) * 0.1
        assert -1.0 <= corenum.cosine_sim(a, b) <= 1.0


def test_rng_reproducible_bitwise():
    a = corenum.make_rng(42).standard_normal(100)
    b = corenum.make_rng(42).standard_normal(100)
    np.testing.assert_array_equal(a, b)


def test_split_rng_label_independence():
    x = corenum.split_rng(7, "stream-a").standard_normal(50)
    y = corenum.split_rng(7, "stream-b").standard_normal(50)
    x2 = corenum.split_rng(7, "stream-a").standard_normal(50)
    np.testing.assert_array_equal(x, x2)
    assert not np.array_equal(x, y)


def test_split_rng_seed_matters():
    x = corenum.split_rng(1, "s").standard_normal(10)
    y = corenum.split_rng(2, "s").standard_normal(10)
    assert not np.array_equal(x, y)
