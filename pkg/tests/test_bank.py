import numpy as np
import pytest

from pixelcontrast.bank import CentroidBank
from pixelcontrast.errors import DimensionError


def vec(x):
    return np.array([float(x), 0.0])


def test_enqueue_below_capacity():
    bank = CentroidBank(1, 2, capacity=2)
    bank.enqueue(0, vec(1))
    np.testing.assert_array_equal(bank.snapshot(0), [vec(1)])


def test_enqueue_fifo_eviction():
    bank = CentroidBank(1, 2, capacity=2)
    for x in (1, 2, 3):
        bank.enqueue(0, vec(x))
    np.testing.assert_array_equal(bank.snapshot(0), [vec(2), vec(3)])


def test_long_sequence_matches_list_slice_oracle():
    bank = CentroidBank(1, 2, capacity=200)
    history = []
    for x in range(1000):
        v = vec(x)
        history.append(v)
        bank.enqueue(0, v)
    np.testing.assert_array_equal(bank.snapshot(0), np.array(history[-200:]))


def test_snapshot_empty():
    bank = CentroidBank(2, 3)
    assert bank.snapshot(1).shape == (0, 3)


def test_snapshot_is_copy():
    bank = CentroidBank(1, 2, capacity=4)
    bank.enqueue(0, vec(1))
    snap = bank.snapshot(0)
    bank.enqueue(0, vec(2))
    np.testing.assert_array_equal(snap, [vec(1)])


def test_queues_independent():
    bank = CentroidBank(2, 2, capacity=3)
    bank.enqueue(0, vec(1))
    bank.enqueue(1, vec(9))
    assert bank.size(0) == 1 and bank.size(1) == 1
    np.testing.assert_array_equal(bank.snapshot(1), [vec(9)])


def test_capacity_never_exceeded(rng):
    bank = CentroidBank(3, 2, capacity=5)
    for _ in range(100):
        bank.enqueue(int(rng.integers(0, 3)), rng.standard_normal(2))
    assert (bank.sizes() <= 5).all()


def test_bad_class_index():
    bank = CentroidBank(2, 2)
    with pytest.raises(ValueError):
        bank.enqueue(2, vec(1))


def test_bad_dim():
    bank = CentroidBank(1, 3)
    with pytest.raises(DimensionError):
        bank.enqueue(0, np.zeros(2))


def test_nonfinite_rejected():
    bank = CentroidBank(1, 2)
    with pytest.raises(ValueError):
        bank.enqueue(0, np.array([np.nan, 0.0]))


def test_packed_layout(rng):
    bank = CentroidBank(3, 2, capacity=4)
    bank.enqueue(0, vec(1))
    bank.enqueue(2, vec(5))
    bank.enqueue(2, vec(6))
    entries, offsets = bank.packed()
    np.testing.assert_array_equal(offsets, [0, 1, 1, 3])
    np.testing.assert_array_equal(entries, [vec(1), vec(5), vec(6)])


def test_json_roundtrip(rng):
    bank = CentroidBank(2, 3, capacity=4)
    for _ in range(6):
        bank.enqueue(int(rng.integers(0, 2)), rng.standard_normal(3))
    restored = CentroidBank.from_json(bank.to_json())
    for k in range(2):
        np.testing.assert_array_equal(restored.snapshot(k), bank.snapshot(k))
