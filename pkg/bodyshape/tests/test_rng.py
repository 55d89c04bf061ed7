import logging

import numpy as np
import pytest

from bodyshape.rng import SplitMix64, derive_seed

logger = logging.getLogger(__name__)


def test_reference_stream():
    logger.debug('test_reference_stream')
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


def test_vector_matches_scalar():
    logger.debug('test_vector_matches_scalar')
    scalar = SplitMix64(12345)
    expected = [scalar.next_u64() for _ in range(10)]
    vector = SplitMix64(12345)
    assert vector.u64(4).tolist() + vector.u64(6).tolist() == expected
    assert vector.next_u64() == scalar.next_u64()


def test_determinism():
    logger.debug('test_determinism')
    a, b = SplitMix64(7), SplitMix64(7)
    assert np.array_equal(a.normal(size=50), b.normal(size=50))
    assert np.array_equal(a.permutation(20), b.permutation(20))
    assert a.integers(9) == b.integers(9)


def test_ranges():
    logger.debug('test_ranges')
    rng = SplitMix64(3)
    values = rng.random(1000)
    assert values.min() >= 0 and values.max() < 1
    draws = rng.integers(4, size=1000)
    assert set(draws.tolist()) == {0, 1, 2, 3}
    assert sorted(rng.permutation(10).tolist()) == list(range(10))


def test_choice():
    logger.debug('test_choice')
    rng = SplitMix64(5)
    picks = {rng.choice([0, 1, 0, 2]) for _ in range(200)}
    assert picks == {1, 3}
    with pytest.raises(ValueError):
        rng.choice([0, 0])
    with pytest.raises(ValueError):
        rng.choice([1, -1])


def test_derive_seed():
    logger.debug('test_derive_seed')
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(1, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(9) == 9
    child = SplitMix64(4).spawn(1)
    assert child.seed == derive_seed(4, 1)
