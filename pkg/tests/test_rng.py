import numpy as np

from crowdtypes.rng import derive_seed, substream


def test_same_path_same_stream():
    a = substream(7, "answers").random(100)
    b = substream(7, "answers").random(100)
    assert np.array_equal(a, b)


def test_distinct_paths_differ():
    a = substream(7, "answers").random(100)
    b = substream(7, "assign").random(100)
    c = substream(8, "answers").random(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_int_path_components():
    a = substream(7, "trial", 3).random(10)
    b = substream(7, "trial", 4).random(10)
    assert not np.array_equal(a, b)


def test_derive_seed_stable():
    assert derive_seed(42, "x", 1) == derive_seed(42, "x", 1)
    assert derive_seed(42, "x", 1) != derive_seed(42, "x", 2)
