"""Seeding scheme: derived streams and the counter-based sign layout."""

import numpy as np

from poisson_twosample.streams import (
    rademacher_matrix,
    rademacher_rows,
    seed_sequence,
    stream,
)


def test_same_path_reproduces():
    a = stream(42, 3, 7).random(10)
    b = stream(42, 3, 7).random(10)
    assert np.array_equal(a, b)


def test_different_paths_differ():
    a = stream(42, 3, 7).random(10)
    b = stream(42, 3, 8).random(10)
    c = stream(43, 3, 7).random(10)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rademacher_values_and_shape():
    signs = rademacher_matrix(stream(1, 2), 25, 13)
    assert signs.shape == (25, 13)
    assert signs.dtype == np.int8
    assert set(np.unique(signs)) <= {-1, 1}
    assert rademacher_matrix(stream(1, 2), 0, 13).shape == (0, 13)
    assert rademacher_matrix(stream(1, 2), 4, 0).shape == (4, 0)


def test_replicate_rows_are_randomly_accessible():
    # row b of the sign matrix must be reachable without drawing rows < b
    for cols in (1, 3, 4, 7, 16, 201):
        full = rademacher_matrix(stream(9, 1, 4), 50, cols)
        tail = rademacher_rows(seed_sequence(9, 1, 4), 17, 5, cols)
        assert np.array_equal(tail, full[17:22]), cols


def test_sign_matrix_prefix_property():
    # drawing fewer rows from the same stream yields a prefix of the larger draw
    big = rademacher_matrix(stream(5, 5), 40, 31)
    small = rademacher_matrix(stream(5, 5), 12, 31)
    assert np.array_equal(small, big[:12])


def test_signs_are_balanced():
    signs = rademacher_matrix(stream(0, 0), 200, 500)
    assert abs(signs.astype(float).mean()) < 0.01
