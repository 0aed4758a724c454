import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liftedve.core import (
    histogram_add,
    histogram_count,
    histogram_index,
    histogram_matrix,
    histogram_range,
    log_multiplicities,
    multiplicity,
)
from liftedve.errors import StructuralError
from oracles import naive_histograms, naive_mul


def test_order_r2_n3():
    assert histogram_range(2, 3) == ((3, 0), (2, 1), (1, 2), (0, 3))


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2, 4])
def test_range_matches_enumeration(r, n):
    assert list(histogram_range(r, n)) == naive_histograms(r, n)


@pytest.mark.parametrize("r,n", [(2, 3), (3, 3), (3, 4), (4, 2)])
def test_multiplicity_matches_enumeration(r, n):
    for h in histogram_range(r, n):
        assert multiplicity(h) == naive_mul(h)


@pytest.mark.parametrize("r", range(1, 5))
@pytest.mark.parametrize("n", range(0, 11))
def test_mul_sums_to_r_pow_n(r, n):
    assert sum(multiplicity(h) for h in histogram_range(r, n)) == r**n


@pytest.mark.parametrize("r", range(1, 5))
@pytest.mark.parametrize("n", range(0, 11))
def test_histogram_count(r, n):
    assert len(histogram_range(r, n)) == histogram_count(r, n) == math.comb(n + r - 1, r - 1)


def test_multiplicity_is_exact_for_large_n():
    assert multiplicity((500, 500)) == math.comb(1000, 500)
    lm = log_multiplicities(2, 1000)
    assert lm[500] == pytest.approx(math.lgamma(1001) - 2 * math.lgamma(501), rel=1e-12)


def test_index_roundtrip():
    idx = histogram_index(3, 4)
    for i, h in enumerate(histogram_range(3, 4)):
        assert idx[h] == i


def test_matrix_rows_are_histograms():
    H = histogram_matrix(3, 2)
    assert H.shape == (6, 3)
    assert (H.sum(axis=1) == 2).all()


def test_add():
    assert histogram_add((1, 2), (3, 0)) == (4, 2)
    with pytest.raises(StructuralError):
        histogram_add((1, 2), (1, 2, 3))


def test_bad_arguments():
    with pytest.raises(StructuralError):
        histogram_range(0, 2)


@given(st.integers(1, 4), st.integers(0, 8), st.integers(0, 8))
def test_add_covers_split_counts(r, a, b):
    # every histogram of a+b splits into one of a and one of b
    sums = {histogram_add(h1, h2) for h1 in histogram_range(r, a) for h2 in histogram_range(r, b)}
    assert sums == set(histogram_range(r, a + b))


@given(st.integers(1, 4), st.integers(0, 30))
def test_log_multiplicities_normalize(r, n):
    lm = log_multiplicities(r, n)
    assert np.isclose(np.logaddexp.reduce(lm), n * math.log(r))
