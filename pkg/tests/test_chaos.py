import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxdde import chaos

GOLDEN = np.array([[0, 1, 1], [1, 0, 0], [0, 1, 1]])


@pytest.fixture(scope="module")
def intervals(ex2):
    return chaos.build_intervals(ex2, n_grid=401)


def test_spectral_radius_golden():
    assert chaos.spectral_radius(GOLDEN.astype(float)) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-13)


@given(st.lists(st.integers(0, 1), min_size=9, max_size=9))
def test_spectral_radius_vs_eig(bits):
    adj = np.array(bits, dtype=float).reshape(3, 3)
    want = max(abs(np.linalg.eigvals(adj)))
    got = chaos.spectral_radius(adj, iters=20000, tol=1e-14)
    # power iteration may stall on periodic (imprimitive) matrices; primitive ones must agree
    if chaos.transitive_power(adj.astype(np.int64)) is not None:
        assert got == pytest.approx(want, abs=1e-9)


def test_transitive_power():
    assert chaos.transitive_power(GOLDEN) == 3
    assert chaos.transitive_power(np.array([[0, 1], [1, 0]])) is None
    assert chaos.transitive_power(np.ones((2, 2), dtype=int)) == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_closed_words_count_is_trace(n):
    assert len(chaos.closed_words(GOLDEN, n)) == np.trace(np.linalg.matrix_power(GOLDEN, n))


def test_divisor_sieve():
    # full 2-shift: 2^n fixed points of the n-th iterate
    least = chaos.divisor_sieve({1: 2, 2: 4, 3: 8, 4: 16, 6: 64})
    assert least == {1: 2, 2: 2, 3: 6, 4: 12, 6: 54}


def test_intervals_ex2(intervals):
    iv = intervals
    assert iv.p0 < iv.alpha < iv.kappa < iv.p1 < iv.R0
    assert iv.alpha == pytest.approx(1.03774178, abs=1e-7)
    assert iv.p1 == pytest.approx(1.19242378, abs=1e-7)
    assert iv.R0 == pytest.approx(2.2372776, abs=1e-6)
    assert iv.p0 == pytest.approx(0.2047, abs=1e-3)


def test_refusal_names_relation(ex2, intervals):
    cov = chaos.verify_coverings(ex2, intervals, n_grid=201, threshold=1.0)
    with pytest.raises(chaos.CertificationError) as info:
        chaos.markov_certificate(intervals, cov)
    assert info.value.relation is not None
    assert "in R(I" in info.value.relation


def test_coverings_hold_on_coarse_grid(ex2, intervals):
    cov = chaos.verify_coverings(ex2, intervals, n_grid=201)
    assert all(c.ok for c in cov)
    cert = chaos.markov_certificate(intervals, cov)
    assert np.array_equal(cert.adjacency, GOLDEN)
    assert cert.entropy_lower == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-12)
    assert cert.orbit_counts[:3] == (1, 3, 4)


def test_ex1_refused(ex1):
    with pytest.raises(chaos.CertificationError):
        chaos.certify(ex1, n_grid=201)
