import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipool.autodiff import DimensionError, DomainError
from hipool.graph import (
    build_chain,
    build_clusters,
    build_complete,
    build_cross_mask,
    build_low_adjacency,
    gcn_normalize,
    lift_adjacency,
)


def window_oracle(n, p):
    """Brute-force cluster assignment by enumerating each window's members."""
    m = -(-n // p)
    out = [[0] * m for _ in range(n)]
    for j in range(m):
        for i in range(j * p, j * p + 2 * p):
            if i < n:
                out[i][j] = 1
    return np.array(out, dtype=float)


def naive_triple(a, s):
    n, m = s.shape
    out = np.zeros((m, m))
    for x in range(m):
        for y in range(m):
            for i in range(n):
                for k in range(n):
                    out[x, y] += s[i, x] * a[i, k] * s[k, y]
    return out


def test_chain_examples():
    assert build_chain(1).tolist() == [[0.0]]
    assert build_chain(3).tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
    a5 = build_chain(5)
    assert np.array_equal(a5, a5.T)
    enumerated = [sum(1 for j in range(5) if abs(i - j) == 1) for i in range(5)]
    assert a5.sum(axis=1).tolist() == enumerated == [1, 2, 2, 2, 1]
    with pytest.raises(DomainError):
        build_chain(0)


def test_complete_mode():
    assert build_complete(3).tolist() == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    assert np.array_equal(build_low_adjacency(4, "chain"), build_chain(4))
    with pytest.raises(DomainError):
        build_low_adjacency(4, "bigbird")


def test_cluster_examples():
    assert build_clusters(2, 2).tolist() == [[1], [1]]
    assert build_clusters(4, 2).tolist() == [[1, 0], [1, 0], [1, 1], [1, 1]]
    assert build_clusters(6, 2).tolist() == [[1, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 0], [0, 1, 1], [0, 1, 1]]
    with pytest.raises(DomainError):
        build_clusters(0, 2)
    with pytest.raises(DomainError):
        build_clusters(3, 0)


def test_cross_mask_examples():
    assert build_cross_mask(build_clusters(2, 2)).tolist() == [[0], [0]]
    assert build_cross_mask(build_clusters(4, 2)).tolist() == [[0, 1], [0, 1], [0, 0], [0, 0]]


def test_lift_examples():
    lifted = lift_adjacency(build_chain(4), build_clusters(4, 2))
    assert lifted.tolist() == [[6, 3], [3, 2]]
    assert lift_adjacency(np.zeros((4, 4)), build_clusters(4, 2)).tolist() == [[0, 0], [0, 0]]
    with pytest.raises(DimensionError):
        lift_adjacency(build_chain(3), build_clusters(4, 2))


def test_gcn_normalize_examples():
    assert gcn_normalize(np.array([[0.0]])).tolist() == [[1.0]]
    got = gcn_normalize(np.array([[6.0, 3.0], [3.0, 2.0]]))
    # D = diag(10, 6): 7/10, 3/sqrt(60), 3/6
    np.testing.assert_allclose(got, [[0.7, 3 / np.sqrt(60)], [3 / np.sqrt(60), 0.5]], rtol=1e-14)
    np.testing.assert_allclose(got[0, 1], 0.3873, atol=5e-5)
    with pytest.raises(DomainError):
        gcn_normalize(np.array([[0.0, -1.0], [-1.0, 0.0]]))


@pytest.mark.parametrize("p", [2, 3, 4])
def test_structures_match_oracles_exhaustively(p):
    for n in range(1, 65):
        s = build_clusters(n, p)
        expected = window_oracle(n, p)
        assert np.array_equal(s, expected)
        assert np.array_equal(build_cross_mask(s), 1 - expected)
        assert s.shape[1] == -(-n // p)
        assert np.all(s.sum(axis=1) >= 1) and np.all(s.sum(axis=0) >= 1)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_lift_matches_naive_product(p):
    rng = np.random.default_rng(p)
    for n in (1, 2, 5, 8, 13):
        s = build_clusters(n, p)
        for a in (build_chain(n), rng.integers(0, 3, (n, n)).astype(float)):
            np.testing.assert_array_equal(lift_adjacency(a, s), naive_triple(a, s))


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 40), p=st.integers(1, 6))
def test_overlap_membership(n, p):
    s = build_clusters(n, p)
    m = s.shape[1]
    for i in range(n):
        expected = [j for j in range(m) if j * p <= i <= j * p + 2 * p - 1]
        assert np.flatnonzero(s[i]).tolist() == expected
        if i >= p and i // p < m:
            # interior node: clusters i//p - 1 and i//p
            assert len(expected) == 2


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_gcn_normalize_spectrum_and_rows(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 4, (8, 8)).astype(float)
    a = a + a.T
    norm = gcn_normalize(a)
    assert np.allclose(norm, norm.T)
    a_hat = a + np.eye(8)
    d = a_hat.sum(axis=1)
    rows = [(a_hat[i] / np.sqrt(d[i] * d)).sum() for i in range(8)]
    np.testing.assert_allclose(norm.sum(axis=1), rows, rtol=1e-12)
    # power iteration for the spectral radius
    v = rng.uniform(-1, 1, 8)
    for _ in range(2000):
        v = norm @ v
        v /= np.linalg.norm(v)
    radius = abs(v @ norm @ v)
    assert radius <= 1 + 1e-6


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 20), p=st.integers(1, 4), seed=st.integers(0, 999))
def test_lift_preserves_symmetry(n, p, seed):
    a = np.random.default_rng(seed).integers(0, 2, (n, n)).astype(float)
    a = a + a.T
    lifted = lift_adjacency(a, build_clusters(n, p))
    assert np.array_equal(lifted, lifted.T)
