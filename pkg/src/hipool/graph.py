"""Adjacency objects for one HiPool layer.

All matrices are dense float64 numpy arrays; they carry no trainable state,
so they never enter the autodiff tape except as constants.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import DimensionError, DomainError

LOW_ADJACENCY_MODES = ("chain", "complete")


def build_chain(n: int) -> np.ndarray:
    """Path graph over ``n`` nodes in document order, no self-loops."""
    if n < 1:
        raise DomainError(f"chain graph needs n >= 1, got {n}")
    a = np.zeros((n, n))
    idx = np.arange(n - 1)
    a[idx, idx + 1] = 1.0
    a[idx + 1, idx] = 1.0
    return a


def build_complete(n: int) -> np.ndarray:
    if n < 1:
        raise DomainError(f"complete graph needs n >= 1, got {n}")
    return np.ones((n, n)) - np.eye(n)


def build_low_adjacency(n: int, mode: str = "chain") -> np.ndarray:
    if mode == "chain":
        return build_chain(n)
    if mode == "complete":
        return build_complete(n)
    raise DomainError(f"unknown low-level adjacency mode {mode!r}; expected one of {LOW_ADJACENCY_MODES}")


def cluster_count(n: int, p: int) -> int:
    return math.ceil(n / p)


def build_clusters(n: int, p: int) -> np.ndarray:
    """Binary n x m assignment: cluster j covers nodes j*p .. j*p + 2p - 1."""
    if n < 1 or p < 1:
        raise DomainError(f"clustering needs n >= 1 and p >= 1, got n={n}, p={p}")
    m = cluster_count(n, p)
    i = np.arange(n)[:, None]
    start = (np.arange(m) * p)[None, :]
    return ((i >= start) & (i <= start + 2 * p - 1)).astype(np.float64)


def build_cross_mask(assignment: np.ndarray) -> np.ndarray:
    return 1.0 - assignment


def lift_adjacency(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Induced cluster connectivity ``S^T A S`` (integer weights, kept real)."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got {a.shape}")
    if s.shape[0] != a.shape[0]:
        raise DimensionError(f"adjacency {a.shape} and assignment {s.shape} disagree")
    return s.T @ a @ s


def gcn_normalize(a: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops, D^-1/2 (A + I) D^-1/2."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got {a.shape}")
    if np.any(a < 0):
        raise DomainError("adjacency entries must be non-negative")
    a_hat = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]


def block_diag(block: np.ndarray, copies: int) -> np.ndarray:
    """``copies`` disjoint replicas of ``block``, used to batch documents as one graph."""
    if copies == 1:
        return block
    return np.kron(np.eye(copies), block)
