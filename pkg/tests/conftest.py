"""Shared fixtures and independent oracle helpers.

The helpers here deliberately avoid the library's own sparse kernels:
graphs are generated straight from an RNG and reference values come from
dense numpy arithmetic, so tests compare two genuinely different routes.
"""

from __future__ import annotations

import numpy as np
import pytest

from fixgcn import build_graph


def er_graph(n: int, p: float, seed: int, num_features: int = 4,
             num_classes: int = 3):
    """Erdos-Renyi graph with random binary features and labels."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    x = (rng.random((n, num_features)) < 0.4).astype(np.float64)
    y = rng.integers(0, num_classes, size=n)
    return build_graph(n, edges, x, y)


def dense_adjacency(g) -> np.ndarray:
    a = np.zeros((g.num_nodes, g.num_nodes))
    for i, j in g.edges:
        a[i, j] = a[j, i] = 1.0
    return a


def dense_normalized_adjacency(g) -> np.ndarray:
    """Reference D^{-1/2} A D^{-1/2} built without the CSR machinery."""
    a = dense_adjacency(g)
    d = a.sum(axis=1)
    dinv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return dinv[:, None] * a * dinv[None, :]


def dense_propagation(ahat_dense: np.ndarray, s: float) -> np.ndarray:
    """Materialized ((1-s) I + s Ahat) Ahat."""
    n = ahat_dense.shape[0]
    return ((1.0 - s) * np.eye(n) + s * ahat_dense) @ ahat_dense


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1), (1, 2), (0, 2)], np.eye(3), [0, 1, 2])


@pytest.fixture
def two_path():
    return build_graph(2, [(0, 1)], np.eye(2), [0, 1])
