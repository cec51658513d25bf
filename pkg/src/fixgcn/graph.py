"""Graph construction and the normalized spectral operators built from it.

The central objects are an immutable attributed :class:`Graph`, a CSR
:class:`SparseMatrix` used for the normalized adjacency D^{-1/2} A D^{-1/2}
and the normalized Laplacian I - Ahat, and a dense
:class:`SpectralDecomposition` oracle used by tests and analysis code.
Training never eigendecomposes anything; the dense solve is capped at a
configurable size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DENSE_EIG_CAP = 2000


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class SparseMatrix:
    """Sparse matrix in compressed-row (CSR) form.

    Column indices are sorted within each row and explicit zeros are never
    stored. Instances are immutable; the underlying arrays are marked
    read-only. Products against dense arrays are delegated to scipy's CSR
    kernels; :meth:`to_dense` expands by hand so it can serve as an
    independent reference in tests.
    """

    __slots__ = ("shape", "row_offsets", "col_indices", "values", "_csr")

    def __init__(self, shape: tuple[int, int], row_offsets: np.ndarray,
                 col_indices: np.ndarray, values: np.ndarray):
        n_rows, n_cols = shape
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if row_offsets.shape != (n_rows + 1,):
            raise ValueError(f"row_offsets must have length {n_rows + 1}")
        if col_indices.shape != values.shape:
            raise ValueError("col_indices and values must align")
        self.shape = (int(n_rows), int(n_cols))
        # Build the scipy view before freezing: construction may canonicalize.
        self._csr = sp.csr_matrix((values, col_indices, row_offsets),
                                  shape=self.shape)
        self.row_offsets = _freeze(row_offsets)
        self.col_indices = _freeze(col_indices)
        self.values = _freeze(values)

    @classmethod
    def from_coo(cls, shape: tuple[int, int], rows: np.ndarray,
                 cols: np.ndarray, values: np.ndarray) -> "SparseMatrix":
        """Build from coordinate triplets; sorts entries, drops zeros.

        Duplicate coordinates are rejected: the operators built here never
        produce them, so a duplicate signals a construction bug.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        keep = values != 0.0
        rows, cols, values = rows[keep], cols[keep], values[keep]
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows) > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise ValueError("duplicate coordinate in COO input")
        row_offsets = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(row_offsets, rows + 1, 1)
        np.cumsum(row_offsets, out=row_offsets)
        return cls(shape, row_offsets, cols, values)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_coo(dense.shape, rows, cols, dense[rows, cols])

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def matmul_dense(self, h: np.ndarray) -> np.ndarray:
        """Return self @ h for a dense h (1-d or 2-d)."""
        if h.shape[0] != self.shape[1]:
            raise ValueError(
                f"dimension mismatch: {self.shape} @ {h.shape}")
        return self._csr @ h

    def t_matmul_dense(self, h: np.ndarray) -> np.ndarray:
        """Return self.T @ h for a dense h."""
        if h.shape[0] != self.shape[0]:
            raise ValueError(
                f"dimension mismatch: {self.shape}^T @ {h.shape}")
        return self._csr.T @ h

    def to_dense(self) -> np.ndarray:
        """Expand to a dense array by walking the CSR layout directly."""
        out = np.zeros(self.shape, dtype=np.float64)
        for i in range(self.shape[0]):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            out[i, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def is_symmetric(self, tol: float = 0.0) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        diff = (self._csr - self._csr.T).tocoo()
        if diff.nnz == 0:
            return True
        return bool(np.max(np.abs(diff.data)) <= tol)

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph with integer node labels.

    ``edges`` is the canonical edge array: shape (E, 2), each row (i, j)
    with i < j, sorted lexicographically, deduplicated, no self-loops.
    All arrays are read-only; attacks and other transformations return new
    graphs rather than mutating.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.num_nodes else 0

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        if self.num_edges:
            d += np.bincount(self.edges[:, 0], minlength=self.num_nodes)
            d += np.bincount(self.edges[:, 1], minlength=self.num_nodes)
        return d

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as a set of (i, j) tuples with i < j."""
        return {(int(i), int(j)) for i, j in self.edges}


def canonical_edge_array(edges, num_nodes: int) -> np.ndarray:
    """Canonicalize an edge list: orient i < j, sort, deduplicate.

    Rejects self-loops and out-of-range endpoints. Accepts any iterable of
    pairs or an (E, 2) array; reversed duplicates collapse to one edge.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                     dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("edges must be pairs of node indices")
    if arr.min() < 0 or arr.max() >= num_nodes:
        bad = arr[(arr < 0).any(axis=1) | (arr >= num_nodes).any(axis=1)][0]
        raise ValueError(
            f"edge endpoint out of range [0, {num_nodes}): {tuple(bad)}")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        i = int(arr[loops][0, 0])
        raise ValueError(
            f"self-loop ({i}, {i}) rejected: self-loops change the "
            "spectrum of the propagation operator")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return canon


def build_graph(num_nodes: int, edges, features, labels) -> Graph:
    """Validate and assemble a :class:`Graph`.

    Duplicate and reversed edge pairs in the input are deduplicated
    silently; self-loops are rejected with a diagnostic.
    """
    if num_nodes < 0:
        raise ValueError("num_nodes must be non-negative")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    if features.shape[0] != num_nodes:
        raise ValueError(
            f"feature matrix has {features.shape[0]} rows, expected {num_nodes}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (num_nodes,):
        raise ValueError(f"labels must have shape ({num_nodes},)")
    if num_nodes and labels.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    edge_arr = canonical_edge_array(edges, num_nodes)
    return Graph(num_nodes=num_nodes,
                 edges=_freeze(edge_arr),
                 features=_freeze(features.copy()),
                 labels=_freeze(labels.copy()))


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Extract the largest connected component with compacted indices.

    Returns the component subgraph and a remap array of length
    ``g.num_nodes`` giving each old index its new index, or -1 for nodes
    outside the component. Ties between equally sized components go to the
    one containing the smallest node index.
    """
    if g.num_nodes == 0:
        raise ValueError("cannot extract a component from an empty graph")
    adj_rows = g.edges[:, 0]
    adj_cols = g.edges[:, 1]
    ones = np.ones(len(adj_rows), dtype=np.int8)
    a = sp.coo_matrix((ones, (adj_rows, adj_cols)),
                      shape=(g.num_nodes, g.num_nodes))
    n_comp, comp = sp.csgraph.connected_components(a, directed=False)
    sizes = np.bincount(comp, minlength=n_comp)
    best = int(np.argmax(sizes))  # argmax takes the first max: smallest index
    keep = comp == best
    remap = np.full(g.num_nodes, -1, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    kept_edges = keep[g.edges[:, 0]] & keep[g.edges[:, 1]]
    new_edges = remap[g.edges[kept_edges]]
    sub = Graph(num_nodes=int(keep.sum()),
                edges=_freeze(canonical_edge_array(new_edges, int(keep.sum()))),
                features=_freeze(g.features[keep].copy()),
                labels=_freeze(g.labels[keep].copy()))
    return sub, remap


def normalized_adjacency(g: Graph) -> SparseMatrix:
    """Degree-normalized adjacency D^{-1/2} A D^{-1/2}, no self-loops.

    Isolated nodes get all-zero rows and columns (their D^{-1/2} entry is
    taken as 0), so after an attack disconnects a node it propagates only
    through the residual path of the model. Edge endpoints always have
    positive degree, so each stored entry is simply 1/sqrt(d_i * d_j);
    taking one square root of the product keeps round values exact.
    """
    d = g.degrees().astype(np.float64)
    i, j = g.edges[:, 0], g.edges[:, 1]
    w = 1.0 / np.sqrt(d[i] * d[j])
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([w, w])
    return SparseMatrix.from_coo((g.num_nodes, g.num_nodes), rows, cols, vals)


def self_loop_normalized_adjacency(g: Graph) -> SparseMatrix:
    """Kipf-style normalization D~^{-1/2} (A + I) D~^{-1/2}.

    Used only by the baseline GCN variant; the fixed-point model operates
    on the adjacency without self-connections.
    """
    d = g.degrees().astype(np.float64) + 1.0
    i, j = g.edges[:, 0], g.edges[:, 1]
    w = 1.0 / np.sqrt(d[i] * d[j])
    diag = np.arange(g.num_nodes)
    rows = np.concatenate([i, j, diag])
    cols = np.concatenate([j, i, diag])
    vals = np.concatenate([w, w, 1.0 / d])
    return SparseMatrix.from_coo((g.num_nodes, g.num_nodes), rows, cols, vals)


def normalized_laplacian(g: Graph) -> SparseMatrix:
    """Normalized Laplacian I - Ahat with an explicit unit diagonal."""
    n = g.num_nodes
    i, j = g.edges[:, 0], g.edges[:, 1]
    d = g.degrees().astype(np.float64)
    w = 1.0 / np.sqrt(d[i] * d[j])
    diag = np.arange(n)
    rows = np.concatenate([i, j, diag])
    cols = np.concatenate([j, i, diag])
    vals = np.concatenate([-w, -w, np.ones(n)])
    return SparseMatrix.from_coo((n, n), rows, cols, vals)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric operator, eigenvalues ascending.

    ``eigenvectors`` holds orthonormal eigenvectors as columns, so
    ``eigenvectors @ diag(eigenvalues) @ eigenvectors.T`` reconstructs the
    operator.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        _freeze(self.eigenvalues)
        _freeze(self.eigenvectors)


def spectral_decomposition(m: SparseMatrix,
                           dense_cap: int = DENSE_EIG_CAP) -> SpectralDecomposition:
    """Dense eigendecomposition of a symmetric sparse operator.

    Test and analysis oracle only: refuses matrices larger than
    ``dense_cap`` to keep it off any scaling path. Callers who need the
    dominant mode of a large operator should use power iteration from the
    filter module instead.
    """
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError("spectral decomposition needs a square matrix")
    if n > dense_cap:
        raise ValueError(
            f"matrix size {n} exceeds the dense-solve cap {dense_cap}; "
            "use spectral_radius_estimate (power iteration) instead")
    if not m.is_symmetric(tol=0.0):
        raise ValueError("spectral decomposition needs a symmetric matrix")
    dense = m.to_dense()
    eigenvalues, eigenvectors = np.linalg.eigh(dense)
    return SpectralDecomposition(eigenvalues=eigenvalues,
                                 eigenvectors=eigenvectors)
