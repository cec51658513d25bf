import numpy as np
import pytest

from fixgcn import (SparseMatrix, build_graph, largest_connected_component,
                    normalized_adjacency, normalized_laplacian,
                    self_loop_normalized_adjacency, spectral_decomposition)

from conftest import dense_normalized_adjacency, er_graph


class TestBuildGraph:
    def test_reversed_pair_deduplicates(self):
        g = build_graph(2, [(0, 1), (1, 0)], np.eye(2), [0, 1])
        assert g.num_edges == 1
        assert g.edge_set() == {(0, 1)}

    def test_triangle(self, triangle):
        assert triangle.num_edges == 3
        assert triangle.num_classes == 3

    def test_duplicate_edges_silently_merged(self):
        g = build_graph(3, [(0, 1), (0, 1), (1, 0), (1, 2)], np.eye(3), [0, 0, 0])
        assert g.num_edges == 2

    def test_self_loop_rejected_with_diagnostic(self):
        with pytest.raises(ValueError, match=r"self-loop \(1, 1\)"):
            build_graph(3, [(0, 1), (1, 1)], np.eye(3), [0, 0, 0])

    def test_out_of_range_endpoint(self):
        with pytest.raises(ValueError, match="out of range"):
            build_graph(3, [(0, 5)], np.eye(3), [0, 0, 0])

    def test_feature_row_count_mismatch(self):
        with pytest.raises(ValueError, match="feature matrix"):
            build_graph(3, [(0, 1)], np.eye(2), [0, 0, 0])

    def test_negative_label_rejected(self):
        with pytest.raises(ValueError, match="labels"):
            build_graph(2, [(0, 1)], np.eye(2), [0, -1])

    def test_edge_round_trip_preserves_count(self):
        g = er_graph(20, 0.3, seed=0)
        rebuilt = build_graph(20, g.edges, g.features, g.labels)
        assert np.array_equal(rebuilt.edges, g.edges)

    def test_graph_arrays_read_only(self, triangle):
        with pytest.raises(ValueError):
            triangle.edges[0, 0] = 5
        with pytest.raises(ValueError):
            triangle.features[0, 0] = 2.0


class TestLargestConnectedComponent:
    def test_connected_triangle_identity(self, triangle):
        sub, remap = largest_connected_component(triangle)
        assert sub.num_nodes == 3
        assert np.array_equal(remap, [0, 1, 2])
        assert sub.edge_set() == triangle.edge_set()

    def test_triangle_plus_isolated_node(self):
        g = build_graph(4, [(0, 1), (1, 2), (0, 2)], np.eye(4), [0, 1, 2, 0])
        sub, remap = largest_connected_component(g)
        assert sub.num_nodes == 3
        assert remap[3] == -1

    def test_two_components_keeps_larger(self):
        # path on {0..4} (5 nodes) plus triangle on {5,6,7} (3 nodes)
        edges = [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (5, 7)]
        x = np.arange(16, dtype=float).reshape(8, 2)
        g = build_graph(8, edges, x, [0] * 8)
        sub, remap = largest_connected_component(g)
        assert sub.num_nodes == 5
        assert sub.num_edges == 4
        # features restricted to the surviving nodes, in order
        assert np.array_equal(sub.features, x[:5])
        assert np.all(remap[5:] == -1)

    def test_idempotent(self):
        for seed in range(10):
            g = er_graph(25, 0.08, seed=seed)
            once, _ = largest_connected_component(g)
            twice, remap = largest_connected_component(once)
            assert twice.num_nodes == once.num_nodes
            assert np.array_equal(twice.edges, once.edges)
            assert np.array_equal(remap, np.arange(once.num_nodes))

    def test_empty_graph_errors(self):
        g = build_graph(0, [], np.zeros((0, 2)), [])
        with pytest.raises(ValueError, match="empty"):
            largest_connected_component(g)


class TestNormalizedOperators:
    def test_two_node_path_unit_degrees(self, two_path):
        ahat = normalized_adjacency(two_path)
        assert np.array_equal(ahat.to_dense(), [[0, 1], [1, 0]])

    def test_triangle_is_half_adjacency(self, triangle):
        ahat = normalized_adjacency(triangle)
        expected = (np.ones((3, 3)) - np.eye(3)) / 2.0
        assert np.array_equal(ahat.to_dense(), expected)

    def test_star_hub_leaf_entries(self):
        g = build_graph(4, [(0, 1), (0, 2), (0, 3)], np.eye(4), [0, 1, 1, 1])
        ahat = normalized_adjacency(g).to_dense()
        # hand evaluation of D^{-1/2} A D^{-1/2}: hub degree 3, leaves 1
        assert ahat[0, 1] == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-15)
        assert ahat[1, 2] == 0.0

    def test_degree_zero_rows_are_zero(self):
        g = build_graph(3, [(0, 1)], np.eye(3), [0, 0, 0])
        ahat = normalized_adjacency(g).to_dense()
        assert np.all(ahat[2] == 0.0) and np.all(ahat[:, 2] == 0.0)

    def test_matches_dense_reference(self):
        for seed in range(20):
            g = er_graph(15, 0.3, seed=seed)
            got = normalized_adjacency(g).to_dense()
            ref = dense_normalized_adjacency(g)
            assert np.max(np.abs(got - ref)) < 1e-14

    def test_symmetric_always(self):
        for seed in range(30):
            g = er_graph(12, 0.25, seed=100 + seed)
            ahat = normalized_adjacency(g)
            assert ahat.is_symmetric()
            dense = ahat.to_dense()
            assert np.array_equal(dense, dense.T)

    def test_row_sums_one_only_for_regular(self, triangle):
        row_sums = normalized_adjacency(triangle).to_dense().sum(axis=1)
        assert np.allclose(row_sums, 1.0)
        star = build_graph(4, [(0, 1), (0, 2), (0, 3)], np.eye(4), [0] * 4)
        star_sums = normalized_adjacency(star).to_dense().sum(axis=1)
        assert not np.allclose(star_sums, 1.0)

    def test_laplacian_two_node_path(self, two_path):
        lap = normalized_laplacian(two_path)
        assert np.array_equal(lap.to_dense(), [[1, -1], [-1, 1]])

    def test_laplacian_triangle(self, triangle):
        lap = normalized_laplacian(triangle).to_dense()
        expected = np.eye(3) - (np.ones((3, 3)) - np.eye(3)) / 2.0
        assert np.array_equal(lap, expected)

    def test_laplacian_triangle_eigenvalues(self, triangle):
        # independent dense eigensolve of the 3x3 matrix
        ev = np.linalg.eigvalsh(normalized_laplacian(triangle).to_dense())
        assert np.allclose(ev, [0.0, 1.5, 1.5], atol=1e-12)

    def test_laplacian_has_explicit_unit_diagonal(self):
        g = build_graph(3, [(0, 1)], np.eye(3), [0, 0, 0])
        lap = normalized_laplacian(g)
        assert np.allclose(np.diag(lap.to_dense()), 1.0)

    def test_self_loop_normalization_dense_reference(self):
        for seed in range(10):
            g = er_graph(12, 0.3, seed=seed)
            a = np.zeros((12, 12))
            for i, j in g.edges:
                a[i, j] = a[j, i] = 1.0
            a += np.eye(12)
            dinv = 1.0 / np.sqrt(a.sum(axis=1))
            ref = dinv[:, None] * a * dinv[None, :]
            got = self_loop_normalized_adjacency(g).to_dense()
            assert np.max(np.abs(got - ref)) < 1e-14

    def test_laplacian_spectrum_bounded(self):
        checked = 0
        seed = 0
        while checked < 100:
            seed += 1
            g = er_graph(5 + seed % 46, 0.25, seed=seed)
            if np.any(g.degrees() == 0):
                continue
            ev = np.linalg.eigvalsh(normalized_laplacian(g).to_dense())
            assert ev[0] > -1e-9
            assert ev[-1] <= 2.0 + 1e-9
            checked += 1


class TestSparseMatrix:
    def test_to_dense_known_matrix(self):
        m = SparseMatrix.from_coo((2, 3), [0, 1, 1], [2, 0, 1], [5.0, 1.0, 2.0])
        assert np.array_equal(m.to_dense(), [[0, 0, 5], [1, 2, 0]])
        assert m.nnz == 3

    def test_from_coo_drops_zeros(self):
        m = SparseMatrix.from_coo((2, 2), [0, 1], [0, 1], [0.0, 3.0])
        assert m.nnz == 1

    def test_from_coo_rejects_duplicates(self):
        with pytest.raises(ValueError, match="duplicate"):
            SparseMatrix.from_coo((2, 2), [0, 0], [1, 1], [1.0, 2.0])

    def test_matmul_dense_matches_dense(self):
        rng = np.random.default_rng(3)
        dense = rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.4)
        m = SparseMatrix.from_dense(dense)
        h = rng.standard_normal((6, 4))
        assert np.max(np.abs(m.matmul_dense(h) - dense @ h)) < 1e-12
        assert np.max(np.abs(m.t_matmul_dense(h) - dense.T @ h)) < 1e-12

    def test_dimension_mismatch(self):
        m = SparseMatrix.from_dense(np.eye(3))
        with pytest.raises(ValueError, match="mismatch"):
            m.matmul_dense(np.zeros((4, 2)))


class TestSpectralDecomposition:
    def test_identity_eigenvalues(self):
        m = SparseMatrix.from_dense(np.eye(3))
        spec = spectral_decomposition(m)
        assert np.allclose(spec.eigenvalues, [1, 1, 1])

    def test_two_node_path(self, two_path):
        spec = spectral_decomposition(normalized_laplacian(two_path))
        assert np.allclose(spec.eigenvalues, [0.0, 2.0], atol=1e-12)

    def test_triangle(self, triangle):
        spec = spectral_decomposition(normalized_laplacian(triangle))
        assert np.allclose(spec.eigenvalues, [0.0, 1.5, 1.5], atol=1e-12)

    def test_sorted_orthonormal_reconstruction(self):
        for seed in range(10):
            g = er_graph(14, 0.3, seed=seed)
            lap = normalized_laplacian(g)
            spec = spectral_decomposition(lap)
            assert np.all(np.diff(spec.eigenvalues) >= -1e-12)
            u = spec.eigenvectors
            assert np.max(np.abs(u.T @ u - np.eye(14))) < 1e-8
            recon = u @ np.diag(spec.eigenvalues) @ u.T
            assert np.max(np.abs(recon - lap.to_dense())) < 1e-8

    def test_cap_exceeded(self, triangle):
        with pytest.raises(ValueError, match="power iteration"):
            spectral_decomposition(normalized_laplacian(triangle), dense_cap=2)

    def test_rejects_asymmetric(self):
        m = SparseMatrix.from_coo((2, 2), [0], [1], [1.0])
        with pytest.raises(ValueError, match="symmetric"):
            spectral_decomposition(m)
