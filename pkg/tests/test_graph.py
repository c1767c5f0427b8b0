"""Graph construction, Laplacians, polynomial terms, and the spectral oracle.

Ground truth:
- K_2 self-loop form: degrees are 1, so I + A = all-ones.
- K_3 self-loop form: I + (J - I) / 2.
- K_2 subtractive form has eigenvalues {0, 2}.
"""

import numpy as np
import pytest

from gcnnas import graph
from gcnnas.errors import ArgumentError, ParseError, StructuralError


class TestAdjacency:
    def test_single_edge(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        np.testing.assert_array_equal(adj, [[0, 1], [1, 0]])

    def test_empty_graph(self):
        np.testing.assert_array_equal(graph.build_skeleton_adjacency([], 3), np.zeros((3, 3)))

    def test_duplicate_edges_idempotent(self):
        once = graph.build_skeleton_adjacency([(0, 1)], 3)
        twice = graph.build_skeleton_adjacency([(0, 1), (1, 0), (0, 1)], 3)
        np.testing.assert_array_equal(once, twice)

    def test_out_of_range_rejected(self):
        with pytest.raises(StructuralError):
            graph.build_skeleton_adjacency([(0, 3)], 3)

    def test_self_edge_rejected(self):
        with pytest.raises(StructuralError):
            graph.build_skeleton_adjacency([(1, 1)], 3)

    def test_preset_is_25_joint_tree(self):
        adj = graph.NTU_25.adjacency()
        assert adj.shape == (25, 25)
        # a tree on 25 nodes has 24 undirected edges
        assert adj.sum() == 48
        np.testing.assert_array_equal(adj, adj.T)
        # connected: powers of (A + I) fill in
        reach = np.linalg.matrix_power(adj + np.eye(25), 24) > 0
        assert reach.all()

    def test_chain_preset(self):
        adj = graph.CHAIN_5.adjacency()
        assert adj.sum() == 8
        assert graph.CHAIN_5.root == 2


class TestLaplacians:
    def test_paper_form_k2(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        np.testing.assert_allclose(graph.laplacian_paper(adj), np.ones((2, 2)))

    def test_paper_form_isolated_nodes(self):
        np.testing.assert_allclose(graph.laplacian_paper(np.zeros((3, 3))), np.eye(3))

    def test_paper_form_k3(self):
        adj = np.ones((3, 3)) - np.eye(3)
        expected = np.eye(3) + 0.5 * (np.ones((3, 3)) - np.eye(3))
        np.testing.assert_allclose(graph.laplacian_paper(adj), expected)

    def test_paper_form_offset_nonnegative(self):
        rng = np.random.default_rng(3)
        adj = np.abs(rng.standard_normal((6, 6)))
        adj = (adj + adj.T) / 2
        np.fill_diagonal(adj, 0)
        lap = graph.laplacian_paper(adj)
        assert (lap - np.eye(6) >= -1e-12).all()

    def test_standard_form_k2(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        np.testing.assert_allclose(graph.laplacian_standard(adj), [[1, -1], [-1, 1]])

    def test_standard_form_zero(self):
        np.testing.assert_allclose(graph.laplacian_standard(np.zeros((4, 4))), np.eye(4))

    def test_standard_form_k2_spectrum(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        eigs = np.sort(np.linalg.eigvalsh(graph.laplacian_standard(adj)))
        np.testing.assert_allclose(eigs, [0.0, 2.0], atol=1e-12)

    def test_negative_adjacency_rejected(self):
        with pytest.raises(ArgumentError):
            graph.laplacian_paper(np.array([[0.0, -1.0], [-1.0, 0.0]]))


class TestRescale:
    def test_identity_at_lambda_two(self):
        np.testing.assert_allclose(graph.rescale(np.eye(3), 2.0), np.zeros((3, 3)))

    def test_spectral_mapping(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        lap = graph.laplacian_standard(adj)
        eigs = np.sort(np.linalg.eigvalsh(graph.rescale(lap, 2.0)))
        np.testing.assert_allclose(eigs, [-1.0, 1.0], atol=1e-12)

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ArgumentError):
            graph.rescale(np.eye(2), 0.0)

    def test_power_iteration_estimate(self):
        adj = graph.build_skeleton_adjacency([(0, 1)], 2)
        lap = graph.laplacian_paper(adj)
        assert graph.estimate_lambda_max(lap) == pytest.approx(2.0, abs=1e-8)


class TestChebyshevTerms:
    def test_order_one(self):
        lhat = graph.rescale(graph.laplacian_paper(graph.CHAIN_5.adjacency()), 2.0)
        terms = graph.chebyshev_terms(lhat, 1)
        assert len(terms) == 2
        np.testing.assert_array_equal(terms[0], np.eye(5))
        np.testing.assert_array_equal(terms[1], lhat)

    def test_diagonal_second_order_identity(self):
        diag = np.diag([0.3, -0.7, 0.9])
        terms = graph.chebyshev_terms(diag, 2)
        np.testing.assert_allclose(terms[2], np.diag(2 * np.diag(diag) ** 2 - 1), atol=1e-15)

    def test_order_bound(self):
        with pytest.raises(ArgumentError):
            graph.chebyshev_terms(np.eye(2), 5)
        with pytest.raises(ArgumentError):
            graph.chebyshev_terms(np.eye(2), -1)

    def test_recursion_matches_eigendecomposition(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 17))
            mat = rng.standard_normal((n, n))
            lap = (mat + mat.T) / 2
            lhat = graph.rescale(lap, 2.0)
            terms = graph.chebyshev_terms(lhat, 4)
            eigvals, eigvecs = np.linalg.eigh(lap)
            lam_hat = eigvals - 1.0  # 2 lam / 2 - 1
            t_scalar = [np.ones_like(lam_hat), lam_hat]
            for _ in range(2, 5):
                t_scalar.append(2 * lam_hat * t_scalar[-1] - t_scalar[-2])
            for r in range(5):
                spectral = eigvecs @ np.diag(t_scalar[r]) @ eigvecs.T
                assert np.abs(terms[r] - spectral).max() < 1e-8


class TestSpectralOracle:
    def test_identity_filter(self):
        lap = graph.laplacian_paper(graph.CHAIN_5.adjacency())
        x = np.arange(10.0).reshape(5, 2)
        np.testing.assert_allclose(graph.spectral_filter_oracle(lap, [1.0], x), x, atol=1e-12)

    def test_first_order_filter_is_scaled_laplacian(self):
        lap = graph.laplacian_paper(graph.CHAIN_5.adjacency())
        x = np.arange(10.0).reshape(5, 2)
        expected = graph.rescale(lap, 2.0) @ x
        np.testing.assert_allclose(
            graph.spectral_filter_oracle(lap, [0.0, 1.0], x), expected, atol=1e-10
        )

    def test_matches_matrix_recursion(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mat = rng.standard_normal((8, 8))
            lap = (mat + mat.T) / 2
            coeffs = rng.standard_normal(5)
            x = rng.standard_normal((8, 3))
            terms = graph.chebyshev_terms(graph.rescale(lap, 2.0), 4)
            direct = sum(c * (t @ x) for c, t in zip(coeffs, terms))
            oracle = graph.spectral_filter_oracle(lap, coeffs, x)
            assert np.abs(direct - oracle).max() < 1e-8

    def test_size_limit(self):
        with pytest.raises(ArgumentError):
            graph.spectral_filter_oracle(np.eye(65), [1.0], np.zeros((65, 1)))

    def test_requires_symmetry(self):
        with pytest.raises(ArgumentError):
            graph.spectral_filter_oracle(np.array([[0.0, 1.0], [0.0, 0.0]]), [1.0], np.eye(2))


class TestRowNormalize:
    def test_basic(self):
        np.testing.assert_allclose(
            graph.row_normalize(np.array([[2.0, 2.0], [0.0, 4.0]])),
            [[0.5, 0.5], [0.0, 1.0]],
        )

    def test_zero_matrix_uniform(self):
        np.testing.assert_allclose(graph.row_normalize(np.zeros((2, 2))), np.full((2, 2), 0.5))

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            mat = np.abs(rng.standard_normal((6, 6)))
            mat[rng.integers(6)] = 0.0  # exercise the all-zero-row branch
            out = graph.row_normalize(mat)
            np.testing.assert_allclose(out.sum(axis=1), np.ones(6), atol=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ArgumentError):
            graph.row_normalize(np.array([[-1.0, 1.0], [0.0, 1.0]]))


class TestEdgeListFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "edges.txt"
        graph.write_edge_list(path, graph.CHAIN_5.edges)
        adj = graph.read_edge_list(path)
        np.testing.assert_array_equal(adj, graph.CHAIN_5.adjacency())

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("# header\n\n0 1\n1 2  # trailing\n")
        adj = graph.read_edge_list(path)
        assert adj.shape == (3, 3)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("0 1 2\n")
        with pytest.raises(ParseError):
            graph.read_edge_list(path)
