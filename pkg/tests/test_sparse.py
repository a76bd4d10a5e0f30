"""Kernel-level checks against dense reference oracles."""

import numpy as np
import pytest

from gcnpart import (
    CsrMatrix,
    RowBlock,
    dmm,
    gather_rows,
    hadamard,
    normalize_adjacency,
    spmm,
    transpose_sparse,
)

from helpers import dense_spmm_oracle, random_undirected, triple_loop_dmm_oracle


class TestCsrMatrix:
    def test_from_dense_round_trip(self):
        rng = np.random.default_rng(0)
        d = (rng.random((7, 5)) < 0.4) * rng.standard_normal((7, 5))
        assert np.array_equal(CsrMatrix.from_dense(d).to_dense(), d)

    def test_duplicates_are_summed(self):
        a = CsrMatrix.from_coo(2, 2, [0, 0, 1], [1, 1, 0], [2.0, 3.0, 1.0])
        assert a.nnz == 2
        assert a.to_dense()[0, 1] == 5.0

    def test_bad_offsets_rejected(self):
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, [0, 2, 1], [0, 1], [1.0, 1.0])

    def test_unsorted_columns_rejected(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 3, [0, 2], [2, 0], [1.0, 1.0])

    def test_column_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            CsrMatrix.from_coo(2, 2, [0], [5])


class TestNormalizeAdjacency:
    def test_single_vertex(self):
        a = CsrMatrix.from_coo(1, 1, [], [])
        np.testing.assert_allclose(normalize_adjacency(a).to_dense(), [[1.0]])

    def test_two_vertex_edge_all_half(self):
        a = CsrMatrix.from_coo(2, 2, [0, 1], [1, 0])
        np.testing.assert_allclose(normalize_adjacency(a).to_dense(), 0.5 * np.ones((2, 2)))

    def test_path_off_diagonal_entry(self):
        # degrees with self loops: 2, 3, 2; entry (0,1) = 1/sqrt(2*3)
        a = CsrMatrix.from_coo(3, 3, [0, 1, 1, 2], [1, 0, 2, 1])
        got = normalize_adjacency(a).to_dense()
        assert got[0, 1] == pytest.approx(1.0 / np.sqrt(6.0), rel=1e-12)

    def test_symmetric_stays_symmetric(self):
        for seed in range(5):
            a = random_undirected(12, 0.3, seed)
            d = normalize_adjacency(a).to_dense()
            np.testing.assert_allclose(d, d.T, atol=1e-15)

    def test_row_action_matches_direct_evaluation(self):
        # A_hat @ 1 must equal the dense row sums; normalization is not
        # assumed to be stochastic
        a = random_undirected(10, 0.3, 3)
        ah = normalize_adjacency(a)
        ones = np.ones((10, 1))
        np.testing.assert_allclose(
            spmm(ah, ones).ravel(), ah.to_dense().sum(axis=1), rtol=1e-14
        )

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            normalize_adjacency(CsrMatrix.from_coo(2, 3, [0], [1]))

    def test_zero_row_without_self_loops_rejected(self):
        a = CsrMatrix.from_coo(2, 2, [0], [1])
        with pytest.raises(ValueError):
            normalize_adjacency(a, add_self_loops=False)

    def test_self_loops_fill_diagonal(self):
        a = CsrMatrix.from_coo(3, 3, [0], [1])
        assert normalize_adjacency(a).has_full_diagonal()


class TestSpmm:
    def test_identity(self):
        h = np.random.default_rng(1).standard_normal((5, 3))
        assert np.array_equal(spmm(CsrMatrix.identity(5), h), h)

    def test_zero_rows_annihilate(self):
        a = CsrMatrix(2, 4, [0, 0, 0], [], [])
        h = np.ones((4, 3))
        assert np.array_equal(spmm(a, h), np.zeros((2, 3)))

    def test_seeded_8x8_matches_dense_oracle(self):
        rng = np.random.default_rng(8)
        d = (rng.random((8, 8)) < 0.4) * rng.standard_normal((8, 8))
        a = CsrMatrix.from_dense(d)
        h = rng.standard_normal((8, 3))
        got = spmm(a, h)
        want = dense_spmm_oracle(a, h)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("n", [4, 16, 33, 64])
    def test_random_instances_up_to_64(self, n):
        rng = np.random.default_rng(n)
        d = (rng.random((n, n)) < 0.2) * rng.standard_normal((n, n))
        a = CsrMatrix.from_dense(d)
        h = rng.standard_normal((n, 5))
        np.testing.assert_allclose(spmm(a, h), d @ h, rtol=1e-12, atol=1e-13)

    def test_deterministic_rerun(self):
        rng = np.random.default_rng(9)
        d = (rng.random((20, 20)) < 0.3) * rng.standard_normal((20, 20))
        a = CsrMatrix.from_dense(d)
        h = rng.standard_normal((20, 4))
        assert np.array_equal(spmm(a, h), spmm(a, h))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmm(CsrMatrix.identity(3), np.ones((4, 2)))


class TestDmm:
    def test_identity(self):
        x = np.random.default_rng(2).standard_normal((4, 4))
        assert np.array_equal(dmm(x, np.eye(4)), x)

    def test_scalar_product(self):
        assert dmm(np.array([[2.0]]), np.array([[3.0]]))[0, 0] == 6.0

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 5))
        y = rng.standard_normal((5, 2))
        np.testing.assert_allclose(dmm(x, y), triple_loop_dmm_oracle(x, y), rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            dmm(np.ones((2, 3)), np.ones((2, 3)))


class TestHadamard:
    def test_ones_identity(self):
        x = np.random.default_rng(4).standard_normal((3, 3))
        assert np.array_equal(hadamard(x, np.ones((3, 3))), x)

    def test_zeros_annihilate(self):
        x = np.random.default_rng(5).standard_normal((3, 3))
        assert np.array_equal(hadamard(x, np.zeros((3, 3))), np.zeros((3, 3)))

    def test_definition(self):
        got = hadamard(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0], [7.0, 8.0]]))
        assert np.array_equal(got, [[5.0, 12.0], [21.0, 32.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            hadamard(np.ones((2, 2)), np.ones((2, 3)))


class TestTranspose:
    def test_symmetric_structure_unchanged(self):
        a = random_undirected(8, 0.4, 1)
        t = transpose_sparse(a)
        assert np.array_equal(a.row_offsets, t.row_offsets)
        assert np.array_equal(a.col_indices, t.col_indices)

    def test_single_entry(self):
        a = CsrMatrix.from_coo(2, 2, [0], [1], [2.5])
        t = transpose_sparse(a)
        assert t.to_dense()[1, 0] == 2.5 and t.nnz == 1

    @pytest.mark.parametrize("seed", range(4))
    def test_involution_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        d = (rng.random((6, 6)) < 0.4) * rng.standard_normal((6, 6))
        a = CsrMatrix.from_dense(d)
        tt = transpose_sparse(transpose_sparse(a))
        assert np.array_equal(a.row_offsets, tt.row_offsets)
        assert np.array_equal(a.col_indices, tt.col_indices)
        assert np.array_equal(a.values, tt.values)


class TestGatherRows:
    def _block(self):
        data = np.arange(12.0).reshape(3, 4)
        return RowBlock(np.array([1, 2, 5]), data)

    def test_empty_request(self):
        out = gather_rows(self._block(), [])
        assert out.shape == (0, 4)

    def test_all_owned_ids_copy(self):
        block = self._block()
        out = gather_rows(block, [1, 2, 5])
        assert np.array_equal(out, block.local)
        out[0, 0] = -1.0  # a copy, not a view
        assert block.local[0, 0] == 0.0

    def test_single_row_in_request_order(self):
        block = RowBlock(np.array([1, 2]), np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.array_equal(gather_rows(block, [2]), [[3.0, 4.0]])
        both = gather_rows(block, [2, 1])
        assert np.array_equal(both, [[3.0, 4.0], [1.0, 2.0]])

    def test_sparse_block(self):
        local = CsrMatrix.from_coo(2, 3, [0, 1], [2, 0], [7.0, 9.0])
        block = RowBlock(np.array([0, 4]), local)
        assert np.array_equal(gather_rows(block, [4]), [[9.0, 0.0, 0.0]])

    def test_unowned_id_rejected(self):
        with pytest.raises(KeyError):
            gather_rows(self._block(), [3])

    def test_block_requires_sorted_ids(self):
        with pytest.raises(ValueError):
            RowBlock(np.array([2, 1]), np.zeros((2, 2)))
