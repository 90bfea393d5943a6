"""
Block matrix algebra tests
"""

import unittest

import numpy as np

from . import TestCase
from .customize import instance_count
from kronlite.blockmat import (BlockMatrix, BlockPermutation, InvalidSubset,
                               SingularBlock, SingularSubmatrix,
                               apply_permutation, as_phase_block,
                               block_inverse_identities_check, block_support,
                               has_zero_row_block_sums, invert_block,
                               invert_principal_submatrix, is_block_symmetric,
                               is_line_admittance, is_re_positive_definite,
                               is_symmetric_block, normalize_diagonal,
                               random_phase_block, relative_error,
                               row_block_sums, schur_complement)
from kronlite.config import Tolerances
from kronlite.network import admittance_from_network, generate_radial


class TestBase(TestCase):
    """
    Utilities for block matrix tests.
    """

    def assertBlockClose(self, a, b, rtol=1e-9):
        a, b = np.asarray(a), np.asarray(b)
        scale = max(1.0, np.linalg.norm(a))
        self.assertLessEqual(np.linalg.norm(a - b), rtol * scale,
                             "\n%s\n!=\n%s" % (a, b))

    def assertMatrixClose(self, A, B, rtol=1e-9):
        self.assertEqual(A.labels, B.labels)
        self.assertLessEqual(relative_error(A, B), rtol)

    def rng(self, seed=0):
        return np.random.default_rng(seed)

    def random_matrix(self, n, seed=0, shift=6.0):
        rng = self.rng(seed)
        m = 3 * n
        arr = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        return BlockMatrix(arr + shift * np.eye(m))

    def tree_admittance(self, measured=5, hidden=2, seed=0, uniform=False):
        net = generate_radial(measured, hidden, uniform=uniform, seed=seed)
        return net, admittance_from_network(net)


class TestPhaseBlock(TestBase):

    def test_as_phase_block(self):
        B = as_phase_block(np.eye(3))
        self.assertEqual(B.dtype, complex)
        with self.assertRaises(ValueError):
            as_phase_block(np.eye(2))
        with self.assertRaises(ValueError):
            as_phase_block(np.full((3, 3), np.nan))

    def test_random_phase_block(self):
        rng = self.rng(3)
        for _ in range(50):
            B = random_phase_block(rng)
            self.assertTrue(is_symmetric_block(B))
            self.assertTrue(is_re_positive_definite(B))
            self.assertTrue(is_line_admittance(B))
            self.assertGreaterEqual(np.linalg.eigvalsh(B.real)[0],
                                    0.2 - 1e-12)

    def test_line_admittance_predicates(self):
        B = np.diag([1.0, 2.0, 3.0]) + 0j
        B[0, 1] = 0.5
        self.assertFalse(is_symmetric_block(B))
        self.assertFalse(is_line_admittance(B))
        self.assertFalse(is_re_positive_definite(-np.eye(3)))
        self.assertFalse(is_line_admittance(np.eye(2)))

    def test_invert_block(self):
        rng = self.rng(1)
        for _ in range(50):
            B = random_phase_block(rng)
            self.assertBlockClose(invert_block(B) @ B, np.eye(3))

    def test_invert_nearly_singular_block(self):
        # small determinant relative to ||B||^3 goes through LU
        B = np.diag([1.0, 1.0, 1e-9]).astype(complex)
        self.assertBlockClose(invert_block(B), np.diag([1.0, 1.0, 1e9]))

    def test_invert_singular_block(self):
        B = np.ones((3, 3), dtype=complex)
        with self.assertRaises(SingularBlock):
            invert_block(B)
        with self.assertRaises(ArithmeticError):
            invert_block(np.zeros((3, 3)))


class TestBlockMatrix(TestBase):

    def test_labels(self):
        A = self.random_matrix(3)
        self.assertEqual(A.labels, (1, 2, 3))
        self.assertEqual(A.col_labels, (1, 2, 3))
        self.assertTrue(A.is_square)
        self.assertEqual(A.shape, (3, 3))
        self.assertEqual(A.index(2), 1)
        with self.assertRaises(KeyError):
            A.index(7)
        with self.assertRaises(ValueError):
            BlockMatrix(A.array, [1, 1, 2])
        with self.assertRaises(ValueError):
            BlockMatrix(np.zeros((4, 4)))

    def test_read_only(self):
        A = self.random_matrix(2)
        with self.assertRaises(ValueError):
            A.array[0, 0] = 1.0
        B = A.with_block(0, 1, np.eye(3))
        self.assertBlockClose(B[0, 1], np.eye(3))
        self.assertBlockClose(A[0, 1], A.array[0:3, 3:6])

    def test_from_blocks(self):
        grid = [[np.eye(3), 2 * np.eye(3)], [3 * np.eye(3), 4 * np.eye(3)]]
        A = BlockMatrix.from_blocks(grid, labels=['a', 'b'])
        self.assertEqual(A.labels, ('a', 'b'))
        self.assertBlockClose(A.block(1, 0), 3 * np.eye(3))
        self.assertEqual(A.blocks.shape, (2, 2, 3, 3))
        self.assertEqual(BlockMatrix.from_blocks([]).n, 0)

    def test_constructors(self):
        Z = BlockMatrix.zeros(2)
        self.assertEqual(Z.norm(), 0.0)
        I = BlockMatrix.identity(2, labels=[5, 6])
        self.assertEqual(I.labels, (5, 6))
        D = BlockMatrix.block_diag(Z.relabel([1, 2]), I)
        self.assertEqual(D.labels, (1, 2, 5, 6))
        self.assertBlockClose(D[3, 3], np.eye(3))
        self.assertBlockClose(D[0, 3], np.zeros((3, 3)))

    def test_submatrix_and_reorder(self):
        A = self.random_matrix(4, seed=2)
        S = A.submatrix([2, 0])
        self.assertEqual(S.labels, (3, 1))
        self.assertBlockClose(S[0, 1], A[2, 0])
        R = A.restrict([1], [2, 4])
        self.assertFalse(R.is_square)
        self.assertEqual(R.col_labels, (2, 4))
        self.assertBlockClose(R[0, 1], A[0, 3])
        P = A.reorder([4, 3, 2, 1])
        self.assertBlockClose(P[0, 0], A[3, 3])
        with self.assertRaises(ValueError):
            A.reorder([1, 2])

    def test_embed(self):
        A = self.random_matrix(2, seed=4).relabel([2, 4])
        E = A.embed([1, 2, 3, 4])
        self.assertBlockClose(E[1, 3], A[0, 1])
        self.assertBlockClose(E[0, 0], np.zeros((3, 3)))
        with self.assertRaises(ValueError):
            A.embed([1, 2])

    def test_arithmetic(self):
        A = self.random_matrix(2, seed=5)
        B = self.random_matrix(2, seed=6)
        self.assertBlockClose((A + B).array, A.array + B.array)
        self.assertBlockClose((A - B).array, A.array - B.array)
        self.assertBlockClose((-A).array, -A.array)
        self.assertBlockClose(A.transpose().array, A.array.T)
        with self.assertRaises(ValueError):
            A + B.relabel([7, 8])


class TestPermutation(TestBase):

    def test_inverse_and_compose(self):
        p = BlockPermutation([2, 0, 1])
        self.assertEqual(list(p.inverse()), [1, 2, 0])
        self.assertEqual(p.compose(p.inverse()), BlockPermutation.identity(3))
        self.assertEqual(p(0), 2)
        with self.assertRaises(ValueError):
            BlockPermutation([0, 0, 1])

    def test_apply_matches_matrix(self):
        A = self.random_matrix(4, seed=7)
        p = BlockPermutation([3, 1, 0, 2])
        P = p.as_matrix()
        PA = apply_permutation(A, p)
        self.assertBlockClose(PA.array, P @ A.array @ P.T)
        for a in range(4):
            for b in range(4):
                self.assertBlockClose(PA[p(a), p(b)], A[a, b])

    def test_from_order(self):
        p = BlockPermutation.from_order([3, 1, 2], [1, 2, 3])
        self.assertEqual(list(p), [2, 0, 1])
        with self.assertRaises(ValueError):
            BlockPermutation.from_order([1, 2], [1, 3])


class TestPredicates(TestBase):

    def test_admittance_properties(self):
        _, Y = self.tree_admittance()
        self.assertTrue(is_block_symmetric(Y))
        self.assertTrue(has_zero_row_block_sums(Y))
        self.assertBlockClose(row_block_sums(Y), np.zeros((Y.n, 3, 3)))
        A = self.random_matrix(3, seed=8)
        self.assertFalse(is_block_symmetric(A))
        self.assertFalse(has_zero_row_block_sums(A))

    def test_normalize_diagonal(self):
        A = self.random_matrix(3, seed=9)
        N = normalize_diagonal(A)
        self.assertTrue(has_zero_row_block_sums(N))
        self.assertBlockClose(N[0, 1], A[0, 1])

    def test_block_support(self):
        net, Y = self.tree_admittance(measured=4, hidden=1, seed=2)
        support = block_support(Y)
        self.assertFalse(support.diagonal().any())
        for j, a in enumerate(Y.labels):
            for k, b in enumerate(Y.labels):
                if j != k:
                    self.assertEqual(support[j, k], net.has_edge(a, b))

    def test_relative_error_aligns_labels(self):
        A = self.random_matrix(3, seed=10)
        self.assertEqual(relative_error(A, A.reorder([3, 1, 2])), 0.0)
        with self.assertRaises(ValueError):
            relative_error(A, self.random_matrix(2))


class TestSchurComplement(TestBase):

    def test_against_dense_formula(self):
        for seed in range(10):
            A = self.random_matrix(5, seed=seed)
            keep = [0, 2, 3]
            S = schur_complement(A, keep)
            arr = A.array
            k = np.r_[0:3, 6:12]
            e = np.r_[3:6, 12:15]
            expected = arr[np.ix_(k, k)] - arr[np.ix_(k, e)] @ \
                np.linalg.solve(arr[np.ix_(e, e)], arr[np.ix_(e, k)])
            self.assertEqual(S.labels, (1, 3, 4))
            self.assertBlockClose(S.array, expected)

    def test_keep_order(self):
        A = self.random_matrix(4, seed=11)
        S = schur_complement(A, [3, 0])
        T = schur_complement(A, [0, 3])
        self.assertEqual(S.labels, (4, 1))
        self.assertBlockClose(S.reorder(T.labels).array, T.array)

    def test_keep_everything(self):
        A = self.random_matrix(3)
        self.assertBlockClose(schur_complement(A, [0, 1, 2]).array, A.array)

    def test_reduction_stays_admittance(self):
        for uniform in (False, True):
            net, Y = self.tree_admittance(measured=6, hidden=3, seed=4,
                                          uniform=uniform)
            Ybar = schur_complement(Y, range(len(net.measured)))
            self.assertBlockClose(Ybar.array, Ybar.array.T)
            self.assertTrue(has_zero_row_block_sums(Ybar))
            inner = Ybar.submatrix(range(Ybar.n - 1))
            self.assertTrue(is_re_positive_definite(inner.array))
            # lines that commute with each other keep Ybar[j, k] = Ybar[k, j]
            self.assertEqual(is_block_symmetric(Ybar), uniform)

    def test_permutation_conjugation(self):
        for seed in range(instance_count(20, 100)):
            rng = self.rng(seed)
            hidden = int(rng.integers(1, 4))
            _, Y = self.tree_admittance(hidden + 2 + int(rng.integers(0, 5)),
                                        hidden, seed=seed,
                                        uniform=seed % 2 == 1)
            n = Y.n
            keep = sorted(rng.choice(n, int(rng.integers(1, n)),
                                     replace=False).tolist())
            p = BlockPermutation(rng.permutation(n))
            moved = sorted(p(k) for k in keep)
            restricted = BlockPermutation([moved.index(p(k)) for k in keep])
            lhs = apply_permutation(schur_complement(Y, keep), restricted)
            rhs = schur_complement(apply_permutation(Y, p), moved)
            self.assertMatrixClose(lhs, rhs)

    def test_singular(self):
        with self.assertRaises(SingularSubmatrix):
            schur_complement(BlockMatrix.zeros(3), [0])


class TestPrincipalInverse(TestBase):

    def test_inverse(self):
        _, Y = self.tree_admittance(measured=5, hidden=2, seed=1)
        nodes = [0, 2, 4]
        inv = invert_principal_submatrix(Y, nodes)
        sub = Y.submatrix(nodes)
        self.assertEqual(inv.labels, sub.labels)
        self.assertBlockClose(inv.array @ sub.array, np.eye(9))

    def test_invalid_subsets(self):
        _, Y = self.tree_admittance()
        with self.assertRaises(InvalidSubset):
            invert_principal_submatrix(Y, [])
        with self.assertRaises(InvalidSubset):
            invert_principal_submatrix(Y, range(Y.n))

    def test_block_inverse_identities(self):
        for seed in range(5):
            A = self.random_matrix(4, seed=seed)
            for split in (1, 2, 3):
                self.assertTrue(block_inverse_identities_check(A, split))
        self.assertTrue(block_inverse_identities_check(BlockMatrix.identity(3),
                                                       1))
        with self.assertRaises(ValueError):
            block_inverse_identities_check(A, 0)

    def test_block_inverse_identities_on_admittances(self):
        for seed in range(instance_count(200, 1000)):
            rng = self.rng(seed)
            hidden = int(rng.integers(0, 4))
            measured = int(rng.integers(hidden + 3, 11))
            _, Y = self.tree_admittance(measured, hidden, seed=seed,
                                        uniform=seed % 3 == 0)
            size = int(rng.integers(2, Y.n))
            nodes = sorted(rng.choice(Y.n, size, replace=False).tolist())
            A = Y.submatrix(nodes)
            split = int(rng.integers(1, size))
            self.assertTrue(block_inverse_identities_check(A, split),
                            "seed %d" % seed)

    def test_block_inverse_identities_full_admittance(self):
        _, Y = self.tree_admittance(measured=5, hidden=2, seed=3)
        for split in (1, 3, 6):
            with self.assertRaises(SingularSubmatrix):
                block_inverse_identities_check(Y, split)

    def test_singular_submatrix_tolerance(self):
        tol = Tolerances(kappa_max=10.0)
        A = BlockMatrix(np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 100.0]))
        with self.assertRaises(SingularSubmatrix):
            invert_principal_submatrix(A.embed([1, 2, 3]), [0, 1], tol)


if __name__ == '__main__':
    unittest.main()
