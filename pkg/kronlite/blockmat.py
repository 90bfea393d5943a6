"""
Block-structured complex linear algebra.

Every matrix handled by kronlite is a grid of 3x3 complex "phase blocks",
one per pair of network nodes.  A phase block is a plain (3, 3) complex
numpy array; a BlockMatrix wraps a read-only dense array together with the
node labels of its row and column blocks.
"""

import numpy as np
import scipy.linalg

from kronlite._utils import KronError
from kronlite.config import get_tolerances


__all__ = ['PHASES', 'SingularBlock', 'SingularSubmatrix', 'InvalidSubset',
           'BlockMatrix', 'BlockPermutation', 'as_phase_block',
           'block_norm', 'is_symmetric_block', 'is_re_positive_definite',
           'is_line_admittance', 'random_phase_block', 'invert_block',
           'is_block_symmetric', 'has_zero_row_block_sums',
           'row_block_sums', 'invert_principal_submatrix',
           'schur_complement', 'block_inverse_identities_check',
           'apply_permutation', 'normalize_diagonal', 'block_support',
           'relative_error']


PHASES = 3

_I3 = np.eye(PHASES, dtype=complex)

# Below this |det| / ||B||^3 the adjugate formula loses too many digits
_ADJUGATE_DET_RATIO = 1e-8


class SingularBlock(KronError, ArithmeticError):
    pass


class SingularSubmatrix(KronError, ArithmeticError):
    pass


class InvalidSubset(KronError, ValueError):
    pass


def as_phase_block(B):
    """
    Coerce *B* to a (3, 3) complex array with finite entries.
    """
    arr = np.asarray(B, dtype=complex)
    if arr.shape != (PHASES, PHASES):
        raise ValueError("phase block must be 3x3, got shape %s"
                         % (arr.shape,))
    if not np.all(np.isfinite(arr)):
        raise ValueError("phase block has non-finite entries")
    return arr


def block_norm(B):
    return float(np.linalg.norm(B))


def is_symmetric_block(B, tol=None):
    tol = get_tolerances(tol)
    B = np.asarray(B)
    return block_norm(B - B.T) <= tol.tau_sym * block_norm(B)


def is_re_positive_definite(B, tol=None):
    """
    Whether the real part of *B* is positive definite, i.e. every
    eigenvalue of its symmetric part exceeds tau_sym * ||B||.
    """
    tol = get_tolerances(tol)
    re = np.asarray(B).real
    eig = np.linalg.eigvalsh((re + re.T) / 2)
    return bool(eig[0] > tol.tau_sym * block_norm(B))


def is_line_admittance(B, tol=None):
    B = np.asarray(B)
    if B.shape != (PHASES, PHASES) or not np.all(np.isfinite(B)):
        return False
    return is_symmetric_block(B, tol) and is_re_positive_definite(B, tol)


def random_phase_block(rng, margin=0.2):
    """
    Draw a symmetric complex 3x3 block whose real part is positive
    definite: entries uniform in the unit square, symmetrized, then shifted
    by c*I so that the smallest eigenvalue of the real part is >= *margin*.
    """
    B = rng.uniform(size=(PHASES, PHASES)) \
        + 1j * rng.uniform(size=(PHASES, PHASES))
    S = (B + B.T) / 2
    lowest = np.linalg.eigvalsh(S.real)[0]
    return S + max(0.0, margin - lowest) * _I3


def invert_block(B, tol=None):
    """
    Invert a phase block.  The explicit adjugate formula is used unless
    the determinant is tiny relative to ||B||^3, in which case an LU
    factorization with partial pivoting takes over.

    Raises SingularBlock if the smallest singular value is below
    sigma_min * ||B|| or the condition number exceeds kappa_max.
    """
    tol = get_tolerances(tol)
    B = as_phase_block(B)
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[0] == 0 or sv[-1] < tol.sigma_min * sv[0] \
            or sv[0] > tol.kappa_max * sv[-1]:
        raise SingularBlock("phase block is singular (singular values %s)"
                            % np.array2string(sv, precision=3))
    r0, r1, r2 = B
    c0 = np.cross(r1, r2)
    det = np.dot(r0, c0)
    if abs(det) >= _ADJUGATE_DET_RATIO * block_norm(B) ** 3:
        adj = np.column_stack([c0, np.cross(r2, r0), np.cross(r0, r1)])
        return adj / det
    lu = scipy.linalg.lu_factor(B)
    return scipy.linalg.lu_solve(lu, _I3)


def _element_indices(block_indices):
    idx = np.asarray(block_indices, dtype=np.intp).reshape(-1)
    return (PHASES * idx[:, None] + np.arange(PHASES)).reshape(-1)


class BlockMatrix(object):
    """
    A read-only grid of 3x3 complex blocks.

    *labels* name the row blocks (default 1..rows); *col_labels* name the
    column blocks and default to *labels* for square matrices.  Block
    indices are 0-based positions; labels are the node identifiers.
    """

    __slots__ = ('_array', '_labels', '_col_labels')

    def __init__(self, array, labels=None, col_labels=None):
        arr = np.array(array, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] % PHASES or arr.shape[1] % PHASES:
            raise ValueError("array shape %s is not a grid of 3x3 blocks"
                             % (arr.shape,))
        if not np.all(np.isfinite(arr)):
            raise ValueError("block matrix has non-finite entries")
        arr.flags.writeable = False
        rows, cols = arr.shape[0] // PHASES, arr.shape[1] // PHASES
        labels = self._check_labels(labels, rows)
        if col_labels is None and rows == cols:
            col_labels = labels
        col_labels = self._check_labels(col_labels, cols)
        self._array = arr
        self._labels = labels
        self._col_labels = col_labels

    @staticmethod
    def _check_labels(labels, count):
        if labels is None:
            return tuple(range(1, count + 1))
        labels = tuple(labels)
        if len(labels) != count:
            raise ValueError("expected %d labels, got %d"
                             % (count, len(labels)))
        if len(set(labels)) != count:
            raise ValueError("duplicate labels in %r" % (labels,))
        return labels

    @classmethod
    def from_blocks(cls, grid, labels=None, col_labels=None):
        grid = [[as_phase_block(B) for B in row] for row in grid]
        if not grid:
            return cls(np.zeros((0, 0), dtype=complex), labels, col_labels)
        return cls(np.block(grid), labels, col_labels)

    @classmethod
    def zeros(cls, n, labels=None):
        return cls(np.zeros((PHASES * n, PHASES * n), dtype=complex), labels)

    @classmethod
    def identity(cls, n, labels=None):
        return cls(np.eye(PHASES * n, dtype=complex), labels)

    @classmethod
    def block_diag(cls, *mats):
        arrays = [m.array for m in mats]
        labels = sum((m.labels for m in mats), ())
        if not arrays:
            return cls.zeros(0)
        return cls(scipy.linalg.block_diag(*arrays), labels)

    @property
    def array(self):
        return self._array

    @property
    def shape(self):
        return len(self._labels), len(self._col_labels)

    @property
    def n(self):
        return len(self._labels)

    @property
    def is_square(self):
        return self._labels == self._col_labels

    @property
    def labels(self):
        return self._labels

    @property
    def col_labels(self):
        return self._col_labels

    @property
    def blocks(self):
        """A (rows, cols, 3, 3) read-only view of the blocks."""
        rows, cols = self.shape
        return self._array.reshape(rows, PHASES, cols, PHASES).swapaxes(1, 2)

    def block(self, j, k):
        return self.blocks[j, k]

    def __getitem__(self, pos):
        j, k = pos
        return self.blocks[j, k]

    def index(self, label):
        try:
            return self._labels.index(label)
        except ValueError:
            raise KeyError("no block labelled %r" % (label,))

    def col_index(self, label):
        try:
            return self._col_labels.index(label)
        except ValueError:
            raise KeyError("no column block labelled %r" % (label,))

    def submatrix(self, rows, cols=None):
        """
        Return the blocks at the given row (and column) positions; *cols*
        defaults to *rows*.
        """
        rows = list(rows)
        cols = rows if cols is None else list(cols)
        arr = self._array[np.ix_(_element_indices(rows),
                                 _element_indices(cols))]
        return BlockMatrix(arr, [self._labels[i] for i in rows],
                           [self._col_labels[i] for i in cols])

    def restrict(self, labels, col_labels=None):
        """Like submatrix() but addressed by labels."""
        rows = [self.index(x) for x in labels]
        cols = None
        if col_labels is not None:
            cols = [self.col_index(x) for x in col_labels]
        elif not self.is_square:
            cols = list(range(len(self._col_labels)))
        return self.submatrix(rows, cols)

    def reorder(self, labels):
        """Permute a square matrix so its blocks follow *labels*."""
        labels = tuple(labels)
        if sorted(labels, key=repr) != sorted(self._labels, key=repr):
            raise ValueError("reorder() needs a permutation of the labels")
        return self.restrict(labels)

    def embed(self, labels):
        """
        Place this square matrix into a zero matrix over *labels*, a
        superset of its own labels.
        """
        labels = tuple(labels)
        pos = dict((x, i) for i, x in enumerate(labels))
        try:
            target = _element_indices([pos[x] for x in self._labels])
        except KeyError as e:
            raise ValueError("label %r missing from embedding" % (e.args[0],))
        n = len(labels)
        out = np.zeros((PHASES * n, PHASES * n), dtype=complex)
        out[np.ix_(target, target)] = self._array
        return BlockMatrix(out, labels)

    def with_block(self, j, k, B):
        arr = self._array.copy()
        arr[PHASES * j:PHASES * (j + 1),
            PHASES * k:PHASES * (k + 1)] = as_phase_block(B)
        return BlockMatrix(arr, self._labels, self._col_labels)

    def relabel(self, labels, col_labels=None):
        return BlockMatrix(self._array, labels, col_labels)

    def transpose(self):
        return BlockMatrix(self._array.T, self._col_labels, self._labels)

    def norm(self):
        return float(np.linalg.norm(self._array))

    def _check_aligned(self, other):
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        if self._labels != other._labels \
                or self._col_labels != other._col_labels:
            raise ValueError("block matrices have different labels")
        return None

    def __add__(self, other):
        res = self._check_aligned(other)
        if res is NotImplemented:
            return res
        return BlockMatrix(self._array + other._array, self._labels,
                           self._col_labels)

    def __sub__(self, other):
        res = self._check_aligned(other)
        if res is NotImplemented:
            return res
        return BlockMatrix(self._array - other._array, self._labels,
                           self._col_labels)

    def __neg__(self):
        return BlockMatrix(-self._array, self._labels, self._col_labels)

    def __repr__(self):
        rows, cols = self.shape
        if self.is_square:
            return "<BlockMatrix n=%d labels=%r>" % (rows, self._labels)
        return "<BlockMatrix %dx%d rows=%r cols=%r>" % (
            rows, cols, self._labels, self._col_labels)


class BlockPermutation(object):
    """
    A relabeling of block positions: position i moves to position
    perm[i].  It acts on whole 3x3 blocks, never on single phases.
    """

    __slots__ = ('_perm',)

    def __init__(self, perm):
        perm = tuple(int(i) for i in perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("%r is not a permutation of 0..%d"
                             % (perm, len(perm) - 1))
        self._perm = perm

    @classmethod
    def identity(cls, n):
        return cls(range(n))

    @classmethod
    def from_order(cls, order, target):
        """
        The permutation moving the item at order[i] to its position in
        *target*.
        """
        pos = dict((x, i) for i, x in enumerate(target))
        if len(pos) != len(order) or set(pos) != set(order):
            raise ValueError("orders contain different items")
        return cls(pos[x] for x in order)

    def __call__(self, i):
        return self._perm[i]

    def __len__(self):
        return len(self._perm)

    def __iter__(self):
        return iter(self._perm)

    def inverse(self):
        inv = [0] * len(self._perm)
        for i, j in enumerate(self._perm):
            inv[j] = i
        return BlockPermutation(inv)

    def compose(self, other):
        """The permutation applying *other* first, then self."""
        if len(other) != len(self):
            raise ValueError("permutation sizes differ")
        return BlockPermutation(self._perm[j] for j in other)

    def as_matrix(self):
        """The 3n x 3n matrix P (x) I3 with (P A P^T)[p(a), p(b)] = A[a, b]."""
        n = len(self._perm)
        P = np.zeros((n, n))
        P[list(self._perm), list(range(n))] = 1.0
        return np.kron(P, np.eye(PHASES))

    def __eq__(self, other):
        if not isinstance(other, BlockPermutation):
            return NotImplemented
        return self._perm == other._perm

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self._perm)

    def __repr__(self):
        return "BlockPermutation(%r)" % (self._perm,)


def is_block_symmetric(A, tol=None):
    tol = get_tolerances(tol)
    blocks = A.blocks
    diff = np.linalg.norm(blocks - blocks.swapaxes(0, 1), axis=(2, 3))
    return bool(np.all(diff <= tol.tau_sym * max(1.0, A.norm())))


def row_block_sums(A):
    """The (rows, 3, 3) array of sum_k A[j, k] for every row block j."""
    return A.blocks.sum(axis=1)


def has_zero_row_block_sums(A, tol=None):
    tol = get_tolerances(tol)
    sums = np.linalg.norm(row_block_sums(A), axis=(1, 2))
    return bool(np.all(sums <= tol.tau_solve * max(1.0, A.norm())))


def _checked_inverse(M, tol, what):
    if M.size == 0:
        return M.copy()
    with np.errstate(all='ignore'):
        cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > tol.kappa_max:
        raise SingularSubmatrix("%s is singular (condition number %.3g)"
                                % (what, cond))
    return scipy.linalg.inv(M)


def invert_principal_submatrix(A, nodes, tol=None):
    """
    Invert the principal submatrix of *A* at block positions *nodes*.
    The whole matrix is rejected with InvalidSubset: an admittance matrix
    with zero row-block sums is never invertible.
    """
    tol = get_tolerances(tol)
    nodes = list(nodes)
    if not nodes:
        raise InvalidSubset("empty node subset")
    if len(set(nodes)) != len(nodes):
        raise ValueError("duplicate nodes in %r" % (nodes,))
    if len(nodes) == A.n:
        raise InvalidSubset("subset covers all %d nodes; only strict "
                            "principal submatrices are invertible" % A.n)
    sub = A.submatrix(nodes)
    inv = _checked_inverse(sub.array, tol,
                           "principal submatrix %r" % (sub.labels,))
    return BlockMatrix(inv, sub.labels)


def schur_complement(A, keep, tol=None):
    """
    Eliminate every block not listed in *keep*:
    A/A22 = A11 - A12 A22^-1 A21, with the kept blocks in *keep* order.
    """
    tol = get_tolerances(tol)
    keep = list(keep)
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate nodes in %r" % (keep,))
    keep_set = set(keep)
    elim = [i for i in range(A.n) if i not in keep_set]
    A11 = A.submatrix(keep)
    if not elim:
        return A11
    A12 = A.submatrix(keep, elim).array
    A21 = A.submatrix(elim, keep).array
    A22 = A.submatrix(elim).array
    with np.errstate(all='ignore'):
        cond = np.linalg.cond(A22)
    if not np.isfinite(cond) or cond > tol.kappa_max:
        raise SingularSubmatrix(
            "eliminated block %r is singular (condition number %.3g)"
            % ([A.labels[i] for i in elim], cond))
    X = scipy.linalg.solve(A22, A21)
    return BlockMatrix(A11.array - A12 @ X, A11.labels)


def block_inverse_identities_check(A, split, tol=None):
    """
    Assemble A^-1 twice, once around the inverse of the leading principal
    block (split blocks) and once around the inverse of the trailing one,
    and check that both agree and invert *A*.
    """
    tol = get_tolerances(tol)
    if not 0 < split < A.n:
        raise ValueError("split must lie strictly inside 1..%d" % (A.n - 1))
    m = PHASES * split
    arr = A.array
    A11, A12 = arr[:m, :m], arr[:m, m:]
    A21, A22 = arr[m:, :m], arr[m:, m:]

    inv11 = _checked_inverse(A11, tol, "leading block")
    inv22 = _checked_inverse(A22, tol, "trailing block")
    inv_s11 = _checked_inverse(A22 - A21 @ inv11 @ A12, tol,
                               "Schur complement of the leading block")
    inv_s22 = _checked_inverse(A11 - A12 @ inv22 @ A21, tol,
                               "Schur complement of the trailing block")

    via_leading = np.block([
        [inv11 + inv11 @ A12 @ inv_s11 @ A21 @ inv11,
         -inv11 @ A12 @ inv_s11],
        [-inv_s11 @ A21 @ inv11, inv_s11],
    ])
    via_trailing = np.block([
        [inv_s22, -inv_s22 @ A12 @ inv22],
        [-inv22 @ A21 @ inv_s22,
         inv22 + inv22 @ A21 @ inv_s22 @ A12 @ inv22],
    ])

    eye = np.eye(arr.shape[0])
    scale = np.linalg.norm(via_leading)
    if np.linalg.norm(via_leading - via_trailing) > tol.tau_solve * scale:
        return False
    bound = tol.tau_solve * np.linalg.norm(arr) * scale
    for inv in (via_leading, via_trailing):
        if np.linalg.norm(arr @ inv - eye) > bound:
            return False
    return True


def apply_permutation(A, p):
    """
    Return P A P^T: result[p(a), p(b)] = A[a, b].  Labels travel with
    their blocks.
    """
    if len(p) != A.n or not A.is_square:
        raise ValueError("permutation of size %d does not fit %r"
                         % (len(p), A))
    return A.submatrix(list(p.inverse()))


def normalize_diagonal(A):
    """
    Replace every diagonal block so that each row-block sum is zero,
    leaving off-diagonal blocks untouched: the admittance matrix of the
    same graph in isolation.
    """
    arr = np.array(A.array)
    n = A.n
    view = arr.reshape(n, PHASES, n, PHASES)
    sums = view.sum(axis=2)
    for j in range(n):
        view[j, :, j, :] -= sums[j]
    return BlockMatrix(arr, A.labels)


def block_support(A, tol=None):
    """
    Boolean (n, n) matrix marking the off-diagonal blocks whose norm
    exceeds tau_zero * ||A||.
    """
    tol = get_tolerances(tol)
    norms = np.linalg.norm(A.blocks, axis=(2, 3))
    support = norms > tol.tau_zero * A.norm()
    np.fill_diagonal(support, False)
    return support


def relative_error(A, B):
    """
    ||A - B||_F / ||A||_F, after aligning B to A's labels when both carry
    the same label set in a different order.
    """
    if A.labels != B.labels and set(A.labels) == set(B.labels):
        B = B.reorder(A.labels)
    if A.array.shape != B.array.shape:
        raise ValueError("cannot compare %r with %r" % (A, B))
    diff = np.linalg.norm(A.array - B.array)
    scale = np.linalg.norm(A.array)
    if scale == 0:
        return float(diff)
    return float(diff / scale)
