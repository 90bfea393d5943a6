"""
Iterative Kron reduction that keeps the partially reduced matrix in a
permuted layout with the growing clique in the trailing blocks:

    [ rest | band | clique body | target ]

*band* holds the neighbours of the target outside the clique (measured
first, then ascending label), the clique body the other clique members and
*target* the node eliminated in this step.  Rest-to-target blocks and
band-to-body blocks are exactly zero, the band is block diagonal, and every
block with an index outside the clique still equals the input matrix.
"""

import logging
from collections import namedtuple

import networkx as nx
import numpy as np

from kronlite._utils import KronError, Violation
from kronlite.blockmat import (BlockMatrix, BlockPermutation, PHASES,
                               apply_permutation, block_norm, block_support,
                               invert_block)
from kronlite.config import get_tolerances
from kronlite.network import HIDDEN, MEASURED, Node


__all__ = ['StructureViolation', 'KronState', 'one_step_reduce',
           'sequential_reduce', 'hidden_subtrees', 'elimination_order',
           'iterative_reduce', 'reduce_by_subtrees',
           'check_invariant_structure', 'neighbours_of']


logger = logging.getLogger(__name__)


class StructureViolation(KronError, ValueError):
    pass


_KronStateBase = namedtuple('KronState', [
    'l', 'A_hat', 'clique_start', 'y_stack', 'y_hat_stack', 'alpha',
    'perm', 'node_ids'])


class KronState(_KronStateBase):
    """
    One step of the reduction: the permuted matrix A_hat right before its
    last block (the target) is eliminated.

    * y_stack, y_hat_stack: tuples of (label, 3x3 block) for the band
    * perm: moves A_hat positions to the ascending-label order of the nodes
      still present
    * node_ids: tuple of Node(label, role) per A_hat position
    """
    __slots__ = ()

    @property
    def n_l(self):
        return len(self.y_stack)

    @property
    def band_start(self):
        return self.clique_start - self.n_l

    @property
    def target(self):
        return self.A_hat.labels[-1]

    @property
    def clique_labels(self):
        return self.A_hat.labels[self.clique_start:]

    @property
    def band_labels(self):
        return self.A_hat.labels[self.band_start:self.clique_start]

    def unpermuted(self):
        """A^l in ascending label order."""
        return apply_permutation(self.A_hat, self.perm)

    def replace(self, **fields):
        return self._replace(**fields)

    def __repr__(self):
        return "<KronState l=%d target=%r band=%r clique=%r>" % (
            self.l, self.target, self.band_labels, self.clique_labels)


def one_step_reduce(A, node, tol=None):
    """
    Eliminate the block at position *node*:
    A'[i, j] = A[i, j] - A[i, node] A[node, node]^-1 A[node, j].
    Blocks in rows or columns not adjacent to *node* are left bit-exact.
    """
    tol = get_tolerances(tol)
    if not 0 <= node < A.n:
        raise IndexError("block %d out of range for %r" % (node, A))
    arr = A.array
    sl = slice(PHASES * node, PHASES * (node + 1))
    inv = invert_block(arr[sl, sl], tol)
    keep = np.ones(arr.shape[0], dtype=bool)
    keep[sl] = False
    col = arr[keep][:, sl]
    row = arr[sl][:, keep]
    reduced = arr[np.ix_(keep, keep)] - col @ (inv @ row)
    labels = A.labels[:node] + A.labels[node + 1:]
    return BlockMatrix(reduced, labels)


def sequential_reduce(A, order, tol=None):
    """Eliminate the labelled nodes one at a time, in *order*."""
    for label in order:
        A = one_step_reduce(A, A.index(label), tol)
    return A


def neighbours_of(A, label, tol=None):
    """Labels with a nonzero off-diagonal block in *label*'s row."""
    tol = get_tolerances(tol)
    i = A.index(label)
    norms = np.linalg.norm(A.blocks[i], axis=(1, 2))
    mask = norms > tol.tau_zero * A.norm()
    mask[i] = False
    return [A.labels[j] for j in np.nonzero(mask)[0]]


def hidden_subtrees(A0, hidden, tol=None):
    """
    Split *hidden* into the connected hidden subtrees of G(A0), ordered by
    smallest label, each in its default elimination order: start at the
    smallest-labelled leaf of the subtree and proceed breadth-first with
    sorted neighbours, so every target already belongs to the clique.
    """
    hidden = set(hidden)
    support = block_support(A0, tol)
    g = nx.Graph()
    g.add_nodes_from(x for x in A0.labels if x in hidden)
    for j, k in zip(*np.nonzero(np.triu(support))):
        a, b = A0.labels[j], A0.labels[k]
        if a in hidden and b in hidden:
            g.add_edge(a, b)
    orders = []
    for comp in sorted(nx.connected_components(g), key=min):
        sub = g.subgraph(comp)
        start = min(x for x in comp if sub.degree(x) <= 1)
        order = [start]
        order.extend(v for _, v in nx.bfs_edges(sub, start,
                                                sort_neighbors=sorted))
        orders.append(order)
    return orders


def elimination_order(A0, hidden, tol=None):
    order = []
    for sub in hidden_subtrees(A0, hidden, tol):
        order.extend(sub)
    return order


def _layout(A, target, clique, roles, tol):
    """Order A's labels as rest + band + clique body + target."""
    in_clique = set(clique)
    band = [x for x in neighbours_of(A, target, tol) if x not in in_clique]
    band.sort(key=lambda x: (roles(x) == HIDDEN, x))
    in_band = set(band)
    body = [x for x in clique if x != target]
    rest = [x for x in A.labels if x not in in_band and x not in in_clique]
    return rest, band, body


def iterative_reduce(A0, hidden, tol=None):
    """
    Kron-reduce *A0* by eliminating the labels in *hidden* one at a time,
    in the given order, keeping the permuted clique layout.  *A0* must be
    the admittance matrix of a tree whose hidden nodes form one connected
    subtree (see elimination_order() for an admissible order).

    Returns the reduced matrix, in A0's label order, and the list of
    KronStates, one per eliminated node.
    """
    tol = get_tolerances(tol)
    order = list(hidden)
    if len(set(order)) != len(order):
        raise ValueError("duplicate hidden labels in %r" % (order,))
    missing = [x for x in order if x not in A0.labels]
    if missing:
        raise ValueError("hidden labels %r not in matrix" % (missing,))
    if not order:
        return A0, []

    hidden_set = set(order)

    def roles(x):
        return HIDDEN if x in hidden_set else MEASURED

    A = A0
    clique = [order[0]]
    trace = []
    for l, target in enumerate(order):
        if target not in clique:
            raise StructureViolation(
                "node %r is not in the current clique %r; the elimination "
                "order must grow a single clique" % (target, clique)
            ).locate("forward", l)
        rest, band, body = _layout(A, target, clique, roles, tol)
        if len(band) < 2:
            raise StructureViolation(
                "node %r has %d neighbour(s) outside the clique, at least 2 "
                "expected" % (target, len(band))).locate("forward", l)
        labels = rest + band + body + [target]
        A_hat = A.reorder(labels)
        blocks = A_hat.blocks
        t = len(labels) - 1
        b0 = len(rest)
        y_stack, y_hat_stack = [], []
        for i, label in enumerate(band, b0):
            y = -blocks[i, t]
            d = blocks[i, :b0].sum(axis=0)
            y_stack.append((label, y))
            y_hat_stack.append((label, y - d))
        state = KronState(
            l=l, A_hat=A_hat, clique_start=b0 + len(band),
            y_stack=tuple(y_stack), y_hat_stack=tuple(y_hat_stack),
            alpha=blocks[t, t],
            perm=BlockPermutation.from_order(labels, sorted(labels)),
            node_ids=tuple(Node(x, roles(x)) for x in labels))
        trace.append(state)
        logger.debug("forward step %d: eliminating %r, band %r, clique "
                     "size %d", l, target, band, len(body) + 1)
        try:
            A = one_step_reduce(A_hat, t, tol)
        except KronError as e:
            raise e.locate("forward", l)
        clique = band + body

    alive = set(A.labels)
    reduced = A.reorder([x for x in A0.labels if x in alive])
    logger.info("iterative reduction eliminated %d node(s), final clique "
                "of %d", len(order), len(clique))
    return reduced, trace


def reduce_by_subtrees(A0, hidden, tol=None):
    """
    Run iterative_reduce() once per hidden subtree.  Returns the reduced
    matrix and the list of per-subtree traces.
    """
    traces = []
    A = A0
    for i, order in enumerate(hidden_subtrees(A0, hidden, tol)):
        try:
            A, trace = iterative_reduce(A, order, tol)
        except KronError as e:
            raise e.locate("subtree %d" % i)
        traces.append(trace)
    return A, traces


def check_invariant_structure(s, A0, tol=None):
    """
    Check a KronState against the matrix it came from.  Returns a list of
    Violations with kinds

    * 'corner-block': rest-to-target blocks not zero
    * 'band-structure': band not block diagonal, band-to-body blocks not
      zero, fewer than two band nodes, or y_stack not matching A_hat
    * 'off-clique-block': a block with an index outside the clique differs
      from A0
    * 'y-hat': y_hat is not y minus the band's row sums into the rest
      (plain y on measured rows without other neighbours), or differs from
      the band diagonal
    * 'permutation': perm does not sort A_hat's labels
    """
    tol = get_tolerances(tol)
    out = []
    A = s.A_hat
    blocks = A.blocks
    labels = A.labels
    n = A.n
    t = n - 1
    b0, c0 = s.band_start, s.clique_start
    scale = tol.tau_solve * max(1.0, A0.norm())

    corner = np.linalg.norm(blocks[:b0, t]) + np.linalg.norm(blocks[t, :b0])
    if corner != 0:
        out.append(Violation('corner-block', s.target,
                             "rest-to-target blocks are not zero"))

    if s.n_l < 2:
        out.append(Violation('band-structure', s.target,
                             "only %d band node(s)" % s.n_l))
    band = blocks[b0:c0, b0:c0]
    off = np.linalg.norm(band, axis=(2, 3))
    np.fill_diagonal(off, 0)
    if np.any(off != 0):
        out.append(Violation('band-structure', labels[b0:c0],
                             "band is not block diagonal"))
    if np.any(blocks[b0:c0, c0:t] != 0):
        out.append(Violation('band-structure', labels[b0:c0],
                             "band-to-clique blocks are not zero"))
    for i, (label, y) in enumerate(s.y_stack, b0):
        if label != labels[i] or block_norm(y + blocks[i, t]) > scale:
            out.append(Violation('band-structure', label,
                                 "y does not match the target column"))

    A0r = A0.restrict(labels)
    diff = np.linalg.norm(blocks - A0r.blocks, axis=(2, 3))
    inside = np.zeros((n, n), dtype=bool)
    inside[c0:, c0:] = True
    bad = np.argwhere((diff > scale) & ~inside)
    if len(bad):
        out.append(Violation(
            'off-clique-block', [(labels[i], labels[j]) for i, j in bad],
            "blocks outside the clique differ from the input matrix"))

    roles = dict(s.node_ids)
    for i, ((label, y), (_, y_hat)) in enumerate(
            zip(s.y_stack, s.y_hat_stack), b0):
        d = blocks[i, :b0].sum(axis=0)
        if roles.get(label) == MEASURED and block_norm(d) == 0:
            if block_norm(y_hat - y) > scale:
                out.append(Violation('y-hat', label,
                                     "y_hat differs from y on a measured "
                                     "row"))
        elif block_norm(y_hat - (y - d)) > scale:
            out.append(Violation('y-hat', label,
                                 "y_hat is not y minus the rest row sums"))
        if block_norm(y_hat - blocks[i, i]) > scale:
            out.append(Violation('y-hat', label,
                                 "y_hat differs from the band diagonal"))

    if s.perm != BlockPermutation.from_order(labels, sorted(labels)):
        out.append(Violation('permutation', s.l,
                             "perm does not sort the labels"))
    return out
