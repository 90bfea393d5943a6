"""
Reverse iterative Kron reduction: rebuild a tree's admittance matrix from
the clique it reduces to, recovering one hidden node per iteration.

Each iteration picks a sibling group S of the current clique, solves for
the lines joining S to their common parent h, the parent's own diagonal
block alpha and its couplings to the rest of the clique, and reassembles
the state that, once h is eliminated, gives back the current matrix.
"""

import logging
from collections import namedtuple

import numpy as np

from kronlite._utils import KronError
from kronlite.blockmat import (BlockMatrix, BlockPermutation, PHASES,
                               block_support, invert_block,
                               is_re_positive_definite, relative_error)
from kronlite.config import get_tolerances
from kronlite.kron_forward import KronState, StructureViolation
from kronlite.network import (HIDDEN, MEASURED, Node,
                              network_from_admittance, reduce_network,
                              validate)
from kronlite.sibling import NoGroupFound, SiblingGroup, find_sibling_groups


__all__ = ['DegenerateSystem', 'AssumptionBreach', 'NeighbourColumn',
           'solve_pair', 'recover_alpha', 'recover_neighbor_column',
           'recover_clique_remainder', 'reverse_step', 'reverse_reduce',
           'identify_clique']


logger = logging.getLogger(__name__)


class DegenerateSystem(KronError, ValueError):
    pass


class AssumptionBreach(KronError, ValueError):
    pass


NeighbourColumn = namedtuple('NeighbourColumn', ['y', 'y_hat', 'alpha'])


def _symmetrized(B, what, tol):
    B = np.asarray(B)
    asym = np.linalg.norm(B - B.T)
    if asym > tol.tau_sym * np.linalg.norm(B):
        raise AssumptionBreach("%s is not symmetric (relative asymmetry "
                               "%.3g)" % (what, asym / np.linalg.norm(B)))
    return (B + B.T) / 2


def _checked_line(B, what, tol):
    B = _symmetrized(B, what, tol)
    if not is_re_positive_definite(B, tol):
        raise AssumptionBreach("%s does not have a positive definite real "
                               "part" % what)
    return B


def _inverse_of_sum(first, second, what, tol):
    P = first + second
    sv = np.linalg.svd(P, compute_uv=False)
    scale = np.linalg.norm(first, 2) + np.linalg.norm(second, 2)
    if sv[-1] <= tol.tau_solve * scale:
        raise DegenerateSystem(
            "%s is singular: the eliminated hidden node has only two "
            "neighbours" % what)
    return invert_block(P, tol)


def solve_pair(a1, a2, a3, tol=None):
    """
    Recover the lines y1, y2 from two siblings to their parent given
    a1 = y1 - y1 alpha^-1 y1^T, a2 = y2 - y2 alpha^-1 y2^T and
    a3 = -y1 alpha^-1 y2^T:

        y1 = (a1 a3^-T - a3 a2^-1) (a2^-1 + a3^-T)^-1
        y2 = (a2 a3^-1 - a3^T a1^-1) (a1^-1 + a3^-1)^-1
    """
    tol = get_tolerances(tol)
    a1 = np.asarray(a1, dtype=complex)
    a2 = np.asarray(a2, dtype=complex)
    a3 = np.asarray(a3, dtype=complex)
    inv1 = invert_block(a1, tol)
    inv2 = invert_block(a2, tol)
    inv3 = invert_block(a3, tol)
    inv3t = inv3.T
    y1 = (a1 @ inv3t - a3 @ inv2) @ _inverse_of_sum(inv2, inv3t,
                                                    "a2^-1 + a3^-T", tol)
    y2 = (a2 @ inv3 - a3.T @ inv1) @ _inverse_of_sum(inv1, inv3,
                                                     "a1^-1 + a3^-1", tol)
    return y1, y2


def recover_alpha(y1, y2, a3, tol=None):
    """alpha = -y2^T a3^-1 y1."""
    return -np.asarray(y2).T @ invert_block(a3, tol) @ np.asarray(y1)


def recover_neighbor_column(M11, d, alpha=None, tol=None):
    """
    Recover the lines from the sibling band to its parent.

    *M11* is the siblings' block of the current clique (actual diagonal),
    *d* the siblings' row sums into nodes outside the clique.  Lines 1
    and 2 come from solve_pair(), the others from the first row:
    y_j^T = -alpha y1^-1 M11[1, j].  Returns NeighbourColumn(y, y_hat,
    alpha) with y_hat = y - d.
    """
    tol = get_tolerances(tol)
    n_l = M11.n
    if n_l < 2:
        raise StructureViolation("a sibling band needs at least 2 nodes, "
                                 "got %d" % n_l)
    if len(d) != n_l:
        raise ValueError("expected %d row sums, got %d" % (n_l, len(d)))
    arr = M11.array
    if np.linalg.norm(arr - arr.T) > tol.tau_sym * np.linalg.norm(arr):
        raise AssumptionBreach("sibling block of the clique is not "
                               "symmetric")
    blocks = M11.blocks
    a1 = blocks[0, 0] + d[0]
    a2 = blocks[1, 1] + d[1]
    a3 = blocks[0, 1]
    y1, y2 = solve_pair(a1, a2, a3, tol)
    y1 = _checked_line(y1, "line to %r" % (M11.labels[0],), tol)
    y2 = _checked_line(y2, "line to %r" % (M11.labels[1],), tol)
    if alpha is None:
        alpha = recover_alpha(y1, y2, a3, tol)
    alpha = _checked_line(alpha, "parent diagonal block", tol)

    ys = [y1, y2]
    lead = -alpha @ invert_block(y1, tol)
    for j in range(2, n_l):
        y = (lead @ blocks[0, j]).T
        ys.append(_checked_line(y, "line to %r" % (M11.labels[j],), tol))
    y_hat = [y - np.asarray(dj) for y, dj in zip(ys, d)]
    return NeighbourColumn(ys, y_hat, alpha)


def recover_clique_remainder(C_next, y1, alpha, n_l, tol=None):
    """
    Given the current clique ordered as [siblings | remainder], recover
    the parent's couplings c12[m] = r[m]^T y1^-T alpha to the remainder
    (r is the first sibling's row) and the remainder's block before the
    parent was eliminated: C11 = M22 + c12 alpha^-1 c12^T.
    """
    tol = get_tolerances(tol)
    n = C_next.n
    rest = list(range(n_l, n))
    if not rest:
        return (), BlockMatrix.zeros(0, ())
    blocks = C_next.blocks
    rhs = invert_block(y1, tol).T @ alpha
    c12 = np.einsum('mba,bc->mac', blocks[0, rest], rhs)
    ainv = invert_block(alpha, tol)
    fill = np.einsum('mab,bc,ndc->mnad', c12, ainv, c12)
    C11 = blocks[np.ix_(rest, rest)] + fill
    r = len(rest)
    arr = C11.swapaxes(1, 2).reshape(PHASES * r, PHASES * r)
    asym = np.linalg.norm(arr - arr.T)
    if asym > tol.tau_sym * np.linalg.norm(arr):
        raise AssumptionBreach("recovered clique remainder is not "
                               "symmetric")
    arr = (arr + arr.T) / 2
    labels = [C_next.labels[i] for i in rest]
    return tuple(c12), BlockMatrix(arr, labels)


def reverse_step(A_hat_next, clique_start, siblings, new_label, hidden=(),
                 l=0, tol=None):
    """
    Undo one forward step.  *siblings* (a SiblingGroup or clique-relative
    indices) become the band of the new hidden node *new_label*; *hidden*
    lists the labels already known to be hidden.  Returns the predecessor
    KronState, laid out as [rest | siblings | remainder | new node].
    """
    tol = get_tolerances(tol)
    labels = A_hat_next.labels
    clique = labels[clique_start:]
    if isinstance(siblings, SiblingGroup):
        members = siblings.members
    else:
        members = tuple(siblings)
    if len(members) < 2:
        raise StructureViolation("a sibling group needs at least 2 members, "
                                 "got %d" % len(members))
    if len(set(members)) != len(members) \
            or not all(0 <= i < len(clique) for i in members):
        raise ValueError("invalid sibling positions %r for a clique of %d"
                         % (members, len(clique)))
    if new_label in labels:
        raise ValueError("label %r already in use" % (new_label,))

    hidden = set(hidden)
    band = sorted((clique[i] for i in members),
                  key=lambda x: (x in hidden, x))
    in_band = set(band)
    body = [x for x in clique if x not in in_band]
    rest = list(labels[:clique_start])
    n_l = len(band)

    blocks = A_hat_next.blocks
    d = [blocks[A_hat_next.index(x), :clique_start].sum(axis=0)
         for x in band]
    C_next = A_hat_next.restrict(band + body)
    col = recover_neighbor_column(C_next.submatrix(range(n_l)), d, tol=tol)
    c12, C11 = recover_clique_remainder(C_next, col.y[0], col.alpha, n_l,
                                        tol)

    order = rest + band + body + [new_label]
    n = len(order)
    t = n - 1
    s0 = len(rest)
    q0 = s0 + n_l
    arr = np.zeros((PHASES * n, PHASES * n), dtype=complex)
    view = arr.reshape(n, PHASES, n, PHASES).swapaxes(1, 2)
    view[:t, :t] = A_hat_next.restrict(order[:t]).blocks
    view[s0:t, s0:t] = 0
    for a, (y, y_hat) in enumerate(zip(col.y, col.y_hat)):
        view[s0 + a, s0 + a] = y_hat
        view[s0 + a, t] = -y
        view[t, s0 + a] = -y.T
    if body:
        view[q0:t, q0:t] = C11.blocks
        for m, c in enumerate(c12):
            view[q0 + m, t] = c
            view[t, q0 + m] = c.T
    view[t, t] = col.alpha
    A_hat = BlockMatrix(arr, order)

    def role(x):
        return HIDDEN if x in hidden or x == new_label else MEASURED

    return KronState(
        l=l, A_hat=A_hat, clique_start=q0,
        y_stack=tuple(zip(band, col.y)),
        y_hat_stack=tuple(zip(band, col.y_hat)),
        alpha=col.alpha,
        perm=BlockPermutation.from_order(order, sorted(order)),
        node_ids=tuple(Node(x, role(x)) for x in order))


def _clique_is_complete(state, tol):
    A = state.A_hat
    C = A.submatrix(range(state.clique_start, A.n))
    support = block_support(C, tol)
    np.fill_diagonal(support, True)
    return bool(np.all(support))


def reverse_reduce(Ybar_clique, tol=None, next_label=None,
                   sibling_finder=None):
    """
    Shrink the clique *Ybar_clique* one hidden node at a time until a
    single node is left.

    Hidden nodes are labelled next_label, next_label + 1, ... in discovery
    order (default: one past the largest label).  *sibling_finder* maps a
    clique matrix and gamma tolerance to candidate SiblingGroups (default
    find_sibling_groups); the first group, by smallest member, whose
    remainder is still a clique is consumed.

    Returns the recovered network and its KronStates in forward order.
    """
    tol = get_tolerances(tol)
    if sibling_finder is None:
        sibling_finder = find_sibling_groups
    Y = Ybar_clique
    if not Y.is_square:
        raise ValueError("clique admittance must be square")
    if Y.n > 1 and not np.all(block_support(Y, tol)
                              | np.eye(Y.n, dtype=bool)):
        raise AssumptionBreach("input is not a single clique: some "
                               "off-diagonal blocks are zero")
    label = max(Y.labels) + 1 if next_label is None else next_label

    A = Y
    clique_start = 0
    hidden = []
    states = []
    it = 0
    while A.n - clique_start > 1:
        C = A.submatrix(range(clique_start, A.n))
        try:
            groups = sibling_finder(C, tol.tol_gamma)
            state = None
            for group in groups:
                candidate = reverse_step(A, clique_start, group, label,
                                         hidden, tol=tol)
                if _clique_is_complete(candidate, tol):
                    state = candidate
                    break
                logger.debug("reverse iteration %d: group %r leaves a "
                             "remainder that is not a clique", it,
                             group.labels(C))
            if state is None:
                raise NoGroupFound("none of the sibling groups %r leaves a "
                                   "clique" % ([g.labels(C) for g in groups],))
        except KronError as e:
            raise e.locate("reverse", it)
        logger.debug("reverse iteration %d: hidden node %r adopts %r", it,
                     label, state.band_labels)
        hidden.append(label)
        states.append(state)
        A = state.A_hat
        clique_start = state.clique_start
        label += 1
        it += 1

    trace = [s.replace(l=i) for i, s in enumerate(reversed(states))]
    net = network_from_admittance(A, hidden, tol=tol)
    logger.info("recovered %d hidden node(s) behind a %d-node clique",
                len(hidden), Y.n)
    return net, trace


def identify_clique(Ybar_clique, tol=None, next_label=None,
                    sibling_finder=None):
    """
    Identify the tree behind one clique and check the result: it must
    satisfy the modelling assumptions and Kron-reduce back to the input
    within round_trip_tol.
    """
    tol = get_tolerances(tol)
    net, _ = reverse_reduce(Ybar_clique, tol, next_label, sibling_finder)
    violations = validate(net, tol)
    if violations:
        raise AssumptionBreach(
            "recovered network is invalid: %s"
            % "; ".join(str(v) for v in violations)).locate("verify")
    err = relative_error(Ybar_clique, reduce_network(net, tol))
    if err > tol.round_trip_tol:
        raise AssumptionBreach(
            "recovered network reduces to the input only within %.3g"
            % err).locate("verify")
    logger.info("clique %r identified, round-trip error %.3g",
                Ybar_clique.labels, err)
    return net
