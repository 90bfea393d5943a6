"""
Identification of a whole network from its Kron reduction.

G(Ybar) of a tree reduction consists of edge-disjoint maximal cliques, one
per maximal hidden subtree, joined by plain lines.  The pipeline

1. classifies measured nodes into internal (no hidden neighbour) and
   boundary ones and strips the internal ones off;
2. splits what remains into cliques in isolation, recording how each
   clique touched the earlier ones;
3. identifies every clique with the reverse reduction;
4. recombines the identified pieces;
5. puts the internal measured nodes back.
"""

import logging
import warnings
from collections import namedtuple

import networkx as nx
import numpy as np

from kronlite._utils import KronError
from kronlite.blockmat import (BlockMatrix, PHASES, block_support,
                               normalize_diagonal, relative_error)
from kronlite.config import get_tolerances
from kronlite.kron_reverse import AssumptionBreach, identify_clique
from kronlite.network import (NodePartition, RadialNetwork,
                              admittance_from_network,
                              network_from_admittance, reduce_network,
                              validate)
from kronlite.sibling import uniform_coefficients


__all__ = ['MalformedReduction', 'InconsistentAttachment', 'AdjacentLine',
           'SharedNode', 'CliquePiece', 'Classification',
           'DecompositionPlan', 'classify_from_reduction', 'strip_internal',
           'split_cliques', 'recombine', 'reattach_internal',
           'plan_reduction', 'identify_full']


logger = logging.getLogger(__name__)


class MalformedReduction(KronError, ValueError):
    pass


class InconsistentAttachment(KronError, ValueError):
    pass


class AdjacentLine(namedtuple('AdjacentLine', ['i', 'j', 'W12', 'piece'])):
    """
    A line from node *i* of the earlier piece number *piece* to node *j*
    of this piece; W12 is the reduced matrix block at (i, j).
    """
    __slots__ = ()
    kind = 'adjacent-line'


class SharedNode(namedtuple('SharedNode', ['label', 'piece'])):
    """Node *label* belongs to this piece and to earlier piece *piece*."""
    __slots__ = ()
    kind = 'shared-node'


class CliquePiece(namedtuple('CliquePiece', ['members', 'Ybar_iso',
                                             'attachments'])):
    """
    One maximal clique in isolation: sorted member labels, its admittance
    matrix with zero row-block sums and its attachments to earlier pieces.
    """
    __slots__ = ()

    @property
    def kind(self):
        kinds = set(a.kind for a in self.attachments)
        if not kinds:
            return 'disconnected'
        if len(kinds) == 1:
            return kinds.pop()
        return 'mixed'


Classification = namedtuple('Classification', ['partition', 'cliques',
                                               'trees'])


class DecompositionPlan(namedtuple('DecompositionPlan', [
        'partition', 'Y11_11', 'Y11_12', 'Ybar_prime', 'pieces', 'trees'])):
    __slots__ = ()

    def as_dict(self):
        pieces = []
        for piece in self.pieces:
            attachments = []
            for a in piece.attachments:
                if a.kind == 'adjacent-line':
                    attachments.append({'kind': a.kind, 'i': a.i, 'j': a.j,
                                        'piece': a.piece, 'W12': a.W12})
                else:
                    attachments.append({'kind': a.kind, 'label': a.label,
                                        'piece': a.piece})
            pieces.append({'members': list(piece.members),
                           'kind': piece.kind,
                           'attachments': attachments})
        return {'partition': self.partition.as_dict(),
                'pieces': pieces,
                'trees': [[list(e) for e in tree] for tree in self.trees]}


def _support_graph(A, tol):
    g = nx.Graph()
    g.add_nodes_from(A.labels)
    support = block_support(A, tol)
    for j, k in zip(*np.nonzero(np.triu(support))):
        g.add_edge(A.labels[j], A.labels[k])
    return g


def classify_from_reduction(Ybar, tol=None):
    """
    Find the maximal cliques (3 or more nodes) and the remaining tree
    edges of G(Ybar).  The clique through an edge (i, j) is i, j and their
    common neighbours; an edge with no common neighbour is a tree edge.

    Returns Classification(partition, cliques, trees): boundary nodes are
    the clique members, the partition's hidden set is empty; cliques are
    sorted label tuples in lexicographic order; trees are the sorted
    edge lists of the connected components of the tree edges.
    """
    tol = get_tolerances(tol)
    if not Ybar.is_square:
        raise ValueError("reduced admittance must be square")
    g = _support_graph(Ybar, tol)
    cliques = set()
    tree_edges = []
    for a, b in g.edges():
        closure = {a, b}
        closure.update(nx.common_neighbors(g, a, b))
        if len(closure) == 2:
            tree_edges.append((min(a, b), max(a, b)))
            continue
        k = len(closure)
        if g.subgraph(closure).number_of_edges() != k * (k - 1) // 2:
            raise MalformedReduction(
                "nodes %r around edge %r do not form a clique; G(Ybar) must "
                "consist of edge-disjoint cliques and tree edges"
                % (sorted(closure), (a, b)))
        cliques.add(frozenset(closure))

    cliques = sorted(tuple(sorted(c)) for c in cliques)
    for x, first in enumerate(cliques):
        for second in cliques[x + 1:]:
            common = set(first) & set(second)
            if len(common) >= 2:
                raise MalformedReduction(
                    "cliques %r and %r share the edge %r; maximal cliques "
                    "must be edge-disjoint" % (first, second,
                                               sorted(common)[:2]))

    boundary = frozenset(x for c in cliques for x in c)
    internal = frozenset(Ybar.labels) - boundary
    partition = NodePartition(internal, boundary, frozenset())

    t = nx.Graph()
    t.add_edges_from(tree_edges)
    trees = []
    for comp in sorted(nx.connected_components(t), key=min):
        edges = t.subgraph(comp).edges()
        trees.append(sorted(tuple(sorted(e)) for e in edges))
    logger.info("reduction has %d clique(s), %d internal and %d boundary "
                "measured node(s)", len(cliques), len(internal),
                len(boundary))
    return Classification(partition, cliques, trees)


def strip_internal(Ybar, part):
    """
    Read the internal measured nodes' blocks directly off Ybar and return
    (Y11_11, Y11_12, Ybar_prime), Ybar_prime being the boundary block with
    its diagonal renormalized to zero row-block sums.
    """
    internal = [x for x in Ybar.labels if x in part.measured_internal]
    boundary = [x for x in Ybar.labels if x not in part.measured_internal]
    Y11_11 = Ybar.restrict(internal)
    Y11_12 = Ybar.restrict(internal, boundary)
    if not internal:
        return Y11_11, Y11_12, Ybar
    return Y11_11, Y11_12, normalize_diagonal(Ybar.restrict(boundary))


def split_cliques(Ybar_prime, cliques=None, tol=None):
    """
    Cut Ybar_prime into its cliques in isolation, in the order given
    (lexicographic by default).  Each piece records the nodes it shares
    with earlier pieces and the lines joining it to them.
    """
    tol = get_tolerances(tol)
    if cliques is None:
        cliques = classify_from_reduction(Ybar_prime, tol).cliques
    owner = {}
    for x, members in enumerate(cliques):
        for label in members:
            owner.setdefault(label, []).append(x)
    missing = [x for x in Ybar_prime.labels if x not in owner]
    if missing:
        raise MalformedReduction("nodes %r belong to no clique" % (missing,))

    lines = {}
    g = _support_graph(Ybar_prime, tol)
    for a, b in g.edges():
        if set(owner[a]) & set(owner[b]):
            continue
        later = max(owner[a] + owner[b])
        lines.setdefault(later, []).append((a, b))

    pieces = []
    blocks = Ybar_prime.blocks
    for x, members in enumerate(cliques):
        attachments = []
        for label in members:
            for y in owner[label]:
                if y < x:
                    attachments.append(SharedNode(label, y))
        for a, b in sorted(lines.get(x, [])):
            i, j = (a, b) if x in owner[b] else (b, a)
            earlier = [y for y in owner[i] if y < x]
            if not earlier or x not in owner[j]:
                raise MalformedReduction("line %r does not join clique %r "
                                         "to an earlier one" % ((a, b), x))
            W12 = blocks[Ybar_prime.index(i), Ybar_prime.index(j)]
            attachments.append(AdjacentLine(i, j, np.array(W12),
                                            min(earlier)))
        iso = normalize_diagonal(Ybar_prime.restrict(members))
        pieces.append(CliquePiece(tuple(members), iso, tuple(attachments)))
        logger.debug("clique piece %d %r: %s", x, members, pieces[-1].kind)
    return pieces


def _piece_admittance(identified):
    if isinstance(identified, RadialNetwork):
        return admittance_from_network(identified)
    return identified


def recombine(pieces_identified):
    """
    Assemble the admittance matrix of all identified pieces: each
    (piece, network-or-admittance) pair contributes its admittance matrix,
    each AdjacentLine the line joining two pieces.  Shared nodes add up the
    row blocks of every piece they belong to.

    The result is labelled by all measured labels ascending, then the
    hidden labels in piece order.
    """
    measured = set()
    hidden = []
    mats = []
    for x, (piece, identified) in enumerate(pieces_identified):
        Y = _piece_admittance(identified)
        members = set(piece.members)
        extra = [label for label in Y.labels if label not in members]
        if not members <= set(Y.labels):
            raise InconsistentAttachment(
                "piece %d does not contain its members %r"
                % (x, sorted(members - set(Y.labels))))
        clash = (set(extra) & set(hidden)) | (set(extra) & measured)
        if clash:
            raise InconsistentAttachment("piece %d reuses labels %r"
                                         % (x, sorted(clash)))
        measured |= members
        hidden.extend(extra)
        mats.append(Y)
    if set(hidden) & measured:
        raise InconsistentAttachment("hidden labels %r collide with measured "
                                     "ones" % sorted(set(hidden) & measured))

    labels = sorted(measured) + hidden
    n = len(labels)
    arr = np.zeros((PHASES * n, PHASES * n), dtype=complex)
    for Y in mats:
        arr += Y.embed(labels).array

    pos = dict((label, i) for i, label in enumerate(labels))
    view = arr.reshape(n, PHASES, n, PHASES).swapaxes(1, 2)
    for x, (piece, _) in enumerate(pieces_identified):
        for a in piece.attachments:
            if a.piece >= x or a.piece < 0:
                raise InconsistentAttachment(
                    "piece %d refers to piece %d" % (x, a.piece))
            earlier = pieces_identified[a.piece][0].members
            if a.kind == 'shared-node':
                if a.label not in piece.members or a.label not in earlier:
                    raise InconsistentAttachment(
                        "node %r is not shared by pieces %d and %d"
                        % (a.label, a.piece, x))
                continue
            if a.i not in earlier or a.j not in piece.members:
                raise InconsistentAttachment(
                    "line %r does not join pieces %d and %d"
                    % ((a.i, a.j), a.piece, x))
            i, j = pos[a.i], pos[a.j]
            W = np.asarray(a.W12)
            view[i, j] += W
            view[j, i] += W.T
            view[i, i] -= W
            view[j, j] -= W.T
    return BlockMatrix(arr, labels)


def reattach_internal(Y_prime, Y11_11, Y11_12):
    """
    Put the internal measured nodes back in front of Y_prime, correcting
    the boundary diagonal blocks by the lines to internal nodes:
    Y11_22 = Y'11_22 - diag(column-block sums of Y11_12).
    """
    internal = list(Y11_11.labels)
    if not internal:
        return Y_prime
    if tuple(Y11_12.labels) != tuple(internal):
        raise ValueError("Y11_11 and Y11_12 have different rows")
    missing = [x for x in Y11_12.col_labels if x not in Y_prime.labels]
    if missing:
        raise ValueError("boundary nodes %r missing from Y'" % (missing,))

    labels = internal + list(Y_prime.labels)
    n, k = len(labels), len(internal)
    arr = np.zeros((PHASES * n, PHASES * n), dtype=complex)
    view = arr.reshape(n, PHASES, n, PHASES).swapaxes(1, 2)
    view[:k, :k] = Y11_11.blocks
    view[k:, k:] = Y_prime.blocks
    sums = Y11_12.blocks.sum(axis=0)
    for c, label in enumerate(Y11_12.col_labels):
        b = k + Y_prime.index(label)
        coupling = Y11_12.blocks[:, c]
        view[:k, b] = coupling
        view[b, :k] = coupling.transpose(0, 2, 1)
        view[b, b] -= sums[c].T
    return BlockMatrix(arr, labels)


def plan_reduction(Ybar, tol=None):
    """Classify, strip and split Ybar into cliques, without identifying."""
    tol = get_tolerances(tol)
    try:
        cls = classify_from_reduction(Ybar, tol)
    except KronError as e:
        raise e.locate("classify")
    Y11_11, Y11_12, Ybar_prime = strip_internal(Ybar, cls.partition)
    try:
        pieces = split_cliques(Ybar_prime, cls.cliques, tol)
    except KronError as e:
        raise e.locate("split")
    return DecompositionPlan(cls.partition, Y11_11, Y11_12, Ybar_prime,
                             pieces, cls.trees)


def _warn_if_not_uniform(Ybar, tol):
    support = block_support(Ybar, tol)
    pairs = np.argwhere(support)
    if not len(pairs):
        return
    y = Ybar.blocks[tuple(pairs[0])]
    _, worst = uniform_coefficients(Ybar, y)
    if worst > tol.tol_gamma:
        warnings.warn("reduced admittance does not look like uniform lines; "
                      "the identified network is not guaranteed",
                      RuntimeWarning)


def identify_full(Ybar, tol=None, sibling_finder=None):
    """
    Identify the network behind the Kron reduction *Ybar*.  Measured labels
    are kept; hidden nodes get labels past the largest measured one.  The
    result is checked to reduce back to *Ybar* within round_trip_tol.
    """
    tol = get_tolerances(tol)
    _warn_if_not_uniform(Ybar, tol)
    plan = plan_reduction(Ybar, tol)
    next_label = max(Ybar.labels) + 1 if Ybar.n else 1
    identified = []
    hidden = []
    for x, piece in enumerate(plan.pieces):
        try:
            net = identify_clique(piece.Ybar_iso, tol, next_label,
                                  sibling_finder)
        except KronError as e:
            raise e.locate("identify[piece %d]" % x)
        identified.append((piece, net))
        hidden.extend(net.hidden)
        next_label += len(net.hidden)
        logger.info("piece %d (%s): %d measured, %d hidden node(s)", x,
                    piece.kind, len(piece.members), len(net.hidden))
    try:
        Y_prime = recombine(identified)
    except KronError as e:
        raise e.locate("recombine")
    Y = reattach_internal(Y_prime, plan.Y11_11, plan.Y11_12)
    net = network_from_admittance(Y, hidden, tol=tol)

    violations = validate(net, tol)
    if violations:
        raise AssumptionBreach(
            "recovered network is invalid: %s"
            % "; ".join(str(v) for v in violations)).locate("verify")
    err = relative_error(Ybar, reduce_network(net, tol))
    if err > tol.round_trip_tol:
        raise AssumptionBreach("recovered network reduces to the input only "
                               "within %.3g" % err).locate("verify")
    logger.info("identified %d hidden node(s) in %d clique(s), round-trip "
                "error %.3g", len(hidden), len(plan.pieces), err)
    return net
