"""
Radial three-phase networks: labelled trees whose edges carry 3x3 line
admittances and whose nodes are either measured or hidden.
"""

import logging
from collections import namedtuple

import networkx as nx
import numpy as np

from kronlite._utils import KronError, Violation
from kronlite.blockmat import (BlockMatrix, PHASES, as_phase_block,
                               block_norm, block_support, is_line_admittance,
                               random_phase_block, schur_complement)
from kronlite.config import get_tolerances


__all__ = ['MEASURED', 'HIDDEN', 'ValidationFailed', 'Infeasible', 'Node',
           'Edge', 'NodePartition', 'RadialNetwork', 'validate',
           'node_partition', 'admittance_from_network',
           'network_from_admittance', 'reduce_network', 'generate_radial',
           'compare_up_to_hidden_relabeling']


logger = logging.getLogger(__name__)

MEASURED = 'measured'
HIDDEN = 'hidden'

_ROLES = (MEASURED, HIDDEN)

# Line lengths drawn for uniform-line networks
_LAMBDA_RANGE = (0.5, 2.0)


class ValidationFailed(KronError, ValueError):

    def __init__(self, violations):
        self.violations = list(violations)
        super(ValidationFailed, self).__init__(
            "invalid network: " + "; ".join(str(v) for v in self.violations))


class Infeasible(KronError, ValueError):
    pass


Node = namedtuple('Node', ['label', 'role'])


class Edge(namedtuple('Edge', ['j', 'k', 'y'])):
    __slots__ = ()

    @property
    def key(self):
        return _edge_key(self.j, self.k)


class NodePartition(namedtuple('NodePartition', ['measured_internal',
                                                 'measured_boundary',
                                                 'hidden'])):
    """
    Measured nodes split by whether they touch a hidden node, plus the
    hidden nodes.  All three are frozensets of labels.
    """
    __slots__ = ()

    @property
    def measured(self):
        return self.measured_internal | self.measured_boundary

    def as_dict(self):
        return dict((name, sorted(getattr(self, name)))
                    for name in self._fields)


def _edge_key(j, k):
    return (j, k) if j <= k else (k, j)


def _frozen_block(y):
    arr = np.array(as_phase_block(y))
    arr.flags.writeable = False
    return arr


class RadialNetwork(object):
    """
    A network of nodes joined by three-phase lines.

    *nodes* is an iterable of (label, role) pairs, *edges* of (j, k, y)
    triples with y a 3x3 admittance block.  For uniform-line networks
    *y_unit* is the shared unit admittance and *lambdas* maps each edge
    (as a (j, k) pair) to its length, with y = y_unit / lambda.

    The constructor only checks that the data is well formed; use
    validate() for the modelling assumptions.
    """

    def __init__(self, nodes, edges, y_unit=None, lambdas=None):
        roles = {}
        for label, role in nodes:
            if role not in _ROLES:
                raise ValueError("invalid role %r for node %r" % (role, label))
            if label in roles:
                raise ValueError("duplicate node %r" % (label,))
            roles[label] = role
        self._roles = roles
        self._labels = tuple(sorted(roles))

        edge_map = {}
        for j, k, y in edges:
            key = _edge_key(j, k)
            if key in edge_map:
                raise ValueError("duplicate edge %r" % (key,))
            edge_map[key] = Edge(key[0], key[1], _frozen_block(y))
        self._edges = edge_map

        self._y_unit = None if y_unit is None else _frozen_block(y_unit)
        self._lambdas = None
        if lambdas is not None:
            self._lambdas = dict((_edge_key(*key), float(lam))
                                 for key, lam in dict(lambdas).items())

    @property
    def labels(self):
        return self._labels

    @property
    def nodes(self):
        return [Node(x, self._roles[x]) for x in self._labels]

    @property
    def edges(self):
        return [self._edges[key] for key in sorted(self._edges)]

    @property
    def measured(self):
        return [x for x in self._labels if self._roles[x] == MEASURED]

    @property
    def hidden(self):
        return [x for x in self._labels if self._roles[x] == HIDDEN]

    @property
    def y_unit(self):
        return self._y_unit

    @property
    def lambdas(self):
        if self._lambdas is None:
            return None
        return dict(self._lambdas)

    @property
    def is_uniform(self):
        return self._y_unit is not None

    def role(self, label):
        return self._roles[label]

    def block_order(self):
        """Measured labels ascending, then hidden labels ascending."""
        return self.measured + self.hidden

    def admittance(self, j, k):
        return self._edges[_edge_key(j, k)].y

    def has_edge(self, j, k):
        return _edge_key(j, k) in self._edges

    def graph(self):
        g = nx.Graph()
        for label in self._labels:
            g.add_node(label, role=self._roles[label])
        for edge in self.edges:
            g.add_edge(edge.j, edge.k, y=edge.y)
        return g

    def neighbors(self, label):
        out = []
        for j, k in self._edges:
            if j == label:
                out.append(k)
            elif k == label:
                out.append(j)
        return sorted(out)

    def degree(self, label):
        return len(self.neighbors(label))

    def parent_groups(self):
        """
        Map every hidden node to the sorted tuple of its measured
        neighbours.
        """
        groups = {}
        for h in self.hidden:
            groups[h] = tuple(x for x in self.neighbors(h)
                              if self._roles[x] == MEASURED)
        return groups

    def relabel(self, mapping):
        """
        Return a copy with labels renamed through *mapping*; labels not in
        the mapping are kept.
        """
        def new(x):
            return mapping.get(x, x)

        lambdas = None
        if self._lambdas is not None:
            lambdas = dict(((new(j), new(k)), lam)
                           for (j, k), lam in self._lambdas.items())
        return RadialNetwork(
            [(new(x), self._roles[x]) for x in self._labels],
            [(new(e.j), new(e.k), e.y) for e in self.edges],
            y_unit=self._y_unit, lambdas=lambdas)

    def __repr__(self):
        return "<RadialNetwork measured=%d hidden=%d edges=%d%s>" % (
            len(self.measured), len(self.hidden), len(self._edges),
            " uniform" if self.is_uniform else "")


def validate(net, tol=None):
    """
    Check the modelling assumptions and return the list of violations
    (empty if the network is valid):

    - the graph is a connected tree;
    - every line admittance is symmetric with positive definite real part;
    - every hidden node has degree >= 3;
    - every leaf is measured;
    - uniform networks satisfy y = y_unit / lambda on every line.
    """
    tol = get_tolerances(tol)
    violations = []
    labels = set(net.labels)

    for edge in net.edges:
        if edge.j == edge.k:
            violations.append(Violation('self-loop', edge.j,
                                        "line connects a node to itself"))
        for end in (edge.j, edge.k):
            if end not in labels:
                violations.append(Violation(
                    'unknown-node', (edge.j, edge.k),
                    "line endpoint %r is not a node" % (end,)))
        if not is_line_admittance(edge.y, tol):
            violations.append(Violation(
                'line-admittance', (edge.j, edge.k),
                "admittance must be symmetric with positive definite "
                "real part"))
    if violations:
        return violations

    g = net.graph()
    if len(g) and not nx.is_connected(g):
        violations.append(Violation(
            'disconnected', None, "network has %d connected components"
            % nx.number_connected_components(g)))
    elif len(net.edges) != max(len(g) - 1, 0):
        violations.append(Violation(
            'not-a-tree', None, "%d nodes but %d lines"
            % (len(g), len(net.edges))))

    for h in net.hidden:
        deg = g.degree(h)
        if deg < 3:
            violations.append(Violation(
                'hidden-degree', h,
                "hidden node has degree %d; it cannot be told apart from "
                "its neighbours unless its degree is at least 3" % deg))
    for x in net.labels:
        if g.degree(x) == 1 and net.role(x) == HIDDEN:
            violations.append(Violation('hidden-leaf', x,
                                        "leaf nodes must be measured"))

    if net.is_uniform:
        lambdas = net.lambdas or {}
        for edge in net.edges:
            lam = lambdas.get(edge.key)
            if lam is None or not lam > 0:
                violations.append(Violation(
                    'non-uniform', edge.key, "missing or non-positive length"))
                continue
            expected = net.y_unit / lam
            if block_norm(edge.y - expected) > \
                    tol.tau_sym * block_norm(expected):
                violations.append(Violation(
                    'non-uniform', edge.key,
                    "admittance differs from y_unit / lambda"))
    return violations


def node_partition(net):
    internal, boundary = set(), set()
    hidden = frozenset(net.hidden)
    for m in net.measured:
        if any(x in hidden for x in net.neighbors(m)):
            boundary.add(m)
        else:
            internal.add(m)
    return NodePartition(frozenset(internal), frozenset(boundary), hidden)


def admittance_from_network(net, tol=None):
    """
    Build the block admittance matrix Y of *net*: Y[j, k] = -y_jk for every
    line and diagonal blocks making each row-block sum zero.  Blocks are in
    net.block_order() (measured first).
    """
    violations = validate(net, tol)
    if violations:
        raise ValidationFailed(violations)
    order = net.block_order()
    pos = dict((x, i) for i, x in enumerate(order))
    n = len(order)
    arr = np.zeros((PHASES * n, PHASES * n), dtype=complex)
    view = arr.reshape(n, PHASES, n, PHASES)
    for edge in net.edges:
        j, k = pos[edge.j], pos[edge.k]
        view[j, :, k, :] = -edge.y
        view[k, :, j, :] = -edge.y
        view[j, :, j, :] += edge.y
        view[k, :, k, :] += edge.y
    return BlockMatrix(arr, order)


def network_from_admittance(Y, hidden=(), y_unit=None, tol=None):
    """
    Read a network back from its admittance matrix: every off-diagonal
    block above tau_zero * ||Y|| is a line with y = -Y[j, k].

    With *y_unit* the result is a uniform-line network whose lengths are
    the least-squares fit of each line against y_unit.
    """
    tol = get_tolerances(tol)
    hidden = set(hidden)
    unknown = hidden - set(Y.labels)
    if unknown:
        raise ValueError("hidden labels %r not in matrix" % sorted(unknown))
    support = block_support(Y, tol)
    blocks = Y.blocks
    edges = []
    for j, k in zip(*np.nonzero(np.triu(support))):
        y = -(blocks[j, k] + blocks[k, j].T) / 2
        edges.append((Y.labels[j], Y.labels[k], y))
    nodes = [(x, HIDDEN if x in hidden else MEASURED) for x in Y.labels]

    lambdas = None
    if y_unit is not None:
        y_unit = as_phase_block(y_unit)
        scale = np.vdot(y_unit, y_unit).real
        lambdas = {}
        fitted = []
        for j, k, y in edges:
            mu = np.vdot(y_unit, y).real / scale
            if not mu > 0:
                raise ValueError("line %r is not a positive multiple of "
                                 "y_unit" % ((j, k),))
            lambdas[(j, k)] = 1.0 / mu
            fitted.append((j, k, y_unit * mu))
        edges = fitted
    return RadialNetwork(nodes, edges, y_unit=y_unit, lambdas=lambdas)


def reduce_network(net, tol=None):
    """
    Kron-reduce *net* onto its measured nodes: the Schur complement of Y
    eliminating every hidden block, labelled by measured label ascending.
    """
    Y = admittance_from_network(net, tol)
    keep = list(range(len(net.measured)))
    return schur_complement(Y, keep, tol)


class _TreeBuilder(object):

    def __init__(self):
        self.measured = []
        self.hidden = []
        self.edges = []
        self.degree = {}

    def new_measured(self):
        node = ('m', len(self.measured))
        self.measured.append(node)
        self.degree[node] = 0
        return node

    def new_hidden(self):
        node = ('h', len(self.hidden))
        self.hidden.append(node)
        self.degree[node] = 0
        return node

    def connect(self, a, b):
        self.edges.append((a, b))
        self.degree[a] += 1
        self.degree[b] += 1


def _split_sizes(rng, total, parts):
    if parts == 1:
        return [total]
    cuts = np.sort(rng.choice(np.arange(1, total), parts - 1, replace=False))
    bounds = [0] + [int(c) for c in cuts] + [total]
    return [b - a for a, b in zip(bounds[:-1], bounds[1:])]


def _grow_hidden_subtree(builder, rng, size):
    # Internal degrees stay <= 3 so exactly size + 2 leaf slots remain
    nodes = [builder.new_hidden()]
    for _ in range(1, size):
        candidates = [x for x in nodes if builder.degree[x] < 3]
        parent = candidates[rng.integers(len(candidates))]
        child = builder.new_hidden()
        builder.connect(child, parent)
        nodes.append(child)
    slots = []
    for x in nodes:
        slots.extend([x] * (3 - builder.degree[x]))
    return nodes, slots


def generate_radial(n_measured, n_hidden, uniform=False, seed=0, subtrees=1):
    """
    Draw a random network satisfying the modelling assumptions.

    Hidden nodes are split into *subtrees* maximal hidden subtrees, joined
    to each other through a shared measured node, a line between two
    measured nodes or a path through an internal measured node.  Measured
    labels are 1..n_measured in random order, hidden labels follow.
    The output is fully determined by *seed*.
    """
    if n_measured < 1 or n_hidden < 0:
        raise Infeasible("need at least one measured node and a "
                         "non-negative hidden count")
    if n_hidden == 0:
        if subtrees > 1:
            raise Infeasible("%d hidden subtrees requested without hidden "
                             "nodes" % subtrees)
    else:
        if not 1 <= subtrees <= n_hidden:
            raise Infeasible("cannot split %d hidden nodes into %d subtrees"
                             % (n_hidden, subtrees))
        need = n_hidden + subtrees + 1
        if n_measured < need:
            raise Infeasible(
                "%d hidden node(s) in %d subtree(s) need at least %d "
                "measured nodes so that every hidden node has degree >= 3 "
                "and every leaf is measured; got %d"
                % (n_hidden, subtrees, need, n_measured))

    rng = np.random.default_rng(seed)
    builder = _TreeBuilder()

    if n_hidden == 0:
        first = builder.new_measured()
        nodes = [first]
        for _ in range(1, n_measured):
            node = builder.new_measured()
            builder.connect(node, nodes[rng.integers(len(nodes))])
            nodes.append(node)
    else:
        extra = n_measured - (n_hidden + subtrees + 1)
        boundary = []
        for i, size in enumerate(_split_sizes(rng, n_hidden, subtrees)):
            _, slots = _grow_hidden_subtree(builder, rng, size)
            if i > 0:
                modes = ['shared'] + ['line'] * (extra >= 1) \
                    + ['path'] * (extra >= 2)
                mode = modes[rng.integers(len(modes))]
                anchor = boundary[rng.integers(len(boundary))]
                slot = slots.pop(0)
                if mode == 'shared':
                    builder.connect(slot, anchor)
                else:
                    m = builder.new_measured()
                    builder.connect(slot, m)
                    boundary.append(m)
                    if mode == 'line':
                        builder.connect(m, anchor)
                        extra -= 1
                    else:
                        via = builder.new_measured()
                        builder.connect(m, via)
                        builder.connect(via, anchor)
                        extra -= 2
                logger.debug("hidden subtree %d joined by %s", i, mode)
            for slot in slots:
                m = builder.new_measured()
                builder.connect(slot, m)
                boundary.append(m)
        for _ in range(extra):
            if subtrees == 1:
                pool = builder.hidden
            else:
                pool = builder.hidden + builder.measured
            target = pool[rng.integers(len(pool))]
            builder.connect(builder.new_measured(), target)

    measured_labels = rng.permutation(n_measured) + 1
    label = {}
    for i, node in enumerate(builder.measured):
        label[node] = int(measured_labels[i])
    for i, node in enumerate(builder.hidden):
        label[node] = n_measured + 1 + i

    y_unit = None
    lambdas = None
    edges = []
    if uniform:
        y_unit = random_phase_block(rng)
        lambdas = {}
    for a, b in builder.edges:
        j, k = label[a], label[b]
        if uniform:
            lam = float(rng.uniform(*_LAMBDA_RANGE))
            lambdas[(j, k)] = lam
            edges.append((j, k, y_unit / lam))
        else:
            edges.append((j, k, random_phase_block(rng)))

    nodes = [(label[x], MEASURED) for x in builder.measured] \
        + [(label[x], HIDDEN) for x in builder.hidden]
    net = RadialNetwork(nodes, edges, y_unit=y_unit, lambdas=lambdas)
    logger.debug("generated %r (seed %s)", net, seed)
    return net


def _hidden_signature(g, h):
    rest = g.copy()
    rest.remove_node(h)
    return frozenset(
        frozenset(x for x in comp if g.nodes[x]['role'] == MEASURED)
        for comp in nx.connected_components(rest))


def _hidden_signatures(net):
    g = net.graph()
    sigs = {}
    for h in net.hidden:
        sig = _hidden_signature(g, h)
        if sig in sigs:
            return None
        sigs[sig] = h
    return sigs


def compare_up_to_hidden_relabeling(a, b, tol=None):
    """
    Whether *a* and *b* are the same network once hidden nodes are matched
    up.  Measured labels are fixed; a hidden node is identified by how its
    removal splits the measured nodes, which is unique for trees whose
    leaves are measured and whose hidden nodes have degree >= 3.  Line
    admittances must agree within relative tolerance *tol* (default:
    round_trip_tol).
    """
    if tol is None:
        tol = get_tolerances().round_trip_tol
    if a.measured != b.measured or len(a.hidden) != len(b.hidden):
        return False
    sig_a = _hidden_signatures(a)
    sig_b = _hidden_signatures(b)
    if sig_a is None or sig_b is None or set(sig_a) != set(sig_b):
        return False
    mapping = dict((sig_b[s], sig_a[s]) for s in sig_b)
    # Relabel through temporary labels to avoid collisions
    tmp = dict((h, -1 - i) for i, h in enumerate(b.hidden))
    b = b.relabel(tmp).relabel(dict((tmp[h], mapping[h]) for h in tmp))

    edges_a = dict((e.key, e.y) for e in a.edges)
    edges_b = dict((e.key, e.y) for e in b.edges)
    if set(edges_a) != set(edges_b):
        return False
    for key, ya in edges_a.items():
        if block_norm(ya - edges_b[key]) > tol * block_norm(ya):
            return False
    return True
