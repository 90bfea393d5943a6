"""
Graph views of networks and reductions in DOT format
"""

import numpy as np

from kronlite.blockmat import block_norm, block_support
from kronlite.config import get_tolerances
from kronlite.network import HIDDEN


__all__ = ['get_network_dot', 'get_reduction_dot', 'view_dot_graph']


_ROLE_COLORS = {
    'measured': 'lightblue',
    'boundary': 'lightblue',
    'internal': 'palegreen',
    'hidden': 'lightgray',
}


def _node_line(label, role):
    return '  n%s [label="%s", style=filled, fillcolor=%s];' % (
        label, label, _ROLE_COLORS[role])


def get_network_dot(net):
    """Return the DOT source of G(Y): measured and hidden nodes colored
    apart, each line labelled with the norm of its admittance.
    """
    lines = ['graph network {']
    for node in net.nodes:
        lines.append(_node_line(node.label, node.role))
    for edge in net.edges:
        lines.append('  n%s -- n%s [label="%.3g"];'
                     % (edge.j, edge.k, block_norm(edge.y)))
    lines.append('}')
    return '\n'.join(lines) + '\n'


def get_reduction_dot(Ybar, partition=None, cliques=None, tol=None):
    """Return the DOT source of G(Ybar).  With a NodePartition, internal
    and boundary measured nodes are colored apart; every clique in
    `cliques` is outlined as a cluster.
    """
    tol = get_tolerances(tol)
    lines = ['graph reduction {']
    clustered = set()
    for x, members in enumerate(cliques or ()):
        lines.append('  subgraph cluster_%d {' % x)
        lines.append('    label="clique %d"; style=rounded;' % x)
        for label in members:
            if label in clustered:
                # a shared node can sit in one cluster only
                continue
            clustered.add(label)
            lines.append('  ' + _node_line(label, 'boundary'))
        lines.append('  }')
    for label in Ybar.labels:
        if label in clustered:
            continue
        role = 'measured'
        if partition is not None:
            if label in partition.measured_internal:
                role = 'internal'
            elif label in partition.measured_boundary:
                role = 'boundary'
            elif label in partition.hidden:
                role = HIDDEN
        lines.append(_node_line(label, role))
    support = block_support(Ybar, tol)
    for j, k in zip(*np.nonzero(np.triu(support))):
        lines.append('  n%s -- n%s;' % (Ybar.labels[j], Ybar.labels[k]))
    lines.append('}')
    return '\n'.join(lines) + '\n'


def view_dot_graph(dot, filename=None, view=False):
    """
    Wrap DOT source in a graphviz.Source.  With *view*, render it to
    *filename* and open it in the system viewer, returning the rendered
    path instead.  Inside IPython the SVG is returned for inline display.

    Needs the optional graphviz package.
    """
    import graphviz

    src = graphviz.Source(dot)
    if view:
        return src.render(filename, view=True)
    try:
        __IPYTHON__
    except NameError:
        return src
    from IPython.display import SVG
    return SVG(data=src.pipe('svg'))
