"""
JSON codecs for block matrices, networks, traces and decomposition plans,
and the CSV codec for measurements.

Complex numbers are written as [re, im] pairs, a 3x3 block as three rows
of three pairs.
"""

import json

import numpy as np
import pandas as pd

from kronlite.blockmat import BlockMatrix, PHASES, as_phase_block
from kronlite.estimation import MeasurementSet
from kronlite.network import RadialNetwork


__all__ = ['encode', 'block_to_json', 'block_from_json',
           'block_matrix_to_json', 'block_matrix_from_json',
           'network_to_json', 'network_from_json', 'trace_to_json',
           'plan_to_json', 'read_model', 'dump_json', 'load_json',
           'write_measurements_csv', 'read_measurements_csv']


_PHASE_NAMES = ('a', 'b', 'c')

_CSV_COLUMNS = ['t', 'node', 'phase', 'V_re', 'V_im', 'I_re', 'I_im']


def encode(obj):
    """
    Turn numpy values, complex numbers and nested containers into plain
    JSON data.
    """
    if isinstance(obj, dict):
        return dict((str(k), encode(v)) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _decode_complex(data):
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError("complex values must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def block_to_json(B):
    return encode(np.asarray(B, dtype=complex))


def block_from_json(data):
    return as_phase_block(_decode_complex(data))


def block_matrix_to_json(A, hidden=None):
    rows, cols = A.shape
    blocks = A.blocks
    data = {
        'n': rows,
        'labels': list(A.labels),
        'blocks': [[block_to_json(blocks[j, k]) for k in range(cols)]
                   for j in range(rows)],
    }
    if not A.is_square:
        data['col_labels'] = list(A.col_labels)
    if hidden is not None:
        data['hidden'] = sorted(hidden)
    return encode(data)


def block_matrix_from_json(data):
    """Return (BlockMatrix, hidden labels or None)."""
    grid = [[block_from_json(b) for b in row] for row in data['blocks']]
    n = int(data.get('n', len(grid)))
    if len(grid) != n:
        raise ValueError("expected %d block rows, got %d" % (n, len(grid)))
    A = BlockMatrix.from_blocks(grid, data.get('labels'),
                                data.get('col_labels'))
    hidden = data.get('hidden')
    return A, (None if hidden is None else list(hidden))


def network_to_json(net):
    lambdas = net.lambdas or {}
    edges = []
    for edge in net.edges:
        entry = {'j': edge.j, 'k': edge.k, 'y': block_to_json(edge.y)}
        if edge.key in lambdas:
            entry['lambda'] = lambdas[edge.key]
        edges.append(entry)
    data = {
        'nodes': [{'id': n.label, 'role': n.role} for n in net.nodes],
        'edges': edges,
    }
    if net.y_unit is not None:
        data['y_unit'] = block_to_json(net.y_unit)
    return encode(data)


def network_from_json(data):
    nodes = [(int(n['id']), n['role']) for n in data['nodes']]
    edges = []
    lambdas = {}
    for e in data['edges']:
        j, k = int(e['j']), int(e['k'])
        edges.append((j, k, block_from_json(e['y'])))
        if 'lambda' in e:
            lambdas[(j, k)] = float(e['lambda'])
    y_unit = data.get('y_unit')
    if y_unit is not None:
        y_unit = block_from_json(y_unit)
    return RadialNetwork(nodes, edges, y_unit=y_unit,
                         lambdas=lambdas if y_unit is not None else None)


def trace_to_json(trace):
    return encode([{
        'l': s.l,
        'target': s.target,
        'clique_start': s.clique_start,
        'labels': list(s.A_hat.labels),
        'alpha': s.alpha,
        'y_stack': [{'node': label, 'y': y} for label, y in s.y_stack],
        'perm': list(s.perm),
    } for s in trace])


def plan_to_json(plan):
    return encode(plan.as_dict())


def read_model(data):
    """
    Decode either a network or a block matrix document.  Returns
    ('network', RadialNetwork) or ('matrix', (BlockMatrix, hidden)).
    """
    if 'nodes' in data:
        return 'network', network_from_json(data)
    if 'blocks' in data:
        return 'matrix', block_matrix_from_json(data)
    raise ValueError("document is neither a network nor a block matrix")


def dump_json(obj, path):
    with open(path, 'w') as f:
        json.dump(encode(obj), f, indent=1, sort_keys=True)
        f.write('\n')


def load_json(path):
    with open(path) as f:
        return json.load(f)


def write_measurements_csv(ms, path):
    """One row per (sample, node, phase)."""
    T, M = ms.T, ms.M
    V = ms.V1.reshape(-1)
    I = ms.I1.reshape(-1)
    df = pd.DataFrame({
        't': np.repeat(np.arange(T), PHASES * M),
        'node': np.tile(np.repeat(np.asarray(ms.labels), PHASES), T),
        'phase': np.tile(_PHASE_NAMES, T * M),
        'V_re': V.real, 'V_im': V.imag,
        'I_re': I.real, 'I_im': I.imag,
    }, columns=_CSV_COLUMNS)
    df.to_csv(path, index=False, float_format='%.17g')


def read_measurements_csv(path, noise_sigma=0.0):
    df = pd.read_csv(path, float_precision='round_trip')
    missing = [c for c in _CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError("measurement file lacks columns %s"
                         % ", ".join(missing))
    labels = [int(x) for x in pd.unique(df['node'])]
    position = dict((x, i) for i, x in enumerate(labels))
    df = df.assign(_node=df['node'].map(position),
                   _phase=df['phase'].map(dict(
                       (p, i) for i, p in enumerate(_PHASE_NAMES))))
    if df['_phase'].isnull().any():
        raise ValueError("phases must be one of %s" % ", ".join(_PHASE_NAMES))
    df = df.sort_values(['t', '_node', '_phase'])
    T = df['t'].nunique()
    width = PHASES * len(labels)
    if len(df) != T * width:
        raise ValueError("expected %d rows for %d samples, got %d"
                         % (T * width, T, len(df)))
    V = (df['V_re'].to_numpy() + 1j * df['V_im'].to_numpy()).reshape(T, width)
    I = (df['I_re'].to_numpy() + 1j * df['I_im'].to_numpy()).reshape(T, width)
    return MeasurementSet(V, I, noise_sigma, labels)
