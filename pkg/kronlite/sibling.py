"""
Sibling detection in a clique of a Kron-reduced uniform-line network.

Two clique nodes i and j hang off the same hidden parent exactly when
their rows are proportional through one 3x3 factor:
C[i, m] = gamma C[j, m] for every other clique node m.
"""

import logging
from collections import namedtuple

import networkx as nx
import numpy as np

from kronlite._utils import KronError
from kronlite.blockmat import (as_phase_block, block_support, invert_block,
                               normalize_diagonal)
from kronlite.config import get_tolerances


__all__ = ['NoGroupFound', 'SiblingGroup', 'gamma_fit',
           'find_sibling_groups', 'uniform_coefficients',
           'check_uniform_preservation']


logger = logging.getLogger(__name__)


class NoGroupFound(KronError, LookupError):
    pass


class SiblingGroup(namedtuple('SiblingGroup', ['members', 'gammas'])):
    """
    Clique positions sharing one parent.  *members* is a sorted tuple of
    block indices into the clique; *gammas* maps (i, j), i < j, to the
    fitted factor with C[i, m] = gamma C[j, m].
    """
    __slots__ = ()

    def labels(self, C):
        return tuple(C.labels[i] for i in self.members)

    def __repr__(self):
        return "SiblingGroup(members=%r)" % (self.members,)


def _gamma_tolerance(tol):
    if tol is None:
        return get_tolerances().tol_gamma
    tol = float(tol)
    if tol < 0:
        raise ValueError("tolerance must be >= 0, got %r" % tol)
    return tol


def gamma_fit(C, i, j, tol=None):
    """
    Fit gamma = C[i, m0] C[j, m0]^-1 on the first other node m0 and return
    it if ||C[i, m] - gamma C[j, m]|| <= tol ||C[i, m]|| for every other m,
    else None.
    """
    tol = _gamma_tolerance(tol)
    if i == j:
        raise ValueError("gamma_fit needs two distinct nodes")
    others = [m for m in range(C.n) if m != i and m != j]
    if not others:
        raise ValueError("gamma_fit needs a clique of at least 3 nodes")
    blocks = C.blocks
    gamma = blocks[i, others[0]] @ invert_block(blocks[j, others[0]])
    lhs = blocks[i, others]
    pred = np.einsum('ab,mbc->mac', gamma, blocks[j, others])
    res = np.linalg.norm(lhs - pred, axis=(1, 2))
    if np.all(res <= tol * np.linalg.norm(lhs, axis=(1, 2))):
        return gamma
    return None


def find_sibling_groups(C, tol=None):
    """
    Partition clique nodes into sibling groups (two or more members each),
    sorted by smallest member.  Pairs are merged in sorted order.

    Cliques of two or three nodes have a single possible parent and yield
    one group of all members.
    """
    tol = _gamma_tolerance(tol)
    C = normalize_diagonal(C)
    n = C.n
    if n < 2:
        raise NoGroupFound("a clique of %d node(s) has no siblings" % n)

    gammas = {}
    if n <= 3:
        if n == 3:
            for i in range(n):
                for j in range(i + 1, n):
                    gamma = gamma_fit(C, i, j, tol)
                    if gamma is not None:
                        gammas[(i, j)] = gamma
        return [SiblingGroup(tuple(range(n)), gammas)]

    uf = nx.utils.UnionFind(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            gamma = gamma_fit(C, i, j, tol)
            if gamma is not None:
                gammas[(i, j)] = gamma
                uf.union(i, j)

    groups = []
    for members in uf.to_sets():
        if len(members) < 2:
            continue
        members = tuple(sorted(members))
        local = {}
        for a, i in enumerate(members):
            for j in members[a + 1:]:
                if (i, j) not in gammas:
                    raise NoGroupFound(
                        "sibling relation is not transitive on %r"
                        % ([C.labels[x] for x in members],))
                local[(i, j)] = gammas[(i, j)]
        groups.append(SiblingGroup(members, local))
    if not groups:
        raise NoGroupFound("no two nodes of the %d-node clique %r share a "
                           "parent" % (n, C.labels))
    groups.sort(key=lambda g: g.members[0])
    logger.debug("sibling groups in %r: %s", C.labels,
                 [g.labels(C) for g in groups])
    return groups


def uniform_coefficients(A, y_unit):
    """
    Least-squares fit of every nonzero off-diagonal block of *A* against
    -mu y_unit.  Returns ({(j, k): mu} keyed by labels with j before k in
    A's order, worst relative residual).
    """
    y = as_phase_block(y_unit)
    scale = np.vdot(y, y).real
    blocks = A.blocks
    support = block_support(A)
    mus = {}
    worst = 0.0
    for j, k in np.argwhere(support):
        B = blocks[j, k]
        mu = -np.vdot(y, B).real / scale
        res = np.linalg.norm(B + mu * y) / np.linalg.norm(B)
        worst = max(worst, float(res))
        if j < k:
            mus[(A.labels[j], A.labels[k])] = float(mu)
    return mus, worst


def check_uniform_preservation(A, y_unit, tol=None):
    """
    Whether *A* still describes uniform lines: every nonzero off-diagonal
    block is -mu y_unit with mu > 0 and every diagonal block is the sum of
    its row's mu times y_unit, within relative tolerance *tol* (default:
    round_trip_tol).
    """
    if tol is None:
        tol = get_tolerances().round_trip_tol
    y = as_phase_block(y_unit)
    mus, worst = uniform_coefficients(A, y)
    if worst > tol:
        logger.debug("off-diagonal blocks are not multiples of y_unit "
                     "(residual %.3g)", worst)
        return False
    if any(mu <= 0 for mu in mus.values()):
        return False
    totals = dict((x, 0.0) for x in A.labels)
    for (j, k), mu in mus.items():
        totals[j] += mu
        totals[k] += mu
    blocks = A.blocks
    for i, label in enumerate(A.labels):
        diag = blocks[i, i]
        if np.linalg.norm(diag - totals[label] * y) > \
                tol * max(np.linalg.norm(diag), np.linalg.norm(y)):
            return False
    return True
