"""
Whole-network identification tests
"""

import itertools
import unittest
import warnings

import networkx as nx
import numpy as np

from . import TestCase
from .customize import instance_count
from .test_kron_forward import laplacian
from kronlite._utils import KronError
from kronlite.blockmat import (BlockMatrix, block_support,
                               has_zero_row_block_sums, relative_error,
                               schur_complement)
from kronlite.decomposition import (AdjacentLine, CliquePiece,
                                    InconsistentAttachment,
                                    MalformedReduction, SharedNode,
                                    classify_from_reduction, identify_full,
                                    plan_reduction, reattach_internal,
                                    recombine, split_cliques, strip_internal)
from kronlite.kron_reverse import identify_clique
from kronlite.network import (MEASURED,
                              compare_up_to_hidden_relabeling,
                              generate_radial, node_partition,
                              reduce_network)


class TestBase(TestCase):

    def instance(self, seed, uniform=True):
        """A multi-clique network with internal measured nodes."""
        rng = np.random.default_rng(4000 + seed)
        subtrees = int(rng.integers(1, 4))
        hidden = subtrees + int(rng.integers(0, 5))
        measured = hidden + subtrees + 1 + int(rng.integers(0, 8))
        return generate_radial(measured, hidden, uniform=uniform, seed=seed,
                               subtrees=subtrees)

    def expected_cliques(self, net):
        g = net.graph()
        hidden = g.subgraph(net.hidden)
        cliques = []
        for comp in nx.connected_components(hidden):
            members = set()
            for h in comp:
                members.update(x for x in g[h] if net.role(x) == MEASURED)
            cliques.append(tuple(sorted(members)))
        return sorted(cliques)

    def expected_tree_edges(self, net):
        return sorted(e.key for e in net.edges
                      if net.role(e.j) == MEASURED
                      and net.role(e.k) == MEASURED)


class TestClassify(TestBase):

    def test_cliques_and_partition(self):
        for seed in range(instance_count(40, 100)):
            net = self.instance(seed)
            cls = classify_from_reduction(reduce_network(net))
            self.assertEqual(cls.cliques, self.expected_cliques(net),
                             "seed %d" % seed)
            truth = node_partition(net)
            self.assertEqual(cls.partition.measured_internal,
                             truth.measured_internal)
            self.assertEqual(cls.partition.measured_boundary,
                             truth.measured_boundary)
            for c in cls.cliques:
                self.assertGreaterEqual(len(c), 3)
            for a, b in itertools.combinations(cls.cliques, 2):
                self.assertLessEqual(len(set(a) & set(b)), 1)
            tree_edges = sorted(e for tree in cls.trees for e in tree)
            self.assertEqual(tree_edges, self.expected_tree_edges(net))

    def test_against_clique_enumeration(self):
        for seed in range(20):
            net = self.instance(seed)
            if len(net.measured) > 12:
                continue
            Ybar = reduce_network(net)
            support = block_support(Ybar)
            g = nx.Graph()
            g.add_nodes_from(Ybar.labels)
            for j, k in zip(*np.nonzero(support)):
                g.add_edge(Ybar.labels[j], Ybar.labels[k])
            brute = sorted(tuple(sorted(c)) for c in nx.find_cliques(g)
                           if len(c) >= 3)
            self.assertEqual(classify_from_reduction(Ybar).cliques, brute)

    def test_shared_clique_edge(self):
        # cliques {1, 2, 3} and {2, 3, 4} overlap on the edge (2, 3)
        Ybar = laplacian([1, 2, 3, 4],
                         [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)])
        with self.assertRaises(MalformedReduction):
            classify_from_reduction(Ybar)
        with self.assertRaises(MalformedReduction) as cm:
            identify_full(Ybar)
        self.assertEqual(cm.exception.step, "classify")

    def test_cliques_sharing_smallest_label(self):
        # h8 joins 1, 3, 4; h9 joins 1, 2, 5, 6; 7 hangs off 4
        full = laplacian(range(1, 10), [(8, 1), (8, 3), (8, 4), (9, 1),
                                        (9, 2), (9, 5), (9, 6), (4, 7)],
                         seed=2)
        Ybar = schur_complement(full, range(7))
        cls = classify_from_reduction(Ybar)
        self.assertEqual(cls.cliques, [(1, 2, 5, 6), (1, 3, 4)])
        self.assertEqual(cls.trees, [[(4, 7)]])
        pieces = split_cliques(strip_internal(Ybar, cls.partition)[2])
        self.assertEqual([p.members for p in pieces],
                         [(1, 2, 5, 6), (1, 3, 4)])
        self.assertEqual(pieces[1].attachments, (SharedNode(1, 0),))

    def test_plain_tree(self):
        net = generate_radial(6, 0, seed=3)
        cls = classify_from_reduction(reduce_network(net))
        self.assertEqual(cls.cliques, [])
        self.assertEqual(cls.partition.measured_internal,
                         frozenset(net.measured))
        self.assertEqual(len(cls.trees), 1)


class TestSplitAndRecombine(TestBase):

    def test_strip_and_reattach(self):
        for seed in range(instance_count(30, 100)):
            net = self.instance(seed, uniform=seed % 2 == 0)
            Ybar = reduce_network(net)
            part = classify_from_reduction(Ybar).partition
            Y11_11, Y11_12, Ybar_prime = strip_internal(Ybar, part)
            self.assertTrue(has_zero_row_block_sums(Ybar_prime))
            self.assertEqual(set(Y11_11.labels), part.measured_internal)
            back = reattach_internal(Ybar_prime, Y11_11, Y11_12)
            self.assertLessEqual(relative_error(Ybar, back), 1e-12)

    def test_split_and_recombine(self):
        for seed in range(instance_count(30, 100)):
            net = self.instance(seed, uniform=seed % 2 == 0)
            plan = plan_reduction(reduce_network(net))
            if not plan.pieces:
                continue
            stub = [(piece, piece.Ybar_iso) for piece in plan.pieces]
            Y_prime = recombine(stub)
            self.assertEqual(list(Y_prime.labels),
                             sorted(plan.Ybar_prime.labels))
            self.assertLessEqual(relative_error(plan.Ybar_prime, Y_prime),
                                 1e-12)

    def test_pieces(self):
        kinds = set()
        for seed in range(40):
            net = self.instance(seed)
            plan = plan_reduction(reduce_network(net))
            for x, piece in enumerate(plan.pieces):
                self.assertTrue(has_zero_row_block_sums(piece.Ybar_iso))
                self.assertEqual(piece.Ybar_iso.labels, piece.members)
                for a in piece.attachments:
                    self.assertLess(a.piece, x)
                kinds.add(piece.kind)
                kinds.update(a.kind for a in piece.attachments)
        self.assertLessEqual({'disconnected', 'shared-node',
                              'adjacent-line'}, kinds)

    def test_piece_kind(self):
        iso = BlockMatrix.zeros(3, (1, 2, 3))
        W = np.eye(3)
        self.assertEqual(CliquePiece((1, 2, 3), iso, ()).kind,
                         'disconnected')
        self.assertEqual(CliquePiece((1, 2, 3), iso,
                                     (SharedNode(1, 0),)).kind,
                         'shared-node')
        both = (SharedNode(1, 0), AdjacentLine(7, 2, W, 1))
        self.assertEqual(CliquePiece((1, 2, 3), iso, both).kind, 'mixed')

    def test_split_needs_cover(self):
        net = generate_radial(10, 3, uniform=True, seed=5, subtrees=2)
        plan = plan_reduction(reduce_network(net))
        with self.assertRaises(MalformedReduction):
            split_cliques(plan.Ybar_prime, [plan.pieces[0].members])

    def test_inconsistent_attachments(self):
        iso = laplacian([1, 2, 3], [(1, 2), (2, 3), (1, 3)])
        first = CliquePiece((1, 2, 3), iso, ())
        bad = CliquePiece((1, 2, 3), iso, (SharedNode(1, 1),))
        with self.assertRaises(InconsistentAttachment):
            recombine([(first, iso), (bad, iso)])
        other = laplacian([3, 4, 5], [(3, 4), (4, 5), (3, 5)])
        wrong = CliquePiece((3, 4, 5), other, (SharedNode(4, 0),))
        with self.assertRaises(InconsistentAttachment):
            recombine([(first, iso), (wrong, other)])
        missing = CliquePiece((3, 4, 6), other, ())
        with self.assertRaises(InconsistentAttachment):
            recombine([(first, iso), (missing, other)])

    def test_reattach_checks_rows(self):
        Y = laplacian([1, 2, 3], [(1, 2), (2, 3)])
        with self.assertRaises(ValueError):
            reattach_internal(Y.restrict([2, 3]), Y.restrict([1]),
                              Y.restrict([3], [2]))

    def test_plan_as_dict(self):
        net = generate_radial(10, 3, uniform=True, seed=5, subtrees=2)
        d = plan_reduction(reduce_network(net)).as_dict()
        self.assertEqual(sorted(d), ['partition', 'pieces', 'trees'])
        self.assertEqual(len(d['pieces']), 2)
        self.assertEqual(d['pieces'][0]['attachments'], [])


class TestIdentifyFull(TestBase):

    def test_round_trip(self):
        for seed in range(instance_count(25, 100)):
            net = self.instance(seed)
            Ybar = reduce_network(net)
            rec = identify_full(Ybar)
            self.assertTrue(compare_up_to_hidden_relabeling(net, rec),
                            "seed %d" % seed)
            self.assertLessEqual(relative_error(Ybar, reduce_network(rec)),
                                 1e-8)

    def test_hidden_labels(self):
        net = generate_radial(12, 4, uniform=True, seed=6, subtrees=2)
        rec = identify_full(reduce_network(net))
        self.assertEqual(rec.hidden, list(range(13, 17)))
        self.assertEqual(rec.measured, net.measured)

    def test_single_clique_matches_identify_clique(self):
        net = generate_radial(7, 2, uniform=True, seed=7)
        Ybar = reduce_network(net)
        a = identify_full(Ybar)
        b = identify_clique(Ybar)
        self.assertTrue(compare_up_to_hidden_relabeling(a, b, 1e-10))

    def test_no_hidden_nodes(self):
        net = generate_radial(5, 0, uniform=True, seed=8)
        rec = identify_full(reduce_network(net))
        self.assertEqual(rec.hidden, [])
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec))

    def test_stubbed_identification(self):
        calls = []

        def finder(C, tol):
            from kronlite.sibling import find_sibling_groups
            calls.append(C.n)
            return find_sibling_groups(C, tol)

        net = generate_radial(9, 3, uniform=True, seed=9, subtrees=2)
        rec = identify_full(reduce_network(net), sibling_finder=finder)
        self.assertEqual(len(calls), 3)
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec))

    def test_piece_provenance(self):
        net = generate_radial(9, 3, uniform=True, seed=10, subtrees=2)
        with self.assertRaises(KronError) as cm:
            identify_full(reduce_network(net),
                          sibling_finder=lambda C, tol: [])
        self.assertEqual(cm.exception.provenance[0], "identify[piece 0]")

    def test_non_uniform_warning(self):
        net = generate_radial(9, 3, seed=2)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            rec = identify_full(reduce_network(net))
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec))
        self.assertTrue(any(issubclass(w.category, RuntimeWarning)
                            for w in caught))


if __name__ == '__main__':
    unittest.main()
