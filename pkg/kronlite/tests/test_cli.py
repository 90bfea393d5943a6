"""
Command line tests, driving kronlite.cli.main in-process
"""

import argparse
import contextlib
import io
import os
import tempfile
import unittest
import warnings
from unittest import mock

import numpy as np

from . import TestCase
from kronlite import cli, serialize
from kronlite.blockmat import (BlockMatrix, SingularSubmatrix,
                               relative_error)
from kronlite.estimation import simulate_measurements
from kronlite.network import (Infeasible, compare_up_to_hidden_relabeling,
                              generate_radial, reduce_network)
from kronlite.sibling import NoGroupFound


class TestBase(TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmpdir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmpdir, name)

    def run_cli(self, *argv):
        """Run the command line, returning (exit code, stdout text)."""
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = cli.main(list(argv))
        return code, out.getvalue()

    def generate(self, name, *extra):
        code, _ = self.run_cli('generate', '-o', self.path(name), *extra)
        self.assertEqual(code, cli.EXIT_OK)
        return self.path(name)

    def read_bytes(self, path):
        with open(path, 'rb') as f:
            return f.read()


class TestParseSeeds(TestBase):

    def test_forms(self):
        self.assertEqual(cli.parse_seeds('7'), (7,))
        self.assertEqual(cli.parse_seeds('0..3'), (0, 1, 2, 3))
        self.assertEqual(cli.parse_seeds('1,4,9'), (1, 4, 9))

    def test_bad(self):
        for text in ('3..1', 'x', '1..y', ''):
            with self.assertRaises(argparse.ArgumentTypeError):
                cli.parse_seeds(text)

    def test_exit_codes(self):
        self.assertEqual(cli.exit_code_for(Infeasible("x")), 2)
        self.assertEqual(cli.exit_code_for(SingularSubmatrix("x")), 3)
        self.assertEqual(cli.exit_code_for(NoGroupFound("x")), 4)


class TestGenerate(TestBase):

    def test_outputs(self):
        path = self.generate('net.json', '-m', '8', '-h', '3', '--uniform',
                             '--seed', '4', '--emit-dot')
        kind, net = serialize.read_model(serialize.load_json(path))
        self.assertEqual(kind, 'network')
        self.assertEqual(len(net.measured), 8)
        self.assertEqual(len(net.hidden), 3)
        self.assertTrue(net.is_uniform)
        kind, (Y, hidden) = serialize.read_model(
            serialize.load_json(self.path('net.admittance.json')))
        self.assertEqual(kind, 'matrix')
        self.assertEqual(hidden, net.hidden)
        self.assertEqual(Y.n, 11)
        with open(self.path('net.dot')) as f:
            self.assertTrue(f.read().startswith('graph network'))

    def test_deterministic(self):
        a = self.generate('a.json', '-m', '9', '-h', '3', '--seed', '11')
        b = self.generate('b.json', '-m', '9', '-h', '3', '--seed', '11')
        self.assertEqual(self.read_bytes(a), self.read_bytes(b))
        c = self.generate('c.json', '-m', '9', '-h', '3', '--seed', '12')
        self.assertNotEqual(self.read_bytes(a), self.read_bytes(c))

    def test_infeasible(self):
        code, _ = self.run_cli('generate', '-q', '-m', '2', '-h', '1',
                               '-o', self.path('x.json'))
        self.assertEqual(code, cli.EXIT_INFEASIBLE)
        self.assertFalse(os.path.exists(self.path('x.json')))


class TestReduce(TestBase):

    def test_iterative(self):
        src = self.generate('net.json', '-m', '10', '-h', '4',
                            '--subtrees', '2', '--seed', '2')
        code, out = self.run_cli('reduce', src, '--iterative',
                                 '--emit-trace', '-o', self.path('red.json'))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('agrees with the Schur complement', out)
        Ybar, _ = serialize.block_matrix_from_json(
            serialize.load_json(self.path('red.json')))
        _, net = serialize.read_model(serialize.load_json(src))
        self.assertLessEqual(relative_error(reduce_network(net), Ybar),
                             1e-12)
        traces = serialize.load_json(self.path('red.trace.json'))
        self.assertEqual(len(traces), 2)
        self.assertEqual(sum(len(t) for t in traces), 4)

    def test_matrix_input_and_dot(self):
        self.generate('net.json', '-m', '6', '-h', '2', '--uniform')
        code, _ = self.run_cli('reduce', '--input',
                               self.path('net.admittance.json'),
                               '-o', self.path('red.json'),
                               '--emit-dot', self.path('red.dot'))
        self.assertEqual(code, cli.EXIT_OK)
        with open(self.path('red.dot')) as f:
            self.assertIn('subgraph cluster_0', f.read())

    def test_singular(self):
        A = BlockMatrix.zeros(2, (1, 2))
        serialize.dump_json(serialize.block_matrix_to_json(A, hidden=[2]),
                            self.path('zero.json'))
        code, _ = self.run_cli('reduce', '-q', self.path('zero.json'),
                               '-o', self.path('red.json'))
        self.assertEqual(code, cli.EXIT_SINGULAR)

    def test_missing_input(self):
        code, _ = self.run_cli('reduce', '-q', self.path('nothing.json'))
        self.assertEqual(code, cli.EXIT_PIPELINE)


class TestIdentify(TestBase):

    def test_from_reduction(self):
        src = self.generate('net.json', '-m', '12', '-h', '4', '--uniform',
                            '--subtrees', '2', '--seed', '3')
        self.assertEqual(self.run_cli('reduce', src, '-o',
                                      self.path('red.json'))[0], 0)
        code, out = self.run_cli('identify', self.path('red.json'),
                                 '-o', self.path('rec.json'),
                                 '--emit-trace', '--emit-dot')
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('2 clique(s)', out)
        _, net = serialize.read_model(serialize.load_json(src))
        _, rec = serialize.read_model(
            serialize.load_json(self.path('rec.json')))
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec))
        plan = serialize.load_json(self.path('rec.plan.json'))
        self.assertEqual(len(plan['pieces']), 2)
        self.assertTrue(os.path.exists(self.path('rec.dot')))

    def test_from_full_network(self):
        src = self.generate('net.json', '-m', '7', '-h', '2', '--uniform')
        code, out = self.run_cli('identify', src, '-o', self.path('rec.json'))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('recovered 2 hidden node(s)', out)

    def test_from_measurements(self):
        net = generate_radial(7, 2, uniform=True, seed=5)
        Ybar = reduce_network(net)
        ms = simulate_measurements(Ybar, 4 * 3 * Ybar.n, seed=5)
        serialize.write_measurements_csv(ms, self.path('pmu.csv'))
        code, out = self.run_cli('identify', '--from-measurements',
                                 self.path('pmu.csv'), '--round-trip-tol',
                                 '1e-6', '-o', self.path('rec.json'))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('estimated 7-node reduction', out)
        _, rec = serialize.read_model(
            serialize.load_json(self.path('rec.json')))
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec, 1e-6))

    def test_non_uniform_warns(self):
        src = self.generate('net.json', '-m', '9', '-h', '3', '--seed', '2')
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            code, _ = self.run_cli('identify', '-q', src,
                                   '-o', self.path('rec.json'))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue(any(issubclass(w.category, RuntimeWarning)
                            for w in caught))
        _, net = serialize.read_model(serialize.load_json(src))
        _, rec = serialize.read_model(
            serialize.load_json(self.path('rec.json')))
        self.assertTrue(compare_up_to_hidden_relabeling(net, rec))


class TestRoundtrip(TestBase):

    def test_passes(self):
        code, out = self.run_cli('roundtrip', '-m', '8', '-h', '3',
                                 '--uniform', '--seeds', '0..3',
                                 '-o', self.path('report.json'))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('4 instance(s), 0 failure(s)', out)
        report = serialize.load_json(self.path('report.json'))
        self.assertEqual([r['seed'] for r in report['instances']],
                         [0, 1, 2, 3])
        self.assertLessEqual(report['max_error'], 1e-8)

    def test_no_hidden_nodes(self):
        code, _ = self.run_cli('roundtrip', '-m', '5', '-h', '0',
                               '--uniform', '--seeds', '0,1')
        self.assertEqual(code, cli.EXIT_OK)

    def test_worker_pool(self):
        code, out = self.run_cli('roundtrip', '-m', '10', '-h', '4',
                                 '--subtrees', '2', '--uniform',
                                 '--seeds', '0..3', '-j', '2')
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn('0 failure(s)', out)

    def test_failures(self):
        # no recovered line matches the original bit for bit
        code, out = self.run_cli('roundtrip', '-q', '-m', '8', '-h', '3',
                                 '--uniform', '--seeds', '0..1',
                                 '--round-trip-tol', '1e-300')
        self.assertEqual(code, cli.EXIT_FAILURES)
        self.assertIn('2 failure(s)', out)

    def test_unexpected_error_is_a_failure(self):
        real = cli.identify_full
        calls = []

        def flaky(Ybar, tol=None):
            calls.append(Ybar.n)
            if len(calls) == 2:
                raise np.linalg.LinAlgError("no convergence")
            return real(Ybar, tol)

        with mock.patch.object(cli, 'identify_full', flaky):
            code, out = self.run_cli('roundtrip', '-q', '-m', '8', '-h', '3',
                                     '--uniform', '--seeds', '0..2',
                                     '-o', self.path('report.json'))
        self.assertEqual(code, cli.EXIT_FAILURES)
        self.assertIn('seed 1: LinAlgError: no convergence', out)
        report = serialize.load_json(self.path('report.json'))
        self.assertEqual([r['ok'] for r in report['instances']],
                         [True, False, True])

    def test_infeasible_counts(self):
        code, out = self.run_cli('roundtrip', '-q', '-m', '3', '-h', '2',
                                 '--uniform')
        self.assertEqual(code, cli.EXIT_FAILURES)
        self.assertIn('Infeasible', out)


if __name__ == '__main__':
    unittest.main()
