"""
The kronlite command line: generate, reduce, identify and roundtrip.

Exit codes: 0 success, 1 roundtrip failures, 2 infeasible input,
3 numerical singularity, 4 any other pipeline error.
"""

import argparse
import json
import logging
import os
import sys
import time
from multiprocessing import Pool

from kronlite import serialize
from kronlite._utils import KronError
from kronlite._version import get_versions
from kronlite.analysis import get_network_dot, get_reduction_dot
from kronlite.blockmat import (SingularBlock, SingularSubmatrix,
                               relative_error, schur_complement)
from kronlite.config import RunConfig, Tolerances, get_tolerances
from kronlite.decomposition import (classify_from_reduction, identify_full,
                                    plan_reduction)
from kronlite.estimation import estimate_kron_reduced, estimation_error
from kronlite.kron_forward import StructureViolation, reduce_by_subtrees
from kronlite.network import (Infeasible, admittance_from_network,
                              compare_up_to_hidden_relabeling,
                              generate_radial, reduce_network)


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_INFEASIBLE = 2
EXIT_SINGULAR = 3
EXIT_PIPELINE = 4


def parse_seeds(text):
    """
    Parse a seed list: a single seed ("7"), an inclusive range ("0..99")
    or a comma separated list ("1,4,9").
    """
    text = text.strip()
    try:
        if '..' in text:
            lo, hi = text.split('..', 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(
                    "empty seed range %r" % text)
            return tuple(range(lo, hi + 1))
        return tuple(int(s) for s in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError("invalid seed list %r" % text)


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("%r is not positive" % text)
    return value


def _add_common(p):
    p.add_argument('--help', action='help',
                   help="show this help message and exit")
    p.add_argument('-v', '--verbose', action='count', default=0,
                   help="more logging; repeat for debug output")
    p.add_argument('-q', '--quiet', action='store_true',
                   help="only log errors")
    p.add_argument('-o', '--output', default=None,
                   help="output file (default: standard output)")
    p.add_argument('--tol-gamma', type=_positive_float, default=None,
                   help="sibling test tolerance")
    p.add_argument('--round-trip-tol', type=_positive_float, default=None,
                   help="accepted relative round-trip error")
    p.add_argument('--emit-dot', nargs='?', const=True, default=None,
                   metavar='PATH', help="also write a DOT graph")


def _add_counts(p, seeds_help):
    p.add_argument('-m', '--measured', type=int, required=True,
                   help="number of measured nodes")
    p.add_argument('-h', '--hidden', type=int, required=True,
                   help="number of hidden nodes")
    p.add_argument('--subtrees', type=int, default=1,
                   help="number of maximal hidden subtrees")
    p.add_argument('--uniform', action='store_true',
                   help="draw uniform lines (y_unit / lambda)")
    p.add_argument('--seed', '--seeds', dest='seeds', type=parse_seeds,
                   default=(0,), help=seeds_help)


def _add_input(p):
    p.add_argument('input', nargs='?', default=None,
                   help="input JSON document")
    p.add_argument('--input', dest='input_flag', default=None,
                   help=argparse.SUPPRESS)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='kronlite', add_help=False,
        description="Kron reduction of three-phase radial networks and "
                    "its exact reversal.")
    parser.add_argument('--help', action='help',
                        help="show this help message and exit")
    parser.add_argument('--version', action='version',
                        version='kronlite %s' % get_versions()['version'])
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('generate', add_help=False,
                       help="draw a random radial network")
    _add_common(p)
    _add_counts(p, "generator seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('reduce', add_help=False,
                       help="Kron-reduce a network onto its measured nodes")
    _add_common(p)
    _add_input(p)
    p.add_argument('--iterative', action='store_true',
                   help="also reduce one node at a time and check both "
                        "results agree")
    p.add_argument('--emit-trace', nargs='?', const=True, default=None,
                   metavar='PATH', help="write the forward reduction trace")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser('identify', add_help=False,
                       help="recover the network behind a Kron reduction")
    _add_common(p)
    _add_input(p)
    p.add_argument('--from-measurements', metavar='CSV', default=None,
                   help="estimate the reduction from phasor measurements "
                        "first")
    p.add_argument('--emit-trace', nargs='?', const=True, default=None,
                   metavar='PATH', help="write the decomposition plan")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser('roundtrip', add_help=False,
                       help="reduce and identify generated networks")
    _add_common(p)
    _add_counts(p, "seeds: 7, 0..99 or 1,4,9")
    p.add_argument('-j', '--jobs', type=int, default=1,
                   help="worker processes")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def _configure_logging(args):
    level = os.environ.get('KRONLITE_LOG_LEVEL', '').upper()
    if args.quiet:
        level = 'ERROR'
    elif args.verbose >= 2:
        level = 'DEBUG'
    elif args.verbose == 1:
        level = 'INFO'
    elif not level:
        level = 'WARNING'
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def make_config(args):
    overrides = {}
    if args.tol_gamma is not None:
        overrides['tol_gamma'] = args.tol_gamma
    if args.round_trip_tol is not None:
        overrides['round_trip_tol'] = args.round_trip_tol
    tol = get_tolerances()
    if overrides:
        tol = tol.replace(**overrides)
    source = getattr(args, 'input', None) or getattr(args, 'input_flag', None)
    return RunConfig(tolerances=tol,
                     seeds=getattr(args, 'seeds', (0,)),
                     input=source,
                     output=args.output,
                     emit_trace=getattr(args, 'emit_trace', None),
                     emit_dot=args.emit_dot,
                     jobs=getattr(args, 'jobs', 1))


def _side_path(config, option, suffix):
    """Resolve an optional-path flag; a bare flag derives the path."""
    if option is True:
        base = config.output or config.input or 'kronlite'
        return os.path.splitext(base)[0] + suffix
    return option


def _write_json(doc, path):
    if path is None:
        json.dump(serialize.encode(doc), sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write('\n')
    else:
        serialize.dump_json(doc, path)
        logger.info("wrote %s", path)


def _write_text(text, path):
    with open(path, 'w') as f:
        f.write(text)
    logger.info("wrote %s", path)


def _load_input(config):
    if config.input is None:
        return json.load(sys.stdin)
    return serialize.load_json(config.input)


def _full_admittance(doc, tol):
    """Return (Y, hidden labels) from a network or matrix document."""
    kind, model = serialize.read_model(doc)
    if kind == 'network':
        return admittance_from_network(model, tol), list(model.hidden)
    Y, hidden = model
    return Y, list(hidden or ())


def cmd_generate(args, config):
    net = generate_radial(args.measured, args.hidden, uniform=args.uniform,
                          seed=config.seed, subtrees=args.subtrees)
    Y = admittance_from_network(net, config.tolerances)
    out = config.output or 'network.json'
    serialize.dump_json(serialize.network_to_json(net), out)
    side = os.path.splitext(out)[0] + '.admittance.json'
    serialize.dump_json(serialize.block_matrix_to_json(Y, net.hidden), side)
    if config.emit_dot:
        _write_text(get_network_dot(net),
                    _side_path(config, config.emit_dot, '.dot'))
    print("generated %d nodes (%d measured, %d hidden), %d lines, "
          "uniform: %s" % (len(net.labels), len(net.measured),
                           len(net.hidden), len(net.edges),
                           'yes' if net.is_uniform else 'no'))
    print("wrote %s and %s" % (out, side))
    return EXIT_OK


def cmd_reduce(args, config):
    tol = config.tolerances
    Y, hidden = _full_admittance(_load_input(config), tol)
    hidden_set = set(hidden)
    keep = [i for i, x in enumerate(Y.labels) if x not in hidden_set]
    Ybar = schur_complement(Y, keep, tol)
    logger.info("eliminated %d hidden node(s), %d remain", len(hidden),
                Ybar.n)

    traces = None
    if args.iterative or config.emit_trace:
        reduced, traces = reduce_by_subtrees(Y, hidden, tol)
        err = relative_error(Ybar, reduced)
        if args.iterative:
            if err > tol.tau_solve:
                raise StructureViolation(
                    "iterative and direct reductions differ by %.3g" % err
                ).locate("reduce")
            print("iterative reduction agrees with the Schur complement "
                  "(relative error %.3g)" % err)
    _write_json(serialize.block_matrix_to_json(Ybar), config.output)

    if config.emit_trace:
        _write_json([serialize.trace_to_json(t) for t in traces],
                    _side_path(config, config.emit_trace, '.trace.json'))
    if config.emit_dot:
        try:
            cls = classify_from_reduction(Ybar, tol)
            partition, cliques = cls.partition, cls.cliques
        except KronError as e:
            logger.warning("cliques not outlined: %s", e)
            partition, cliques = None, None
        _write_text(get_reduction_dot(Ybar, partition, cliques, tol),
                    _side_path(config, config.emit_dot, '.dot'))
    return EXIT_OK


def _reduction_from_input(args, config):
    tol = config.tolerances
    if args.from_measurements:
        ms = serialize.read_measurements_csv(args.from_measurements)
        Ybar = estimate_kron_reduced(ms, tol)
        print("estimated %d-node reduction from %d samples, residual %.3g"
              % (ms.M, ms.T, estimation_error(ms, Ybar)))
        return Ybar
    Y, hidden = _full_admittance(_load_input(config), tol)
    if not hidden:
        return Y
    logger.info("input has %d hidden node(s); reducing first", len(hidden))
    hidden_set = set(hidden)
    keep = [i for i, x in enumerate(Y.labels) if x not in hidden_set]
    return schur_complement(Y, keep, tol)


def cmd_identify(args, config):
    tol = config.tolerances
    Ybar = _reduction_from_input(args, config)
    plan = plan_reduction(Ybar, tol)
    print("%d clique(s), %d internal measured node(s)"
          % (len(plan.pieces), len(plan.partition.measured_internal)))
    for x, piece in enumerate(plan.pieces):
        print("  clique %d: %s (%s)" % (
            x, ", ".join(str(m) for m in piece.members), piece.kind))
    if config.emit_trace:
        _write_json(serialize.plan_to_json(plan),
                    _side_path(config, config.emit_trace, '.plan.json'))

    net = identify_full(Ybar, tol)
    err = relative_error(Ybar, reduce_network(net, tol))
    print("recovered %d hidden node(s) and %d lines, round-trip error %.3g"
          % (len(net.hidden), len(net.edges), err))
    _write_json(serialize.network_to_json(net), config.output)
    if config.emit_dot:
        _write_text(get_network_dot(net),
                    _side_path(config, config.emit_dot, '.dot'))
    return EXIT_OK


def roundtrip_one(task):
    """
    Generate, reduce and identify one instance.  Runs in worker processes,
    so it takes and returns plain data.
    """
    seed, measured, hidden, subtrees, tol_values = task
    tol = Tolerances(**tol_values)
    start = time.time()
    result = {'seed': seed, 'ok': False, 'error': None, 'message': '',
              'residual': None}
    try:
        net = generate_radial(measured, hidden, uniform=True, seed=seed,
                              subtrees=subtrees)
        Ybar = reduce_network(net, tol)
        rec = identify_full(Ybar, tol)
        result['residual'] = relative_error(Ybar, reduce_network(rec, tol))
        if not compare_up_to_hidden_relabeling(net, rec, tol.round_trip_tol):
            result['error'] = 'Mismatch'
            result['message'] = "recovered network differs from the original"
        else:
            result['ok'] = result['residual'] <= tol.round_trip_tol
            if not result['ok']:
                result['error'] = 'Residual'
                result['message'] = "round-trip error %.3g" % (
                    result['residual'],)
    except KronError as e:
        result['error'] = type(e).__name__
        result['message'] = str(e)
    except Exception as e:
        logger.debug("seed %d failed", seed, exc_info=True)
        result['error'] = type(e).__name__
        result['message'] = str(e)
    result['seconds'] = time.time() - start
    return result


def cmd_roundtrip(args, config):
    if not args.uniform:
        logger.warning("identification needs uniform lines; generating "
                       "uniform instances anyway")
    tol = config.tolerances
    tasks = [(seed, args.measured, args.hidden, args.subtrees, tol.as_dict())
             for seed in config.seeds]
    start = time.time()
    if config.jobs > 1 and len(tasks) > 1:
        with Pool(config.jobs) as pool:
            results = list(pool.imap(roundtrip_one, tasks))
    else:
        results = [roundtrip_one(t) for t in tasks]
    wall = time.time() - start

    failures = [r for r in results if not r['ok']]
    residuals = [r['residual'] for r in results if r['residual'] is not None]
    worst = max(residuals) if residuals else 0.0
    for r in failures:
        print("seed %d: %s: %s" % (r['seed'], r['error'], r['message']))
    print("%d instance(s), %d failure(s), max relative error %.3g, "
          "%.2fs" % (len(results), len(failures), worst, wall))
    if config.output:
        serialize.dump_json({'instances': results,
                             'failures': len(failures),
                             'max_error': worst,
                             'seconds': wall}, config.output)
    return EXIT_FAILURES if failures else EXIT_OK


def exit_code_for(error):
    if isinstance(error, Infeasible):
        return EXIT_INFEASIBLE
    if isinstance(error, (SingularBlock, SingularSubmatrix)):
        return EXIT_SINGULAR
    return EXIT_PIPELINE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, 'input_flag', None) and not args.input:
        args.input = args.input_flag
    _configure_logging(args)
    try:
        config = make_config(args)
        return args.func(args, config)
    except KronError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return exit_code_for(e)
    except (OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_PIPELINE
