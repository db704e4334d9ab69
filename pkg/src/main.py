"""
Driver program

Use this to run statements on a simulated cluster, run the built-in experiments or check node snapshots:

    python3 main.py run "INSERT INTO t (k, v) VALUES ('a', 'b')" "SELECT * FROM t WHERE k='a'"
    python3 main.py experiment --experiment fig7 --repeats 3
    python3 main.py check results/snapshots

Exit codes: 0 success, 1 error replies / failed runs / scan violations, 2 usage, config or parse errors
"""

import csv
import glob
import json
import logging
import os
import sys

from args import get_args
from config import ClusterConfig, resolve_seed
from const import ERROR, OPS_COLUMNS, VIOLATION_COLUMNS
from errors import (ConfigError, DhrkvError, InvalidReplicationFactor, ParamError, ParseError, RegistryError,
                    UnknownDhrType, UnknownProperty)
from experiments import EXPERIMENTS, ExperimentSpec, run_experiment
from query import parse, read_statements
from recovery import global_scan
from settings import LOG_FORMAT, NS_PER_MS
from simulator import Simulator

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def setup_logging(args):
    if args.quiet:
        level = logging.ERROR
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def node_by_name(names, node_ids):
    """Map command line node names onto config node ids (ints and strings alike)"""
    lookup = {str(n): n for n in node_ids}
    try:
        return [lookup[str(name)] for name in names]
    except KeyError as e:
        raise ConfigError(f'unknown node {e.args[0]!r}') from None


def describe(reply):
    text = f'{reply.status:<9} {reply.op_id:<6} {reply.kind:<6} {reply.key!r} {reply.qct / NS_PER_MS:.1f}ms'
    if reply.error:
        text += f' {reply.error}'
    if reply.columns is not None:
        row = ', '.join(f'{c}={v.decode("utf-8", "replace")!r}' for c, v in sorted(reply.columns.items()))
        text += f' {{{row}}}'
    return text


############## run ##############

def statements_of(args, registry):
    """(source, statement) in execution order; parse errors name the line and byte offset"""
    texts = [(f'argument {i}', text) for i, text in enumerate(args.statements, start=1)]
    if args.file:
        try:
            texts += [(f'{args.file}:{n}', text) for n, text in read_statements(args.file)]
        except OSError as e:
            raise ConfigError(f'cannot read {args.file}: {e.strerror}') from None
    if not texts:
        raise ParamError('no statements given')
    parsed = []
    for source, text in texts:
        try:
            parsed.append((source, parse(text, registry)))
        except (ParseError, UnknownDhrType, UnknownProperty) as e:
            raise ParamError(f'{source}: {e}') from None
    return parsed


def write_run(sim, out):
    os.makedirs(os.path.join(out, 'snapshots'), exist_ok=True)
    with open(os.path.join(out, 'ops.csv'), 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(OPS_COLUMNS)
        writer.writerows(sim.stats.ops_rows())
    with open(os.path.join(out, 'summary.json'), 'w', encoding='utf-8') as f:
        json.dump(sim.summary(), f, indent=2, sort_keys=True)
    for snap in sim.snapshots():
        with open(os.path.join(out, 'snapshots', f'node-{snap["node"]}.json'), 'w', encoding='utf-8') as f:
            json.dump(snap, f, indent=1, sort_keys=True)


def cmd_run(args):
    config = ClusterConfig.load(args.config, strategy=args.strategy)
    statements = statements_of(args, config.registry)
    coordinator = None
    if args.coordinator is not None:
        coordinator = node_by_name([args.coordinator], config.topology.node_ids)[0]

    sim = Simulator(config, resolve_seed(args.seed))
    sim.bootstrap()
    failed = 0
    for source, stmt in statements:
        reply = sim.execute(stmt, coordinator=coordinator)
        print(describe(reply))
        if reply.status == ERROR:
            failed += 1
            logger.error('%s failed: %s', source, reply.error)
            if not args.keep_going:
                break

    write_run(sim, args.out)
    logger.info('wrote replies, summary and snapshots to %s', args.out)
    return EXIT_OK if args.keep_going or not failed else EXIT_FAILED


############## experiment ##############

def cmd_experiment(args):
    names = sorted(EXPERIMENTS) if args.experiment == 'all' else [args.experiment]
    config = ClusterConfig.load(args.config) if args.config else None
    master = resolve_seed(args.seed)
    failed = 0
    for name in names:
        spec = ExperimentSpec(name, config=config, master_seed=master, out=args.out, jobs=args.jobs,
                              strategies=args.strategy or ['balanced'], inserts=args.inserts,
                              **({'repeats': args.repeats} if args.repeats else {}))
        try:
            _, aggregated = run_experiment(spec, full_scale=args.full_scale)
        except DhrkvError as e:
            failed += 1
            logger.error('experiment %s failed: %s', name, e)
            if not args.keep_going:
                break
            continue
        for row in aggregated:
            print(','.join(str(v) for v in row))
    return EXIT_OK if args.keep_going or not failed else EXIT_FAILED


############## check ##############

def load_snapshots(directory):
    paths = sorted(glob.glob(os.path.join(directory, '*.json')))
    if not paths:
        raise ConfigError(f'no snapshots in {directory}')
    snapshots = []
    for path in paths:
        try:
            with open(path, encoding='utf-8') as f:
                snapshots.append(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f'cannot read snapshot {path}: {e}') from None
    return snapshots


def cmd_check(args):
    snapshots = load_snapshots(args.snapshots)
    down = node_by_name(args.down, [s['node'] for s in snapshots])
    violations = global_scan(snapshots, down)
    if not violations:
        print(f'clean: {len(snapshots)} snapshots')
        return EXIT_OK
    print(','.join(VIOLATION_COLUMNS))
    for v in violations:
        print(','.join(str(x) for x in v))
    return EXIT_FAILED


COMMANDS = {'run': cmd_run, 'experiment': cmd_experiment, 'check': cmd_check}


def main(argv=None):
    args = get_args(argv)
    setup_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParamError, InvalidReplicationFactor, RegistryError) as e:
        print(f'dhrkv: {e}', file=sys.stderr)
        return EXIT_USAGE
    except DhrkvError as e:
        print(f'dhrkv: {e}', file=sys.stderr)
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
