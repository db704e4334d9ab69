""" Command line arguments for the store """

import argparse

from config import STRATEGIES
from experiments import EXPERIMENTS
from settings import DEFAULT_CLUSTER


def add_common(parser):
    parser.add_argument('--config', default=DEFAULT_CLUSTER,
                        help='Cluster config (JSON)')

    parser.add_argument('--seed', type=int, default=None,
                        help='Master seed (falls back to $PRADA_SEED)')

    parser.add_argument('--out', default='results',
                        help='Output directory')

    parser.add_argument('--keep-going', action='store_true', default=False,
                        help='Do not stop at the first error reply or failed run, and exit 0')

    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='More logging (-v: INFO, -vv: DEBUG)')

    parser.add_argument('--quiet', action='store_true', default=False,
                        help='Only log errors')


def get_args(argv=None):
    parser = argparse.ArgumentParser(prog='dhrkv',
                                     description='Simulate a key-value store that enforces data handling requirements')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Execute statements on a simulated cluster')
    add_common(run)
    run.add_argument('statements', nargs='*',
                     help='Statements to execute, in order')
    run.add_argument('--file', default=None,
                     help='File with one statement per line (-- starts a comment)')
    run.add_argument('--strategy', choices=sorted(STRATEGIES), default=None,
                     help='Placement strategy (overrides the config)')
    run.add_argument('--coordinator', default=None,
                     help='Send every statement to this node instead of a random one')

    experiment = commands.add_parser('experiment', help='Run a built-in experiment')
    add_common(experiment)
    experiment.set_defaults(config=None)
    experiment.add_argument('--experiment', choices=sorted(EXPERIMENTS) + ['all'], default='all',
                            help='Experiment to run')
    experiment.add_argument('--repeats', type=int, default=None,
                            help='Runs per sweep point')
    experiment.add_argument('--full-scale', action='store_true', default=False,
                            help='10^7 inserts per load balance run')
    experiment.add_argument('--inserts', type=int, default=None,
                            help='Inserts per load balance run')
    experiment.add_argument('--strategy', choices=sorted(STRATEGIES), action='append', default=None,
                            help='Placement strategy to compare (repeatable)')
    experiment.add_argument('--jobs', type=int, default=1,
                            help='Worker processes')

    check = commands.add_parser('check', help='Scan node snapshots for indirection inconsistencies')
    check.add_argument('snapshots',
                       help='Directory of node snapshots (JSON)')
    check.add_argument('--down', nargs='*', default=[],
                       help='Crashed nodes to skip')
    check.add_argument('-v', '--verbose', action='count', default=0,
                       help='More logging (-v: INFO, -vv: DEBUG)')
    check.add_argument('--quiet', action='store_true', default=False,
                       help='Only log errors')

    return parser.parse_args(argv)
