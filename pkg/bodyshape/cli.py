"""
This module defines the command-line interface of the ``bodyshape`` script:
one subcommand per stage of the silhouette-to-label pipeline.

Settings come from `RunConfig` defaults, then the ``--config`` file, then
flags given explicitly on the command line. Exit status is 0 on success,
1 when a run fails on its data or files, and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
from typing import Optional, Sequence

from . import commands
from .clustering import CRITERIA
from .constants import METHODS, TRAIN_ARCHS
from .dataset import PREPROCESS_MODES
from .load_conf import load, load_conf
from .log_setup import (configure_log_directory, set_verbosity,
                        setup_logging)
from .shapes import BodyShapeError, ConfigError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Flags whose values are RunConfig overrides; everything else is kept on
# BodyShapeArgs.
_ARG_FIELDS = ('command', 'config', 'quiet', 'debug', 'log_dir', 'inputs',
               'model', 'stats', 'plot', 'names')


def _setting(parser, *flags, **kwargs):
    """Add an option that only overrides the config when given."""
    parser.add_argument(*flags, default=argparse.SUPPRESS, **kwargs)


def _add_ratio_options(parser):
    _setting(parser, '--ratios',
             help="Ratio set: 'default', 'upper', 'lower' or a comma "
                  "separated list of ratio names")
    _setting(parser, '--z-threshold', type=float,
             help='Drop rows with any |z| above this before fitting')


def _add_worker_option(parser):
    _setting(parser, '--workers', type=int,
             help='Threads used to read and measure masks')


# Define the parser
def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='bodyshape',
        description='Classify body shape from person-silhouette masks',
    )
    parser.add_argument('--config', default=None,
                        help='YAML or JSON file of RunConfig settings')
    _setting(parser, '--seed', type=int, help='Seed of every random stream')
    _setting(parser, '--out', dest='out_dir',
             help='Directory that receives the output files')
    _setting(parser, '--stamp', action='store_const', const=True,
             help='Add a generation timestamp to report JSON')
    parser.add_argument('--quiet', action='store_true', default=False,
                        help='Only print warnings and errors')
    parser.add_argument('--debug', action='store_true', default=False,
                        help='Print debug messages')
    parser.add_argument('--log-dir', default=None,
                        help='Also write a rotating debug log here')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    gen = sub.add_parser('gen', help='Generate a synthetic mask corpus')
    _setting(gen, '--counts',
             help='Comma separated masks per class, in class order')
    _setting(gen, '--n-per-class', type=int,
             help='Masks per class when --counts is not given')
    _setting(gen, '--augment-to', type=int,
             help='Top every class up to N masks by rotation and flips')
    _setting(gen, '--canvas-width', type=int)
    _setting(gen, '--canvas-height', type=int)
    _setting(gen, '--noise-sigma', type=float,
             help='Standard deviation of the contour noise in pixels')

    measure = sub.add_parser('measure', help='Measure every mask of a '
                                             'manifest')
    measure.add_argument('inputs', nargs=1, metavar='manifest')
    _add_worker_option(measure)

    classify = sub.add_parser('classify', help='Predict labels with one '
                                               'method')
    classify.add_argument('inputs', nargs=1, metavar='source',
                          help='Measurement table, or a manifest for the '
                               'image networks')
    _setting(classify, '--method', choices=METHODS)
    classify.add_argument('--model', default=None,
                          help='Fitted model or checkpoint file')
    classify.add_argument('--stats', default=None,
                          help='Population statistics for the drop rules')
    _add_ratio_options(classify)
    _setting(classify, '--preprocess', choices=PREPROCESS_MODES)
    _add_worker_option(classify)

    train = sub.add_parser('train', help='Train a classifier')
    train.add_argument('inputs', nargs=1, metavar='source',
                       help='Measurement table, or a manifest for the image '
                            'networks')
    _setting(train, '--arch', choices=TRAIN_ARCHS)
    _setting(train, '--epochs', type=int)
    _setting(train, '--lr', type=float, help='Learning rate')
    _setting(train, '--momentum', type=float)
    _setting(train, '--batch-size', type=int)
    _setting(train, '--val-fraction', type=float,
             help='Share of each class held out for validation')
    _setting(train, '--freeze',
             help="'none', 'all', 'first:N', 'last:N' or 'indices:i,j'")
    _setting(train, '--preprocess', choices=PREPROCESS_MODES)
    train.add_argument('--plot', nargs='?', const='', default=None,
                       help='Write the loss curves as a PNG, by default '
                            'curves.png in the output directory')
    _add_ratio_options(train)
    _add_worker_option(train)

    cluster = sub.add_parser('cluster', help='Cluster a measurement table')
    cluster.add_argument('inputs', nargs=1, metavar='measurements')
    _setting(cluster, '--k', type=int, help='Number of k-means clusters')
    _setting(cluster, '--select-k',
             help='Choose k in a range such as 2..8')
    _setting(cluster, '--criterion', choices=CRITERIA)
    _setting(cluster, '--fuzzy', action='store_const', const=True,
             help='Fuzzy c-means instead of k-means')
    _setting(cluster, '--c', type=int, help='Number of fuzzy clusters')
    _setting(cluster, '--fuzzifier', type=float)
    _setting(cluster, '--pca', type=float,
             help='Variance fraction below 1, or a component count')
    _add_ratio_options(cluster)

    evaluate = sub.add_parser('eval', help='Report on prediction files')
    evaluate.add_argument('inputs', nargs='+', metavar='predictions')
    evaluate.add_argument('--names', default=None,
                          help='Comma separated model names, one per file')
    return parser


parser = get_parser()

# Append to module docs
__doc__ += '\n::\n\n    ' + parser.format_help().replace('\n', '\n    ')


@dataclasses.dataclass
class BodyShapeArgs:
    command: Optional[str] = None
    config: Optional[str] = None
    quiet: bool = False
    debug: bool = False
    log_dir: Optional[str] = None
    inputs: Sequence[str] = ()
    model: Optional[str] = None
    stats: Optional[str] = None
    plot: Optional[str] = None
    names: Optional[str] = None


def get_overrides(args: argparse.Namespace) -> dict:
    """The `RunConfig` settings given explicitly on the command line."""
    return {key: value for key, value in vars(args).items()
            if key not in _ARG_FIELDS}


def run_command(args: BodyShapeArgs, config) -> dict:
    """Dispatch to the ``cmd_*`` function of ``args.command``."""
    source = args.inputs[0] if args.inputs else None
    if args.command == 'gen':
        return commands.cmd_gen(config)
    if args.command == 'measure':
        return commands.cmd_measure(config, source)
    if args.command == 'classify':
        return commands.cmd_classify(config, source, model=args.model,
                                     stats=args.stats)
    if args.command == 'train':
        return commands.cmd_train(config, source, plot=args.plot)
    if args.command == 'cluster':
        return commands.cmd_cluster(config, source)
    if args.command == 'eval':
        names = None
        if args.names is not None:
            names = [n.strip() for n in args.names.split(',')]
        return commands.cmd_eval(config, args.inputs, names=names)
    raise ConfigError(f'unknown command {args.command!r}')


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Do the full ``bodyshape`` command sequence.

    Parses the user's cli arguments, sets up logging, merges the
    configuration and runs the subcommand.

    Returns
    -------
    status : int
        The process exit code.
    """
    # Parse the user's arguments
    args = parser.parse_args(argv, namespace=BodyShapeArgs())

    # Set up logging first
    configure_log_directory(args.log_dir)
    setup_logging(args.command)
    set_verbosity(quiet=args.quiet, debug=args.debug)

    logger.debug('cli starting with args %s', args)
    try:
        config = load_conf(load(args.config), get_overrides(args))
    except ConfigError as exc:
        logger.error('Bad configuration: %s', exc)
        return EXIT_USAGE
    except OSError as exc:
        logger.error('Could not read configuration: %s', exc)
        return EXIT_USAGE

    try:
        run_command(args, config)
    except (BodyShapeError, OSError) as exc:
        logger.error('%s failed: %s', args.command, exc)
        logger.debug('%s failed', args.command, exc_info=True)
        return EXIT_FAILURE
    return EXIT_OK

