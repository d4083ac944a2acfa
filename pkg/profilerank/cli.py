#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#   (C) Copyright 2021 profilerank contributors
#
#   Licensed under the Apache License, Version 2.0 (the "License"); you may
#   not use this file except in compliance with the License. You may obtain
#   a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#   WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#   License for the specific language governing permissions and limitations
#   under the License.

"""Command line interface: one subcommand per pipeline stage."""

import argparse
import logging
import sys
from dataclasses import replace
from os.path import join

from profilerank import __version__
from profilerank.base import (ArtifactError, DataError, OutOfVocabularyError,
                              ParameterError)
from profilerank.config import load_config
from profilerank import experiment
from profilerank.ltr import LEARNERS
from profilerank.profile import THRESHOLDS
from profilerank.synth import generate, write_dataset

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.cli').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.cli')

LOG_FORMAT = ('[%(asctime)s] %(levelname)-8s %(filename)-12s:%(lineno)-3d '
              '%(message)s')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Command line could not be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(parser):
    parser.add_argument('--config', metavar='FILE',
                        help='TOML configuration file')
    parser.add_argument('--set', dest='overrides', action='append',
                        default=[], metavar='SECTION.KEY=VALUE',
                        help='override one configuration value (repeatable)')
    parser.add_argument('--output', metavar='DIR',
                        help='output directory (paths.output)')
    parser.add_argument('--seed', type=int, help='random seed')
    parser.add_argument('--jobs', type=int, help='worker processes')
    parser.add_argument('--log-level', default='WARNING',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR',
                                 'CRITICAL'),
                        help='logging level (default: %(default)s)')
    parser.add_argument('--log-file', metavar='FILE',
                        help='write log records to FILE instead of stderr')


def _threshold(parser):
    parser.add_argument('--threshold', type=float,
                        help='similarity threshold of the artifacts '
                             '(default: profile.threshold)')


def build_parser():
    """Argument parser with all subcommands."""
    parser = _Parser(prog='profilerank',
                     description='Personalized academic search: baseline '
                                 'retrieval re-ranked with author-topic '
                                 'profile graph features.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND',
                                     parser_class=_Parser)
    commands.required = True

    command = commands.add_parser('synth', help='generate a synthetic '
                                                'collection')
    _common(command)
    command.add_argument('--data-dir', metavar='DIR',
                         help='destination (default: <output>/data)')

    for name, text in (('index', 'index the corpus'),
                       ('retrieve', 'baseline run for all topics'),
                       ('embed', 'load or train term embeddings')):
        _common(commands.add_parser(name, help=text))

    command = commands.add_parser('profile', help='build author-topic graphs')
    _common(command)
    _threshold(command)
    command.add_argument('--dot', action='store_true',
                         help='also write Graphviz DOT files')

    command = commands.add_parser('features', help='extract feature rows')
    _common(command)
    _threshold(command)

    command = commands.add_parser('train', help='fit a re-ranking model on '
                                                'all topics')
    _common(command)
    _threshold(command)
    command.add_argument('learner', choices=LEARNERS)

    command = commands.add_parser('rerank', help='re-rank with a stored model')
    _common(command)
    _threshold(command)
    command.add_argument('learner', choices=LEARNERS)
    command.add_argument('--model', metavar='FILE',
                         help='model file (default: model.<learner>.json)')

    command = commands.add_parser('evaluate', help='evaluate stored runs')
    _common(command)
    _threshold(command)
    command.add_argument('--runs', nargs='+', metavar='NAME',
                         help='re-ranked runs to evaluate (default: enabled '
                              'learners with a run file)')

    command = commands.add_parser('experiment', help='full cross-validated '
                                                     'experiment')
    _common(command)
    command.add_argument('--sweep-thresholds', action='store_true',
                         help='also run similarity thresholds '
                              f'{", ".join(map(str, THRESHOLDS))}')
    command.add_argument('--synth', action='store_true',
                         help='generate a synthetic collection into '
                              '<output>/data and use it')
    return parser


def setup_logging(level, filename=None):
    """Install the only log handler of the process."""
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT,
                        filename=filename)


def _config(args):
    overrides = list(args.overrides)
    for flag, key in (('output', 'paths.output'), ('seed', 'seed'),
                      ('jobs', 'jobs')):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f'{key}={value!r}' if flag == 'output'
                             else f'{key}={value}')
    if getattr(args, 'sweep_thresholds', False):
        overrides.append(f'profile.sweep={list(THRESHOLDS)!r}')
    config = load_config(args.config, [])
    if overrides:
        config = config.with_overrides(overrides)
    return config


def _synth_paths(config, data_dir=None):
    data_dir = data_dir or join(config.paths.output, 'data')
    dataset = generate(replace(config.synth, seed=config.seed))
    paths = write_dataset(dataset, data_dir)
    return replace(config, paths=replace(config.paths, **paths))


def run_command(args):
    """Dispatch a parsed command line."""
    config = _config(args)
    command = args.command
    if command == 'synth':
        _synth_paths(config, args.data_dir)
        return EXIT_OK
    if command == 'experiment':
        if args.synth:
            config = _synth_paths(config)
        reports = experiment.run_experiment(config)
        for report in reports:
            LOG.info('%s: %s', report.name, report.means)
        return EXIT_OK

    workspace = experiment.Workspace(config, getattr(args, 'threshold', None))
    if command == 'index':
        experiment.stage_index(workspace)
    elif command == 'retrieve':
        experiment.stage_retrieve(workspace)
    elif command == 'embed':
        experiment.stage_embed(workspace)
    elif command == 'profile':
        experiment.stage_profile(workspace, args.dot)
    elif command == 'features':
        experiment.stage_features(workspace)
    elif command == 'train':
        experiment.stage_train(workspace, args.learner)
    elif command == 'rerank':
        experiment.stage_rerank(workspace, args.learner, args.model)
    elif command == 'evaluate':
        experiment.stage_evaluate(workspace, args.runs)
    return EXIT_OK


def main(argv=None):
    """
    Entry point of the ``profilerank`` command.

    :rtype: int
    :return: 0 success, 1 usage error, 2 data error, 3 internal error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        sys.stderr.write(f'profilerank: error: {error}\n')
        return EXIT_USAGE
    except SystemExit as error:
        return error.code or EXIT_OK

    setup_logging(args.log_level, args.log_file)
    try:
        return run_command(args)
    except ParameterError as error:
        LOG.fatal('Invalid parameter: %s', error)
        sys.stderr.write(f'profilerank: error: {error}\n')
        return EXIT_USAGE
    except (DataError, ArtifactError, OutOfVocabularyError, OSError) as error:
        LOG.fatal('Stage `%s` failed: %s', args.command, error)
        sys.stderr.write(f'profilerank: error: {error}\n')
        return EXIT_DATA
    except Exception as error:
        LOG.exception('Internal error in stage `%s`', args.command)
        sys.stderr.write(f'profilerank: internal error: {error!r}\n')
        return EXIT_INTERNAL
