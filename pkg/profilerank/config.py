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

"""Module with the experiment configuration (TOML file plus overrides)."""

import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Optional, Tuple

from profilerank.base import ParameterError
from profilerank.embed import EmbedTrainConfig
from profilerank.evaluation import GAINS
from profilerank.io_utils import is_url, fetch
from profilerank.ltr import DEFAULT_GRID, LEARNERS, N_FOLDS
from profilerank.profile import ProfileConfig
from profilerank.retrieval import RetrievalParams
from profilerank.synth import SynthConfig
from profilerank.textprep import AnalyzerConfig, load_stopwords

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.config').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.config')

LEVELS = ('raw', 'stop', 'stem')


@dataclass(frozen=True)
class PathsConfig:
    """Input files and the output directory."""

    corpus: Optional[str] = None
    topics: Optional[str] = None
    qrels: Optional[str] = None
    vectors: Optional[str] = None
    output: str = 'output'
    cache_dir: Optional[str] = None


@dataclass(frozen=True)
class AnalyzerSettings:
    """Preprocessing level and options; `stopwords` is a path or URL."""

    level: str = 'stem'
    extract_multiword: bool = True
    min_token_len: int = 1
    max_ngram: int = 3
    stopwords: Optional[str] = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ParameterError(f'Unknown preprocessing level `{self.level}`. '
                                 f'Expected one of {list(LEVELS)}.')

    def build(self, cache_dir=None):
        """
        Materialize the analyzer.

        :rtype: AnalyzerConfig
        """
        kwargs = {'min_token_len': self.min_token_len,
                  'max_ngram': self.max_ngram}
        if self.stopwords:
            source = self.stopwords
            if is_url(source):
                source = fetch(source, cache_dir)
            kwargs['stopword_list'] = load_stopwords(source)
        return AnalyzerConfig.preset(self.level, self.extract_multiword,
                                     **kwargs)


@dataclass(frozen=True)
class RetrievalSettings:
    """Query-likelihood smoothing, depth and lambda sweep."""

    jm_lambda: float = 0.6
    k: int = 1000
    sweep: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'sweep', tuple(self.sweep))
        self.params()

    def params(self):
        """Retrieval parameters for the baseline run."""
        return RetrievalParams(self.jm_lambda, self.k)


@dataclass(frozen=True)
class ProfileSettings:
    """Similarity threshold, expansion size and thresholds to sweep."""

    threshold: float = 0.5
    expansion_n: int = 10
    sweep: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'sweep', tuple(self.sweep))
        for value in self.thresholds:
            ProfileConfig(value, self.expansion_n)

    @property
    def thresholds(self):
        """Thresholds the experiment runs, the main one first."""
        rest = [value for value in self.sweep if value != self.threshold]
        return (self.threshold,) + tuple(rest)

    def config(self, threshold=None):
        """Profile construction settings at a threshold."""
        return ProfileConfig(self.threshold if threshold is None else threshold,
                             self.expansion_n)


@dataclass(frozen=True)
class LearnerSettings:
    """Enabled learners, ensemble size and cross-validation folds."""

    enabled: Tuple[str, ...] = LEARNERS
    n_estimators: int = 100
    n_folds: int = N_FOLDS
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'enabled', tuple(self.enabled))
        unknown = [name for name in self.enabled if name not in LEARNERS]
        if unknown:
            raise ParameterError(f'Unknown learners {unknown}. Expected some '
                                 f'of {list(LEARNERS)}.')
        if self.n_estimators < 0:
            raise ParameterError('n_estimators must be >= 0.')
        if self.n_folds < 3:
            raise ParameterError('n_folds must be >= 3 (train, tune, test).')


@dataclass(frozen=True)
class EvalSettings:
    """Gain, cutoff and topic handling of the evaluation."""

    gain: str = 'linear'
    k: int = 1000
    exclude_unjudged_topics: bool = False
    alpha: float = 0.01

    def __post_init__(self):
        if self.gain not in GAINS:
            raise ParameterError(f'Unknown gain `{self.gain}`. Expected one '
                                 f'of {list(GAINS)}.')
        if self.k < 1:
            raise ParameterError('k must be >= 1.')
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError('alpha must be in (0, 1).')


_SECTIONS = {'paths': PathsConfig,
             'analyzer': AnalyzerSettings,
             'retrieval': RetrievalSettings,
             'embed': EmbedTrainConfig,
             'profile': ProfileSettings,
             'learners': LearnerSettings,
             'eval': EvalSettings,
             'synth': SynthConfig}


def _section(cls, values, name):
    known = {item.name for item in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ParameterError(f'Unknown keys in [{name}]: {unknown}.')
    try:
        return cls(**values)
    except TypeError as error:
        raise ParameterError(f'Bad value in [{name}]: {error}') from None


@dataclass(frozen=True)
class ExperimentConfig:
    """All settings of one pipeline run."""

    paths: PathsConfig = field(default_factory=PathsConfig)
    analyzer: AnalyzerSettings = field(default_factory=AnalyzerSettings)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    embed: EmbedTrainConfig = field(default_factory=EmbedTrainConfig)
    profile: ProfileSettings = field(default_factory=ProfileSettings)
    learners: LearnerSettings = field(default_factory=LearnerSettings)
    grid: Dict[str, tuple] = field(default_factory=lambda: dict(DEFAULT_GRID))
    eval: EvalSettings = field(default_factory=EvalSettings)
    synth: SynthConfig = field(default_factory=SynthConfig)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise ParameterError('jobs must be >= 1.')
        object.__setattr__(self, 'grid', {key: tuple(values)
                                          for key, values in self.grid.items()})

    @classmethod
    def from_dict(cls, data):
        """
        Build from nested dicts as read from TOML.

        :raises ParameterError: Unknown section or key, invalid value.
        """
        data = dict(data)
        kwargs = {}
        for name, section in _SECTIONS.items():
            if name in data:
                kwargs[name] = _section(section, data.pop(name), name)
        if 'grid' in data:
            grid = data.pop('grid')
            for key, values in grid.items():
                if not isinstance(values, (list, tuple)) or not values:
                    raise ParameterError(f'[grid] {key} must be a nonempty '
                                         f'array.')
            kwargs['grid'] = grid
        for name in ('seed', 'jobs'):
            if name in data:
                kwargs[name] = data.pop(name)
        if data:
            raise ParameterError(f'Unknown configuration keys '
                                 f'{sorted(data)}.')
        return cls(**kwargs)

    def to_dict(self):
        """Nested plain dict, as recorded in the manifest."""
        data = asdict(self)
        data['grid'] = {key: list(values) for key, values in self.grid.items()}
        return data

    def with_overrides(self, overrides):
        """
        Apply ``section.key=value`` assignments.

        Values are parsed as TOML scalars or arrays; anything else is taken
        as a plain string.

        :param list overrides: Assignment strings.
        :rtype: ExperimentConfig
        """
        data = self.to_dict()
        for item in overrides:
            key, sep, raw = item.partition('=')
            if not sep or not key.strip():
                raise ParameterError(f'Override `{item}` is not key=value.')
            target = data
            parts = key.strip().split('.')
            for part in parts[:-1]:
                target = target.setdefault(part, {})
                if not isinstance(target, dict):
                    raise ParameterError(f'`{key}` is not a section key.')
            target[parts[-1]] = parse_value(raw.strip())
            LOG.debug('Override %s = %r', key, target[parts[-1]])
        return ExperimentConfig.from_dict(data)


def parse_value(raw):
    """TOML scalar or array, else the raw string."""
    try:
        return tomllib.loads(f'value = {raw}')['value']
    except tomllib.TOMLDecodeError:
        return raw


def load_config(path=None, overrides=()):
    """
    Read a TOML configuration file and apply overrides.

    :param str path: (optional) TOML file. Default: built-in defaults.
    :param list overrides: (optional) ``section.key=value`` strings.
    :rtype: ExperimentConfig
    :raises ParameterError: Unreadable TOML or invalid settings.
    """
    config = ExperimentConfig()
    if path:
        try:
            with open(path, 'rb') as fd:
                data = tomllib.load(fd)
        except tomllib.TOMLDecodeError as error:
            raise ParameterError(f'Cannot parse "{path}": {error}') from None
        config = ExperimentConfig.from_dict(data)
        LOG.info('Configuration loaded. Filename = "%s"', path)
    if overrides:
        config = config.with_overrides(overrides)
    return config
