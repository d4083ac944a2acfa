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

"""Module with text analysis shared by the index, topics and candidates."""

import hashlib
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

from nltk.stem.porter import PorterStemmer

from profilerank.base import ParameterError, DataError

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.textprep').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.textprep')

SMART_STOPWORDS_PATH = Path(__file__).parent / 'data' / 'smart_stopwords.txt'

# Alphanumeric runs (unicode aware, underscore excluded)
_TOKEN = re.compile(r'[^\W_]+')

# Characters that end a phrase; hyphens, apostrophes and slashes do not
_BOUNDARY = re.compile(r'[.,;:!?()\[\]{}"<>|\r\n]')

_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


def load_stopwords(path):
    """
    Load stopword list file.

    :param str|Path path: UTF-8 file, one token per line, `#` comments.
    :rtype: frozenset
    :return: Lowercase stopwords.
    """
    words = set()
    with open(path, encoding='utf-8') as fd:
        for line in fd:
            line = line.split('#', 1)[0].strip().lower()
            if line:
                words.add(line)

    if not words:
        LOG.error('Stopword file is empty. Filename = "%s"', path)
        raise DataError(f'Stopword file is empty: {path}')

    LOG.debug('Loaded %d stopwords from "%s"', len(words), path)
    return frozenset(words)


@lru_cache(maxsize=1)
def smart_stopwords():
    """Return the shipped SMART stopword list."""
    return load_stopwords(SMART_STOPWORDS_PATH)


@dataclass(frozen=True)
class AnalyzerConfig:
    """
    Text analyzer settings.

    The three presets mirror the preprocessing levels a query-likelihood
    baseline is usually compared under: ``raw`` (lowercasing and punctuation
    removal only), ``stop`` (plus stopword removal) and ``stem`` (plus
    Porter stemming).
    """

    stopword_list: FrozenSet[str] = field(default_factory=smart_stopwords)
    stop: bool = True
    stem: bool = True
    min_token_len: int = 1
    extract_multiword: bool = True
    max_ngram: int = 3

    def __post_init__(self):
        """Validate settings."""
        object.__setattr__(self, 'stopword_list', frozenset(self.stopword_list))
        if self.stop and not self.stopword_list:
            raise ParameterError('Stopword list must be nonempty when '
                                 'stopping is enabled.')
        if self.max_ngram not in (2, 3):
            raise ParameterError(f'max_ngram must be 2 or 3, '
                                 f'got {self.max_ngram}.')
        if self.min_token_len < 1:
            raise ParameterError('min_token_len must be >= 1.')

    @classmethod
    def preset(cls, level, extract_multiword=True, **kwargs):
        """
        Build a config for one preprocessing level.

        :param str level: One of 'raw', 'stop', 'stem'.
        :param bool extract_multiword: (optional) Add multiword terms.
        :rtype: AnalyzerConfig
        """
        levels = {'raw': (False, False),
                  'stop': (True, False),
                  'stem': (True, True)}
        if level not in levels:
            raise ParameterError(f'Unknown preprocessing level `{level}`. '
                                 f'Expected one of {sorted(levels)}.')
        stop, stem = levels[level]
        return cls(stop=stop, stem=stem, extract_multiword=extract_multiword,
                   **kwargs)

    def without_multiword(self):
        """Return a copy with multiword extraction disabled."""
        return AnalyzerConfig(stopword_list=self.stopword_list,
                              stop=self.stop,
                              stem=self.stem,
                              min_token_len=self.min_token_len,
                              extract_multiword=False,
                              max_ngram=self.max_ngram)

    @property
    def stopwords_digest(self):
        """SHA-256 of the sorted stopword list."""
        text = '\n'.join(sorted(self.stopword_list))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    def to_dict(self, with_stopwords=False):
        """
        Render settings as a JSON friendly dict.

        :param bool with_stopwords: (optional) Embed the full stopword list
            instead of its digest.
        """
        data = {'stop': self.stop,
                'stem': self.stem,
                'min_token_len': self.min_token_len,
                'extract_multiword': self.extract_multiword,
                'max_ngram': self.max_ngram,
                'stopwords_sha256': self.stopwords_digest}
        if with_stopwords:
            data['stopword_list'] = sorted(self.stopword_list)
        return data

    @classmethod
    def from_dict(cls, data):
        """Inverse of :meth:`AnalyzerConfig.to_dict` (with stopwords)."""
        kwargs = {key: data[key] for key in ('stop', 'stem', 'min_token_len',
                                             'extract_multiword', 'max_ngram')
                  if key in data}
        if 'stopword_list' in data:
            kwargs['stopword_list'] = frozenset(data['stopword_list'])
        return cls(**kwargs)


@dataclass(frozen=True)
class TermSequence:
    """Analyzed text: unit terms in source order, then multiword terms."""

    units: Tuple[str, ...] = ()
    multiword: Tuple[str, ...] = ()

    @property
    def terms(self):
        """All terms, unit terms first."""
        return self.units + self.multiword

    def __iter__(self) -> Iterator[str]:
        return iter(self.terms)

    def __len__(self):
        return len(self.units) + len(self.multiword)

    def __eq__(self, other):
        if isinstance(other, TermSequence):
            return self.terms == other.terms
        if isinstance(other, (list, tuple)):
            return list(self.terms) == list(other)
        return NotImplemented

    def __hash__(self):
        return hash(self.terms)


def tokenize(text):
    """
    Split text on every non-alphanumeric character and lowercase it.

    :param str text: Source text.
    :rtype: list
    :return: Nonempty lowercase tokens.
    """
    return _TOKEN.findall(text.lower())


def remove_stopwords(terms, config):
    """Order-preserving stopword filter."""
    if not config.stop:
        return list(terms)
    stopwords = config.stopword_list
    return [term for term in terms if term not in stopwords]


@lru_cache(maxsize=65536)
def stem(term):
    """
    Porter (1980) stemmer.

    :param str term: Lowercase term.
    :rtype: str
    """
    return _STEMMER.stem(term, to_lowercase=False)


def extract_multiword_terms(tokens, config):
    """
    Collect contiguous n-grams that do not cross a gap.

    :param list tokens: Unit terms in source order. `None` marks a removed
        stopword or a punctuation boundary.
    :param AnalyzerConfig config: Analyzer settings (`max_ngram`).
    :rtype: list
    :return: All 2-grams, then all 3-grams (when `max_ngram` is 3), each
        joined with a single space.
    """
    runs = []
    current = []
    for token in tokens:
        if token is None:
            if current:
                runs.append(current)
            current = []
        else:
            current.append(token)
    if current:
        runs.append(current)

    grams = []
    for size in range(2, config.max_ngram + 1):
        for run in runs:
            for start in range(len(run) - size + 1):
                grams.append(' '.join(run[start:start + size]))
    return grams


def _marked_tokens(text, config):
    """Yield normalized unit terms with `None` at stopwords and boundaries."""
    stopwords = config.stopword_list if config.stop else frozenset()
    for number, phrase in enumerate(_BOUNDARY.split(text)):
        if number:
            yield None
        for token in tokenize(phrase):
            if len(token) < config.min_token_len or token in stopwords:
                yield None
                continue
            yield stem(token) if config.stem else token


def analyze(text, config, max_units=None):
    """
    Run the full analysis pipeline.

    tokenize, remove stopwords, stem (if enabled), append multiword terms
    (if enabled).

    :param str text: Source text.
    :param AnalyzerConfig config: Analyzer settings.
    :param int max_units: (optional) Keep only the first `max_units` unit
        terms; multiword terms are then taken from that window.
    :rtype: TermSequence
    """
    marked: List[Optional[str]] = []
    kept = 0
    for token in _marked_tokens(text, config):
        if token is not None:
            if max_units is not None and kept >= max_units:
                break
            kept += 1
        marked.append(token)

    units = tuple(token for token in marked if token is not None)
    if not config.extract_multiword:
        return TermSequence(units)
    return TermSequence(units, tuple(extract_multiword_terms(marked, config)))


def join_terms(terms: Sequence[str]):
    """Render terms back to analyzable text."""
    return ' '.join(terms)
