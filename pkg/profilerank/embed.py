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

"""Module with term embeddings: skip-gram training, file I/O, neighbors."""

import logging
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np
from gensim.models import KeyedVectors, Word2Vec

from profilerank.base import (tracer, DataError, EmbeddingFormatError,
                              OutOfVocabularyError, ParameterError)
from profilerank.io_utils import open_source

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.embed').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.embed')


def stable_hash(text):
    """Hash used to seed per-word vectors; independent of PYTHONHASHSEED."""
    return zlib.crc32(text.encode('utf-8'))


@dataclass(frozen=True)
class EmbedTrainConfig:
    """Skip-gram with negative sampling settings."""

    dim: int = 320
    window: int = 11
    min_count: int = 5
    negatives: int = 5
    epochs: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ('dim', 'window', 'min_count', 'negatives', 'epochs',
                     'workers'):
            if getattr(self, name) < 1:
                raise ParameterError(f'{name} must be >= 1.')
        if self.alpha <= 0 or self.min_alpha <= 0:
            raise ParameterError('Learning rates must be positive.')


class EmbeddingModel:
    """Vocabulary plus a V x d matrix of term vectors."""

    def __init__(self, terms, vectors):
        """
        :param list terms: Vocabulary in row order.
        :param numpy.ndarray vectors: V x d float matrix.
        :raises DataError: Shape mismatch, duplicates, NaN or Inf entries.
        """
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(terms):
            raise DataError('Vector matrix does not match the vocabulary.')
        if vectors.shape[1] < 1:
            raise DataError('Vector dimension must be >= 1.')
        if not np.all(np.isfinite(vectors)):
            raise DataError('Vectors contain NaN or Inf entries.')

        self.terms = list(terms)
        self.vocabulary = {term: row for row, term in enumerate(self.terms)}
        if len(self.vocabulary) != len(self.terms):
            raise DataError('Duplicate terms in the vocabulary.')
        self.vectors = vectors
        self._terms_array = np.array(self.terms, dtype=str)

        norms = np.linalg.norm(vectors, axis=1)
        self._norms = norms
        safe = np.where(norms > 0.0, norms, 1.0)
        self._unit = vectors / safe[:, None]

    @property
    def dim(self):
        """Vector dimension."""
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.vocabulary

    def __repr__(self):
        return f'<EmbeddingModel(V={len(self)}, d={self.dim})>'

    def vector(self, term):
        """Vector of one term."""
        try:
            return self.vectors[self.vocabulary[term]]
        except KeyError:
            raise OutOfVocabularyError(f'Term `{term}` is not in the '
                                       f'embedding vocabulary.') from None

    def cosine(self, term1, term2):
        """
        Cosine similarity in [-1, 1]; 0 when a vector has zero norm.

        :raises OutOfVocabularyError: Either term is unknown.
        """
        vec1 = self.vector(term1)
        vec2 = self.vector(term2)
        norm1 = self._norms[self.vocabulary[term1]]
        norm2 = self._norms[self.vocabulary[term2]]
        if norm1 == 0.0 or norm2 == 0.0:
            return 0.0
        value = float(np.dot(vec1, vec2) / (norm1 * norm2))
        return max(-1.0, min(1.0, value))

    def most_similar(self, term, n=10):
        """
        The n nearest vocabulary terms by cosine, excluding the term itself.

        Sorted by similarity descending, ties by term. Unknown terms give an
        empty list.

        :rtype: list
        :return: (term, similarity) tuples.
        """
        if n < 1:
            raise ParameterError('n must be >= 1.')
        row = self.vocabulary.get(term)
        if row is None:
            LOG.debug('Term `%s` is OOV, no neighbors', term)
            return []

        if self._norms[row] == 0.0:
            sims = np.zeros(len(self.terms))
        else:
            sims = self._unit @ self._unit[row]
        sims[self._norms == 0.0] = 0.0
        order = np.lexsort((self._terms_array, -sims))
        result = []
        for other in order:
            if other == row:
                continue
            result.append((self.terms[other], float(sims[other])))
            if len(result) == n:
                break
        return result

    @classmethod
    def from_keyed(cls, keyed):
        """Build from gensim ``KeyedVectors``."""
        return cls(list(keyed.index_to_key), keyed.vectors)

    def to_keyed(self):
        """
        Copy into gensim ``KeyedVectors``.

        Each term carries a descending ``count`` attribute so gensim writers
        keep the row order.
        """
        keyed = KeyedVectors(self.dim, dtype=np.float64)
        keyed.add_vectors(self.terms, self.vectors)
        for row, term in enumerate(self.terms):
            keyed.set_vecattr(term, 'count', len(self.terms) - row)
        return keyed

    @tracer
    def save(self, path):
        """Write word2vec text format."""
        self.to_keyed().save_word2vec_format(str(path), binary=False)
        LOG.info('Saved %d vectors. Filename = "%s"', len(self.terms), path)


save_vectors = EmbeddingModel.save


def _locate_format_error(path):
    """
    First malformed line of a word2vec text file.

    :rtype: tuple
    :return: (message, lineno); both None when no bad line is found.
    """
    with open(path, encoding='utf-8', errors='replace') as fd:
        header = fd.readline().split()
        if len(header) != 2 or not all(part.isdigit() for part in header):
            return 'Header must be two integers `V d`.', 1
        size, dim = int(header[0]), int(header[1])
        lineno = 1
        for lineno, line in enumerate(fd, start=2):
            if lineno > size + 1:
                break
            parts = line.rstrip().split(' ')
            if len(parts) != dim + 1:
                return f'Expected {dim} values, got {len(parts) - 1}.', lineno
            try:
                np.asarray(parts[1:], dtype=np.float64)
            except ValueError:
                return 'Non numeric vector value.', lineno
        if lineno < size + 1:
            return (f'Header announces {size} rows, file has '
                    f'{lineno - 1}.'), None
    return None, None


@tracer
def load_vectors(source, cache_dir=None):
    """
    Read vectors in word2vec text format.

    Trailing whitespace on vector lines is accepted, as written by the C
    word2vec tool. Rows beyond the announced count are ignored.

    :param str source: File path or http(s) URL.
    :param str cache_dir: (optional) Download directory for URLs.
    :rtype: EmbeddingModel
    :raises EmbeddingFormatError: Malformed header or row, with line number.
    """
    path = str(open_source(source, cache_dir))
    try:
        keyed = KeyedVectors.load_word2vec_format(path, binary=False,
                                                  encoding='utf-8',
                                                  datatype=np.float64)
    except (ValueError, EOFError) as error:
        message, lineno = _locate_format_error(path)
        raise EmbeddingFormatError(message or str(error), lineno) from None

    LOG.info('Loaded %d vectors of dimension %d from "%s"',
             len(keyed.index_to_key), keyed.vector_size, source)
    return EmbeddingModel.from_keyed(keyed)


@tracer
def train_sgns(corpus, config):
    """
    Train skip-gram embeddings with negative sampling.

    Deterministic for a fixed seed with a single worker.

    :param iterable corpus: TermSequence objects or term lists.
    :param EmbedTrainConfig config: Training settings.
    :rtype: EmbeddingModel
    :raises DataError: Empty corpus or empty vocabulary after filtering.
    """
    sentences = [list(sequence) for sequence in corpus]
    sentences = [sentence for sentence in sentences if sentence]
    if not sentences:
        raise DataError('Cannot train embeddings on an empty corpus.')

    counts = Counter(term for sentence in sentences for term in sentence)
    if not any(count >= config.min_count for count in counts.values()):
        raise DataError(f'No term occurs at least {config.min_count} times.')
    if config.workers > 1:
        LOG.warning('Training with %d workers is not bitwise reproducible',
                    config.workers)

    model = Word2Vec(sentences,
                     vector_size=config.dim,
                     window=config.window,
                     min_count=config.min_count,
                     sg=1,
                     hs=0,
                     negative=config.negatives,
                     sample=0,
                     epochs=config.epochs,
                     alpha=config.alpha,
                     min_alpha=config.min_alpha,
                     seed=config.seed,
                     workers=config.workers,
                     hashfxn=stable_hash)
    keyed = model.wv
    LOG.info('Trained %d vectors on %d sentences', len(keyed.index_to_key),
             len(sentences))
    return EmbeddingModel.from_keyed(keyed)
