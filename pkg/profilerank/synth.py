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

"""
Module with the synthetic test collection generator.

Documents are drawn from a mixture of one topic distribution and a
background distribution over made-up words. Topic fields are drawn from the
topic distribution, graded judgments come from thresholding the average
log-likelihood ratio of a document under topic and background.
"""

import itertools
import logging
import os
from dataclasses import asdict, dataclass
from os.path import join
from typing import Optional, Tuple

import numpy as np

from profilerank.base import tracer, DataError, ParameterError
from profilerank.embed import EmbeddingModel
from profilerank.evaluation import Qrels
from profilerank.index import DocumentRecord
from profilerank.io_utils import write_corpus, write_qrels, write_topics
from profilerank.profile import FIELDS, Topic
from profilerank.textprep import smart_stopwords, stem

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.synth').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.synth')

CORPUS_NAME = 'corpus.jsonl'
TOPICS_NAME = 'topics.jsonl'
QRELS_NAME = 'qrels.txt'
VECTORS_NAME = 'vectors.txt'

# Letters that survive Porter stemming in consonant-vowel words
_CONSONANTS = 'bdfgklmnprtvz'
_VOWELS = 'aou'

MIN_TOPIC_WORDS = 20
TOPIC_SHARE = 0.8
FIELD_LENGTH = (10, 40)
QUERY_LENGTH = (3, 10)
MAX_RESAMPLE = 200


@dataclass(frozen=True)
class SynthConfig:
    """Size and shape of a synthetic collection."""

    n_docs: int = 2000
    n_topics: int = 25
    n_authors: int = 8
    vocab_size: int = 3000
    concentration: float = 0.5
    grade_cutoffs: Tuple[float, float, float] = (0.25, 0.75, 1.25)
    doc_length: Tuple[int, int] = (60, 240)
    pool_size: int = 200
    vector_dim: int = 16
    write_vectors: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'grade_cutoffs',
                           tuple(float(c) for c in self.grade_cutoffs))
        object.__setattr__(self, 'doc_length', tuple(self.doc_length))
        for name in ('n_docs', 'n_topics', 'n_authors', 'vocab_size',
                     'pool_size', 'vector_dim'):
            if getattr(self, name) < 1:
                raise ParameterError(f'{name} must be >= 1.')
        if self.n_authors > self.n_topics:
            raise ParameterError('n_authors must not exceed n_topics.')
        if self.concentration <= 0:
            raise ParameterError('concentration must be positive.')
        cutoffs = self.grade_cutoffs
        if len(cutoffs) != 3 or any(a >= b for a, b in zip(cutoffs,
                                                           cutoffs[1:])):
            raise ParameterError('grade_cutoffs must be three strictly '
                                 'increasing values.')
        low, high = self.doc_length
        if not 1 <= low <= high:
            raise ParameterError('doc_length must be (min, max) with '
                                 '1 <= min <= max.')

    def to_dict(self):
        """Plain dict of the settings."""
        return asdict(self)


@dataclass
class SynthDataset:
    """Generated corpus, topics, judgments and optional vectors."""

    corpus: list
    topics: list
    qrels: Qrels
    vectors: Optional[EmbeddingModel] = None


def make_vocabulary(size):
    """
    `size` distinct made-up words, unchanged by stemming and stopping.

    :raises DataError: Not enough words can be formed.
    """
    stopwords = smart_stopwords()
    words = []
    for letters in itertools.product(_CONSONANTS, _VOWELS, _CONSONANTS,
                                     _VOWELS, _CONSONANTS):
        word = ''.join(letters)
        if word in stopwords or stem(word) != word:
            continue
        words.append(word)
        if len(words) == size:
            return words
    raise DataError(f'Cannot form {size} distinct words.')


def _affinity(counts, topic_logp, background_logp):
    """Mean log-likelihood ratio of a document under topic vs background."""
    total = counts.sum()
    return float(counts @ (topic_logp - background_logp) / total)


def _sentences(words, rng):
    """Join words into sentences of 6 to 14 words."""
    parts = []
    start = 0
    while start < len(words):
        stop = start + int(rng.integers(6, 15))
        parts.append(' '.join(words[start:stop]))
        start = stop
    return '. '.join(parts) + '.'


class _Generator:
    def __init__(self, config):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.vocab = np.array(make_vocabulary(config.vocab_size))
        self.position = {word: i for i, word in enumerate(self.vocab)}
        n_topics = config.n_topics
        block = config.vocab_size // (n_topics + 1)
        if block < MIN_TOPIC_WORDS:
            LOG.error('Vocabulary of %d words is too small for %d topics',
                      config.vocab_size, n_topics)
            raise DataError(f'vocab_size {config.vocab_size} is too small for '
                            f'{n_topics} distinct topics (needs at least '
                            f'{MIN_TOPIC_WORDS * (n_topics + 1)}).')

        size = config.vocab_size
        self.background = self.rng.dirichlet(np.full(size,
                                                     config.concentration))
        self.background = 0.5 * self.background + 0.5 / size
        self.blocks = []
        self.topic_dists = []
        for topic in range(n_topics):
            words = np.arange((topic + 1) * block, (topic + 2) * block)
            focus = np.zeros(size)
            focus[words] = self.rng.dirichlet(np.full(block,
                                                      config.concentration))
            focus[words] = 0.5 * focus[words] + 0.5 / block
            self.blocks.append(words)
            self.topic_dists.append(TOPIC_SHARE * focus
                                    + (1.0 - TOPIC_SHARE) * self.background)
        self.background_logp = np.log(self.background)
        self.topic_logp = [np.log(dist) for dist in self.topic_dists]

    def draw_words(self, dist, length):
        """Sample words from a distribution."""
        return self.vocab[self.rng.choice(len(dist), size=length,
                                          p=dist)].tolist()

    def draw_document(self, topic, weight):
        """Title and body words of one document."""
        low, high = self.config.doc_length
        length = int(self.rng.integers(low, high + 1))
        dist = weight * self.topic_dists[topic] \
            + (1.0 - weight) * self.background
        words = self.draw_words(dist, length)
        n_title = min(len(words), int(self.rng.integers(4, 9)))
        return words[:n_title], words[n_title:]

    def counts(self, title, body):
        """Word count vector of a document."""
        counts = np.zeros(len(self.vocab))
        for word in title + body:
            counts[self.position[word]] += 1
        return counts

    def topic_fields(self, topic):
        """Topic fields; the query field holds focus words."""
        fields = {}
        for name in FIELDS[:-1]:
            length = int(self.rng.integers(FIELD_LENGTH[0],
                                           FIELD_LENGTH[1] + 1))
            fields[name] = _sentences(self.draw_words(self.topic_dists[topic],
                                                      length), self.rng)
        focus = self.blocks[topic]
        order = focus[np.argsort(-self.topic_dists[topic][focus],
                                 kind='stable')]
        length = int(self.rng.integers(QUERY_LENGTH[0], QUERY_LENGTH[1] + 1))
        picks = self.rng.choice(order[:3 * QUERY_LENGTH[1]], size=length,
                                replace=False)
        fields['e'] = ' '.join(self.vocab[picks])
        return fields

    def vectors(self):
        """Vectors clustered around one center per topic."""
        dim = self.config.vector_dim
        centers = self.rng.normal(size=(len(self.blocks) + 1, dim))
        owner = np.zeros(len(self.vocab), dtype=np.int64)
        for topic, words in enumerate(self.blocks, start=1):
            owner[words] = topic
        vectors = centers[owner] + 0.35 * self.rng.normal(
            size=(len(self.vocab), dim))
        return EmbeddingModel(self.vocab.tolist(), vectors)


def _assign_authors(n_topics, n_authors, rng):
    authors = [number % n_authors for number in range(n_topics)]
    extra = rng.integers(0, n_authors, size=max(0, n_topics - n_authors))
    authors[n_authors:] = [int(author) for author in extra]
    return [f'A{author + 1:03d}' for author in authors]


@tracer
def generate(config):
    """
    Generate a collection.

    Every topic gets at least one grade-3 document; documents are
    resampled until this holds.

    :param SynthConfig config: Generator settings.
    :rtype: SynthDataset
    :raises DataError: Vocabulary too small, or no grade-3 document could
        be drawn for a topic.
    """
    gen = _Generator(config)
    rng = gen.rng
    n_topics = config.n_topics

    doc_topics = rng.integers(0, n_topics, size=config.n_docs)
    doc_weights = rng.uniform(0.0, 1.0, size=config.n_docs) ** 2
    texts = [gen.draw_document(int(topic), float(weight))
             for topic, weight in zip(doc_topics, doc_weights)]
    counts = [gen.counts(*text) for text in texts]
    affinity = np.array([[_affinity(count, gen.topic_logp[topic],
                                    gen.background_logp)
                          for topic in range(n_topics)] for count in counts])

    top = config.grade_cutoffs[-1]
    protected = set()
    for topic in range(n_topics):
        tries = 0
        while affinity[:, topic].max() < top:
            tries += 1
            if tries > MAX_RESAMPLE:
                raise DataError(f'No grade-3 document for topic {topic + 1} '
                                f'after {MAX_RESAMPLE} draws.')
            free = [doc for doc in range(config.n_docs)
                    if doc not in protected]
            if not free:
                raise DataError('Too few documents for the number of topics.')
            doc = int(rng.choice(free))
            texts[doc] = gen.draw_document(topic, 1.0)
            count = gen.counts(*texts[doc])
            affinity[doc] = [_affinity(count, gen.topic_logp[other],
                                       gen.background_logp)
                             for other in range(n_topics)]
        protected.add(int(np.argmax(affinity[:, topic])))

    corpus = [DocumentRecord(f'D{number + 1:05d}', ' '.join(title),
                             _sentences(body, rng) if body else '')
              for number, (title, body) in enumerate(texts)]

    authors = _assign_authors(n_topics, config.n_authors, rng)
    topics = [Topic(f'T{topic + 1:03d}', authors[topic],
                    gen.topic_fields(topic)) for topic in range(n_topics)]

    qrels = Qrels()
    cutoffs = np.asarray(config.grade_cutoffs)
    for topic in range(n_topics):
        order = np.argsort(-affinity[:, topic], kind='stable')
        # the best document, grade 3, is always judged
        head = max(1, config.pool_size // 2)
        pool = list(order[:head])
        rest = order[head:]
        room = min(len(rest), config.pool_size - len(pool))
        if room:
            pool.extend(rng.choice(rest, size=room, replace=False))
        for doc in sorted(int(doc) for doc in pool):
            grade = int(np.searchsorted(cutoffs, affinity[doc, topic],
                                        side='right'))
            qrels.add(topics[topic].topic_id, corpus[doc].doc_id, grade)

    vectors = gen.vectors() if config.write_vectors else None
    LOG.info('Generated %d documents, %d topics, %d judgments',
             len(corpus), len(topics), len(qrels))
    return SynthDataset(corpus, topics, qrels, vectors)


def write_dataset(dataset, output_dir):
    """
    Write corpus, topics, qrels and vectors into a directory.

    :rtype: dict
    :return: Artifact name -> path.
    """
    os.makedirs(output_dir, exist_ok=True)
    paths = {'corpus': join(output_dir, CORPUS_NAME),
             'topics': join(output_dir, TOPICS_NAME),
             'qrels': join(output_dir, QRELS_NAME)}
    write_corpus(paths['corpus'], dataset.corpus)
    write_topics(paths['topics'], dataset.topics)
    write_qrels(paths['qrels'], dataset.qrels)
    if dataset.vectors is not None:
        paths['vectors'] = join(output_dir, VECTORS_NAME)
        dataset.vectors.save(paths['vectors'])
    return paths
