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

"""Module with the inverted index and its collection statistics."""

import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

from profilerank.base import (tracer, ArtifactError, DataError, ParameterError,
                              UnknownDocumentError)
from profilerank.textprep import AnalyzerConfig, analyze

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.index').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.index')

INDEX_MAGIC = 'profilerank-index'
INDEX_VERSION = 1

# Floor for document/collection frequency of unseen terms
UNSEEN_FLOOR = 0.5


@dataclass(frozen=True)
class DocumentRecord:
    """One collection document."""

    doc_id: str
    title: str = ''
    body: str = ''

    def __post_init__(self):
        if not self.doc_id:
            raise DataError('Document id must be nonempty.')

    @property
    def text(self):
        """Title and body joined by a line break."""
        return '\n'.join(part for part in (self.title, self.body) if part)


def _analyze_record(config, record):
    return record.doc_id, analyze(record.text, config).terms


class InvertedIndex:
    """
    Immutable inverted index.

    Holds postings (term -> [(doc_id, tf)] sorted by doc_id), document
    frequencies, collection frequencies and document lengths, plus the
    analyzer configuration every query, profile and candidate must share.
    """

    def __init__(self, doc_terms, analyzer):
        """
        Build the index from per-document term counts.

        :param dict doc_terms: doc_id -> Counter of terms, in corpus order.
        :param AnalyzerConfig analyzer: Analyzer used for the documents.
        """
        self.analyzer = analyzer
        self._doc_tf = {doc_id: dict(counts)
                        for doc_id, counts in doc_terms.items()}
        self.doc_len = {doc_id: sum(counts.values())
                        for doc_id, counts in self._doc_tf.items()}

        postings = {}
        for doc_id in sorted(self._doc_tf):
            for term, tf in self._doc_tf[doc_id].items():
                postings.setdefault(term, []).append((doc_id, tf))
        self.postings = {term: postings[term] for term in sorted(postings)}
        self.df = {term: len(plist) for term, plist in self.postings.items()}
        self.cf = {term: sum(tf for _, tf in plist)
                   for term, plist in self.postings.items()}
        self.total_docs = len(self._doc_tf)
        self.collection_len = sum(self.doc_len.values())

    def __repr__(self):
        return (f'<InvertedIndex(N={self.total_docs}, '
                f'|C|={self.collection_len}, V={len(self.postings)})>')

    def __contains__(self, doc_id):
        return doc_id in self._doc_tf

    @property
    def vocabulary(self):
        """Indexed terms, sorted."""
        return list(self.postings)

    @property
    def doc_ids(self):
        """Indexed document ids, sorted."""
        return sorted(self._doc_tf)

    def tf(self, term, doc_id):
        """
        Term frequency in one document.

        :raises UnknownDocumentError: doc_id is not indexed.
        """
        try:
            counts = self._doc_tf[doc_id]
        except KeyError:
            raise UnknownDocumentError(f'Unknown document id `{doc_id}`.') \
                from None
        return counts.get(term, 0)

    def doc_terms(self, doc_id):
        """Term counts of one document."""
        if doc_id not in self._doc_tf:
            raise UnknownDocumentError(f'Unknown document id `{doc_id}`.')
        return dict(self._doc_tf[doc_id])

    def idf(self, term):
        """
        Inverse document frequency ln(N / df).

        Unseen terms use df = 0.5.
        """
        if self.total_docs < 1:
            raise ParameterError('idf is undefined on an empty index.')
        df = self.df.get(term, UNSEEN_FLOOR)
        return math.log(self.total_docs / df)

    def tfidf(self, term, doc_id):
        """tf(term, doc) * idf(term); 0 when the term is absent."""
        tf = self.tf(term, doc_id)
        if not tf:
            return 0.0
        return tf * self.idf(term)

    def background_prob(self, term):
        """
        Collection probability cf / |C|.

        Unseen terms use cf = 0.5.
        """
        if self.collection_len < 1:
            raise ParameterError('Background probability is undefined on an '
                                 'empty collection.')
        return self.cf.get(term, UNSEEN_FLOOR) / self.collection_len

    def to_dict(self):
        """Render the index as a JSON friendly dict."""
        return {'magic': INDEX_MAGIC,
                'version': INDEX_VERSION,
                'analyzer': self.analyzer.to_dict(with_stopwords=True),
                'documents': {doc_id: {term: self._doc_tf[doc_id][term]
                                       for term in sorted(self._doc_tf[doc_id])}
                              for doc_id in sorted(self._doc_tf)}}

    @tracer
    def save(self, path):
        """Persist the index as versioned JSON."""
        with open(path, 'w', encoding='utf-8') as fd:
            json.dump(self.to_dict(), fd, sort_keys=True, separators=(',', ':'))
        LOG.info('Index saved: %s docs, %s terms. Filename = "%s"',
                 self.total_docs, len(self.postings), path)

    @classmethod
    @tracer
    def load(cls, path):
        """
        Load an index written by :meth:`InvertedIndex.save`.

        :raises ArtifactError: Missing file, wrong magic or version.
        """
        try:
            with open(path, encoding='utf-8') as fd:
                data = json.load(fd)
        except FileNotFoundError:
            raise ArtifactError(f'Index file not found: {path}',
                                stage='index') from None
        except ValueError as error:
            raise ArtifactError(f'Cannot decode index file {path}: {error}',
                                stage='index') from None

        if data.get('magic') != INDEX_MAGIC:
            raise ArtifactError(f'Not an index file: {path}', stage='index')
        if data.get('version') != INDEX_VERSION:
            raise ArtifactError(f'Index version {data.get("version")} is not '
                                f'supported (expected {INDEX_VERSION})',
                                stage='index')

        analyzer = AnalyzerConfig.from_dict(data['analyzer'])
        doc_terms = {doc_id: Counter(counts)
                     for doc_id, counts in data['documents'].items()}
        return cls(doc_terms, analyzer)


@tracer
def build_index(corpus, config, jobs=1):
    """
    Build an inverted index.

    :param iterable corpus: DocumentRecord objects with unique ids.
    :param AnalyzerConfig config: Analyzer settings.
    :param int jobs: (optional) Worker processes for document analysis.
        Results are merged in corpus order.
    :rtype: InvertedIndex
    :raises DataError: Duplicate doc_id.
    """
    records = list(corpus)
    seen = set()
    for record in records:
        if record.doc_id in seen:
            LOG.error('Duplicate document id `%s`', record.doc_id)
            raise DataError(f'Duplicate document id `{record.doc_id}`.')
        seen.add(record.doc_id)

    worker = partial(_analyze_record, config)
    if jobs > 1 and len(records) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            analyzed = list(pool.map(worker, records, chunksize=64))
    else:
        analyzed = [worker(record) for record in records]

    doc_terms = {doc_id: Counter(terms) for doc_id, terms in analyzed}
    index = InvertedIndex(doc_terms, config)
    LOG.info('Indexed %s documents, %s tokens, %s terms',
             index.total_docs, index.collection_len, len(index.postings))
    return index
