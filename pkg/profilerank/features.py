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

"""Module with candidate overlays and re-ranking features."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Tuple

import networkx as nx
import numpy as np
from scipy import sparse
from sklearn.preprocessing import StandardScaler

from profilerank.base import tracer, DataError, ParameterError
from profilerank.profile import (DOCUMENT, IS_IN, SIMILAR_TO, TERM,
                                 ProfileGraph, term_node_id)
from profilerank.textprep import analyze

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.features').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.features')

FEATURE_NAMES = ('baseline_score',
                 'absolute_degree',
                 'relative_degree',
                 'sum_relation_weight',
                 'max_relation_weight',
                 'avg_relation_weight',
                 'sum_term_weight',
                 'max_term_weight',
                 'avg_term_weight',
                 'pagerank')
N_FEATURES = len(FEATURE_NAMES)
MAX_CANDIDATE_TERMS = 200

DAMPING = 0.85
TOLERANCE = 1e-8
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class CandidateDoc:
    """
    Retrieved document truncated to its first unit terms.

    ``units`` holds at most 200 unit terms, ``multiword`` the multiword
    terms found inside that window.
    """

    doc_id: str
    units: Tuple[str, ...] = ()
    multiword: Tuple[str, ...] = ()
    baseline_score: float = 0.0

    def __post_init__(self):
        if len(self.units) > MAX_CANDIDATE_TERMS:
            raise ParameterError(f'Candidate `{self.doc_id}` holds more than '
                                 f'{MAX_CANDIDATE_TERMS} terms.')

    @property
    def terms(self):
        """Unit terms followed by multiword terms."""
        return self.units + self.multiword

    @property
    def unique_terms(self):
        """Number of distinct terms."""
        return len(set(self.terms))

    @property
    def counts(self):
        """Term -> frequency in the candidate."""
        return Counter(self.terms)


def make_candidate(record, analyzer, baseline_score=0.0,
                   max_terms=MAX_CANDIDATE_TERMS):
    """
    Analyze a corpus document into a candidate.

    :param DocumentRecord record: Document title and body.
    :param AnalyzerConfig analyzer: Shared analyzer (the index one).
    :param float baseline_score: (optional) First-stage score.
    :param int max_terms: (optional) Unit-term window.
    :rtype: CandidateDoc
    """
    sequence = analyze(record.text, analyzer, max_units=max_terms)
    return CandidateDoc(record.doc_id, sequence.units, sequence.multiword,
                        float(baseline_score))


def candidate_node_id(doc_id):
    """Graph node id of a candidate document."""
    return f'candidate:{doc_id}'


@dataclass
class CandidateOverlay:
    """
    A candidate document laid over a read-only profile graph.

    Holds the candidate node and its incoming ``is_in`` edges only; the base
    graph is never modified.
    """

    base: ProfileGraph
    doc: CandidateDoc
    edges: Tuple[Tuple[str, float], ...] = field(default_factory=tuple)

    @property
    def node(self):
        """Candidate node id."""
        return candidate_node_id(self.doc.doc_id)

    @property
    def weights(self):
        """Incoming edge weights in edge order."""
        return [weight for _, weight in self.edges]

    def to_graph(self):
        """Materialize base graph plus candidate as a new DiGraph."""
        graph = self.base.graph.copy()
        graph.add_node(self.node, type=DOCUMENT, doc_id=self.doc.doc_id)
        for source, weight in self.edges:
            graph.add_edge(source, self.node, type=IS_IN, weight=weight)
        return graph


def attach_candidate(graph, doc, index):
    """
    Connect a candidate to every profile term it contains.

    Edge weight is tf in the truncated candidate times corpus idf. Words
    outside the profile create nothing.

    :param ProfileGraph graph: Profile of the topic.
    :param CandidateDoc doc: Candidate.
    :param InvertedIndex index: Collection for idf.
    :rtype: CandidateOverlay
    """
    counts = doc.counts
    edges = []
    for word in sorted(counts):
        if graph.has_term(word):
            edges.append((term_node_id(word), counts[word] * index.idf(word)))
    return CandidateOverlay(graph, doc, tuple(edges))


def degree_features(overlay):
    """(absolute degree, degree / unique terms)."""
    degree = len(overlay.edges)
    unique = overlay.doc.unique_terms
    return float(degree), (degree / unique if unique else 0.0)


def _sum_max_avg(values):
    if not values:
        return 0.0, 0.0, 0.0
    total = float(sum(values))
    return total, float(max(values)), total / len(values)


def relation_weight_features(overlay):
    """Sum, max and mean of incoming tf-idf edge weights."""
    return _sum_max_avg(overlay.weights)


def term_weight_features(overlay):
    """Sum, max and mean KL weight of the connected term nodes."""
    nodes = overlay.base.graph.nodes
    return _sum_max_avg([nodes[source]['kldiv']
                         for source, _ in overlay.edges])


def weighted_pagerank(matrix, damping=DAMPING, tol=TOLERANCE,
                      max_iter=MAX_ITERATIONS):
    """
    Weighted PageRank by power iteration.

    Rows are normalized by their out-weight; nodes without positive
    out-weight spread their mass uniformly. Iterates until the L1 change
    drops below `tol` or `max_iter` steps.

    :param matrix: Square nonnegative weight matrix, entry (i, j) for i -> j.
    :type matrix: scipy.sparse.spmatrix or numpy.ndarray
    :rtype: numpy.ndarray
    """
    matrix = sparse.csr_matrix(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0)

    out = np.asarray(matrix.sum(axis=1)).ravel()
    dangling = out <= 0
    scale = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out))
    transition_t = (sparse.diags(scale) @ matrix).T.tocsr()

    rank = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        previous = rank
        rank = damping * (transition_t @ previous
                          + previous[dangling].sum() / n) \
            + (1.0 - damping) / n
        if np.abs(rank - previous).sum() < tol:
            break
    return rank


class PageRankBase:
    """
    Sparse weight matrix of the term and document nodes of one profile.

    Built once per topic; every candidate appends one column.
    """

    def __init__(self, graph):
        """Index the term and document nodes of a profile graph."""
        self.nodes = [node for node, data in graph.graph.nodes(data=True)
                      if data['type'] in (TERM, DOCUMENT)]
        self.nodes.sort()
        self.position = {node: i for i, node in enumerate(self.nodes)}
        rows, cols, values = [], [], []
        for src, dst, data in graph.graph.edges(data=True):
            if data['type'] not in (IS_IN, SIMILAR_TO):
                continue
            rows.append(self.position[src])
            cols.append(self.position[dst])
            values.append(data['weight'])
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)

    def with_candidate(self, overlay):
        """Weight matrix including the candidate as the last node."""
        n = len(self.nodes) + 1
        extra_rows = [self.position[source] for source, _ in overlay.edges]
        rows = np.concatenate([self.rows, np.asarray(extra_rows,
                                                     dtype=np.int64)])
        cols = np.concatenate([self.cols,
                               np.full(len(extra_rows), n - 1,
                                       dtype=np.int64)])
        values = np.concatenate([self.values, np.asarray(overlay.weights,
                                                         dtype=np.float64)])
        return sparse.csr_matrix((values, (rows, cols)), shape=(n, n))


def pagerank_feature(overlay, base=None):
    """
    PageRank of the candidate node on the overlay graph.

    :param CandidateOverlay overlay: Attached candidate.
    :param PageRankBase base: (optional) Precomputed profile matrix.
    :rtype: float
    """
    if base is None:
        base = PageRankBase(overlay.base)
    return float(weighted_pagerank(base.with_candidate(overlay))[-1])


def pagerank_scores(graph):
    """node -> PageRank over term and document nodes of a DiGraph."""
    nodes = sorted(node for node, data in graph.nodes(data=True)
                   if data['type'] in (TERM, DOCUMENT))
    weighted = nx.DiGraph()
    weighted.add_nodes_from(nodes)
    weighted.add_weighted_edges_from(
        (u, v, data['weight']) for u, v, data in graph.edges(data=True)
        if data['type'] in (IS_IN, SIMILAR_TO))
    matrix = nx.to_scipy_sparse_array(weighted, nodelist=nodes,
                                      weight='weight')
    return dict(zip(nodes, weighted_pagerank(matrix)))


def feature_vector(overlay, base=None):
    """All ten raw features of one attached candidate."""
    f2, f3 = degree_features(overlay)
    f4, f5, f6 = relation_weight_features(overlay)
    f7, f8, f9 = term_weight_features(overlay)
    f10 = pagerank_feature(overlay, base)
    return [overlay.doc.baseline_score, f2, f3, f4, f5, f6, f7, f8, f9, f10]


@dataclass
class TopicFeatures:
    """Raw feature rows of one topic, aligned with ``doc_ids``."""

    topic_id: str
    doc_ids: Tuple[str, ...]
    matrix: np.ndarray
    grades: Optional[np.ndarray] = None
    author_id: Optional[str] = None

    def __post_init__(self):
        self.doc_ids = tuple(self.doc_ids)
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(
            len(self.doc_ids), N_FEATURES)
        if self.grades is not None:
            self.grades = np.asarray(self.grades, dtype=np.float64)

    def __len__(self):
        return len(self.doc_ids)

    @property
    def baseline_scores(self):
        """First column: the query-likelihood score."""
        return self.matrix[:, 0]

    def with_grades(self, qrels):
        """Copy with graded labels; unjudged candidates get 0."""
        grades = [qrels.grade(self.topic_id, doc) or 0 for doc in self.doc_ids]
        return TopicFeatures(self.topic_id, self.doc_ids, self.matrix,
                             np.asarray(grades), self.author_id)


@tracer
def extract_all(graph, candidates, run, index):
    """
    Feature matrix of the candidates of one topic.

    :param ProfileGraph graph: Profile of the topic.
    :param list candidates: CandidateDoc items.
    :param list run: Baseline ScoredDoc items of the topic.
    :param InvertedIndex index: Collection for idf.
    :rtype: TopicFeatures
    :raises DataError: A candidate is missing from the run.
    """
    scores = {item.doc_id: item.score for item in run}
    base = PageRankBase(graph)
    rows = []
    for doc in candidates:
        if doc.doc_id not in scores:
            LOG.error('Candidate %s is not in the baseline run of topic %s',
                      doc.doc_id, graph.topic_id)
            raise DataError(f'Candidate `{doc.doc_id}` is missing from the '
                            f'baseline run.')
        if doc.baseline_score != scores[doc.doc_id]:
            doc = CandidateDoc(doc.doc_id, doc.units, doc.multiword,
                               scores[doc.doc_id])
        rows.append(feature_vector(attach_candidate(graph, doc, index), base))
    LOG.debug('Topic %s: %d feature rows', graph.topic_id, len(rows))
    return TopicFeatures(graph.topic_id, [doc.doc_id for doc in candidates],
                         np.asarray(rows, dtype=np.float64).reshape(
                             len(rows), N_FEATURES))


def standardize_per_topic(matrix):
    """
    z-scores per column with the population standard deviation.

    Constant columns become zeros.

    :param numpy.ndarray matrix: Rows of one topic.
    :rtype: numpy.ndarray
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or not len(matrix):
        raise ParameterError('standardize_per_topic needs at least one row.')
    scaler = StandardScaler()
    scaled = scaler.fit_transform(matrix)
    # StandardScaler keeps scale_ at 1 for columns constant up to rounding.
    flat = (scaler.scale_ == 1.0) & (scaler.var_ != 1.0)
    scaled[:, flat] = 0.0
    return scaled
