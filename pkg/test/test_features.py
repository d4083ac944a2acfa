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

"""Tests for profilerank.features module."""

# pylint: disable=redefined-outer-name
# ^^^ this

import random

import networkx as nx
import numpy as np
import pytest

from profilerank.base import DataError, ParameterError
from profilerank.features import (FEATURE_NAMES, MAX_CANDIDATE_TERMS,
                                  N_FEATURES, CandidateDoc, PageRankBase,
                                  attach_candidate, candidate_node_id,
                                  degree_features, extract_all,
                                  feature_vector, make_candidate,
                                  pagerank_feature, pagerank_scores,
                                  relation_weight_features,
                                  standardize_per_topic,
                                  term_weight_features, weighted_pagerank)
from profilerank.index import DocumentRecord, build_index
from profilerank.profile import (FIELDS, ProfileConfig, ProfileGraph, Topic,
                                 build_profile, doc_node_id, export_graph,
                                 term_node_id)
from profilerank.retrieval import ScoredDoc
from profilerank.textprep import AnalyzerConfig


@pytest.fixture
def raw_index():
    """
    Unanalyzed collection with a few physics words
    """
    analyzer = AnalyzerConfig.preset('raw', extract_multiword=False)
    return build_index([
        DocumentRecord('d1', '', 'optical cavity design'),
        DocumentRecord('d2', '', 'laser cavity'),
        DocumentRecord('d3', '', 'graphene sheets'),
        DocumentRecord('d4', '', 'laser light')], analyzer)


def blank_topic(topic_id='T1'):
    return Topic(topic_id, 'A1', {name: '' for name in FIELDS})


@pytest.fixture
def cavity_graph():
    """
    Four profile terms, one of them multiword
    """
    graph = ProfileGraph.for_topic(blank_topic())
    for word, frequency, kldiv in (('optical', 2, 0.2), ('cavity', 3, 0.4),
                                   ('optical cavity', 1, 0.1),
                                   ('laser', 0, 0.0)):
        graph.add_term(word, frequency, kldiv)
    graph.add_is_in('optical', doc_node_id('e'), 1.0)
    graph.add_is_in('cavity', doc_node_id('e'), 2.0)
    graph.add_is_in('optical cavity', doc_node_id('e'), 0.5)
    graph.add_similar_to('laser', 'cavity', 0.6)
    return graph


@pytest.fixture
def cavity_doc():
    """
    Candidate sharing three terms with the profile
    """
    return CandidateDoc('d1', ('optical', 'cavity', 'cavity', 'design'),
                        ('optical cavity',), baseline_score=-3.5)


def test_feature_names():
    """
    Ten features, baseline score first
    """
    assert N_FEATURES == 10
    assert FEATURE_NAMES[0] == 'baseline_score'
    assert FEATURE_NAMES[-1] == 'pagerank'


def test_attach_candidate(cavity_graph, cavity_doc, raw_index):
    """
    One edge per shared term, weight tf times idf
    """
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    assert overlay.node == candidate_node_id('d1')
    assert overlay.edges == (
        (term_node_id('cavity'), 2 * raw_index.idf('cavity')),
        (term_node_id('optical'), raw_index.idf('optical')),
        (term_node_id('optical cavity'), raw_index.idf('optical cavity')))


def test_attach_keeps_base(cavity_graph, cavity_doc, raw_index):
    """
    The profile graph is not modified
    """
    before = export_graph(cavity_graph)
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    graph = overlay.to_graph()
    assert export_graph(cavity_graph) == before
    assert graph.number_of_nodes() == \
        cavity_graph.graph.number_of_nodes() + 1
    assert graph.in_degree(overlay.node) == 3
    assert graph.out_degree(overlay.node) == 0


def test_attach_no_shared_terms(cavity_graph, raw_index):
    """
    Candidate without profile terms gets no edges and zero features
    """
    doc = CandidateDoc('d3', ('graphene', 'sheets'))
    overlay = attach_candidate(cavity_graph, doc, raw_index)
    assert overlay.edges == ()
    assert degree_features(overlay) == (0.0, 0.0)
    assert relation_weight_features(overlay) == (0.0, 0.0, 0.0)
    assert term_weight_features(overlay) == (0.0, 0.0, 0.0)
    assert pagerank_feature(overlay) > 0.0


def test_attach_oracle(raw_index):
    """
    Edges connect exactly the shared terms
    """
    words = [f'w{number:02d}' for number in range(30)]
    for seed in range(200):
        rng = random.Random(seed)
        graph = ProfileGraph.for_topic(blank_topic())
        profile_words = rng.sample(words, 12)
        for word in profile_words:
            graph.add_term(word, 1, 0.1)
        units = tuple(rng.choice(words) for _ in range(25))
        overlay = attach_candidate(graph, CandidateDoc('x', units), raw_index)
        assert {source for source, _ in overlay.edges} == \
            {term_node_id(word) for word in set(units) & set(profile_words)}
        for source, weight in overlay.edges:
            word = source[len('term:'):]
            assert weight == units.count(word) * raw_index.idf(word)


def test_degree_features(cavity_graph, cavity_doc, raw_index):
    """
    Absolute degree and degree over unique candidate terms
    """
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    assert degree_features(overlay) == (3.0, 0.75)


def test_weight_features(cavity_graph, cavity_doc, raw_index):
    """
    Sum, max and mean of relation and term weights
    """
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    weights = [2 * raw_index.idf('cavity'), raw_index.idf('optical'),
               raw_index.idf('optical cavity')]
    assert relation_weight_features(overlay) == pytest.approx(
        (sum(weights), max(weights), sum(weights) / 3))
    assert term_weight_features(overlay) == pytest.approx(
        (0.7, 0.4, 0.7 / 3))


def test_pagerank_two_nodes():
    """
    Symmetric pair splits the mass
    """
    rank = weighted_pagerank(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert rank == pytest.approx([0.5, 0.5], abs=1e-12)
    assert weighted_pagerank(np.zeros((0, 0))).shape == (0,)
    assert weighted_pagerank(np.zeros((3, 3))) == \
        pytest.approx([1 / 3] * 3, abs=1e-12)


def dense_pagerank(matrix, damping=0.85):
    """
    Closed-form PageRank with uniform dangling mass
    """
    n = len(matrix)
    out = matrix.sum(axis=1)
    transition = np.where(out[:, None] > 0,
                          matrix / np.where(out > 0, out, 1.0)[:, None],
                          1.0 / n)
    system = np.eye(n) - damping * transition.T
    return np.linalg.solve(system, np.full(n, (1.0 - damping) / n))


@pytest.mark.parametrize('seed', range(50))
def test_pagerank_oracle(seed):
    """
    Power iteration matches the closed form
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 31))
    matrix = rng.random((n, n)) * (rng.random((n, n)) < 0.2)
    rank = weighted_pagerank(matrix)
    assert rank.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(rank > 0)
    np.testing.assert_allclose(rank, dense_pagerank(matrix), atol=1e-6)


def dense_power_iteration(matrix, damping=0.85, tol=1e-8, max_iter=200):
    """
    Textbook power iteration on a dense transition matrix
    """
    n = len(matrix)
    out = matrix.sum(axis=1)
    transition = np.where(out[:, None] > 0,
                          matrix / np.where(out > 0, out, 1.0)[:, None],
                          1.0 / n)
    rank = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        previous = rank
        rank = damping * (transition.T @ previous) + (1.0 - damping) / n
        if np.abs(rank - previous).sum() < tol:
            break
    return rank


@pytest.mark.parametrize('seed', range(50))
def test_pagerank_power_iteration_oracle(seed):
    """
    Sparse iteration matches a dense one to 1e-8 on random weighted graphs
    """
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 41))
    matrix = rng.random((n, n)) * (rng.random((n, n)) < 0.25)
    np.testing.assert_allclose(weighted_pagerank(matrix),
                               dense_power_iteration(matrix), rtol=0,
                               atol=1e-8)


def test_pagerank_feature(cavity_graph, cavity_doc, raw_index):
    """
    Candidate column equals PageRank of the materialized overlay
    """
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    base = PageRankBase(cavity_graph)
    value = pagerank_feature(overlay, base)
    assert value == pytest.approx(pagerank_feature(overlay), abs=1e-15)
    scores = pagerank_scores(overlay.to_graph())
    assert value == pytest.approx(scores[overlay.node], abs=1e-9)
    assert sum(scores.values()) == pytest.approx(1.0, abs=1e-9)


def test_pagerank_scores_nodes(cavity_graph):
    """
    Author and topic nodes take no part
    """
    scores = pagerank_scores(cavity_graph.graph)
    assert len(scores) == 4 + len(FIELDS)
    assert not any(node.startswith(('author:', 'topic:')) for node in scores)


def test_pagerank_scores_networkx():
    """
    Graph without dangling nodes agrees with networkx
    """
    graph = nx.DiGraph()
    graph.add_weighted_edges_from([('a', 'b', 1.0), ('b', 'c', 2.0),
                                   ('c', 'a', 1.0), ('c', 'b', 3.0)],
                                  type='is_in')
    for node in graph:
        graph.nodes[node]['type'] = 'term'
    expected = nx.pagerank(graph, alpha=0.85, tol=1e-12)
    got = pagerank_scores(graph)
    for node, value in expected.items():
        assert got[node] == pytest.approx(value, abs=1e-6)


def test_feature_vector(cavity_graph, cavity_doc, raw_index):
    """
    Ten values in feature order
    """
    overlay = attach_candidate(cavity_graph, cavity_doc, raw_index)
    vector = feature_vector(overlay)
    assert len(vector) == N_FEATURES
    assert vector[0] == -3.5
    assert vector[1:3] == [3.0, 0.75]
    assert vector[9] == pagerank_feature(overlay)


def test_extract_all(index, topics, corpus):
    """
    Rows equal per-candidate feature vectors; run scores override
    """
    graph = build_profile(topics[0], index, None, ProfileConfig())
    candidates = [make_candidate(record, index.analyzer)
                  for record in corpus[:3]]
    run = [ScoredDoc('d1', -1.0, 1), ScoredDoc('d2', -2.0, 2),
           ScoredDoc('d3', -3.0, 3)]
    features = extract_all(graph, candidates, run, index)
    assert features.topic_id == 'T1'
    assert features.doc_ids == ('d1', 'd2', 'd3')
    assert features.matrix.shape == (3, N_FEATURES)
    assert list(features.baseline_scores) == [-1.0, -2.0, -3.0]
    for row, doc, item in zip(features.matrix, candidates, run):
        doc = CandidateDoc(doc.doc_id, doc.units, doc.multiword, item.score)
        expected = feature_vector(attach_candidate(graph, doc, index))
        np.testing.assert_allclose(row, expected, rtol=1e-12)


def test_extract_all_missing(index, topics, corpus):
    """
    Candidates outside the run are rejected
    """
    graph = build_profile(topics[0], index, None, ProfileConfig())
    candidates = [make_candidate(corpus[0], index.analyzer)]
    with pytest.raises(DataError):
        extract_all(graph, candidates, [ScoredDoc('d2', -1.0, 1)], index)


def test_extract_all_empty(index, topics):
    """
    No candidates, no rows
    """
    graph = build_profile(topics[0], index, None, ProfileConfig())
    features = extract_all(graph, [], [], index)
    assert len(features) == 0
    assert features.matrix.shape == (0, N_FEATURES)


def test_with_grades(index, topics, corpus, qrels):
    """
    Unjudged candidates get grade 0
    """
    graph = build_profile(topics[0], index, None, ProfileConfig())
    candidates = [make_candidate(record, index.analyzer) for record in corpus]
    run = [ScoredDoc(record.doc_id, -1.0, rank)
           for rank, record in enumerate(corpus, 1)]
    features = extract_all(graph, candidates, run, index).with_grades(qrels)
    assert list(features.grades) == [3, 2, 0, 0, 0]


def test_standardize_per_topic():
    """
    Population z-scores, constant columns to zero
    """
    scaled = standardize_per_topic([[1.0, 5.0], [3.0, 5.0]])
    np.testing.assert_allclose(scaled, [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(standardize_per_topic([[2.0, 7.0]]),
                               [[0.0, 0.0]])
    with pytest.raises(ParameterError):
        standardize_per_topic(np.zeros((0, 3)))


@pytest.mark.parametrize('seed', range(5))
def test_standardize_moments(seed):
    """
    Zero mean and unit population deviation per column
    """
    rng = np.random.default_rng(seed)
    matrix = rng.normal(3.0, 2.0, size=(20, N_FEATURES))
    scaled = standardize_per_topic(matrix)
    np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(scaled.std(axis=0), 1.0, atol=1e-12)


def test_standardize_rounding_constant():
    """
    Columns equal up to float rounding become exact zeros
    """
    column = [0.1 + 0.2, 0.3, 0.3, 0.1 + 0.2]
    matrix = np.column_stack([column, [1.0, 2.0, 3.0, 4.0]])
    scaled = standardize_per_topic(matrix)
    assert np.array_equal(scaled[:, 0], np.zeros(4))
    assert scaled[:, 0].std() == 0.0
    assert abs(scaled[:, 1].std() - 1.0) <= 1e-9


def test_make_candidate_truncation():
    """
    Only the first unit terms are kept
    """
    analyzer = AnalyzerConfig.preset('raw', extract_multiword=False)
    words = [f'w{number}' for number in range(250)]
    record = DocumentRecord('long', 'title', ' '.join(words))
    doc = make_candidate(record, analyzer, baseline_score=-2.0)
    assert len(doc.units) == MAX_CANDIDATE_TERMS
    assert doc.units[:2] == ('title', 'w0')
    assert doc.baseline_score == -2.0
    assert len(make_candidate(record, analyzer, max_terms=10).units) == 10
    with pytest.raises(ParameterError):
        CandidateDoc('x', tuple(words[:MAX_CANDIDATE_TERMS + 1]))


if __name__ == '__main__':
    pass
