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

"""Module with the first-stage query-likelihood ranker."""

import logging
import math
from dataclasses import dataclass

from profilerank.base import (tracer, ParameterError, UnanswerableTopicError,
                              UnknownDocumentError)
from profilerank.evaluation import evaluate_run
from profilerank.textprep import analyze

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.retrieval').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.retrieval')


@dataclass(frozen=True)
class RetrievalParams:
    """
    Jelinek-Mercer retrieval settings.

    `jm_lambda` weights the collection model: 0.6 puts 60% of the
    probability mass on the collection.
    """

    jm_lambda: float = 0.6
    k: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.jm_lambda <= 1.0:
            raise ParameterError(f'jm_lambda must be in [0, 1], '
                                 f'got {self.jm_lambda}.')
        if self.k < 1:
            raise ParameterError(f'k must be >= 1, got {self.k}.')


@dataclass(frozen=True)
class ScoredDoc:
    """One entry of a ranked result list."""

    doc_id: str
    score: float
    rank: int


def build_query(text, analyzer):
    """
    Turn topic field e into query terms.

    Same stopping and stemming as the index; multiword terms are not
    added and duplicates are kept.

    :param str text: Search terms field.
    :param AnalyzerConfig analyzer: Index analyzer.
    :rtype: list
    :raises UnanswerableTopicError: Nothing left after analysis.
    """
    terms = list(analyze(text, analyzer.without_multiword()).units)
    if not terms:
        raise UnanswerableTopicError(f'Query is empty after analysis: '
                                     f'"{text}"')
    return terms


def score_jm(query, doc_id, index, jm_lambda):
    """
    Query log-likelihood with Jelinek-Mercer smoothing.

    sum over query terms of log[(1 - l) * tf/|d| + l * cf/|C|]; unseen terms
    use the index floor for cf.

    :rtype: float
    :return: Score, or -inf when the document is empty or a term gets zero
        probability (l = 0 and term absent).
    """
    doc_len = index.doc_len.get(doc_id)
    if doc_len is None:
        raise UnknownDocumentError(f'Unknown document id `{doc_id}`.')
    if not doc_len:
        return -math.inf

    score = 0.0
    for term in query:
        prob = ((1.0 - jm_lambda) * index.tf(term, doc_id) / doc_len
                + jm_lambda * index.background_prob(term))
        if prob <= 0.0:
            return -math.inf
        score += math.log(prob)
    return score


@tracer
def retrieve_topk(query, index, params):
    """
    Rank candidate documents for one query.

    Candidates are documents that contain at least one query term. Sorted by
    score descending, ties by ascending doc_id, truncated to `params.k`.

    :rtype: list
    :return: ScoredDoc list, ranks from 1. May be empty.
    """
    if not query:
        raise UnanswerableTopicError('Query is empty.')

    candidates = set()
    for term in set(query):
        candidates.update(doc_id for doc_id, _ in index.postings.get(term, ()))

    scored = []
    for doc_id in candidates:
        score = score_jm(query, doc_id, index, params.jm_lambda)
        if score != -math.inf:
            scored.append((doc_id, score))

    scored.sort(key=lambda item: (-item[1], item[0]))
    LOG.debug('Query %s: %d candidates, %d scored', query, len(candidates),
              len(scored))
    return [ScoredDoc(doc_id, score, rank)
            for rank, (doc_id, score) in enumerate(scored[:params.k], start=1)]


@tracer
def run_baseline(topics, index, params):
    """
    Retrieve for every topic from its field e.

    A topic whose query is empty after analysis gets an empty ranking.

    :param iterable topics: Topic objects.
    :rtype: dict
    :return: topic_id -> ScoredDoc list.
    """
    run = {}
    for topic in topics:
        try:
            query = build_query(topic.fields['e'], index.analyzer)
        except UnanswerableTopicError as error:
            LOG.warning('Topic %s skipped: %s', topic.topic_id, error)
            run[topic.topic_id] = []
            continue
        run[topic.topic_id] = retrieve_topk(query, index, params)
        LOG.info('Topic %s: retrieved %d documents', topic.topic_id,
                 len(run[topic.topic_id]))
    return run


@tracer
def sweep_lambda(topics, index, qrels, lambdas, k=1000, gain='linear'):
    """
    Evaluate the baseline under several smoothing weights.

    :param iterable lambdas: Candidate jm_lambda values.
    :rtype: dict
    :return: jm_lambda -> mean nDCG@k.
    """
    topics = list(topics)
    result = {}
    for jm_lambda in lambdas:
        run = run_baseline(topics, index, RetrievalParams(jm_lambda, k))
        report = evaluate_run('baseline', run, qrels, k=k, gain=gain)
        result[jm_lambda] = report.mean('ndcg')
        LOG.info('lambda=%s: mean nDCG %.4f', jm_lambda, result[jm_lambda])
    return result
