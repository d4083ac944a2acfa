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

"""Tests for profilerank.evaluation module."""

# pylint: disable=redefined-outer-name
# ^^^ this

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilerank.base import DataError, ParameterError
from profilerank.evaluation import (MetricReport, Qrels, best_report, bpref,
                                    dcg, evaluate_run, format_table,
                                    ideal_ranking, ndcg, significance,
                                    upper_bound, wilcoxon_signed_rank)
from profilerank.retrieval import ScoredDoc


def reference_ndcg(ranking, judged, k, exponential=False):
    """
    nDCG written out term by term
    """
    def gain(grade):
        return 2 ** grade - 1 if exponential else grade

    actual = 0.0
    for position, doc in enumerate(ranking[:k]):
        actual += gain(judged.get(doc, 0)) / math.log2(position + 2)
    ideal = 0.0
    for position, grade in enumerate(sorted(judged.values(),
                                            reverse=True)[:k]):
        ideal += gain(grade) / math.log2(position + 2)
    return actual / ideal if ideal else 0.0


def test_qrels():
    """
    Grades, unjudged pairs, ordering
    """
    qrels = Qrels([('T2', 'b', 1), ('T1', 'z', 0), ('T1', 'a', 3)])
    assert qrels.grade('T1', 'a') == 3
    assert qrels.grade('T1', 'q') is None
    assert qrels.grade('T9', 'a') is None
    assert qrels.judged('T1') == {'a': 3, 'z': 0}
    assert qrels.topic_ids == ['T1', 'T2']
    assert list(qrels) == [('T1', 'a', 3), ('T1', 'z', 0), ('T2', 'b', 1)]
    assert len(qrels) == 3
    assert qrels == Qrels(list(qrels))


def test_qrels_errors():
    """
    Grades outside 0..3 and repeated pairs
    """
    with pytest.raises(DataError):
        Qrels([('T1', 'a', 4)])
    with pytest.raises(DataError):
        Qrels([('T1', 'a', -1)])
    with pytest.raises(DataError):
        Qrels([('T1', 'a', 1), ('T1', 'a', 2)])


def test_dcg():
    """
    Log2 discount from rank 1
    """
    assert dcg([3, 2], 10) == pytest.approx(3 + 2 / math.log2(3))
    assert dcg([3, 2], 1) == 3.0
    assert dcg([2], 5, 'exponential') == 3.0
    assert dcg([], 5) == 0.0


def test_ndcg_hand(qrels):
    """
    Ideal order scores 1, a relevant document at rank 2 less
    """
    assert ndcg(['d1', 'd2', 'd4'], qrels, 'T1') == pytest.approx(1.0)
    single = Qrels([('T1', 'b', 3)])
    assert ndcg(['a', 'b'], single, 'T1') == \
        pytest.approx(1 / math.log2(3), abs=1e-12)
    assert ndcg(['a', 'b'], single, 'T1') == pytest.approx(0.6309, abs=1e-4)
    assert ndcg([ScoredDoc('b', 1.0, 1)], single, 'T1') == 1.0
    assert ndcg(['a'], single, 'T1') == 0.0
    assert ndcg([], single, 'T1') == 0.0


def test_ndcg_no_relevant():
    """
    Topics without relevant judgments score 0
    """
    qrels = Qrels([('T1', 'a', 0)])
    assert ndcg(['a'], qrels, 'T1') == 0.0
    assert ndcg(['a'], qrels, 'T2') == 0.0


def test_ndcg_gains():
    """
    Exponential gain stresses the high grades
    """
    qrels = Qrels([('T1', 'x', 1), ('T1', 'y', 3)])
    log3 = math.log2(3)
    assert ndcg(['x', 'y'], qrels, 'T1') == \
        pytest.approx((1 + 3 / log3) / (3 + 1 / log3))
    assert ndcg(['x', 'y'], qrels, 'T1', gain='exponential') == \
        pytest.approx((1 + 7 / log3) / (7 + 1 / log3))
    with pytest.raises(ParameterError):
        ndcg(['x'], qrels, 'T1', gain='cubic')


def test_ndcg_duplicate():
    """
    Rankings must not repeat documents
    """
    with pytest.raises(DataError):
        ndcg(['a', 'b', 'a'], Qrels([('T1', 'a', 1)]), 'T1')
    with pytest.raises(DataError):
        bpref(['a', 'a'], Qrels([('T1', 'a', 1)]), 'T1')


@settings(max_examples=1000, deadline=None)
@given(st.dictionaries(st.sampled_from('abcdefghij'),
                       st.integers(min_value=0, max_value=3)),
       st.permutations(list('abcdefghijkl')),
       st.integers(min_value=1, max_value=14),
       st.booleans())
def test_ndcg_reference(judged, ranking, k, exponential):
    """
    nDCG agrees with the term-by-term reference and stays in [0, 1]
    """
    qrels = Qrels(('T1', doc, grade) for doc, grade in judged.items())
    gain = 'exponential' if exponential else 'linear'
    value = ndcg(ranking, qrels, 'T1', k, gain)
    assert value == pytest.approx(
        reference_ndcg(ranking, judged, k, exponential), abs=1e-12)
    assert 0.0 <= value <= 1.0 + 1e-12


def test_bpref_hand():
    """
    Judged nonrelevant documents above each relevant one
    """
    qrels = Qrels([('T1', 'r1', 2), ('T1', 'r2', 1), ('T1', 'n1', 0),
                   ('T1', 'n2', 0)])
    assert bpref(['n1', 'r1', 'u', 'n2', 'r2'], qrels, 'T1') == 0.25
    assert bpref(['r1', 'r2', 'n1', 'n2'], qrels, 'T1') == 1.0
    assert bpref(['n1', 'n2', 'r1', 'r2'], qrels, 'T1') == 0.0
    assert bpref(['u1', 'r1', 'u2'], qrels, 'T1') == 0.5


def test_bpref_edge_cases():
    """
    No nonrelevant judgments, no relevant judgments
    """
    only_relevant = Qrels([('T1', 'r1', 1), ('T1', 'r2', 3)])
    assert bpref(['r1'], only_relevant, 'T1') == 0.5
    assert bpref(['x', 'r2', 'r1'], only_relevant, 'T1') == 1.0
    assert bpref(['n1'], Qrels([('T1', 'n1', 0)]), 'T1') == 0.0
    # more nonrelevant than relevant documents
    many = Qrels([('T1', 'r', 1), ('T1', 'n1', 0), ('T1', 'n2', 0),
                  ('T1', 'n3', 0)])
    assert bpref(['n1', 'n2', 'r'], many, 'T1') == 0.0


@pytest.mark.parametrize('seed', range(10))
def test_upper_bound_brute_force(seed):
    """
    Reordering the retrieved documents never beats the upper bound
    """
    rng = random.Random(seed)
    docs = [f'd{i}' for i in range(rng.randint(1, 6))]
    qrels = Qrels(('T1', doc, rng.randint(0, 3)) for doc in docs
                  if rng.random() < 0.8)
    qrels.add('T1', 'elsewhere', 2)
    report = upper_bound({'T1': docs}, qrels, k=4)
    best_ndcg = max(ndcg(list(order), qrels, 'T1', 4)
                    for order in itertools.permutations(docs))
    best_bpref = max(bpref(list(order), qrels, 'T1')
                     for order in itertools.permutations(docs))
    assert report.per_topic['T1']['ndcg'] == pytest.approx(best_ndcg)
    assert report.per_topic['T1']['bpref'] == pytest.approx(best_bpref)
    assert report.name == 'upper_bound'


def test_ideal_ranking(qrels):
    """
    Grade descending, unjudged as 0, ties by doc_id
    """
    assert ideal_ranking(['d4', 'x', 'd2', 'd1'], qrels, 'T1') == \
        ['d1', 'd2', 'd4', 'x']


def test_evaluate_run(qrels):
    """
    Per-topic values and means; topics without relevant judgments
    """
    run = {'T1': ['d2', 'd1'], 'T2': ['d3'], 'T3': ['d9']}
    report = evaluate_run('run', run, qrels, k=10)
    assert sorted(report.per_topic) == ['T1', 'T2', 'T3']
    assert report.per_topic['T3'] == {'ndcg': 0.0, 'bpref': 0.0}
    assert report.per_topic['T2']['bpref'] == 0.5
    assert report.mean('ndcg') == pytest.approx(
        sum(row['ndcg'] for row in report.per_topic.values()) / 3)

    skipped = evaluate_run('run', run, qrels, k=10,
                           exclude_unjudged_topics=True)
    assert sorted(skipped.per_topic) == ['T1', 'T2']
    assert skipped.means['ndcg'] > report.means['ndcg']


def test_metric_report_dict():
    """
    Dictionary form keeps values and p-values
    """
    report = MetricReport('run', {'T2': {'ndcg': 0.5, 'bpref': 0.25},
                                  'T1': {'ndcg': 1.0, 'bpref': 1.0}},
                          {'baseline': {'ndcg': 0.03, 'bpref': 0.2}})
    data = report.to_dict()
    assert list(data['per_topic']) == ['T1', 'T2']
    assert data['means'] == {'ndcg': 0.75, 'bpref': 0.625}
    assert MetricReport.from_dict(data) == report
    assert report.values('ndcg', ['T2', 'T1']) == [0.5, 1.0]
    assert MetricReport('empty').mean('ndcg') == 0.0


def test_wilcoxon_hand():
    """
    No differences, all positive, mirrored samples
    """
    assert wilcoxon_signed_rank([(0.5, 0.5)] * 6) == 1.0
    assert wilcoxon_signed_rank([]) == 1.0
    pairs = [(float(i), 0.0) for i in range(1, 6)]
    assert wilcoxon_signed_rank(pairs) == pytest.approx(0.0625)
    assert wilcoxon_signed_rank([(0.0, 1.0), (1.0, 0.0)]) == 1.0


def enumerated_pvalue(diffs):
    """
    Two-sided p-value by enumerating all sign assignments
    """
    ranks = {value: rank for rank, value
             in enumerate(sorted(abs(d) for d in diffs), start=1)}
    observed = sum(ranks[abs(d)] for d in diffs if d > 0)
    center = sum(ranks.values()) / 2
    extreme = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=len(diffs)):
        value = sum(ranks[abs(d)] for d, sign in zip(diffs, signs) if sign)
        total += 1
        if abs(value - center) >= abs(observed - center) - 1e-9:
            extreme += 1
    return min(1.0, extreme / total)


@pytest.mark.parametrize('seed', range(20))
def test_wilcoxon_enumeration(seed):
    """
    Exact p-values match a sign-flip enumeration without ties
    """
    rng = random.Random(seed)
    n = rng.randint(1, 10)
    magnitudes = rng.sample(range(1, 100), n)
    diffs = [m if rng.random() < 0.6 else -m for m in magnitudes]
    pairs = [(d / 10, 0.0) for d in diffs]
    assert wilcoxon_signed_rank(pairs) == \
        pytest.approx(enumerated_pvalue(diffs), abs=1e-12)
    mirrored = [(b, a) for a, b in pairs]
    assert wilcoxon_signed_rank(mirrored) == \
        pytest.approx(wilcoxon_signed_rank(pairs), abs=1e-12)


def test_wilcoxon_ties():
    """
    Tied magnitudes share mid ranks
    """
    # ranks 1.5, 1.5, 3: W+ = 4.5, center 3
    assert wilcoxon_signed_rank([(1.0, 0.0), (0.0, 1.0), (2.0, 0.0)]) == \
        pytest.approx(0.75)
    value = wilcoxon_signed_rank([(1.0, 0.0), (1.0, 0.0), (2.0, 0.0),
                                  (2.0, 0.0)])
    assert value == pytest.approx(2 / 16)


def test_wilcoxon_normal():
    """
    Large samples use the normal approximation
    """
    positive = [(float(i), 0.0) for i in range(1, 41)]
    assert wilcoxon_signed_rank(positive) < 1e-6
    balanced = [(float(i), 0.0) if i % 2 else (0.0, float(i))
                for i in range(1, 41)]
    assert wilcoxon_signed_rank(balanced) > 0.5


def test_significance():
    """
    p-values against the baseline over shared topics
    """
    baseline = MetricReport('baseline', {
        f'T{i}': {'ndcg': 0.1, 'bpref': 0.1} for i in range(6)})
    better = MetricReport('better', {
        f'T{i}': {'ndcg': 0.2 + i / 10, 'bpref': 0.1} for i in range(7)})
    significance([baseline, better], baseline)
    assert baseline.pvalues == {}
    assert better.pvalues['baseline']['ndcg'] == pytest.approx(2 / 64)
    assert better.pvalues['baseline']['bpref'] == 1.0


def test_best_report_and_table():
    """
    Best run excludes the upper bound; table marks
    """
    reports = [
        MetricReport('baseline', {f'T{i}': {'ndcg': 0.1, 'bpref': 0.1}
                                  for i in range(8)}),
        MetricReport('gbrt', {f'T{i}': {'ndcg': 0.5 + i / 100, 'bpref': 0.1}
                              for i in range(8)}),
        MetricReport('upper_bound', {f'T{i}': {'ndcg': 1.0, 'bpref': 1.0}
                                     for i in range(8)})]
    significance(reports, reports[0])
    best = best_report(reports)
    assert best.name == 'gbrt'
    assert best_report(reports[2:]) is None
    table = format_table(reports, best=best)
    lines = table.splitlines()
    assert lines[0].split() == ['method', 'nDCG', 'bpref']
    assert lines[3].startswith('gbrt')
    assert '0.5350*' in lines[3]
    assert '*' not in lines[2]
    assert table.endswith('\n')


if __name__ == '__main__':
    pass
