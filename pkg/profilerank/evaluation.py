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

"""Module with ranking metrics and significance testing."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import stats

from profilerank.base import tracer, DataError, ParameterError

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.evaluation').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.evaluation')

GRADES = (0, 1, 2, 3)
GAINS = ('linear', 'exponential')
METRICS = ('ndcg', 'bpref')

# Largest number of nonzero differences tested by exact enumeration
WILCOXON_EXACT_MAX = 25


class Qrels:
    """Graded relevance judgments; absent pairs are unjudged."""

    def __init__(self, judgments=None):
        """
        :param iterable judgments: (optional) (topic_id, doc_id, grade)
            triples.
        :raises DataError: Grade out of range or a repeated pair.
        """
        self._topics: Dict[str, Dict[str, int]] = {}
        for topic_id, doc_id, grade in judgments or ():
            self.add(topic_id, doc_id, grade)

    def add(self, topic_id, doc_id, grade):
        """Add one judgment."""
        grade = int(grade)
        if grade not in GRADES:
            raise DataError(f'Grade {grade} out of range for '
                            f'({topic_id}, {doc_id}).')
        topic = self._topics.setdefault(topic_id, {})
        if doc_id in topic:
            raise DataError(f'Duplicate judgment for ({topic_id}, {doc_id}).')
        topic[doc_id] = grade

    def grade(self, topic_id, doc_id):
        """Grade of a pair, None when unjudged."""
        return self._topics.get(topic_id, {}).get(doc_id)

    def judged(self, topic_id):
        """doc_id -> grade for one topic."""
        return dict(self._topics.get(topic_id, {}))

    @property
    def topic_ids(self):
        """Judged topics, sorted."""
        return sorted(self._topics)

    def __iter__(self):
        for topic_id in sorted(self._topics):
            for doc_id in sorted(self._topics[topic_id]):
                yield topic_id, doc_id, self._topics[topic_id][doc_id]

    def __len__(self):
        return sum(len(docs) for docs in self._topics.values())

    def __eq__(self, other):
        return isinstance(other, Qrels) and list(self) == list(other)


def _doc_ids(ranking):
    ids = [getattr(item, 'doc_id', item) for item in ranking]
    if len(set(ids)) != len(ids):
        seen = set()
        duplicate = next(doc for doc in ids if doc in seen or seen.add(doc))
        raise DataError(f'Duplicate document `{duplicate}` in ranking.')
    return ids


def _gain(grade, gain):
    if gain == 'linear':
        return float(grade)
    if gain == 'exponential':
        return 2.0 ** grade - 1.0
    raise ParameterError(f'Unknown gain `{gain}`. Expected one of {GAINS}.')


def dcg(grades, k, gain='linear'):
    """Discounted cumulative gain of grades in rank order, cut at k."""
    return sum(_gain(grade, gain) / math.log2(rank + 1)
               for rank, grade in enumerate(grades[:k], start=1))


def ndcg(ranking, qrels, topic_id, k=1000, gain='linear'):
    """
    Normalized discounted cumulative gain at k.

    Unjudged documents count as grade 0. The ideal DCG is taken over the
    topic's judged documents. A topic without a judged-relevant document
    scores 0.

    :param list ranking: doc ids (or ScoredDoc) in rank order, no duplicates.
    :raises DataError: Duplicate document in ranking.
    """
    doc_ids = _doc_ids(ranking)
    judged = qrels.judged(topic_id)
    ideal = dcg(sorted(judged.values(), reverse=True), k, gain)
    if ideal <= 0.0:
        return 0.0
    return dcg([judged.get(doc_id, 0) for doc_id in doc_ids], k, gain) / ideal


def bpref(ranking, qrels, topic_id):
    """
    Binary preference.

    (1/R) * sum over retrieved relevant r of 1 - min(n_r, R) / min(R, N),
    where n_r counts judged nonrelevant documents above r. Unjudged
    documents are ignored.
    """
    doc_ids = _doc_ids(ranking)
    judged = qrels.judged(topic_id)
    n_rel = sum(1 for grade in judged.values() if grade >= 1)
    n_nonrel = len(judged) - n_rel
    if n_rel == 0:
        return 0.0

    denominator = min(n_rel, n_nonrel)
    total = 0.0
    nonrel_above = 0
    for doc_id in doc_ids:
        grade = judged.get(doc_id)
        if grade is None:
            continue
        if grade == 0:
            nonrel_above += 1
        elif denominator == 0:
            total += 1.0
        else:
            total += 1.0 - min(nonrel_above, n_rel) / denominator
    return total / n_rel


@dataclass
class MetricReport:
    """Per-topic metric values of one run, with optional p-values."""

    name: str
    per_topic: Dict[str, Dict[str, float]] = field(default_factory=dict)
    pvalues: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def mean(self, metric):
        """Arithmetic mean over topics."""
        values = [row[metric] for row in self.per_topic.values()]
        return float(np.mean(values)) if values else 0.0

    @property
    def means(self):
        """Metric name -> mean over topics."""
        return {metric: self.mean(metric) for metric in METRICS}

    def values(self, metric, topic_ids):
        """Metric values in the given topic order."""
        return [self.per_topic[topic_id][metric] for topic_id in topic_ids]

    def to_dict(self):
        """JSON-ready form."""
        return {'name': self.name,
                'means': self.means,
                'per_topic': {topic_id: self.per_topic[topic_id]
                              for topic_id in sorted(self.per_topic)},
                'pvalues': self.pvalues}

    @classmethod
    def from_dict(cls, data):
        """Inverse of :meth:`to_dict`."""
        return cls(data['name'], dict(data['per_topic']),
                   dict(data.get('pvalues', {})))


@tracer
def evaluate_run(name, run, qrels, k=1000, gain='linear',
                 exclude_unjudged_topics=False):
    """
    Evaluate every topic of a run.

    :param dict run: topic_id -> ranking.
    :param bool exclude_unjudged_topics: (optional) Drop topics without any
        judged-relevant document instead of scoring them 0.
    :rtype: MetricReport
    """
    report = MetricReport(name)
    for topic_id in sorted(run):
        judged = qrels.judged(topic_id)
        if not any(grade >= 1 for grade in judged.values()):
            if exclude_unjudged_topics:
                LOG.info('Topic %s has no relevant judgments, skipped',
                         topic_id)
                continue
            LOG.warning('Topic %s has no relevant judgments', topic_id)
        ranking = run[topic_id]
        report.per_topic[topic_id] = {
            'ndcg': ndcg(ranking, qrels, topic_id, k, gain),
            'bpref': bpref(ranking, qrels, topic_id)}
    return report


def ideal_ranking(ranking, qrels, topic_id):
    """Retrieved documents re-sorted by grade, ties by doc_id."""
    judged = qrels.judged(topic_id)
    return sorted(_doc_ids(ranking),
                  key=lambda doc_id: (-judged.get(doc_id, 0), doc_id))


@tracer
def upper_bound(run, qrels, k=1000, gain='linear',
                exclude_unjudged_topics=False):
    """
    Best achievable scores when only the retrieved documents may be reordered.

    :rtype: MetricReport
    """
    best = {topic_id: ideal_ranking(ranking, qrels, topic_id)
            for topic_id, ranking in run.items()}
    return evaluate_run('upper_bound', best, qrels, k, gain,
                        exclude_unjudged_topics)


def _midranks(values):
    """1-based ranks with ties sharing the mean rank."""
    order = np.argsort(values, kind='mergesort')
    ranks = np.empty(len(values), dtype=float)
    sorted_values = np.asarray(values)[order]
    start = 0
    while start < len(values):
        stop = start
        while stop + 1 < len(values) and \
                sorted_values[stop + 1] == sorted_values[start]:
            stop += 1
        ranks[order[start:stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    return ranks


def wilcoxon_signed_rank(pairs):
    """
    Two-sided Wilcoxon signed-rank test.

    Zero differences are discarded and tied absolute differences get mid
    ranks. Exact enumeration of the null distribution for up to 25 nonzero
    differences, otherwise the normal approximation with tie and continuity
    corrections.

    :param list pairs: (a_i, b_i) paired values.
    :rtype: float
    :return: p-value; 1.0 when every difference is zero.
    """
    diffs = np.array([a - b for a, b in pairs], dtype=float)
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        return 1.0

    ranks = _midranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    total = float(ranks.sum())
    center = total / 2.0

    if n <= WILCOXON_EXACT_MAX:
        # Mid ranks are multiples of 0.5, so doubled ranks are integers
        doubled = np.rint(ranks * 2).astype(int)
        counts = np.zeros(int(doubled.sum()) + 1, dtype=float)
        counts[0] = 1.0
        for rank in doubled:
            shifted = np.zeros_like(counts)
            shifted[rank:] = counts[:len(counts) - rank]
            counts = counts + shifted
        support = np.arange(len(counts)) / 2.0
        distance = abs(w_plus - center)
        extreme = np.abs(support - center) >= distance - 1e-9
        return float(min(1.0, counts[extreme].sum() / counts.sum()))

    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    variance = (n * (n + 1) * (2 * n + 1) / 24.0
                - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0)
    if variance <= 0.0:
        return 1.0
    deviation = max(abs(w_plus - center) - 0.5, 0.0)
    z_value = deviation / math.sqrt(variance)
    return float(min(1.0, 2.0 * stats.norm.sf(z_value)))


@tracer
def significance(reports, baseline, metrics=METRICS):
    """
    Fill paired p-values of every report against a baseline report.

    Only topics present in both reports are paired.

    :param list reports: MetricReport objects.
    :param MetricReport baseline: Reference run.
    """
    for report in reports:
        if report is baseline:
            continue
        shared = sorted(set(report.per_topic) & set(baseline.per_topic))
        report.pvalues[baseline.name] = {
            metric: wilcoxon_signed_rank(
                list(zip(report.values(metric, shared),
                         baseline.values(metric, shared))))
            for metric in metrics}
    return reports


def best_report(reports, metric='ndcg', exclude=('upper_bound',)):
    """Report with the highest mean, skipping the names in `exclude`."""
    candidates = [report for report in reports if report.name not in exclude]
    if not candidates:
        return None
    return max(candidates, key=lambda report: report.mean(metric))


def format_table(reports, baseline_name='baseline', alpha=0.01,
                 best: Optional[MetricReport] = None):
    """
    Render a results table.

    `*` marks a significant improvement over the baseline (p < alpha),
    `=` marks a result not significantly lower than the best run.
    """
    lines = [f'{"method":<24} {"nDCG":>9} {"bpref":>9}', '-' * 44]
    for report in reports:
        cells = []
        for metric in METRICS:
            mark = ''
            pvalue = report.pvalues.get(baseline_name, {}).get(metric)
            if pvalue is not None and pvalue < alpha and \
                    report.mean(metric) > _mean_of(reports, baseline_name,
                                                   metric):
                mark = '*'
            if best is not None and report is not best:
                best_p = report.pvalues.get(best.name, {}).get(metric)
                if best_p is not None and best_p > alpha:
                    mark += '='
            cells.append(f'{report.mean(metric):.4f}{mark:<2}')
        lines.append(f'{report.name:<24} {cells[0]:>9} {cells[1]:>9}')
    return '\n'.join(lines) + '\n'


def _mean_of(reports, name, metric):
    for report in reports:
        if report.name == name:
            return report.mean(metric)
    return math.inf
