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

"""Module with learning-to-rank models, author folds and re-ranking."""

import itertools
import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Tuple, Union

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from profilerank.base import tracer, ArtifactError, DataError, ParameterError
from profilerank.evaluation import GAINS, ndcg
from profilerank.features import (FEATURE_NAMES, N_FEATURES,
                                  standardize_per_topic)
from profilerank.retrieval import ScoredDoc

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.ltr').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.ltr')

LEARNERS = ('linear', 'gbrt', 'lambdamart')
N_FOLDS = 5
RIDGE_JITTER = 1e-8
DEFAULT_GRID = {'learning_rate': (0.01, 0.1),
                'max_depth': (2, 4),
                'min_samples_leaf': (1, 9),
                'max_features': (0.3, 1.0)}


@dataclass(frozen=True)
class GbmParams:
    """
    Boosting hyperparameters.

    ``max_features`` follows scikit-learn: an int is a number of columns,
    a float a fraction of them. ``1`` samples one column per split,
    ``1.0`` uses all of them.
    """

    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    max_features: Union[int, float] = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ParameterError('n_estimators must be >= 0.')
        if self.learning_rate < 0:
            raise ParameterError('learning_rate must be >= 0.')
        if self.max_depth < 1:
            raise ParameterError('max_depth must be >= 1.')
        if self.min_samples_leaf < 1:
            raise ParameterError('min_samples_leaf must be >= 1.')
        if isinstance(self.max_features, float):
            if not 0.0 < self.max_features <= 1.0:
                raise ParameterError('A fractional max_features must be in '
                                     '(0, 1].')
        elif self.max_features < 1:
            raise ParameterError('max_features must be >= 1.')

    def to_dict(self):
        """Plain dict of the parameters."""
        return asdict(self)


def expand_grid(grid, base=None):
    """
    Grid cells as GbmParams, in grid order (last key varies fastest).

    :param dict grid: Parameter name -> candidate values.
    :param GbmParams base: (optional) Values of parameters not in the grid.
    :rtype: list
    """
    base = base or GbmParams()
    known = {item.name for item in fields(GbmParams)}
    unknown = sorted(set(grid) - known)
    if unknown:
        raise ParameterError(f'Unknown grid parameters {unknown}.')
    if not grid:
        return [base]
    names = list(grid)
    return [replace(base, **dict(zip(names, values)))
            for values in itertools.product(*(grid[name] for name in names))]


class LinearModel:
    """Weights and intercept over the ten features."""

    learner = 'linear'

    def __init__(self, weights, intercept=0.0, standardize=True):
        """Weights in feature order plus an intercept."""
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (N_FEATURES,):
            raise ParameterError(f'A linear model needs {N_FEATURES} weights.')
        self.intercept = float(intercept)
        self.standardize = bool(standardize)

    def __repr__(self):
        return (f'<LinearModel(intercept={self.intercept!r}, '
                f'standardize={self.standardize})>')

    def predict(self, X):
        """Scores of the rows of X."""
        return np.asarray(X, dtype=np.float64) @ self.weights + self.intercept

    def to_dict(self):
        """JSON-ready form."""
        return {'learner': self.learner,
                'weights': [float(weight) for weight in self.weights],
                'intercept': self.intercept,
                'standardize': self.standardize}

    @classmethod
    def from_dict(cls, data):
        """Inverse of :meth:`to_dict`."""
        return cls(data['weights'], data.get('intercept', 0.0),
                   data.get('standardize', True))


class RegressionTree:
    """
    Binary regression tree in node-list form.

    Split nodes hold ``feature``, ``threshold``, ``left`` and ``right``;
    leaves hold ``value``. Samples with x[feature] <= threshold go left.
    """

    def __init__(self, nodes):
        """Flat node list in sklearn order."""
        self.nodes = [dict(node) for node in nodes]

    @classmethod
    def from_sklearn(cls, estimator):
        """Copy the structure of a fitted DecisionTreeRegressor."""
        tree = estimator.tree_
        nodes = []
        for i in range(tree.node_count):
            if tree.children_left[i] == tree.children_right[i]:
                nodes.append({'value': float(tree.value[i].ravel()[0])})
            else:
                nodes.append({'feature': int(tree.feature[i]),
                              'threshold': float(tree.threshold[i]),
                              'left': int(tree.children_left[i]),
                              'right': int(tree.children_right[i])})
        return cls(nodes)

    def apply(self, X):
        """Leaf index of every row."""
        # float32 comparison as in the fitted estimator
        X = np.asarray(X, dtype=np.float32)
        feature = np.array([node.get('feature', 0) for node in self.nodes])
        threshold = np.array([node.get('threshold', 0.0)
                              for node in self.nodes])
        left = np.array([node.get('left', -1) for node in self.nodes])
        right = np.array([node.get('right', -1) for node in self.nodes])

        leaves = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = left[leaves] >= 0
        while active.any():
            at = leaves[active]
            goes_left = X[rows[active], feature[at]] <= threshold[at]
            leaves[active] = np.where(goes_left, left[at], right[at])
            active = left[leaves] >= 0
        return leaves

    def predict(self, X):
        """Leaf value of every row of X."""
        values = np.array([node.get('value', 0.0) for node in self.nodes])
        return values[self.apply(X)]

    def set_leaf_values(self, values: Dict[int, float]):
        """Overwrite leaf values by node position."""
        for leaf, value in values.items():
            self.nodes[leaf]['value'] = float(value)

    @property
    def depth(self):
        """Longest root-to-leaf path in splits."""
        def walk(node):
            if 'value' in self.nodes[node]:
                return 0
            return 1 + max(walk(self.nodes[node]['left']),
                           walk(self.nodes[node]['right']))
        return walk(0)


class TreeEnsemble:
    """Additive tree model: init + learning_rate * sum of stage trees."""

    def __init__(self, learner, init, learning_rate, stages=(),
                 params=None, standardize=True):
        """Boosted trees on top of a constant `init` score."""
        if learner not in LEARNERS[1:]:
            raise ParameterError(f'Unknown ensemble learner `{learner}`.')
        self.learner = learner
        self.init = float(init)
        self.learning_rate = float(learning_rate)
        self.stages = list(stages)
        self.params = params
        self.standardize = bool(standardize)

    def __repr__(self):
        return (f'<TreeEnsemble(learner={self.learner}, '
                f'stages={len(self.stages)})>')

    def predict(self, X):
        """Scores of the rows of X."""
        X = np.asarray(X, dtype=np.float64)
        scores = np.full(len(X), self.init)
        for tree in self.stages:
            scores += self.learning_rate * tree.predict(X)
        return scores

    def to_dict(self):
        """JSON-ready form."""
        return {'learner': self.learner,
                'init': self.init,
                'learning_rate': self.learning_rate,
                'standardize': self.standardize,
                'params': self.params.to_dict() if self.params else None,
                'stages': [{'nodes': tree.nodes} for tree in self.stages]}

    @classmethod
    def from_dict(cls, data):
        """Inverse of :meth:`to_dict`."""
        params = GbmParams(**data['params']) if data.get('params') else None
        return cls(data['learner'], data['init'], data['learning_rate'],
                   [RegressionTree(stage['nodes']) for stage in data['stages']],
                   params, data.get('standardize', True))


def save_model(model, path):
    """Write a model as JSON."""
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(model.to_dict(), file, sort_keys=True, indent=1)
        file.write('\n')


def load_model(path):
    """
    Read a model written by :func:`save_model`.

    :raises ArtifactError: Unreadable model file.
    """
    try:
        with open(path, encoding='utf-8') as file:
            data = json.load(file)
        if data['learner'] == 'linear':
            return LinearModel.from_dict(data)
        return TreeEnsemble.from_dict(data)
    except FileNotFoundError:
        raise ArtifactError(f'Model file "{path}" does not exist.',
                            stage='train') from None
    except (ValueError, KeyError, TypeError) as error:
        raise ArtifactError(f'Broken model file "{path}": {error}',
                            stage='train') from None


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or not len(X):
        raise ParameterError('Training needs at least one row.')
    if len(X) != len(y):
        raise ParameterError(f'{len(X)} rows but {len(y)} targets.')
    return X, y


def fit_linear(X, y, standardize=True):
    """
    Least squares through the normal equations.

    Singular systems get a ridge jitter on the weight diagonal.

    :rtype: LinearModel
    """
    X, y = _check_xy(X, y)
    design = np.hstack([np.ones((len(X), 1)), X])
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        LOG.debug('Singular normal equations, adding ridge jitter')
        gram[1:, 1:] += RIDGE_JITTER * np.eye(X.shape[1])
    solution = np.linalg.solve(gram, design.T @ y)
    return LinearModel(solution[1:], solution[0], standardize)


def _stage_tree(X, targets, params, stage):
    estimator = DecisionTreeRegressor(max_depth=params.max_depth,
                                      min_samples_leaf=params.min_samples_leaf,
                                      max_features=params.max_features,
                                      random_state=params.seed + stage)
    estimator.fit(X, targets)
    return RegressionTree.from_sklearn(estimator)


@tracer
def fit_gbrt(X, y, params, standardize=True):
    """
    Squared-loss gradient boosting.

    Starts from mean(y); every stage fits a regression tree to the
    residuals.

    :rtype: TreeEnsemble
    """
    X, y = _check_xy(X, y)
    model = TreeEnsemble('gbrt', y.mean(), params.learning_rate, (), params,
                         standardize)
    if len(X) < params.min_samples_leaf:
        LOG.warning('%d rows < min_samples_leaf, constant model', len(X))
        return model

    scores = np.full(len(X), model.init)
    for stage in range(params.n_estimators):
        tree = _stage_tree(X, y - scores, params, stage)
        model.stages.append(tree)
        scores = scores + params.learning_rate * tree.predict(X)
    LOG.info('GBRT: %d stages, training MSE %.6f', len(model.stages),
             float(np.mean((y - scores) ** 2)))
    return model


def _gains(grades, gain):
    if gain not in GAINS:
        raise ParameterError(f'Unknown gain `{gain}`.')
    grades = np.asarray(grades, dtype=np.float64)
    return grades if gain == 'linear' else 2.0 ** grades - 1.0


def lambda_gradients(scores, grades, k=1000, gain='linear'):
    """
    LambdaMART gradients and Newton weights of one topic.

    For every pair with grade_i > grade_j the pair contributes
    |delta nDCG@k| * rho to i and the negative to j, with
    rho = 1 / (1 + exp(s_i - s_j)).

    :rtype: tuple
    :return: (lambdas, weights) arrays aligned with the input.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gains = _gains(grades, gain)
    n = len(scores)
    lambdas = np.zeros(n)
    weights = np.zeros(n)
    ideal = np.sort(gains)[::-1][:k]
    idcg = float(np.sum(ideal / np.log2(np.arange(2, len(ideal) + 2))))
    if n < 2 or idcg <= 0.0:
        return lambdas, weights

    order = np.lexsort((np.arange(n), -scores))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    discount = np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)

    # rows: documents that can be preferred over some other document
    upper = np.flatnonzero(gains > gains.min())
    better = gains[upper, None] > gains[None, :]
    delta = np.abs((gains[upper, None] - gains[None, :])
                   * (discount[upper, None] - discount[None, :])) / idcg
    rho = 1.0 / (1.0 + np.exp(np.clip(scores[upper, None] - scores[None, :],
                                      -500, 500)))
    pair = np.where(better, delta * rho, 0.0)
    hessian = np.where(better, delta * rho * (1.0 - rho), 0.0)
    lambdas[upper] += pair.sum(axis=1)
    lambdas -= pair.sum(axis=0)
    weights[upper] += hessian.sum(axis=1)
    weights += hessian.sum(axis=0)
    return lambdas, weights


@tracer
def fit_lambdamart(groups, params, k=1000, gain='linear', standardize=True):
    """
    LambdaMART: boosting on lambda gradients, Newton leaf values.

    :param list groups: (X, grades) per topic.
    :rtype: TreeEnsemble
    :raises DataError: No topic has two different grades.
    """
    groups = [(np.asarray(X, dtype=np.float64),
               np.asarray(grades, dtype=np.float64)) for X, grades in groups]
    if not any(len(np.unique(grades)) > 1 for _, grades in groups):
        LOG.error('No topic with differing grades in %d topics', len(groups))
        raise DataError('LambdaMART needs at least one topic with two '
                        'different grades.')

    X = np.vstack([X for X, _ in groups])
    bounds = np.cumsum([0] + [len(grades) for _, grades in groups])
    scores = np.zeros(len(X))
    model = TreeEnsemble('lambdamart', 0.0, params.learning_rate, (), params,
                         standardize)
    for stage in range(params.n_estimators):
        lambdas = np.zeros(len(X))
        weights = np.zeros(len(X))
        for number, (_, grades) in enumerate(groups):
            part = slice(bounds[number], bounds[number + 1])
            lambdas[part], weights[part] = lambda_gradients(
                scores[part], grades, k, gain)
        tree = _stage_tree(X, lambdas, params, stage)
        leaves = tree.apply(X)
        newton = {}
        for leaf in np.unique(leaves):
            mask = leaves == leaf
            denominator = weights[mask].sum()
            newton[int(leaf)] = (lambdas[mask].sum() / denominator
                                 if denominator > 0 else 0.0)
        tree.set_leaf_values(newton)
        model.stages.append(tree)
        scores = scores + params.learning_rate * tree.predict(X)
    LOG.info('LambdaMART: %d stages on %d topics', len(model.stages),
             len(groups))
    return model


def model_inputs(topic, standardize=True):
    """Feature rows of one topic as a model consumes them."""
    return standardize_per_topic(topic.matrix) if standardize else topic.matrix


def training_data(topics, standardize=True):
    """Stack rows and grades of graded TopicFeatures."""
    topics = [topic for topic in topics if len(topic)]
    for topic in topics:
        if topic.grades is None:
            raise DataError(f'Topic `{topic.topic_id}` has no grades.')
    if not topics:
        raise DataError('No training rows.')
    X = np.vstack([model_inputs(topic, standardize) for topic in topics])
    y = np.concatenate([topic.grades for topic in topics])
    return X, y


def train_model(learner, topics, params=None, k=1000, gain='linear',
                standardize=True):
    """
    Fit one learner on graded TopicFeatures.

    :param str learner: 'linear', 'gbrt' or 'lambdamart'.
    :rtype: LinearModel or TreeEnsemble
    """
    params = params or GbmParams()
    if learner == 'linear':
        return fit_linear(*training_data(topics, standardize), standardize)
    if learner == 'gbrt':
        return fit_gbrt(*training_data(topics, standardize), params,
                        standardize)
    if learner == 'lambdamart':
        groups = [(model_inputs(topic, standardize), topic.grades)
                  for topic in topics if len(topic)]
        return fit_lambdamart(groups, params, k, gain, standardize)
    raise ParameterError(f'Unknown learner `{learner}`. Expected one of '
                         f'{list(LEARNERS)}.')


def _ranked(doc_ids, scores, baseline):
    order = sorted(range(len(doc_ids)),
                   key=lambda i: (-scores[i], -baseline[i], doc_ids[i]))
    return [ScoredDoc(doc_ids[i], float(scores[i]), rank)
            for rank, i in enumerate(order, start=1)]


def rerank(model, topic):
    """
    Order the candidates of one topic by model score.

    Ties by baseline score descending, then doc_id.

    :param TopicFeatures topic: Raw features of the candidates.
    :rtype: list
    """
    if not len(topic):
        return []
    scores = model.predict(model_inputs(topic, model.standardize))
    return _ranked(topic.doc_ids, scores, topic.baseline_scores)


def rerank_all(model, topics):
    """topic_id -> re-ranked ScoredDoc list."""
    return {topic.topic_id: rerank(model, topic) for topic in topics}


def linear_coefficients(model):
    """feature name -> weight of a linear model."""
    if not isinstance(model, LinearModel):
        raise ParameterError('Coefficients exist for linear models only.')
    return dict(zip(FEATURE_NAMES, (float(w) for w in model.weights)))


def single_feature_rankings(topics):
    """
    Rank every topic by each raw feature alone.

    :rtype: dict
    :return: feature name -> {topic_id -> ScoredDoc list}.
    """
    rankings = {}
    for column, name in enumerate(FEATURE_NAMES):
        rankings[name] = {
            topic.topic_id: _ranked(topic.doc_ids, topic.matrix[:, column],
                                    topic.baseline_scores)
            for topic in topics}
    return rankings


@dataclass(frozen=True)
class FoldRun:
    """Author sets of one cross-validation run."""

    number: int
    train: Tuple[str, ...]
    tune: Tuple[str, ...]
    test: Tuple[str, ...]

    def split(self, topics):
        """(train, tune, test) lists of items having an ``author_id``."""
        roles = ([], [], [])
        for topic in topics:
            for role, authors in zip(roles, (self.train, self.tune,
                                             self.test)):
                if topic.author_id in authors:
                    role.append(topic)
        return roles


@dataclass(frozen=True)
class FoldPlan:
    """Author partitions for rotated train/tune/test runs."""

    partitions: Tuple[Tuple[str, ...], ...]
    topic_counts: Tuple[int, ...] = ()

    @property
    def n_folds(self):
        """Number of partitions."""
        return len(self.partitions)

    def run(self, number):
        """Run i tests partition i, tunes on i+1 and trains on the rest."""
        n = self.n_folds
        if not 0 <= number < n:
            raise ParameterError(f'Fold run {number} out of range.')
        tune = (number + 1) % n
        train = tuple(author for i, part in enumerate(self.partitions)
                      if i not in (number, tune) for author in part)
        return FoldRun(number, tuple(sorted(train)),
                       self.partitions[tune], self.partitions[number])

    def runs(self):
        """Every rotation of the partitions."""
        return [self.run(number) for number in range(self.n_folds)]

    def to_dict(self):
        """JSON-ready form."""
        return {'partitions': [list(part) for part in self.partitions],
                'topic_counts': list(self.topic_counts)}


def make_author_folds(topics, n_folds=N_FOLDS, seed=0):
    """
    Partition authors so that topic counts are balanced.

    Authors are taken by descending topic count (equal counts in seeded
    random order) and each goes to the currently smallest partition.

    :param iterable topics: Items with an ``author_id``.
    :rtype: FoldPlan
    :raises DataError: Fewer authors than folds.
    """
    if n_folds < 2:
        raise ParameterError('n_folds must be >= 2.')
    counts = Counter(topic.author_id for topic in topics)
    if len(counts) < n_folds:
        raise DataError(f'{len(counts)} authors cannot fill {n_folds} '
                        f'folds.')

    authors = sorted(counts)
    random.Random(seed).shuffle(authors)
    authors.sort(key=lambda author: -counts[author])
    parts: List[List[str]] = [[] for _ in range(n_folds)]
    sizes = [0] * n_folds
    for author in authors:
        smallest = min(range(n_folds), key=lambda i: (sizes[i], i))
        parts[smallest].append(author)
        sizes[smallest] += counts[author]
    LOG.info('Author folds: topic counts %s', sizes)
    return FoldPlan(tuple(tuple(sorted(part)) for part in parts),
                    tuple(sizes))


def check_fold_hygiene(train, tune, test):
    """
    Assert that no topic or author is shared between roles.

    :raises DataError: Overlap found.
    """
    roles = {'train': train, 'tune': tune, 'test': test}
    seen_topics: Dict[str, str] = {}
    seen_authors: Dict[str, str] = {}
    for role, topics in roles.items():
        for topic in topics:
            for seen, key in ((seen_topics, topic.topic_id),
                              (seen_authors, topic.author_id)):
                if seen.get(key, role) != role:
                    raise DataError(f'`{key}` is in both {seen[key]} and '
                                    f'{role}.')
                seen[key] = role


def mean_tune_ndcg(qrels, k=1000, gain='linear'):
    """Tune metric: mean nDCG@k of a model over tune topics."""
    def metric(model, tune):
        values = [ndcg(rerank(model, topic), qrels, topic.topic_id, k, gain)
                  for topic in tune]
        return float(np.mean(values)) if values else 0.0
    return metric


@tracer
def grid_search(train, tune, grid, metric, learner='gbrt', base=None,
                k=1000, gain='linear', standardize=True):
    """
    Exhaustive grid search.

    :param list train: Graded TopicFeatures to fit on.
    :param list tune: TopicFeatures to score on.
    :param dict grid: Parameter name -> values.
    :param metric: Callable (model, tune) -> float, higher is better.
    :rtype: tuple
    :return: (best GbmParams, list of (GbmParams, metric value)).
    """
    cells = expand_grid(grid, base)
    scored = []
    best, best_value = None, None
    for params in cells:
        model = train_model(learner, train, params, k, gain, standardize)
        value = metric(model, tune)
        LOG.debug('Grid cell %s: %.6f', params, value)
        scored.append((params, value))
        if best_value is None or value > best_value:
            best, best_value = params, value
    LOG.info('Grid search %s: best %s (%.6f) of %d cells', learner, best,
             best_value, len(cells))
    return best, scored
