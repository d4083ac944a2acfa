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
Module with the pipeline stages.

Every stage reads its inputs from the configured paths or from artifacts
of earlier stages in the output directory, writes its own artifacts and
records parameters and file digests in the output manifest.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from os.path import isfile, join

import numpy as np

from profilerank.base import tracer, DataError, ParameterError
from profilerank.embed import load_vectors, train_sgns
from profilerank.evaluation import (MetricReport, best_report,
                                    evaluate_run, format_table, significance,
                                    upper_bound)
from profilerank.features import FEATURE_NAMES, extract_all, make_candidate
from profilerank.index import InvertedIndex, build_index
from profilerank.io_utils import (read_corpus, read_features, read_qrels,
                                  read_run, read_topics, require_artifact,
                                  update_manifest, write_features,
                                  write_features_csv, write_run)
from profilerank.ltr import (GbmParams, check_fold_hygiene, grid_search,
                             linear_coefficients, load_model,
                             make_author_folds, mean_tune_ndcg, rerank_all,
                             save_model, single_feature_rankings, train_model)
from profilerank.profile import (build_profile, criteria_overlap,
                                 export_graph, graph_stats, import_graph)
from profilerank.retrieval import run_baseline, sweep_lambda
from profilerank.textprep import analyze

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.experiment').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.experiment')

INDEX_NAME = 'index.json'
VECTORS_NAME = 'vectors.txt'
BASELINE = 'baseline'
PROFILES_DIR = 'profiles'
FEATURES_NAME = 'features.jsonl'
FEATURES_CSV = 'features.csv'
GRAPH_STATS_NAME = 'graph_stats.json'
LAMBDA_SWEEP_NAME = 'lambda_sweep.json'
REPORT_JSON = 'report.json'
REPORT_TXT = 'report.txt'


def run_name(name):
    """File name of a TREC run."""
    return f'run.{name}.txt'


def model_name(learner, fold=None):
    """File name of a model, optionally of one fold."""
    if fold is None:
        return f'model.{learner}.json'
    return f'model.{learner}.fold{fold}.json'


def _write_json(path, data):
    with open(path, 'w', encoding='utf-8') as fd:
        json.dump(data, fd, sort_keys=True, indent=2)
        fd.write('\n')


def _safe_name(name):
    return str(name).replace(os.sep, '_').replace('/', '_')


class Workspace:
    """
    Artifact locations of one configuration and similarity threshold.

    Index, vectors and the baseline run live in the output directory; the
    threshold-dependent artifacts of the main threshold too, those of
    other thresholds in a ``t<value>`` subdirectory.
    """

    def __init__(self, config, threshold=None, index=None):
        """
        :param ExperimentConfig config: Settings.
        :param float threshold: (optional) Similarity threshold, default the
            configured one.
        :param InvertedIndex index: (optional) Already loaded index.
        """
        self.config = config
        self.index = index
        self.output = config.paths.output
        main = config.profile.threshold
        self.threshold = main if threshold is None else threshold
        self.dir = self.output
        if self.threshold != main:
            self.dir = join(self.output, f't{self.threshold:g}')
        os.makedirs(self.dir, exist_ok=True)

    def __repr__(self):
        return f'<Workspace(dir={self.dir!r}, t={self.threshold})>'

    def shared(self, name):
        """Path of an artifact shared by every threshold."""
        return join(self.output, name)

    def local(self, name):
        """Path of an artifact of this threshold."""
        return join(self.dir, name)

    def stage(self, name):
        """Manifest key of a threshold-dependent stage."""
        if self.dir == self.output:
            return name
        return f'{name}@t{self.threshold:g}'

    def input_path(self, name):
        """Configured input path; ParameterError when unset."""
        path = getattr(self.config.paths, name)
        if not path:
            raise ParameterError(f'paths.{name} is not configured.')
        return path

    def profile_path(self, topic_id):
        """Profile graph file of one topic."""
        return join(self.dir, PROFILES_DIR, f'{_safe_name(topic_id)}.json')

    @property
    def cache_dir(self):
        """Download directory for http(s) inputs."""
        return self.config.paths.cache_dir


def load_index(workspace):
    """Index of the workspace, read from its artifact once."""
    if workspace.index is None:
        workspace.index = InvertedIndex.load(
            require_artifact(workspace.shared(INDEX_NAME), 'index'))
    return workspace.index


def load_baseline(workspace):
    """Baseline run written by the retrieve stage."""
    return read_run(require_artifact(workspace.shared(run_name(BASELINE)),
                                     'retrieve'))


def _topics(workspace):
    return read_topics(workspace.input_path('topics'), workspace.cache_dir)


def _qrels(workspace, required=True):
    if not workspace.config.paths.qrels:
        if required:
            raise ParameterError('paths.qrels is not configured.')
        return None
    return read_qrels(workspace.config.paths.qrels, workspace.cache_dir)


@tracer
def stage_index(workspace):
    """Analyze and index the corpus."""
    config = workspace.config
    corpus_path = workspace.input_path('corpus')
    analyzer = config.analyzer.build(workspace.cache_dir)
    index = build_index(read_corpus(corpus_path, workspace.cache_dir),
                        analyzer, config.jobs)
    path = workspace.shared(INDEX_NAME)
    index.save(path)
    workspace.index = index
    update_manifest(workspace.output, 'index',
                    {'analyzer': analyzer.to_dict()},
                    [corpus_path] if isfile(corpus_path) else [], [path])
    return index


@tracer
def stage_retrieve(workspace):
    """Baseline run, plus an optional smoothing sweep."""
    config = workspace.config
    index = load_index(workspace)
    topics = _topics(workspace)
    run = run_baseline(topics, index, config.retrieval.params())
    path = workspace.shared(run_name(BASELINE))
    write_run(path, run, BASELINE)
    outputs = [path]

    qrels = _qrels(workspace, required=False)
    if config.retrieval.sweep and qrels is not None:
        sweep = sweep_lambda(topics, index, qrels, config.retrieval.sweep,
                             config.retrieval.k, config.eval.gain)
        sweep_path = workspace.shared(LAMBDA_SWEEP_NAME)
        _write_json(sweep_path, {repr(key): value
                                 for key, value in sweep.items()})
        outputs.append(sweep_path)

    update_manifest(workspace.output, 'retrieve',
                    {'jm_lambda': config.retrieval.jm_lambda,
                     'k': config.retrieval.k,
                     'sweep': list(config.retrieval.sweep)},
                    [workspace.shared(INDEX_NAME),
                     workspace.input_path('topics')], outputs)
    return run


@tracer
def stage_embed(workspace):
    """Load pretrained vectors or train them on the indexed corpus."""
    config = workspace.config
    path = workspace.shared(VECTORS_NAME)
    source = config.paths.vectors
    if source:
        model = load_vectors(source, workspace.cache_dir)
        params = {'source': source}
        inputs = [source] if isfile(source) else []
    else:
        index = load_index(workspace)
        analyzer = index.analyzer.without_multiword()
        corpus_path = workspace.input_path('corpus')
        corpus = (analyze(record.text, analyzer)
                  for record in read_corpus(corpus_path, workspace.cache_dir))
        model = train_sgns(corpus, config.embed)
        params = {'train': asdict(config.embed)}
        inputs = [workspace.shared(INDEX_NAME)]
    model.save(path)
    update_manifest(workspace.output, 'embed', params, inputs, [path])
    return model


@tracer
def stage_profile(workspace, dot=False):
    """
    Build and store the profile graph of every topic.

    :param Workspace workspace: Artifact locations.
    :param bool dot: (optional) Also write Graphviz DOT files.
    :rtype: dict
    :return: Graph statistics summary.
    """
    config = workspace.config
    index = load_index(workspace)
    vectors = load_vectors(require_artifact(workspace.shared(VECTORS_NAME),
                                            'embed'))
    profile_config = config.profile.config(workspace.threshold)
    os.makedirs(workspace.local(PROFILES_DIR), exist_ok=True)

    outputs = []
    stats = {}
    for topic in _topics(workspace):
        graph = build_profile(topic, index, vectors, profile_config)
        path = workspace.profile_path(topic.topic_id)
        with open(path, 'w', encoding='utf-8') as fd:
            fd.write(export_graph(graph, 'json'))
        outputs.append(path)
        if dot:
            dot_path = path[:-len('.json')] + '.dot'
            with open(dot_path, 'w', encoding='utf-8') as fd:
                fd.write(export_graph(graph, 'dot'))
            outputs.append(dot_path)
        stats[topic.topic_id] = dict(graph_stats(graph).to_dict(),
                                     criteria_overlap=criteria_overlap(graph))

    summary = {'threshold': workspace.threshold,
               'per_topic': stats,
               'mean_average_degree': float(np.mean(
                   [item['average_degree'] for item in stats.values()]))
               if stats else 0.0}
    stats_path = workspace.local(GRAPH_STATS_NAME)
    _write_json(stats_path, summary)
    LOG.info('Profiles at t=%s: mean average degree %.4f',
             workspace.threshold, summary['mean_average_degree'])
    update_manifest(workspace.output, workspace.stage('profile'),
                    {'threshold': profile_config.threshold,
                     'expansion_n': profile_config.expansion_n},
                    [workspace.shared(INDEX_NAME),
                     workspace.shared(VECTORS_NAME)],
                    outputs + [stats_path])
    return summary


_WORKER_STATE = {}


def _init_worker(index):
    _WORKER_STATE['index'] = index


def _topic_features(task):
    topic_id, author_id, graph_text, ranking, records = task
    index = _WORKER_STATE['index']
    graph = import_graph(graph_text)
    candidates = [make_candidate(record, index.analyzer, item.score)
                  for item, record in zip(ranking, records)]
    result = extract_all(graph, candidates, ranking, index)
    result.topic_id = topic_id
    result.author_id = author_id
    return result


@tracer
def stage_features(workspace):
    """Feature rows of every baseline candidate, graded when qrels exist."""
    config = workspace.config
    index = load_index(workspace)
    run = load_baseline(workspace)
    topics = _topics(workspace)
    qrels = _qrels(workspace, required=False)
    wanted = {item.doc_id for ranking in run.values() for item in ranking}
    records = {record.doc_id: record
               for record in read_corpus(workspace.input_path('corpus'),
                                         workspace.cache_dir)
               if record.doc_id in wanted}

    tasks = []
    for topic in topics:
        path = require_artifact(workspace.profile_path(topic.topic_id),
                                workspace.stage('profile'))
        with open(path, encoding='utf-8') as fd:
            graph_text = fd.read()
        ranking = run.get(topic.topic_id, [])
        missing = [item.doc_id for item in ranking
                   if item.doc_id not in records]
        if missing:
            raise DataError(f'Run documents not in corpus: {missing[:5]}')
        tasks.append((topic.topic_id, topic.author_id, graph_text, ranking,
                      [records[item.doc_id] for item in ranking]))

    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs,
                                 initializer=_init_worker,
                                 initargs=(index,)) as pool:
            result = list(pool.map(_topic_features, tasks))
    else:
        _init_worker(index)
        result = [_topic_features(task) for task in tasks]
    if qrels is not None:
        result = [item.with_grades(qrels) for item in result]

    path = workspace.local(FEATURES_NAME)
    csv_path = workspace.local(FEATURES_CSV)
    write_features(path, result)
    write_features_csv(csv_path, result)
    LOG.info('Features for %d topics, %d rows', len(result),
             sum(len(item) for item in result))
    update_manifest(workspace.output, workspace.stage('features'),
                    {'features': list(FEATURE_NAMES)},
                    [workspace.shared(run_name(BASELINE))]
                    + [workspace.profile_path(topic.topic_id)
                       for topic in topics],
                    [path, csv_path])
    return result


def load_features(workspace, graded=False):
    """
    Read feature rows of the workspace.

    :raises DataError: Grades required but missing.
    """
    topics = read_features(require_artifact(workspace.local(FEATURES_NAME),
                                            workspace.stage('features')))
    if graded and any(item.grades is None for item in topics):
        raise DataError('Feature rows carry no grades; configure paths.qrels '
                        'and re-run the features stage.')
    return topics


def default_params(config):
    """Ensemble parameters used outside grid search."""
    return GbmParams(n_estimators=config.learners.n_estimators,
                     seed=config.seed)


@tracer
def stage_train(workspace, learner):
    """Fit one learner on every graded topic."""
    config = workspace.config
    topics = load_features(workspace, graded=True)
    model = train_model(learner, topics, default_params(config),
                        config.eval.k, config.eval.gain,
                        config.learners.standardize)
    path = workspace.local(model_name(learner))
    save_model(model, path)
    update_manifest(workspace.output, workspace.stage(f'train.{learner}'),
                    {'learner': learner,
                     'params': default_params(config).to_dict(),
                     'standardize': config.learners.standardize},
                    [workspace.local(FEATURES_NAME)], [path])
    return model


def _complete(run, baseline):
    for topic_id in baseline:
        run.setdefault(topic_id, [])
    return run


@tracer
def stage_rerank(workspace, learner, model_path=None):
    """Re-rank the baseline candidates with a stored model."""
    model_path = model_path or workspace.local(model_name(learner))
    model = load_model(require_artifact(model_path,
                                        workspace.stage(f'train.{learner}')))
    run = _complete(rerank_all(model, load_features(workspace)),
                    load_baseline(workspace))
    path = workspace.local(run_name(learner))
    write_run(path, run, learner)
    update_manifest(workspace.output, workspace.stage(f'rerank.{learner}'),
                    {'learner': learner},
                    [model_path, workspace.local(FEATURES_NAME)], [path])
    return run


def evaluate_runs(runs, qrels, config):
    """
    Reports of named runs plus the upper bound, with significance.

    :param dict runs: name -> run, the baseline first.
    :rtype: list
    """
    options = {'k': config.eval.k, 'gain': config.eval.gain,
               'exclude_unjudged_topics': config.eval.exclude_unjudged_topics}
    reports = [evaluate_run(name, run, qrels, **options)
               for name, run in runs.items()]
    reports.append(upper_bound(runs[BASELINE], qrels, **options))
    significance(reports, reports[0])
    best = best_report(reports)
    if best is not None:
        significance(reports, best)
    return reports


def write_report(workspace, reports, extra=None):
    """Write report.json and report.txt of a workspace."""
    config = workspace.config
    best = best_report(reports)
    data = {'reports': [report.to_dict() for report in reports],
            'best': best.name if best else None,
            'alpha': config.eval.alpha}
    data.update(extra or {})
    json_path = workspace.local(REPORT_JSON)
    txt_path = workspace.local(REPORT_TXT)
    _write_json(json_path, data)

    text = format_table(reports, BASELINE, config.eval.alpha, best)
    for title, section in _text_sections(data):
        text += f'\n{title}\n' + section
    with open(txt_path, 'w', encoding='utf-8') as fd:
        fd.write(text)
    return json_path, txt_path


def _text_sections(data):
    if data.get('best_threshold'):
        lines = [f'{name:<24} t={value:g}'
                 for name, value in sorted(data['best_threshold'].items())]
        yield 'Best similarity threshold', '\n'.join(lines) + '\n'
    if data.get('ablation'):
        lines = [f'{name:<24} {values["ndcg"]:9.4f} {values["bpref"]:9.4f}'
                 for name, values in data['ablation'].items()]
        yield 'Single-feature rankings', '\n'.join(lines) + '\n'
    if data.get('linear_coefficients'):
        lines = [f'{name:<24} {value:+.6f}'
                 for name, value in data['linear_coefficients'].items()]
        yield 'Linear model coefficients', '\n'.join(lines) + '\n'


@tracer
def stage_evaluate(workspace, names=None):
    """Evaluate the baseline and the stored re-ranked runs."""
    config = workspace.config
    qrels = _qrels(workspace)
    runs = {BASELINE: load_baseline(workspace)}
    candidates = names or config.learners.enabled
    for name in candidates:
        path = workspace.local(run_name(name))
        if isfile(path):
            runs[name] = read_run(path)
        elif names:
            require_artifact(path, workspace.stage(f'rerank.{name}'))
    reports = evaluate_runs(runs, qrels, config)
    outputs = write_report(workspace, reports)
    update_manifest(workspace.output, workspace.stage('evaluate'),
                    {'k': config.eval.k, 'gain': config.eval.gain,
                     'exclude_unjudged_topics':
                         config.eval.exclude_unjudged_topics},
                    [workspace.shared(run_name(BASELINE))]
                    + [workspace.local(run_name(name)) for name in runs
                       if name != BASELINE], list(outputs))
    return reports


@tracer
def cross_validate(workspace, topics, features, qrels):
    """
    Author-partitioned cross-validation of every enabled learner.

    Tree learners are tuned by grid search on the tune partition of each
    run. Runs are written per learner.

    :rtype: dict
    :return: learner -> {'run': run, 'params': per-fold best params,
        'coefficients': per-fold linear weights}.
    """
    config = workspace.config
    plan = make_author_folds(topics, config.learners.n_folds, config.seed)
    metric = mean_tune_ndcg(qrels, config.eval.k, config.eval.gain)
    options = {'k': config.eval.k, 'gain': config.eval.gain,
               'standardize': config.learners.standardize}
    result = {}
    for learner in config.learners.enabled:
        run, chosen, coefficients = {}, [], []
        for fold in plan.runs():
            train, tune, test = fold.split(features)
            check_fold_hygiene(train, tune, test)
            if learner == 'linear':
                model = train_model(learner, train, **options)
                coefficients.append(linear_coefficients(model))
            else:
                params, _ = grid_search(train, tune, config.grid, metric,
                                        learner, default_params(config),
                                        **options)
                chosen.append(params.to_dict())
                model = train_model(learner, train, params, **options)
            save_model(model, workspace.local(model_name(learner,
                                                         fold.number)))
            run.update(rerank_all(model, test))
            LOG.info('%s fold %d: %d test topics', learner, fold.number,
                     len(test))
        write_run(workspace.local(run_name(learner)), run, learner)
        result[learner] = {'run': run, 'params': chosen,
                           'coefficients': coefficients}
    return result, plan


def ablation(features, qrels, config):
    """Mean metrics of ranking by each feature alone."""
    result = {}
    for name, run in single_feature_rankings(features).items():
        report = evaluate_run(name, run, qrels, config.eval.k,
                              config.eval.gain,
                              config.eval.exclude_unjudged_topics)
        result[name] = report.means
    return result


def _mean_coefficients(folds):
    if not folds:
        return {}
    return {name: float(np.mean([fold[name] for fold in folds]))
            for name in FEATURE_NAMES}


@tracer
def run_threshold(config, threshold, baseline, topics, qrels, index=None):
    """Profiles, features, cross-validation and report for one threshold."""
    workspace = Workspace(config, threshold, index)
    stats = stage_profile(workspace)
    features = stage_features(workspace)
    learned, plan = cross_validate(workspace, topics, features, qrels)

    runs = {BASELINE: baseline}
    for learner in config.learners.enabled:
        runs[learner] = _complete(learned[learner]['run'], baseline)
    reports = evaluate_runs(runs, qrels, config)
    extra = {'threshold': threshold,
             'folds': plan.to_dict(),
             'ablation': ablation(features, qrels, config),
             'linear_coefficients': _mean_coefficients(
                 learned.get('linear', {}).get('coefficients', [])),
             'tuned_params': {learner: learned[learner]['params']
                              for learner in learned},
             'mean_average_degree': stats['mean_average_degree']}
    outputs = write_report(workspace, reports, extra)
    update_manifest(workspace.output, workspace.stage('experiment'),
                    {'threshold': threshold,
                     'learners': list(config.learners.enabled),
                     'grid': {key: list(values)
                              for key, values in config.grid.items()},
                     'n_folds': config.learners.n_folds,
                     'seed': config.seed},
                    [workspace.local(FEATURES_NAME)],
                    [workspace.local(run_name(learner))
                     for learner in config.learners.enabled]
                    + list(outputs))
    return reports, extra


def _pick_best(per_threshold):
    """Reports of every method at the threshold of its best mean nDCG."""
    best_threshold = {}
    chosen = {}
    for threshold, reports in per_threshold.items():
        for report in reports:
            current = chosen.get(report.name)
            if current is None or report.mean('ndcg') > current.mean('ndcg'):
                chosen[report.name] = report
                best_threshold[report.name] = threshold
    order = [report.name for report in next(iter(per_threshold.values()))]
    return [chosen[name] for name in order], best_threshold


@tracer
def run_experiment(config):
    """
    Run the full experiment.

    Index, baseline and embeddings first, then profiles, features and
    cross-validated re-rankers for every configured threshold. With more than one threshold the top-level report shows each method at
    its best threshold.

    :param ExperimentConfig config: Settings.
    :rtype: list
    :return: MetricReport rows of the top-level report.
    """
    main = Workspace(config)
    stage_index(main)
    baseline = stage_retrieve(main)
    stage_embed(main)
    topics = _topics(main)
    qrels = _qrels(main)

    per_threshold = {}
    extras = {}
    for threshold in config.profile.thresholds:
        reports, extra = run_threshold(config, threshold, baseline, topics,
                                       qrels, main.index)
        per_threshold[threshold] = reports
        extras[threshold] = extra

    if len(per_threshold) == 1:
        return per_threshold[config.profile.threshold]

    reports, best_threshold = _pick_best(per_threshold)
    reports = [MetricReport(report.name, report.per_topic)
               for report in reports]
    significance(reports, reports[0])
    best = best_report(reports)
    if best is not None:
        significance(reports, best)
    extra = dict(extras[config.profile.threshold])
    extra['best_threshold'] = best_threshold
    extra['thresholds'] = {
        repr(threshold): {report.name: report.means for report in rows}
        for threshold, rows in per_threshold.items()}
    extra['mean_average_degree'] = {
        repr(threshold): extras[threshold]['mean_average_degree']
        for threshold in per_threshold}
    write_report(main, reports, extra)
    LOG.info('Best thresholds: %s', best_threshold)
    return reports
