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

"""Shared fixtures: a hand-made collection and small synthetic settings."""

# pylint: disable=redefined-outer-name
# ^^^ this

import pytest

from profilerank.evaluation import Qrels
from profilerank.index import DocumentRecord, build_index
from profilerank.profile import Topic
from profilerank.synth import SynthConfig
from profilerank.textprep import AnalyzerConfig


@pytest.fixture
def analyzer():
    """
    Default analyzer: SMART stopwords, Porter stemming, multiword terms
    """
    return AnalyzerConfig()


@pytest.fixture
def corpus():
    """
    Five short physics documents
    """
    return [
        DocumentRecord('d1', 'Optical cavities',
                       'Cavity modes couple light. Optical cavity design.'),
        DocumentRecord('d2', 'Quantum dots',
                       'Quantum dot spectroscopy in optical cavities.'),
        DocumentRecord('d3', 'Nano-spheres',
                       'Optical trapping of gold nano-spheres.'),
        DocumentRecord('d4', 'Graphene',
                       'Electronic transport in graphene sheets.'),
        DocumentRecord('d5', 'Cold atoms',
                       'Trapping cold atoms with light.'),
    ]


@pytest.fixture
def index(corpus, analyzer):
    """
    Index of the five documents
    """
    return build_index(corpus, analyzer)


@pytest.fixture
def topics():
    """
    Two topics of two authors
    """
    return [
        Topic('T1', 'A1', {'a': 'I study optical cavities and quantum dots.',
                           'b': 'Cavity design for quantum optics.',
                           'c': '',
                           'd': 'Light in optical cavities.',
                           'e': 'optical cavity'}),
        Topic('T2', 'A2', {'a': 'Optical trapping of gold nano-spheres.',
                           'b': 'Trapping with light.',
                           'c': 'Cold atoms.',
                           'd': '',
                           'e': 'optical trapping nano-spheres'}),
    ]


@pytest.fixture
def qrels():
    """
    Graded judgments of both topics
    """
    return Qrels([('T1', 'd1', 3), ('T1', 'd2', 2), ('T1', 'd4', 0),
                  ('T2', 'd3', 3), ('T2', 'd5', 1), ('T2', 'd1', 0)])


@pytest.fixture
def synth_config():
    """
    Synthetic collection small enough for end-to-end tests
    """
    return SynthConfig(n_docs=160, n_topics=8, n_authors=5, vocab_size=600,
                       grade_cutoffs=(0.2, 0.5, 0.9), doc_length=(30, 80),
                       pool_size=40, vector_dim=8, seed=3)


@pytest.fixture
def fast_overrides():
    """
    Overrides that keep the cross-validated experiment quick
    """
    return ['retrieval.k=40',
            'eval.k=40',
            'learners.n_estimators=5',
            'learners.n_folds=3',
            'grid.learning_rate=[0.1]',
            'grid.max_depth=[2]',
            'grid.min_samples_leaf=[1]',
            'grid.max_features=[1.0]',
            'synth.n_docs=160',
            'synth.n_topics=8',
            'synth.n_authors=5',
            'synth.vocab_size=600',
            'synth.grade_cutoffs=[0.2, 0.5, 0.9]',
            'synth.doc_length=[30, 80]',
            'synth.pool_size=40',
            'synth.vector_dim=8']


if __name__ == '__main__':
    pass
