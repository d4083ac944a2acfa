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

"""Tests for profilerank.config module."""

# pylint: disable=redefined-outer-name
# ^^^ this

import pytest

from profilerank.base import ParameterError
from profilerank.config import (ExperimentConfig, ProfileSettings,
                                load_config, parse_value)
from profilerank.ltr import DEFAULT_GRID, LEARNERS

CONFIG_TOML = '''
seed = 7

[paths]
corpus = "data/corpus.jsonl"
topics = "data/topics.jsonl"
output = "out"

[analyzer]
level = "stop"
extract_multiword = false

[retrieval]
jm_lambda = 0.4
k = 200
sweep = [0.2, 0.4]

[profile]
threshold = 0.3
sweep = [0.1, 0.3, 0.7]

[learners]
enabled = ["linear", "gbrt"]
n_estimators = 20

[grid]
learning_rate = [0.05]
max_depth = [2, 3]

[eval]
gain = "exponential"
k = 100
'''


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'experiment.toml'
    path.write_text(CONFIG_TOML, encoding='utf-8')
    return path


def test_defaults():
    """
    Built-in defaults
    """
    config = load_config()
    assert config == ExperimentConfig()
    assert config.retrieval.jm_lambda == 0.6
    assert config.retrieval.k == 1000
    assert config.profile.threshold == 0.5
    assert config.profile.expansion_n == 10
    assert config.learners.enabled == LEARNERS
    assert config.learners.n_folds == 5
    assert config.grid == {key: tuple(values)
                           for key, values in DEFAULT_GRID.items()}
    assert config.eval.gain == 'linear'
    assert config.embed.dim == 320
    assert config.paths.output == 'output'


def test_load_toml(config_file):
    """
    File values replace defaults section by section
    """
    config = load_config(config_file)
    assert config.seed == 7
    assert config.paths.corpus == 'data/corpus.jsonl'
    assert config.paths.qrels is None
    assert config.analyzer.level == 'stop'
    assert config.retrieval.params().jm_lambda == 0.4
    assert config.retrieval.sweep == (0.2, 0.4)
    assert config.profile.thresholds == (0.3, 0.1, 0.7)
    assert config.learners.enabled == ('linear', 'gbrt')
    assert config.learners.n_folds == 5
    assert config.grid == {'learning_rate': (0.05,), 'max_depth': (2, 3)}
    assert config.eval.gain == 'exponential'
    assert config.eval.k == 100
    analyzer = config.analyzer.build()
    assert analyzer.stem is False
    assert analyzer.extract_multiword is False


def test_overrides(config_file):
    """
    Overrides parse TOML values and win over the file
    """
    config = load_config(config_file, [
        'retrieval.k=50', 'learners.enabled=["lambdamart"]',
        'eval.gain=linear', 'profile.sweep=[]', 'jobs=2',
        'paths.qrels = data/qrels.txt'])
    assert config.retrieval.k == 50
    assert config.retrieval.jm_lambda == 0.4
    assert config.learners.enabled == ('lambdamart',)
    assert config.eval.gain == 'linear'
    assert config.profile.thresholds == (0.3,)
    assert config.jobs == 2
    assert config.paths.qrels == 'data/qrels.txt'


def test_grid_max_features_types():
    """
    An integer count and a float fraction stay distinct
    """
    config = load_config(None, ['grid.max_features=[1, 1.0, 0.5]'])
    values = config.grid['max_features']
    assert values == (1, 1.0, 0.5)
    assert [type(value) for value in values] == [int, float, float]


def test_parse_value():
    """
    TOML scalars and arrays, plain strings otherwise
    """
    assert parse_value('3') == 3
    assert parse_value('0.25') == 0.25
    assert parse_value('true') is True
    assert parse_value('[1, 2]') == [1, 2]
    assert parse_value('"quoted"') == 'quoted'
    assert parse_value('plain') == 'plain'
    assert parse_value('http://host/x.txt') == 'http://host/x.txt'


@pytest.mark.parametrize('overrides', [
    ['retrieval.mu=0.5'],
    ['network.host=x'],
    ['retrieval.k'],
    ['=3'],
    ['retrieval.k=abc'],
    ['retrieval.jm_lambda=1.5'],
    ['analyzer.level=lemma'],
    ['learners.enabled=["svm"]'],
    ['learners.n_folds=2'],
    ['profile.sweep=[0.1, 2.0]'],
    ['eval.gain=cubic'],
    ['eval.alpha=0'],
    ['grid.max_depth=3'],
    ['grid.max_depth=[]'],
    ['jobs=0'],
    ['retrieval.k.deep=1'],
])
def test_invalid_settings(overrides):
    """
    Unknown keys and invalid values
    """
    with pytest.raises(ParameterError):
        load_config(None, overrides)


def test_broken_toml(tmp_path):
    """
    Unparseable files are parameter errors
    """
    path = tmp_path / 'broken.toml'
    path.write_text('[retrieval\nk = 1\n', encoding='utf-8')
    with pytest.raises(ParameterError):
        load_config(path)


def test_profile_thresholds():
    """
    The main threshold runs first, duplicates dropped
    """
    settings = ProfileSettings(threshold=0.5, sweep=[0.1, 0.5, 0.7])
    assert settings.thresholds == (0.5, 0.1, 0.7)
    assert settings.config().threshold == 0.5
    assert settings.config(0.7).threshold == 0.7


def test_dict_round_trip(config_file):
    """
    Dictionary form rebuilds the same configuration
    """
    config = load_config(config_file)
    data = config.to_dict()
    assert data['grid'] == {'learning_rate': [0.05], 'max_depth': [2, 3]}
    assert ExperimentConfig.from_dict(data) == config


def test_custom_stopwords(tmp_path):
    """
    A stopword file replaces the SMART list
    """
    path = tmp_path / 'stop.txt'
    path.write_text('# custom\nfoo\nbar\n', encoding='utf-8')
    config = load_config(None, [f'analyzer.stopwords="{path}"'])
    analyzer = config.analyzer.build()
    assert 'foo' in analyzer.stopword_list
    assert 'the' not in analyzer.stopword_list


if __name__ == '__main__':
    pass
