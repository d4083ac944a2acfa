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

"""Module with the author-topic profile graph."""

import itertools
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Mapping

import networkx as nx

from profilerank.base import tracer, DataError, ParameterError
from profilerank.textprep import analyze

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.profile').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.profile')

FIELDS = ('a', 'b', 'c', 'd', 'e')
THRESHOLDS = (0.1, 0.3, 0.5, 0.7)
CRITERIA = ('frequency', 'kldiv', 'degree')

# Node types
AUTHOR = 'author'
TOPIC = 'topic'
DOCUMENT = 'document'
TERM = 'term'

# Edge types
HAS_TOPIC = 'has_topic'
HAS_FIELD = 'has_field'
IS_IN = 'is_in'
SIMILAR_TO = 'similar_to'

_DOT_STYLE = {AUTHOR: ('ellipse', 'gold'),
              TOPIC: ('ellipse', 'red'),
              DOCUMENT: ('box', 'blue'),
              TERM: ('ellipse', 'green')}


@dataclass(frozen=True)
class Topic:
    """Information need of one author: free-text fields a to e."""

    topic_id: str
    author_id: str
    fields: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        missing = [name for name in FIELDS if name not in self.fields]
        if missing:
            raise DataError(f'Topic `{self.topic_id}` misses fields {missing}.')
        object.__setattr__(self, 'fields',
                           {name: self.fields[name] or '' for name in FIELDS})


@dataclass
class TermNode:
    """Profile term: occurrence count over the topic fields and importance."""

    word: str
    frequency: int = 0
    kldiv: float = 0.0

    @property
    def is_expansion(self):
        """Term added by embedding expansion only."""
        return self.frequency == 0


@dataclass(frozen=True)
class ProfileConfig:
    """Similarity threshold and neighbors per topic term."""

    threshold: float = 0.5
    expansion_n: int = 10

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ParameterError(f'threshold must be in [0, 1], '
                                 f'got {self.threshold}.')
        if self.expansion_n < 1:
            raise ParameterError('expansion_n must be >= 1.')


def term_node_id(word):
    """Graph node id of a term."""
    return f'term:{word}'


def doc_node_id(name):
    """Graph node id of a topic field document."""
    return f'doc:{name}'


class ProfileGraph:
    """
    Typed, weighted author-topic graph.

    Backed by a :class:`networkx.DiGraph`. ``is_in`` edges point from a term
    to a document. ``similar_to`` edges are undirected and stored as two
    arcs with the same weight.
    """

    def __init__(self, graph=None):
        """
        Wrap an existing graph or start an empty one.

        :param networkx.DiGraph graph: (optional) Graph with typed nodes and
            edges.
        """
        self.graph = graph if graph is not None else nx.DiGraph()

    @classmethod
    def for_topic(cls, topic):
        """Skeleton graph: author, topic and five field-document nodes."""
        profile = cls()
        author = f'author:{topic.author_id}'
        topic_node = f'topic:{topic.topic_id}'
        profile.graph.add_node(author, type=AUTHOR, author_id=topic.author_id)
        profile.graph.add_node(topic_node, type=TOPIC, topic_id=topic.topic_id)
        profile.graph.add_edge(author, topic_node, type=HAS_TOPIC, weight=None)
        for name in FIELDS:
            doc = doc_node_id(name)
            profile.graph.add_node(doc, type=DOCUMENT, field=name)
            profile.graph.add_edge(topic_node, doc, type=HAS_FIELD, weight=None)
        return profile

    def __eq__(self, other):
        if not isinstance(other, ProfileGraph):
            return NotImplemented
        return (dict(self.graph.nodes(data=True))
                == dict(other.graph.nodes(data=True))
                and {(u, v): d for u, v, d in self.graph.edges(data=True)}
                == {(u, v): d for u, v, d in other.graph.edges(data=True)})

    def __repr__(self):
        return (f'<ProfileGraph(terms={len(self.term_nodes)}, '
                f'is_in={len(self.is_in_edges())}, '
                f'similar_to={len(self.similar_to_edges())})>')

    def copy(self):
        """Deep copy."""
        return ProfileGraph(self.graph.copy())

    @property
    def topic_id(self):
        """Id of the topic the graph profiles."""
        for _, data in self.nodes_of_type(TOPIC):
            return data['topic_id']
        return None

    def nodes_of_type(self, node_type):
        """(node id, attributes) pairs of one type, sorted by id."""
        return sorted((node, data) for node, data in self.graph.nodes(data=True)
                      if data['type'] == node_type)

    @property
    def term_nodes(self) -> Dict[str, TermNode]:
        """word -> TermNode."""
        return {data['word']: TermNode(data['word'], data['frequency'],
                                       data['kldiv'])
                for _, data in self.nodes_of_type(TERM)}

    def has_term(self, word):
        """Whether the word is a term node."""
        return self.graph.has_node(term_node_id(word))

    def add_term(self, word, frequency=0, kldiv=0.0):
        """Add or update a term node."""
        self.graph.add_node(term_node_id(word), type=TERM, word=word,
                            frequency=int(frequency), kldiv=float(kldiv))

    def add_is_in(self, word, doc, weight):
        """Term to field document edge."""
        self.graph.add_edge(term_node_id(word), doc, type=IS_IN,
                            weight=float(weight))

    def add_similar_to(self, word1, word2, weight):
        """Symmetric similarity edge between two terms."""
        if word1 == word2:
            raise ParameterError('similar_to self-loops are not allowed.')
        node1, node2 = term_node_id(word1), term_node_id(word2)
        self.graph.add_edge(node1, node2, type=SIMILAR_TO, weight=float(weight))
        self.graph.add_edge(node2, node1, type=SIMILAR_TO, weight=float(weight))

    def is_in_edges(self):
        """(term node, doc node, weight) triples, sorted."""
        return sorted((u, v, d['weight'])
                      for u, v, d in self.graph.edges(data=True)
                      if d['type'] == IS_IN)

    def similar_to_edges(self):
        """Undirected (term node, term node, weight) triples, u < v."""
        return sorted((u, v, d['weight'])
                      for u, v, d in self.graph.edges(data=True)
                      if d['type'] == SIMILAR_TO and u < v)

    def degree(self, node):
        """Incident is_in and similar_to edges (similar_to counted once)."""
        count = 0
        for _, _, data in self.graph.out_edges(node, data=True):
            if data['type'] in (IS_IN, SIMILAR_TO):
                count += 1
        for _, _, data in self.graph.in_edges(node, data=True):
            if data['type'] == IS_IN:
                count += 1
        return count


def kld_term_score(term, fg_counts, bg):
    """
    Pointwise Kullback-Leibler contribution of one term.

    p_fg * ln(p_fg / p_bg) with p_fg from the foreground counts and p_bg
    from the index background model. Negative when the term is less
    prominent in the foreground than in the collection.

    :param str term: Term occurring in the foreground.
    :param dict fg_counts: term -> count.
    :param InvertedIndex bg: Background collection.
    :rtype: float
    :raises DataError: Empty foreground.
    :raises ParameterError: Term does not occur in the foreground.
    """
    total = sum(fg_counts.values())
    if total <= 0:
        raise DataError('Foreground is empty.')
    count = fg_counts.get(term, 0)
    if count <= 0:
        raise ParameterError(f'Term `{term}` does not occur in the '
                             f'foreground.')
    p_fg = count / total
    p_bg = bg.background_prob(term)
    return p_fg * math.log(p_fg / p_bg)


@tracer
def build_profile(topic, index, embeddings, config):
    """
    Build the author-topic graph of one topic.

    :param Topic topic: Topic with fields a to e.
    :param InvertedIndex index: Collection for idf and background model;
        its analyzer processes the fields.
    :param EmbeddingModel embeddings: Term similarity model, may be None.
    :param ProfileConfig config: Threshold and expansion size.
    :rtype: ProfileGraph
    :raises DataError: All topic fields are empty.
    """
    field_counts = {name: Counter(analyze(topic.fields[name], index.analyzer))
                    for name in FIELDS}
    totals = Counter()
    for counts in field_counts.values():
        totals.update(counts)
    if not totals:
        LOG.error('Topic %s has no terms after analysis', topic.topic_id)
        raise DataError(f'Topic `{topic.topic_id}` has only empty fields.')

    profile = ProfileGraph.for_topic(topic)
    for word in sorted(totals):
        profile.add_term(word, totals[word], kld_term_score(word, totals,
                                                            index))
    for name in FIELDS:
        for word in sorted(field_counts[name]):
            profile.add_is_in(word, doc_node_id(name),
                              field_counts[name][word] * index.idf(word))

    if embeddings is None:
        LOG.warning('No embeddings given, topic %s is not expanded',
                    topic.topic_id)
        return profile

    skipped = 0
    for word in sorted(totals):
        if word not in embeddings:
            skipped += 1
            continue
        for other, _ in embeddings.most_similar(word, config.expansion_n):
            pair = sorted((word, other))
            weight = embeddings.cosine(pair[0], pair[1])
            if weight <= config.threshold:
                continue
            if not profile.has_term(other):
                profile.add_term(other, 0, 0.0)
            profile.add_similar_to(word, other, weight)
    if skipped:
        LOG.debug('Topic %s: %d terms without embedding', topic.topic_id,
                  skipped)
    LOG.info('Topic %s: %r', topic.topic_id, profile)
    return profile


@dataclass(frozen=True)
class GraphStats:
    """Node and edge counts by type plus average degree."""

    nodes: Dict[str, int]
    edges: Dict[str, int]
    average_degree: float

    def to_dict(self):
        """JSON-ready form."""
        return {'nodes': dict(self.nodes), 'edges': dict(self.edges),
                'average_degree': self.average_degree}


def graph_stats(graph):
    """
    Count nodes and edges by type.

    Average degree is (2 * similar_to + is_in) / (term + document nodes).

    :rtype: GraphStats
    """
    nodes = Counter(data['type'] for _, data in graph.graph.nodes(data=True))
    edges = Counter(data['type'] for _, _, data in graph.graph.edges(data=True))
    edges[SIMILAR_TO] //= 2
    counted = nodes[TERM] + nodes[DOCUMENT]
    degree = 0.0
    if counted:
        degree = (2 * edges[SIMILAR_TO] + edges[IS_IN]) / counted
    return GraphStats({key: nodes[key] for key in sorted(nodes)},
                      {key: edges[key] for key in sorted(edges)}, degree)


def top_terms(graph, criterion, n=10):
    """
    Rank term nodes by frequency, kldiv or degree.

    Descending, ties by word.

    :rtype: list
    :raises ParameterError: Unknown criterion or n < 1.
    """
    if criterion not in CRITERIA:
        raise ParameterError(f'Unknown criterion `{criterion}`. '
                             f'Expected one of {list(CRITERIA)}.')
    if n < 1:
        raise ParameterError('n must be >= 1.')

    def value(node):
        if criterion == 'degree':
            return graph.degree(term_node_id(node.word))
        return getattr(node, criterion)

    nodes = graph.term_nodes.values()
    ranked = sorted(nodes, key=lambda node: (-value(node), node.word))
    return [node.word for node in ranked[:n]]


def criteria_overlap(graph, n=10):
    """Mean number of shared top-n terms over the pairs of criteria."""
    tops = {criterion: set(top_terms(graph, criterion, n))
            for criterion in CRITERIA}
    shared = [len(tops[first] & tops[second])
              for first, second in itertools.combinations(CRITERIA, 2)]
    return sum(shared) / len(shared)


_NODE_KEYS = ('word', 'frequency', 'kldiv', 'field', 'author_id', 'topic_id',
              'doc_id')


def _export_json(graph):
    nodes = []
    for node, data in sorted(graph.graph.nodes(data=True)):
        item = {'id': node, 'type': data['type']}
        item.update({key: data[key] for key in _NODE_KEYS if key in data})
        nodes.append(item)
    edges = []
    for src, dst, data in sorted(graph.graph.edges(data=True)):
        if data['type'] == SIMILAR_TO and src > dst:
            continue
        edges.append({'src': src, 'dst': dst, 'type': data['type'],
                      'weight': data['weight']})
    return json.dumps({'nodes': nodes, 'edges': edges}, sort_keys=True,
                      indent=1) + '\n'


def _quote(text):
    return '"%s"' % str(text).replace('\\', '\\\\').replace('"', '\\"')


def _export_dot(graph):
    lines = ['digraph profile {']
    for node, data in sorted(graph.graph.nodes(data=True)):
        shape, color = _DOT_STYLE.get(data['type'], ('ellipse', 'gray'))
        label = data.get('word') or data.get('field') or data.get('doc_id') \
            or node
        lines.append(f'  {_quote(node)} [shape={shape}, color={color}, '
                     f'label={_quote(label)}];')
    for src, dst, data in sorted(graph.graph.edges(data=True)):
        attrs = [f'type={_quote(data["type"])}']
        if data['type'] == SIMILAR_TO:
            if src > dst:
                continue
            attrs.append('dir=both')
        if data['weight'] is not None:
            attrs.append(f'label={_quote(format(data["weight"], ".4f"))}')
        lines.append(f'  {_quote(src)} -> {_quote(dst)} [{", ".join(attrs)}];')
    lines.append('}')
    return '\n'.join(lines) + '\n'


def export_graph(graph, fmt='json'):
    """
    Render a graph as JSON or Graphviz DOT text.

    :param ProfileGraph graph: Graph to export.
    :param str fmt: (optional) 'json' or 'dot'.
    :rtype: str
    """
    if fmt == 'json':
        return _export_json(graph)
    if fmt == 'dot':
        return _export_dot(graph)
    raise ParameterError(f'Unknown export format `{fmt}`.')


def import_graph(text):
    """
    Inverse of ``export_graph(graph, 'json')``.

    :rtype: ProfileGraph
    :raises DataError: Broken JSON or unknown node references.
    """
    try:
        data = json.loads(text)
    except ValueError as error:
        raise DataError(f'Cannot decode graph JSON: {error}') from None

    graph = nx.DiGraph()
    for item in data.get('nodes', []):
        attrs = {key: value for key, value in item.items() if key != 'id'}
        graph.add_node(item['id'], **attrs)
    for edge in data.get('edges', []):
        for node in (edge['src'], edge['dst']):
            if node not in graph:
                raise DataError(f'Edge references unknown node `{node}`.')
        graph.add_edge(edge['src'], edge['dst'], type=edge['type'],
                       weight=edge['weight'])
        if edge['type'] == SIMILAR_TO:
            graph.add_edge(edge['dst'], edge['src'], type=edge['type'],
                           weight=edge['weight'])
    return ProfileGraph(graph)
